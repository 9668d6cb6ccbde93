"""Two-soliton dynamics for the three-dimensional Hartree equation.

    i u_t + Lap u - phi_{|u|^2} u = 0,    phi_rho = -1/(4 pi |x|) * rho.
"""
__version__ = "0.1.0"
