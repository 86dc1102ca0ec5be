"""simlab: spectral-Galerkin simulator for dissipative stochastic PDEs
dX = [AX + F(X)]dt + R dW, with a Monte Carlo harness that checks
functional inequalities (log-Sobolev, Poincare, hypercontractivity,
Harnack, concentration, Fernique, supercontractivity, ultraboundedness)
against exact oracles where they exist.
"""

__version__ = "0.1.0"
