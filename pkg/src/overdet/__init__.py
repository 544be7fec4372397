"""Numerical verification toolkit for overdetermined k-Hessian problems.

The equation ``sigma_k(D^2u - [H^n] u I) = C(n,k)`` with ``u = 0`` and
``|Du| = c0`` on the boundary is studied in Euclidean space and in
hyperbolic space (Poincare-ball chart). Modules:

* :mod:`overdet.symfun`     -- elementary symmetric functions and their derivatives
* :mod:`overdet.geometry`   -- covariant calculus in R^n / H^n
* :mod:`overdet.quadrature` -- star-shaped domains and tensor-product meshes
* :mod:`overdet.radial`     -- exact and shot radial solutions, P-functions
* :mod:`overdet.identities` -- integral identities evaluated on meshes
* :mod:`overdet.cli`        -- batch runner
"""

__version__ = "0.1.0"
