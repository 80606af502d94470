"""Symmetric-matrix helpers shared by the localization machinery.

All covariance-like matrices in this package go through the routines here so
that symmetrization, eigenvalue flooring and square roots are applied
consistently.
"""

import numpy as np

# Relative eigenvalue floor: a covariance whose smallest eigenvalue falls
# below FLOOR_REL * largest is treated as numerically degenerate.
FLOOR_REL = 1e-12


class CovarianceFloorBreach(RuntimeError):
    """Covariance matrix is not numerically positive definite."""


def symmetrize(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix with a deterministic sign
    convention: the first nonzero entry of each eigenvector is positive.
    Eigenvalues ascending (numpy order)."""
    vals, vecs = np.linalg.eigh(symmetrize(m))
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            vecs[:, j] = -col
    return vals, vecs


def check_floor(vals, floor_rel=FLOOR_REL):
    top = float(np.max(vals))
    if top <= 0 or float(np.min(vals)) < floor_rel * top:
        raise CovarianceFloorBreach(
            f"eigenvalue range [{np.min(vals):.3e}, {top:.3e}] below relative floor {floor_rel:g}"
        )


def sym_power(m, p, floor_rel=FLOOR_REL):
    """m**p for symmetric positive definite m via eigendecomposition.

    Eigenvalues are clamped at the relative floor before negative powers,
    raising CovarianceFloorBreach when the matrix is numerically singular.
    """
    vals, vecs = sym_eig(m)
    if p < 0 or (p != int(p)):
        check_floor(vals, floor_rel)
        vals = np.maximum(vals, floor_rel * np.max(vals))
    return (vecs * vals**p) @ vecs.T


def sym_sqrt(m):
    return sym_power(m, 0.5)


def sym_inv_sqrt(m):
    return sym_power(m, -0.5)


def sym_inv(m):
    return sym_power(m, -1.0)


def opnorm(m):
    """Largest eigenvalue of a symmetric positive semi-definite matrix."""
    return float(np.max(np.linalg.eigvalsh(symmetrize(m))))


def ridge_amount(a):
    """Ridge a caller may add to rescue a floor breach: 1e-10 * Tr(A)/n."""
    a = np.asarray(a, dtype=float)
    return 1e-10 * float(np.trace(a)) / a.shape[0]
