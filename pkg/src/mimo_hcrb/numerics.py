"""Dense symmetric-matrix kernel used by the bound computations.

All routines are pure functions over real ``numpy`` arrays. Tolerances are
relative because FIM entries span ~1e-20 to ~1e20 depending on the block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IllConditioned, NotSymmetric, ShapeMismatch

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TolerancePolicy:
    """Numerical tolerances.

    sym_tol
        Relative symmetry tolerance, ``max|A - A^T| <= sym_tol * max|A|``.
    psd_tol
        Eigenvalue floor relative to the largest eigenvalue magnitude.
    inv_cond_max
        Largest accepted condition estimate for an inversion.
    """

    sym_tol: float = 1e-10
    psd_tol: float = 1e-9
    inv_cond_max: float = 1e12

    def __post_init__(self):
        for name in ("sym_tol", "psd_tol", "inv_cond_max"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")


DEFAULT_POLICY = TolerancePolicy()


def _as_square(m, what="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"{what} must be square, got shape {m.shape}")
    return m


def symmetrize(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def is_symmetric(m, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    m = _as_square(m)
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(m - m.T)) <= pol.sym_tol * scale)


def _check_symmetric(m, pol, what="matrix"):
    if not is_symmetric(m, pol):
        asym = np.max(np.abs(m - m.T)) / np.max(np.abs(m))
        raise NotSymmetric(f"{what} is not symmetric (relative asymmetry {asym:.3e})")


def sym_eigvalsh(m) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix.

    2x2 inputs use the closed-form quadratic roots; larger ones go to LAPACK.
    """
    m = symmetrize(_as_square(m))
    n = m.shape[0]
    if n == 0:
        return np.zeros(0)
    if n == 1:
        return m[0].copy()
    if n == 2:
        a, b, d = m[0, 0], m[0, 1], m[1, 1]
        mean = 0.5 * (a + d)
        rad = np.hypot(0.5 * (a - d), b)
        big = mean + np.copysign(rad, mean)
        # small root via the determinant to avoid cancellation
        small = (a * d - b * b) / big if big != 0 else 0.0
        return np.sort(np.array([small, big]))
    return np.linalg.eigvalsh(m)


def _equilibrate(m):
    # Jacobi scaling; FIM blocks mix 1e-12 and 1e12 diagonals that are not
    # a genuine conditioning problem.
    d = np.abs(np.diag(m))
    if np.all(d > 0) and np.all(np.isfinite(d)):
        s = 1.0 / np.sqrt(d)
    else:
        s = np.ones(m.shape[0])
    return m * s[:, None] * s[None, :], s


def condition_estimate(m, equilibrate: bool = True) -> float:
    """2-norm condition number of a symmetric matrix.

    With ``equilibrate`` the estimate is taken after Jacobi scaling, which
    suits blocks whose parameters carry different physical units. Matrices
    over a single unit (e.g. position in metres) should pass ``False``.
    """
    m = symmetrize(_as_square(m))
    if m.shape[0] == 0:
        return 1.0
    scaled = _equilibrate(m)[0] if equilibrate else m
    ev = np.abs(sym_eigvalsh(scaled))
    lo = ev.min()
    if lo == 0.0 or not np.isfinite(lo):
        return np.inf
    return float(ev.max() / lo)


def invert_symmetric(
    m, pol: TolerancePolicy = DEFAULT_POLICY, equilibrate: bool = True
) -> np.ndarray:
    """Inverse of a symmetric (not necessarily definite) matrix.

    Raises ``NotSymmetric`` or ``IllConditioned``; the latter carries the
    condition estimate. The result is symmetrized.
    """
    m = _as_square(m)
    _check_symmetric(m, pol)
    m = symmetrize(m)
    n = m.shape[0]
    if not np.all(np.isfinite(m)):
        raise IllConditioned("matrix has non-finite entries", np.inf)
    cond = condition_estimate(m, equilibrate)
    if not cond <= pol.inv_cond_max:
        raise IllConditioned(
            f"condition estimate {cond:.3e} exceeds {pol.inv_cond_max:.1e}", cond
        )
    if n == 2:
        a, b, d = m[0, 0], m[0, 1], m[1, 1]
        det = a * d - b * b
        x = np.array([[d, -b], [-b, a]]) / det
    else:
        scaled, s = _equilibrate(m)
        try:
            c = scipy.linalg.cho_factor(scaled, lower=True, check_finite=False)
            xs = scipy.linalg.cho_solve(c, np.eye(n), check_finite=False)
        except np.linalg.LinAlgError:
            xs = scipy.linalg.solve(scaled, np.eye(n), assume_a="sym", check_finite=False)
        x = xs * s[:, None] * s[None, :]
    return symmetrize(x)


def inverse_residual(m, x) -> float:
    """``max|m @ x - I|``."""
    m = np.asarray(m, dtype=float)
    return float(np.max(np.abs(m @ x - np.eye(m.shape[0]))))


def schur_complement(block_aa, block_ab, block_bb, pol: TolerancePolicy = DEFAULT_POLICY):
    """``aa - ab @ inv(bb) @ ab.T``, symmetrized."""
    aa = _as_square(block_aa, "block_aa")
    bb = _as_square(block_bb, "block_bb")
    ab = np.asarray(block_ab, dtype=float)
    if ab.ndim != 2 or ab.shape != (aa.shape[0], bb.shape[0]):
        raise ShapeMismatch(
            f"block_ab has shape {ab.shape}, expected {(aa.shape[0], bb.shape[0])}"
        )
    _check_symmetric(bb, pol, "block_bb")
    bb = symmetrize(bb)
    if not np.all(np.isfinite(bb)):
        raise IllConditioned("block_bb has non-finite entries", np.inf)
    cond = condition_estimate(bb)
    if not cond <= pol.inv_cond_max:
        raise IllConditioned(
            f"block_bb condition estimate {cond:.3e} exceeds {pol.inv_cond_max:.1e}", cond
        )
    # Spectral form sum_j w_j w_j^T / lam_j: when ab is (nearly) orthogonal to
    # the weak eigenvectors of bb those terms come out as small^2 / lam rather
    # than as a cancellation between large entries of an explicit inverse.
    scaled, s = _equilibrate(bb)
    lam, vec = np.linalg.eigh(scaled)
    w = (ab * s[None, :]) @ vec
    return symmetrize(aa - (w / lam[None, :]) @ w.T)


def spectral_norm_sym(m) -> float:
    ev = sym_eigvalsh(m)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def psd_order_leq(a, b, pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    """Loewner test ``a <= b``: smallest eigenvalue of ``b - a`` is not
    below ``-psd_tol`` times its largest eigenvalue magnitude.

    A roundoff floor proportional to ``max(|a|, |b|)`` keeps numerically
    equal inputs ordered both ways.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} are not equal square shapes")
    ev = sym_eigvalsh(b - a)
    if ev.size == 0:
        return True
    spread = np.max(np.abs(ev))
    floor = 16 * a.shape[0] * _EPS * max(spectral_norm_sym(a), spectral_norm_sym(b))
    return bool(ev[0] >= -max(pol.psd_tol * spread, floor))


def rel_frobenius(a, b) -> float:
    """``|a - b|_F / max(|a|_F, |b|_F)``; zero when both vanish."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)
