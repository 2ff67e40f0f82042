"""Basis construction for the series long-run variance estimator.

Provides interleaved cosine/sine (Fourier) basis vectors, the break-geometry
covariance kernel matrix and its inner product, the within-regime demeaned
("tilde") transforms of basis columns, and the Gram-Schmidt step that
orthonormalizes a basis with respect to the kernel inner product.

The break splits ``{1, ..., T}`` at ``k* = floor(lambda * T)``: regime one is
``t <= k*`` and regime two is ``t > k*``. Every function here uses that same
index so the kernel matrix, the demeaning, and the regression design can
never disagree about regime membership.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import BreakTooExtreme, NotPositiveDefinite
from .numkit import cholesky, leading_spd_rank, solve_triangular

FOURIER_RAW = "fourier-raw"
FOURIER_TRANSFORMED = "fourier-transformed"

# Pivot threshold for the orthonormalizing transform, stricter than the bare
# factorization tolerance: a pivot at roundoff level would still factor, but
# the resulting column could not satisfy orthonormality to 1e-8 when checked
# against an independently recomputed Gram matrix.
_TRANSFORM_PIVOT_RTOL = 1e-8


def break_index(lam: float, t: int) -> int:
    """Break row ``k* = floor(lambda * T)`` with a guard against FP dust."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"break fraction must lie in (0, 1), got {lam}")
    return int(np.floor(lam * t + 1e-9))


@dataclass(frozen=True)
class BasisSet:
    """A ``T x K`` matrix of basis vectors, column ``j`` sampled at ``t/T``."""

    t: int
    k: int
    lam: float
    family: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"break fraction must lie in (0, 1), got {self.lam}")
        if self.matrix.shape != (self.t, self.k):
            raise ValueError("basis matrix shape does not match (T, K)")
        if not (1 <= self.k <= self.t - 2):
            raise ValueError(f"need 1 <= K <= T - 2, got K={self.k}, T={self.t}")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("basis entries must be finite")


@dataclass(frozen=True)
class KernelMatrix:
    """Discrete covariance kernel of the break geometry, a ``T x T`` matrix."""

    t: int
    lam: float
    matrix: np.ndarray

    @property
    def break_row(self) -> int:
        return break_index(self.lam, self.t)


def fourier_matrix(t: int, k: int, lam: float) -> BasisSet:
    """Interleaved Fourier basis vectors evaluated at ``r = 1/T, ..., T/T``.

    Column order is ``sqrt(2) cos(2 pi r), sqrt(2) sin(2 pi r),
    sqrt(2) cos(4 pi r), sqrt(2) sin(4 pi r), ...``; an odd ``k`` simply
    truncates the interleaved sequence.
    """
    if t < 4:
        raise ValueError(f"need T >= 4, got {t}")
    if not (1 <= k <= t - 2):
        raise ValueError(f"need 1 <= K <= T - 2, got K={k}, T={t}")
    r = np.arange(1, t + 1) / t
    cols = np.empty((t, k))
    for j in range(k):
        freq = j // 2 + 1
        angle = 2.0 * np.pi * freq * r
        cols[:, j] = np.sqrt(2.0) * (np.cos(angle) if j % 2 == 0 else np.sin(angle))
    return BasisSet(t=t, k=k, lam=lam, family=FOURIER_RAW, matrix=cols)


def kernel_matrix(t: int, lam: float) -> KernelMatrix:
    """Kernel matrix with blocks ``[T 1{i=j} - 1/w] / w^2`` per regime.

    ``w`` is the regime weight (``lambda`` in the first block, ``1 - lambda``
    in the second); entries pairing the two regimes are zero.
    """
    k_star = _checked_break_row(lam, t)
    c = np.zeros((t, t))
    for start, stop, weight in ((0, k_star, lam), (k_star, t, 1.0 - lam)):
        block = slice(start, stop)
        c[block, block] = -1.0 / weight**3
        idx = np.arange(start, stop)
        c[idx, idx] += t / weight**2
    return KernelMatrix(t=t, lam=lam, matrix=c)


def kernel_inner(a: np.ndarray, b: np.ndarray, kern: KernelMatrix) -> float:
    """Inner product ``a' C_T b / T^2`` induced by the break kernel."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != (kern.t,) or b.shape != (kern.t,):
        raise ValueError("vector lengths must match the kernel dimension")
    return float(a @ kern.matrix @ b) / kern.t**2


def _checked_break_row(lam: float, t: int) -> int:
    k_star = break_index(lam, t)
    if k_star < 2 or t - k_star < 2:
        raise BreakTooExtreme(
            f"each regime needs at least 2 points, break at {k_star} of {t}"
        )
    return k_star


def phi_tilde_grid(phi_col: np.ndarray, lam: float, t: int) -> np.ndarray:
    """Within-regime demeaned and regime-weighted version of a basis column.

    For ``t <= k*`` the entry is ``(phi - mean over regime one) / lambda``;
    after the break it is ``-(phi - mean over regime two) / (1 - lambda)``.
    Both regime portions of the output sum to zero exactly.
    """
    col = np.asarray(phi_col, dtype=float)
    if col.shape != (t,):
        raise ValueError(f"column length {col.shape} does not match T={t}")
    k_star = _checked_break_row(lam, t)
    out = np.empty(t)
    out[:k_star] = (col[:k_star] - col[:k_star].mean()) / lam
    out[k_star:] = -(col[k_star:] - col[k_star:].mean()) / (1.0 - lam)
    return out


def phi_tilde_matrix(matrix: np.ndarray, lam: float, t: int) -> np.ndarray:
    """Column-wise :func:`phi_tilde_grid` for a ``T x K`` basis matrix."""
    m = np.asarray(matrix, dtype=float)
    k_star = _checked_break_row(lam, t)
    out = np.empty_like(m)
    out[:k_star] = (m[:k_star] - m[:k_star].mean(axis=0)) / lam
    out[k_star:] = -(m[k_star:] - m[k_star:].mean(axis=0)) / (1.0 - lam)
    return out


def column_norm_factors(basis: BasisSet) -> np.ndarray:
    """Per-column averages ``(1/T) sum_i tilde(phi)_j(i/T)^2``."""
    tilde = phi_tilde_matrix(basis.matrix, basis.lam, basis.t)
    return (tilde**2).mean(axis=0)


def norm_factor(basis: BasisSet) -> float:
    """Average squared demeaned basis value, ``(1/(KT)) sum_j sum_i [...]^2``."""
    return float(column_norm_factors(basis).mean())


def gram_matrix(basis: BasisSet, kern: KernelMatrix) -> np.ndarray:
    """Kernel Gram matrix ``Phi' C_T Phi / T^2`` of the basis columns."""
    if basis.t != kern.t:
        raise ValueError("basis and kernel dimensions differ")
    g = basis.matrix.T @ kern.matrix @ basis.matrix / kern.t**2
    return (g + g.T) / 2.0


def gram_transform(raw: BasisSet, kern: KernelMatrix) -> BasisSet:
    """Gram-Schmidt step: orthonormalize columns under the kernel inner product.

    Factors the Gram matrix as ``U' U`` (upper-triangular Cholesky, positive
    diagonal) and returns ``Phi U^{-1}``, whose Gram matrix is the identity.
    Column ``j`` of the result is a combination of raw columns ``1..j`` only.

    Raises
    ------
    NotPositiveDefinite
        If the Gram matrix is rank deficient, e.g. a raw column is constant
        within both regimes or ``K`` exceeds the kernel rank available.
    """
    g = gram_matrix(raw, kern)
    u = cholesky(g)
    floor = _TRANSFORM_PIVOT_RTOL * float(np.max(np.diagonal(g)))
    if float(np.min(np.diagonal(u)) ** 2) <= floor:
        raise NotPositiveDefinite(
            "Gram matrix is too close to singular for a reliable transform"
        )
    star = solve_triangular(u.T, raw.matrix.T, lower=True).T
    return BasisSet(
        t=raw.t, k=raw.k, lam=kern.lam, family=FOURIER_TRANSFORMED, matrix=star
    )


def feasible_k(raw: BasisSet, kern: KernelMatrix) -> int:
    """Largest leading column count whose kernel Gram matrix is numerically PD.

    The nominal cap ``K <= T - 2`` only bounds the kernel rank; for some
    ``(T, lambda)`` pairs a combination of the last Fourier columns falls in
    the kernel null space, so the usable count can be smaller. This runs the
    Cholesky pivots of the full Gram matrix and reports how many succeed.
    """
    rank = leading_spd_rank(gram_matrix(raw, kern), rtol=_TRANSFORM_PIVOT_RTOL)
    if rank == 0:
        raise NotPositiveDefinite("no basis column survives the kernel inner product")
    return rank


def dump_debug(raw: BasisSet, kern: KernelMatrix, outdir: str) -> dict[str, str]:
    """Write Phi, C_T, U_T and Phi* as CSV files for external verification."""
    os.makedirs(outdir, exist_ok=True)
    u = cholesky(gram_matrix(raw, kern))
    star = gram_transform(raw, kern)
    paths = {}
    for name, array in (
        ("phi", raw.matrix),
        ("c_matrix", kern.matrix),
        ("u_factor", u),
        ("phi_star", star.matrix),
    ):
        path = os.path.join(outdir, f"{name}.csv")
        np.savetxt(path, array, delimiter=",")
        paths[name] = path
    return paths
