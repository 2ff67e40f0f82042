"""Series long-run variance estimator and the sandwich variance of contrasts.

The estimator averages K outer products of basis-weighted partial sums of the
score series (regressor rows times residuals). Scores are accumulated in one
pass as ``G = Phi' S / sqrt(T)`` with ``S`` the T x 2m score matrix, giving
``Omega = G' G / K`` without any T x T intermediate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bases import BasisSet
from .numkit import spd_solve


@dataclass(frozen=True)
class LongRunEstimate:
    """Long-run variance of the scores and the implied contrast variance."""

    omega_hat: np.ndarray
    sandwich: np.ndarray
    k: int
    basis_family: str


def series_outer(basis: BasisSet, series: np.ndarray) -> np.ndarray:
    """Average outer product of basis-weighted partial sums of ``series``.

    ``series`` is T x d; the result is ``(1/K) sum_j [T^{-1/2} sum_t
    phi_{j,t} series_t]`` squared as an outer product, a d x d matrix.
    """
    s = np.asarray(series, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] != basis.t:
        raise ValueError("series rows must match the basis sample size")
    g = basis.matrix.T @ s / np.sqrt(basis.t)
    omega = g.T @ g / basis.k
    return (omega + omega.T) / 2.0


def series_lrv(basis: BasisSet, xz: np.ndarray, u_hat: np.ndarray) -> np.ndarray:
    """Long-run variance estimate of the scores ``xz_t' u_t``."""
    xz = np.asarray(xz, dtype=float)
    u = np.asarray(u_hat, dtype=float)
    if xz.shape[0] != u.shape[0]:
        raise ValueError("xz and u_hat must have the same number of rows")
    return series_outer(basis, xz * u[:, None])


def sandwich_variance(
    r: np.ndarray, q_hat: np.ndarray, omega_hat: np.ndarray
) -> np.ndarray:
    """Estimated variance ``R Q^{-1} Omega Q^{-1} R'`` of the contrast."""
    r = np.atleast_2d(np.asarray(r, dtype=float))
    w = spd_solve(q_hat, r.T)
    v = w.T @ omega_hat @ w
    return (v + v.T) / 2.0


def estimate(basis: BasisSet, xz, u_hat, r, q_hat) -> LongRunEstimate:
    """Bundle :func:`series_lrv` and :func:`sandwich_variance`."""
    omega = series_lrv(basis, xz, u_hat)
    return LongRunEstimate(
        omega_hat=omega,
        sandwich=sandwich_variance(r, q_hat, omega),
        k=basis.k,
        basis_family=basis.family,
    )
