"""Monte Carlo engine: simulate the study DGPs and measure size and power.

The data-generating process has ``X_t = (1, q_t)`` with ``q_t`` an AR(1) and
the error an independent AR(1) or ARMA(1,1) sharing the same AR parameter.
Under the alternative the second-regime coefficients shift by ``delta`` on
every component. Each replication draws from its own random substream derived
from ``(master seed, cell id, replication index)``, so results are byte-level
reproducible regardless of the worker count, and power experiments reuse the
null innovations across the whole break-size grid (common random numbers).

Rejection counts are aggregated as integers in fixed block order; CSV output
uses fixed-precision formatting so a table is reproducible byte for byte.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import autok, chowtest, fixedlimit, longrun
from .bases import (
    FOURIER_RAW,
    FOURIER_TRANSFORMED,
    BasisSet,
    break_index,
    column_norm_factors,
    feasible_k,
    fourier_matrix,
    gram_transform,
    kernel_matrix,
)
from .errors import HarchowError
from .numkit import RngStream, chi_square, dist_cdf, dist_quantile, fisher_f
from .regression import RegressionData, full_break_hypothesis, ols_fit

F_VARIANTS = (
    "chisq-fourier",
    "nonstandard-fourier",
    "chisq-transformed",
    "f-transformed",
)

TABLE1_GRID = (
    (0.0, 0.0),
    (0.3, 0.0),
    (0.6, 0.0),
    (0.9, 0.0),
    (-0.6, 0.0),
    (-0.3, 0.0),
    (0.6, 0.6),
    (0.9, 0.9),
)

_STREAM_CELL_STRIDE = 2**32


@dataclass(frozen=True)
class DgpSpec:
    """One simulation design: sample size, persistence, break size."""

    t: int
    rho: float
    psi: float = 0.0
    delta: float = 0.0
    lam: float = 0.4
    burn_in: int = 500

    def __post_init__(self) -> None:
        if abs(self.rho) >= 1.0:
            raise ValueError(f"need |rho| < 1, got {self.rho}")
        if self.t < 50:
            raise ValueError(f"need T >= 50, got {self.t}")
        if self.burn_in < 0:
            raise ValueError("burn-in must be nonnegative")


@dataclass(frozen=True)
class ExperimentResult:
    """Rejection frequency of one variant in one design cell."""

    t: int
    rho: float
    psi: float
    delta: float
    variant: str
    k_policy: str
    reps: int
    rejection: float
    mc_se: float
    ave_k: float
    failures: int


def _ar1_filter(eps: np.ndarray, rho: float) -> np.ndarray:
    """Sequential AR(1) recursion, evaluated block-wise for speed."""
    if rho == 0.0:
        return eps.copy()
    n = len(eps)
    width = 64
    powers = rho ** np.arange(width + 1)
    offsets = np.subtract.outer(np.arange(width), np.arange(width))
    toeplitz = np.tril(powers[np.clip(offsets, 0, width)])
    out = np.empty_like(eps)
    prev = 0.0
    for start in range(0, n, width):
        block = eps[start : start + width]
        nb = len(block)
        vals = toeplitz[:nb, :nb] @ block + prev * powers[1 : nb + 1]
        out[start : start + nb] = vals
        prev = vals[-1]
    return out


def simulate_dgp(spec: DgpSpec, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(Y, X)`` from the design, discarding the burn-in segment.

    The regressor and error innovations come from disjoint segments of the
    replication's stream, so the two processes are independent.
    """
    n = spec.t + spec.burn_in
    z = rng.normals(2 * n)
    eps_q, eps_u = z[:n], z[n:]
    q = _ar1_filter(eps_q, spec.rho)
    shocks = eps_u.copy()
    if spec.psi != 0.0:
        shocks[1:] += spec.psi * eps_u[:-1]
    u = _ar1_filter(shocks, spec.rho)
    q = q[spec.burn_in :]
    u = u[spec.burn_in :]
    x = np.column_stack([np.ones(spec.t), q])
    y = u.copy()
    if spec.delta != 0.0:
        k_star = break_index(spec.lam, spec.t)
        y[k_star:] += spec.delta * x[k_star:].sum(axis=1)
    return y, x


@dataclass(frozen=True)
class _CellBases:
    """Per-(T, lambda) precomputation shared by every replication."""

    raw: BasisSet
    transformed: BasisSet
    k_feasible: int
    colnorm_raw: np.ndarray
    colnorm_trans: np.ndarray

    def norm_factor(self, family: str, k: int) -> float:
        cols = self.colnorm_raw if family == FOURIER_RAW else self.colnorm_trans
        return float(cols[:k].mean())


def _prepare_bases(t: int, lam: float) -> _CellBases:
    raw = fourier_matrix(t, t - 2, lam)
    kern = kernel_matrix(t, lam)
    k_feasible = feasible_k(raw, kern)
    trimmed = BasisSet(
        t=t, k=k_feasible, lam=lam, family=FOURIER_RAW,
        matrix=raw.matrix[:, :k_feasible],
    )
    transformed = gram_transform(trimmed, kern)
    return _CellBases(
        raw=raw,
        transformed=transformed,
        k_feasible=k_feasible,
        colnorm_raw=column_norm_factors(raw),
        colnorm_trans=column_norm_factors(transformed),
    )


def _rep_stream(master_seed: int, cell_id: int, rep: int) -> RngStream:
    return RngStream(master_seed, stream=cell_id * _STREAM_CELL_STRIDE + rep)


def _run_block(
    spec: DgpSpec,
    bases: _CellBases,
    master_seed: int,
    cell_id: int,
    rep_range: tuple[int, int],
    k_policy,
    deltas: tuple[float, ...],
) -> dict:
    """Statistics for a contiguous block of replications.

    Returns arrays of shape (reps, n_deltas, n_k): the Wald statistic under
    each basis family, plus the basis counts used and a failure mask.
    """
    hyp = full_break_hypothesis(2)
    r = hyp.contrast
    auto = isinstance(k_policy, str)
    k_list = [0] if auto else list(k_policy)
    start, stop = rep_range
    n_rep = stop - start
    shape = (n_rep, len(deltas), len(k_list))
    f_raw = np.full(shape, np.nan)
    f_trans = np.full(shape, np.nan)
    k_raw_used = np.zeros(shape, dtype=np.int64)
    k_trans_used = np.zeros(shape, dtype=np.int64)
    failed = np.zeros(shape[:2], dtype=bool)
    t = spec.t
    k_star = break_index(spec.lam, t)
    sqrt_t = np.sqrt(t)

    for i, rep in enumerate(range(start, stop)):
        rng = _rep_stream(master_seed, cell_id, rep)
        y0, x = simulate_dgp(replace(spec, delta=0.0), rng)
        shift = np.zeros(t)
        shift[k_star:] = x[k_star:].sum(axis=1)
        for d_idx, delta in enumerate(deltas):
            try:
                data = RegressionData(y0 + delta * shift, x, None, spec.lam)
                fit = ols_fit(data, hyp)
                scores = fit.xz * fit.residuals[:, None]
                g_raw = bases.raw.matrix.T @ scores / sqrt_t
                g_trans = bases.transformed.matrix.T @ scores / sqrt_t
                if auto:
                    v_series = autok.score_series(
                        r, fit.q_hat, fit.xz, fit.residuals
                    )
                    model = autok.build_plugin_model(v_series)
                    k_hat = autok.mse_optimal_k(model, t, hyp.p)
                    k_pairs = [(k_hat, min(k_hat, bases.k_feasible))]
                else:
                    k_pairs = [(k, min(k, bases.k_feasible)) for k in k_list]
                for k_idx, (k_r, k_t) in enumerate(k_pairs):
                    for g, k_used, out, used in (
                        (g_raw, k_r, f_raw, k_raw_used),
                        (g_trans, k_t, f_trans, k_trans_used),
                    ):
                        omega = g[:k_used].T @ g[:k_used] / k_used
                        v_mat = longrun.sandwich_variance(
                            r, fit.q_hat, (omega + omega.T) / 2.0
                        )
                        out[i, d_idx, k_idx] = chowtest.wald_stat(
                            fit.beta_hat, r, v_mat, t
                        )
                        used[i, d_idx, k_idx] = k_used
            except HarchowError:
                failed[i, d_idx] = True
    return {
        "f_raw": f_raw,
        "f_trans": f_trans,
        "k_raw": k_raw_used,
        "k_trans": k_trans_used,
        "failed": failed,
    }


def _block_worker(payload: dict) -> dict:
    return _run_block(**payload)


def _run_cell(
    spec: DgpSpec,
    bases: _CellBases,
    master_seed: int,
    cell_id: int,
    reps: int,
    k_policy,
    deltas: tuple[float, ...],
    workers: int = 1,
) -> dict:
    """All replication statistics for one cell, merged in block order."""
    block = max(64, reps // (4 * max(workers, 1)))
    ranges = [(s, min(s + block, reps)) for s in range(0, reps, block)]
    payloads = [
        {
            "spec": spec,
            "bases": bases,
            "master_seed": master_seed,
            "cell_id": cell_id,
            "rep_range": rng,
            "k_policy": k_policy,
            "deltas": deltas,
        }
        for rng in ranges
    ]
    if workers <= 1 or len(ranges) == 1:
        parts = [_block_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_worker, payloads))
    return {
        key: np.concatenate([part[key] for part in parts], axis=0)
        for key in parts[0]
    }


def _variant_decisions(
    variant: str,
    stats: dict,
    lam: float,
    alpha: float,
    p: int,
    cv_cache: fixedlimit.CriticalValueCache | None,
    cv_seed: int,
    cv_replications: int,
    cv_grid: int,
    d_idx: int = 0,
    k_idx: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """(reject, k_used) per replication for one variant at one grid point."""
    spec_v = chowtest.VARIANTS[variant]
    lam_weight = lam * (1.0 - lam)
    if spec_v.basis_family == FOURIER_RAW:
        f_stat = stats["f_raw"][:, d_idx, k_idx]
        k_used = stats["k_raw"][:, d_idx, k_idx]
    else:
        f_stat = stats["f_trans"][:, d_idx, k_idx]
        k_used = stats["k_trans"][:, d_idx, k_idx]
    norm = stats["bases"].norm_factor
    ok = ~stats["failed"][:, d_idx]
    reject = np.zeros(len(f_stat), dtype=bool)
    if spec_v.reference == "chi-square":
        quantile = dist_quantile(chi_square(p), 1.0 - alpha)
        for i in np.nonzero(ok)[0]:
            if spec_v.basis_family == FOURIER_RAW:
                value = lam_weight * norm(FOURIER_RAW, int(k_used[i])) * f_stat[i]
            else:
                value = lam_weight * f_stat[i]
            reject[i] = value > quantile
    elif spec_v.reference == "fisher-f":
        quantiles = {}
        for i in np.nonzero(ok)[0]:
            k = int(k_used[i])
            if k not in quantiles:
                quantiles[k] = dist_quantile(fisher_f(p, k - p + 1), 1.0 - alpha)
            value = (k - p + 1) / (k * p) * lam_weight * f_stat[i]
            reject[i] = value > quantiles[k]
    else:  # nonstandard simulated reference
        cache = cv_cache if cv_cache is not None else fixedlimit.shared_cache
        dists = {}
        for i in np.nonzero(ok)[0]:
            k = int(k_used[i])
            if k not in dists:
                dists[k] = cache.get(
                    fixedlimit.LimitSpec(
                        p=p, k=k, lam=lam, family=spec_v.basis_family,
                        grid_n=cv_grid, replications=cv_replications, seed=cv_seed,
                    ),
                    fixedlimit.F_STAR_INF,
                )
            value = lam_weight * norm(spec_v.basis_family, k) * f_stat[i]
            reject[i] = fixedlimit.empirical_p(dists[k], value) < alpha
    return reject, k_used


def size_experiment(
    specs: list[DgpSpec],
    variants: tuple[str, ...] = F_VARIANTS,
    k_policy: int | str = "auto",
    reps: int = 2000,
    master_seed: int = 0,
    alpha: float = 0.05,
    workers: int = 1,
    cv_cache: fixedlimit.CriticalValueCache | None = None,
    cv_seed: int = 0,
    cv_replications: int = 10_000,
    cv_grid: int = 1000,
) -> list[ExperimentResult]:
    """Null rejection probability per (cell, variant) at one K policy."""
    if reps < 500:
        raise ValueError("need at least 500 replications")
    if not specs:
        raise ValueError("no cells requested")
    for v in variants:
        if chowtest.VARIANTS[v].statistic != "F":
            raise ValueError(f"size experiments run F variants, got {v!r}")
    results = []
    policy = "auto" if isinstance(k_policy, str) else [int(k_policy)]
    for cell_id, spec in enumerate(specs):
        bases = _prepare_bases(spec.t, spec.lam)
        stats = _run_cell(
            spec, bases, master_seed, cell_id, reps, policy, (spec.delta,), workers
        )
        stats["bases"] = bases
        ok = ~stats["failed"][:, 0]
        n_ok = int(ok.sum())
        for variant in variants:
            reject, k_used = _variant_decisions(
                variant, stats, spec.lam, alpha, 2, cv_cache,
                cv_seed, cv_replications, cv_grid,
            )
            rate = float(reject[ok].sum() / n_ok) if n_ok else float("nan")
            results.append(
                ExperimentResult(
                    t=spec.t,
                    rho=spec.rho,
                    psi=spec.psi,
                    delta=spec.delta,
                    variant=variant,
                    k_policy="auto" if isinstance(k_policy, str) else str(k_policy),
                    reps=reps,
                    rejection=rate,
                    mc_se=float(np.sqrt(rate * (1.0 - rate) / n_ok)) if n_ok else 0.0,
                    ave_k=float(k_used[ok].mean()) if n_ok else 0.0,
                    failures=reps - n_ok,
                )
            )
    return results


def k_grid_experiment(
    spec: DgpSpec,
    k_values: tuple[int, ...],
    variants: tuple[str, ...] = ("chisq-fourier", "f-transformed"),
    reps: int = 2000,
    master_seed: int = 0,
    alpha: float = 0.05,
    workers: int = 1,
    cv_cache: fixedlimit.CriticalValueCache | None = None,
    cv_seed: int = 0,
    cv_replications: int = 10_000,
    cv_grid: int = 1000,
) -> list[ExperimentResult]:
    """Rejection frequency across a fixed grid of K values (figure layout)."""
    if not k_values:
        raise ValueError("no K values requested")
    bases = _prepare_bases(spec.t, spec.lam)
    stats = _run_cell(
        spec, bases, master_seed, 0, reps, list(k_values), (spec.delta,), workers
    )
    stats["bases"] = bases
    ok = ~stats["failed"][:, 0]
    n_ok = int(ok.sum())
    results = []
    for k_idx, k in enumerate(k_values):
        for variant in variants:
            reject, k_used = _variant_decisions(
                variant, stats, spec.lam, alpha, 2, cv_cache,
                cv_seed, cv_replications, cv_grid, k_idx=k_idx,
            )
            rate = float(reject[ok].sum() / n_ok) if n_ok else float("nan")
            results.append(
                ExperimentResult(
                    t=spec.t,
                    rho=spec.rho,
                    psi=spec.psi,
                    delta=spec.delta,
                    variant=variant,
                    k_policy=str(k),
                    reps=reps,
                    rejection=rate,
                    mc_se=float(np.sqrt(rate * (1.0 - rate) / n_ok)) if n_ok else 0.0,
                    ave_k=float(k_used[ok].mean()) if n_ok else 0.0,
                    failures=reps - n_ok,
                )
            )
    return results


def power_experiment(
    spec: DgpSpec,
    deltas: tuple[float, ...],
    k_policy: int | str = "auto",
    reps: int = 2000,
    master_seed: int = 0,
    alpha: float = 0.05,
    workers: int = 1,
) -> dict:
    """Size-adjusted power for both basis families over a break-size grid.

    The critical value for each family is the empirical ``1 - alpha``
    quantile of its null statistic (``delta = 0``) under the same
    replication streams; with common random numbers the two tests in a pair
    share decisions replication by replication, so one curve per family
    suffices.
    """
    grid = tuple(deltas)
    if 0.0 not in grid:
        grid = (0.0,) + grid
    bases = _prepare_bases(spec.t, spec.lam)
    policy = "auto" if isinstance(k_policy, str) else [int(k_policy)]
    stats = _run_cell(spec, bases, master_seed, 0, reps, policy, grid, workers)
    ok = ~stats["failed"].any(axis=1)
    n_ok = int(ok.sum())
    p = 2  # full-equality contrast of the (intercept, regressor) design
    lam_weight = spec.lam * (1.0 - spec.lam)
    curves: dict[str, list[float]] = {}
    for family, key in ((FOURIER_RAW, "f_raw"), (FOURIER_TRANSFORMED, "f_trans")):
        stat = stats[key][:, :, 0]
        k_used = stats["k_raw" if family == FOURIER_RAW else "k_trans"][:, :, 0]
        scaled = np.empty_like(stat)
        for d in range(stat.shape[1]):
            for i in range(stat.shape[0]):
                if not ok[i]:
                    scaled[i, d] = np.nan
                    continue
                k = int(k_used[i, d])
                if family == FOURIER_RAW:
                    scaled[i, d] = (
                        lam_weight * bases.norm_factor(family, k) * stat[i, d]
                    )
                else:
                    scaled[i, d] = (
                        (k - p + 1) / (k * p) * lam_weight * stat[i, d]
                    )
        null_stats = np.sort(scaled[ok, 0])
        idx = int(np.ceil(n_ok * (1.0 - alpha))) - 1
        cv = null_stats[min(max(idx, 0), n_ok - 1)]
        curves[family] = [float((scaled[ok, d] > cv).mean()) for d in range(len(grid))]
    return {
        "deltas": grid,
        "reps": reps,
        "n_ok": n_ok,
        "power": curves,
        "alpha": alpha,
    }


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def size_table_csv(results: list[ExperimentResult]) -> str:
    lines = ["T,rho,psi,delta,variant,k_policy,reps,rejection,mc_se,ave_k,failures"]
    for r in results:
        lines.append(
            ",".join(
                [
                    str(r.t),
                    _fmt(r.rho),
                    _fmt(r.psi),
                    _fmt(r.delta),
                    r.variant,
                    r.k_policy,
                    str(r.reps),
                    _fmt(r.rejection),
                    _fmt(r.mc_se),
                    _fmt(r.ave_k),
                    str(r.failures),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def power_table_csv(power: dict, spec: DgpSpec) -> str:
    lines = ["T,rho,psi,delta,family,power"]
    for family, curve in power["power"].items():
        for delta, value in zip(power["deltas"], curve):
            lines.append(
                ",".join(
                    [
                        str(spec.t),
                        _fmt(spec.rho),
                        _fmt(spec.psi),
                        _fmt(delta),
                        family,
                        _fmt(value),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def default_workers() -> int:
    return min(8, os.cpu_count() or 1)
