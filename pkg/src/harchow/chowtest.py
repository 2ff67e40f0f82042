"""Break-test statistics, reference distributions, and the full test pipeline.

Four statistic forms are reported for every run:

* the raw Wald or t statistic from the sandwich variance;
* a "modified" form rescaled by the break weight ``lam (1 - lam)`` and the
  average squared demeaned basis value (``norm_factor``), which a chi-square
  or normal reference approximates;
* a "df-scaled" form ``(K - p + 1) / (K p) * lam (1 - lam)`` times the Wald
  statistic (just ``sqrt(lam (1 - lam))`` times the t statistic), which is
  asymptotically ``F(p, K - p + 1)`` (``t(K)``) when the basis is
  orthonormal under the break-kernel inner product;
* for the kernel-orthonormal chi-square test, the "break-weighted" form
  ``lam (1 - lam)`` times the Wald statistic against a plain chi-square,
  which is decision-identical to comparing the df-scaled form against the
  correspondingly rescaled chi-square quantile.

Named variants pair a basis family with a statistic and reference. The
simulated ("nonstandard") references come from :mod:`harchow.fixedlimit`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autok, fixedlimit, longrun
from .bases import (
    FOURIER_RAW,
    FOURIER_TRANSFORMED,
    BasisSet,
    feasible_k,
    fourier_matrix,
    gram_transform,
    kernel_matrix,
    norm_factor,
)
from .errors import KTooSmall, NotPositiveDefinite
from .numkit import (
    chi_square,
    dist_cdf,
    dist_quantile,
    fisher_f,
    normal,
    spd_solve,
    student_t,
)
from .regression import BreakHypothesis, RegressionData, full_break_hypothesis, ols_fit


@dataclass(frozen=True)
class TestVariant:
    """A named combination of statistic kind, basis family, and reference."""

    name: str
    statistic: str  # "F" or "t"
    basis_family: str
    reference: str  # "chi-square", "normal", "fisher-f", "student-t", "nonstandard"


VARIANTS: dict[str, TestVariant] = {
    v.name: v
    for v in (
        TestVariant("chisq-fourier", "F", FOURIER_RAW, "chi-square"),
        TestVariant("nonstandard-fourier", "F", FOURIER_RAW, "nonstandard"),
        TestVariant("chisq-transformed", "F", FOURIER_TRANSFORMED, "chi-square"),
        TestVariant("f-transformed", "F", FOURIER_TRANSFORMED, "fisher-f"),
        TestVariant("normal-fourier", "t", FOURIER_RAW, "normal"),
        TestVariant("nonstandard-t-fourier", "t", FOURIER_RAW, "nonstandard"),
        TestVariant("normal-transformed", "t", FOURIER_TRANSFORMED, "normal"),
        TestVariant("t-transformed", "t", FOURIER_TRANSFORMED, "student-t"),
    )
}

DEFAULT_VARIANT = "f-transformed"


@dataclass(frozen=True)
class TestReport:
    """Everything a run produces: statistics, reference, decision, diagnostics."""

    variant: str
    statistic_raw: float
    statistic_modified: float
    statistic_scaled: float
    decision_statistic: float
    decision_statistic_name: str
    reference: str
    p: int
    k: int
    k_requested: int
    lam: float
    alpha: float
    p_value: float
    critical_value: float
    reject: bool
    norm_factor: float
    plugin: autok.PluginModel | None = None

    def to_dict(self) -> dict:
        out = {
            "variant": self.variant,
            "statistic_raw": self.statistic_raw,
            "statistic_modified": self.statistic_modified,
            "statistic_scaled": self.statistic_scaled,
            "decision_statistic": self.decision_statistic,
            "decision_statistic_name": self.decision_statistic_name,
            "reference": self.reference,
            "p": self.p,
            "k": self.k,
            "k_requested": self.k_requested,
            "lambda": self.lam,
            "alpha": self.alpha,
            "p_value": self.p_value,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "norm_factor": self.norm_factor,
        }
        if self.plugin is not None:
            out["plugin"] = self.plugin.to_dict()
        return out


def wald_stat(beta_hat: np.ndarray, r: np.ndarray, v: np.ndarray, t: int) -> float:
    """Wald statistic ``T (R b)' V^{-1} (R b)`` for the contrast variance ``V``."""
    r = np.atleast_2d(np.asarray(r, dtype=float))
    rb = r @ np.asarray(beta_hat, dtype=float)
    return float(t * rb @ spd_solve(v, rb))


def t_stat(beta_hat: np.ndarray, r: np.ndarray, v: np.ndarray, t: int) -> float:
    """t statistic ``sqrt(T) R b / sqrt(V)`` for a single restriction."""
    r = np.atleast_2d(np.asarray(r, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if r.shape[0] != 1 or v.shape != (1, 1):
        raise ValueError("the t statistic requires exactly one restriction")
    if v[0, 0] <= 0.0:
        raise NotPositiveDefinite("contrast variance is not positive")
    rb = float((r @ np.asarray(beta_hat, dtype=float))[0])
    return math.sqrt(t) * rb / math.sqrt(float(v[0, 0]))


def modified_f(f_t: float, nf: float, lam: float) -> float:
    """Chi-square-referenced modification ``lam (1 - lam) nf F``."""
    if nf <= 0.0:
        raise ValueError("norm factor must be positive")
    return lam * (1.0 - lam) * nf * f_t


def modified_t(t_t: float, nf: float, lam: float) -> float:
    """Normal-referenced modification ``sqrt(lam (1 - lam) nf) t``."""
    if nf <= 0.0:
        raise ValueError("norm factor must be positive")
    return math.sqrt(lam * (1.0 - lam) * nf) * t_t


def scaled_f(f_t: float, p: int, k: int, lam: float) -> float:
    """Degrees-of-freedom scaled form ``(K - p + 1)/(K p) lam (1 - lam) F``."""
    if k < p:
        raise KTooSmall(f"need K >= p, got K={k}, p={p}")
    return (k - p + 1) / (k * p) * lam * (1.0 - lam) * f_t


def scaled_t(t_t: float, lam: float) -> float:
    """Degrees-of-freedom scaled form ``sqrt(lam (1 - lam)) t``."""
    return math.sqrt(lam * (1.0 - lam)) * t_t


def _resolve_basis(
    t: int, k_requested: int, lam: float, family: str
) -> tuple[BasisSet, int]:
    """Build the basis, shrinking K to the kernel-feasible count if needed."""
    raw = fourier_matrix(t, k_requested, lam)
    if family == FOURIER_RAW:
        return raw, k_requested
    kern = kernel_matrix(t, lam)
    try:
        return gram_transform(raw, kern), k_requested
    except NotPositiveDefinite:
        usable = feasible_k(raw, kern)
        if usable >= k_requested:
            raise
        trimmed = BasisSet(
            t=t, k=usable, lam=lam, family=FOURIER_RAW, matrix=raw.matrix[:, :usable]
        )
        return gram_transform(trimmed, kern), k_requested


def _abs_distribution(
    dist: fixedlimit.SimulatedDistribution,
) -> fixedlimit.SimulatedDistribution:
    return replace(dist, draws=np.sort(np.abs(dist.draws)))


def run_test(
    data: RegressionData,
    hyp: BreakHypothesis | None = None,
    variant: str = DEFAULT_VARIANT,
    k: int | str = "auto",
    alpha: float = 0.05,
    cv_seed: int = 0,
    cv_replications: int = 10_000,
    cv_grid: int = 1000,
    cache: fixedlimit.CriticalValueCache | None = None,
) -> TestReport:
    """Run one named test variant end to end and report every statistic form.

    Parameters
    ----------
    data : RegressionData
        Response, break regressors, optional stable covariates, break fraction.
    hyp : BreakHypothesis, optional
        Restrictions on the coefficient change; defaults to equality of all
        coefficients. The t variants require a single restriction.
    variant : str
        One of ``VARIANTS``; pairs a basis family with a reference.
    k : int or "auto"
        Basis count, or "auto" for the plug-in MSE rule. For the
        kernel-orthonormal family the count is reduced to the numerically
        feasible maximum when necessary; the report carries both values.
    alpha : float
        Test level for the reported critical value and decision.
    cv_seed, cv_replications, cv_grid : int
        Simulation settings for the nonstandard references only.
    cache : CriticalValueCache, optional
        Cache for simulated references; a process-wide cache is the default.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    spec = VARIANTS[variant]
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {alpha}")
    if hyp is None:
        hyp = full_break_hypothesis(data.m)
    if spec.statistic == "t" and hyp.p != 1:
        raise ValueError("t variants require a single restriction")

    fit = ols_fit(data, hyp)
    r = hyp.contrast
    p = hyp.p
    t = data.t

    plugin = None
    if isinstance(k, str):
        if k != "auto":
            raise ValueError(f"k must be an integer or 'auto', got {k!r}")
        v_series = autok.score_series(r, fit.q_hat, fit.xz, fit.residuals)
        plugin = autok.build_plugin_model(v_series)
        k_requested = autok.mse_optimal_k(plugin, t, p)
    else:
        k_requested = int(k)
        if not (1 <= k_requested <= t - 2):
            raise ValueError(f"need 1 <= K <= T - 2, got K={k_requested}")

    basis, k_requested = _resolve_basis(t, k_requested, data.lam, spec.basis_family)
    k_used = basis.k
    if k_used < p:
        raise KTooSmall(f"only {k_used} usable basis vectors for p={p}")

    omega = longrun.series_lrv(basis, fit.xz, fit.residuals)
    v_mat = longrun.sandwich_variance(r, fit.q_hat, omega)
    nf = norm_factor(basis)
    lam = data.lam
    lam_weight = lam * (1.0 - lam)

    if spec.statistic == "F":
        stat_raw = wald_stat(fit.beta_hat, r, v_mat, t)
        stat_mod = modified_f(stat_raw, nf, lam)
        stat_scaled = scaled_f(stat_raw, p, k_used, lam)
    else:
        stat_raw = t_stat(fit.beta_hat, r, v_mat, t)
        stat_mod = modified_t(stat_raw, nf, lam)
        stat_scaled = scaled_t(stat_raw, lam)

    if spec.reference == "chi-square":
        ref_dist = chi_square(p)
        quantile = dist_quantile(ref_dist, 1.0 - alpha)
        if spec.basis_family == FOURIER_RAW:
            decision_value, decision_name = stat_mod, "modified"
            critical = quantile
        else:
            # break-weighted form against a plain chi-square; decision must
            # match the df-scaled form against the rescaled quantile exactly
            decision_value, decision_name = lam_weight * stat_raw, "break-weighted"
            critical = quantile
            scaled_critical = (k_used - p + 1) / (k_used * p) * quantile
            if (stat_scaled > scaled_critical) != (decision_value > critical):
                raise RuntimeError("equivalent chi-square forms disagree")
        p_value = 1.0 - dist_cdf(ref_dist, decision_value)
        reference = f"chi-square({p})"
    elif spec.reference == "fisher-f":
        ref_dist = fisher_f(p, k_used - p + 1)
        decision_value, decision_name = stat_scaled, "df-scaled"
        critical = dist_quantile(ref_dist, 1.0 - alpha)
        p_value = 1.0 - dist_cdf(ref_dist, decision_value)
        reference = f"F({p}, {k_used - p + 1})"
    elif spec.reference == "normal":
        ref_dist = normal()
        if spec.basis_family == FOURIER_RAW:
            decision_value, decision_name = stat_mod, "modified"
        else:
            decision_value, decision_name = stat_scaled, "break-weighted"
        critical = dist_quantile(ref_dist, 1.0 - alpha / 2.0)
        p_value = 2.0 * (1.0 - dist_cdf(ref_dist, abs(decision_value)))
        reference = "normal"
    elif spec.reference == "student-t":
        ref_dist = student_t(k_used)
        decision_value, decision_name = stat_scaled, "df-scaled"
        critical = dist_quantile(ref_dist, 1.0 - alpha / 2.0)
        p_value = 2.0 * (1.0 - dist_cdf(ref_dist, abs(decision_value)))
        reference = f"t({k_used})"
    else:  # nonstandard
        cache = cache if cache is not None else fixedlimit.shared_cache
        limit_spec = fixedlimit.LimitSpec(
            p=p,
            k=k_used,
            lam=lam,
            family=spec.basis_family,
            grid_n=cv_grid,
            replications=cv_replications,
            seed=cv_seed,
        )
        if spec.statistic == "F":
            dist = cache.get(limit_spec, fixedlimit.F_STAR_INF)
            decision_value, decision_name = stat_mod, "modified"
            p_value = fixedlimit.empirical_p(dist, decision_value)
            critical = fixedlimit.critical_value(dist, alpha)
            reference = f"simulated F_star_inf(n={cv_grid}, reps={cv_replications}, seed={cv_seed})"
        else:
            dist = _abs_distribution(cache.get(limit_spec, fixedlimit.T_STAR_INF))
            decision_value, decision_name = stat_mod, "modified"
            p_value = fixedlimit.empirical_p(dist, abs(decision_value))
            critical = fixedlimit.critical_value(dist, alpha)
            reference = f"simulated t_star_inf(n={cv_grid}, reps={cv_replications}, seed={cv_seed}), two-sided"

    return TestReport(
        variant=variant,
        statistic_raw=stat_raw,
        statistic_modified=stat_mod,
        statistic_scaled=stat_scaled,
        decision_statistic=decision_value,
        decision_statistic_name=decision_name,
        reference=reference,
        p=p,
        k=k_used,
        k_requested=k_requested,
        lam=lam,
        alpha=alpha,
        p_value=p_value,
        critical_value=critical,
        reject=bool(p_value < alpha),
        norm_factor=nf,
        plugin=plugin,
    )
