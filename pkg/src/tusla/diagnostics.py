"""Stability constants, dissipativity checks, and sampling-law diagnostics.

Three groups:

* ``theory_constants`` materializes every constant in the convergence
  analysis (dissipativity pair (A, B), contraction/growth constants, the
  admissible step ceiling) from an oracle's declared metadata. The B constant
  is astronomically large for high-degree problems and can exceed float64
  range; log10 companions are always finite.
* ``dissipativity_check`` evaluates <theta, h(theta)> - (A |theta|^2 - B) on
  a grid and reports violations, with optional per-point tolerance for
  Monte-Carlo drift estimates.
* 1-D law tooling: an inverse-CDF Gibbs sampler for densities proportional
  to exp(-beta u), order-statistics Wasserstein distances, and a vectorized
  replica integrator for terminal laws of the tamed Langevin update.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .gradient_oracle import (
    GradientOracle,
    OracleMeta,
    RegularizationParams,
    lambda_max,
    overflow_safe_drift_batch,
)

__all__ = [
    "TheoryConstants",
    "theory_constants",
    "estimate_k_mean",
    "estimate_x_rho_mean",
    "DissipativityReport",
    "dissipativity_check",
    "empirical_moment",
    "EmpiricalDistribution1D",
    "gibbs_sampler_1d",
    "wasserstein_p_1d",
    "gaussian_quantiles",
    "wasserstein_to_gaussian",
    "ks_vs_gaussian",
    "tusla_terminal_law",
]


@dataclass(frozen=True)
class TheoryConstants:
    """Constants of the moment/contraction analysis for one (oracle, reg) pair.

    A, B: dissipativity envelope <theta, h(theta)> >= A |theta|^2 - B.
    a, R: local contraction rate and the radius where it kicks in.
    L2: data-averaged Lipschitz constant L1 * E[(1 + |X|)^rho].
    L, l: drift Lipschitz constant L1 + 8 r eta and envelope power 2r + 1.
    lambda_max: admissible step ceiling for moment order p.
    K_mean: E[K(X)] for the oracle's growth envelope.
    B (and occasionally a) overflow float64 for high-degree problems; the
    log10_* companions are exact in log space and always finite.
    """

    A: float
    B: float
    a: float
    R: float
    L2: float
    L: float
    l: float
    lambda_max: float
    K_mean: float
    log10_B: float
    log10_a: float


def _pow10(log10_value: float) -> float:
    try:
        return 10.0 ** log10_value
    except OverflowError:
        return math.inf


def theory_constants(
    meta: OracleMeta,
    reg: RegularizationParams,
    k_mean: float,
    p: int,
    x_rho_mean: float = 1.0,
) -> TheoryConstants:
    """Assemble TheoryConstants from declared metadata and data moments.

    k_mean: E[K(X)] (use estimate_k_mean or a closed form).
    x_rho_mean: E[(1 + |X|)^rho] (enters L2).
    Requires eta > 0: without the superlinear penalty there is no
    dissipativity envelope to certify.
    """
    if reg.eta <= 0.0:
        raise ValueError(
            "eta = 0: no penalty-driven envelope; dissipativity must hold natively"
        )
    reg.require_order(meta.q)
    if not (math.isfinite(k_mean) and k_mean > 0.0):
        raise ValueError(f"k_mean must be positive and finite, got {k_mean}")
    if not (math.isfinite(x_rho_mean) and x_rho_mean >= 1.0):
        raise ValueError(f"x_rho_mean must be >= 1, got {x_rho_mean}")

    q, eta, r = meta.q, reg.eta, reg.r
    A = k_mean
    log10_B = (q + 2.0) * math.log10(3.0 * A) - (q + 1.0) * math.log10(eta)
    L2 = meta.L1 * x_rho_mean
    # R: radius beyond which the penalty dominates the raw gradient field
    r1 = (2.0 ** (3.0 * (q - 1.0) + 1.0) * L2 / eta) ** (1.0 / (2.0 * r - q))
    r2 = ((2.0 ** q) * L2 / eta) ** (1.0 / (2.0 * r))
    R = max(r1, r2)
    log10_a = math.log10(L2) + (q - 1.0) * math.log10(1.0 + 2.0 * R)
    return TheoryConstants(
        A=A,
        B=_pow10(log10_B),
        a=_pow10(log10_a),
        R=R,
        L2=L2,
        L=meta.L1 + 8.0 * r * eta,
        l=2.0 * r + 1.0,
        lambda_max=lambda_max(eta, p),
        K_mean=k_mean,
        log10_B=log10_B,
        log10_a=log10_a,
    )


def estimate_k_mean(
    oracle: GradientOracle, stream, n: int, seed: int
) -> tuple[float, float]:
    """(Monte-Carlo mean of K(X), standard error) over n stream draws."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 3])))
    vals = np.array([oracle.k_of(stream.sample(rng)) for _ in range(n)])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def estimate_x_rho_mean(
    oracle: GradientOracle, stream, n: int, seed: int
) -> tuple[float, float]:
    """(Monte-Carlo mean of (1+|X|)^rho, standard error)."""
    rho = oracle.meta().rho
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 4])))
    vals = np.array(
        [(1.0 + oracle.x_norm(stream.sample(rng))) ** rho for _ in range(n)]
    )
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


@dataclass(frozen=True)
class DissipativityReport:
    """Slack of <theta, h> - (A |theta|^2 - B) over a parameter grid.

    A point violates when slack < -tol (tol covers Monte-Carlo error in h).
    passed is True iff no point violates.
    """

    slacks: np.ndarray
    tols: np.ndarray
    min_slack: float
    argmin_index: int
    violation_indices: tuple[int, ...]
    passed: bool


def dissipativity_check(
    h_eval: Callable,
    A: float,
    B: float,
    grid: Sequence,
    tol=0.0,
) -> DissipativityReport:
    """Evaluate the dissipativity inequality pointwise on grid.

    h_eval: theta -> drift vector (mean field; exact or Monte-Carlo).
    tol: scalar, per-point array, or callable theta -> nonnegative slack
        allowance; use ~3 standard errors for Monte-Carlo drifts.
    """
    pts = [np.atleast_1d(np.asarray(t, dtype=np.float64)) for t in grid]
    if not pts:
        raise ValueError("empty grid")
    if callable(tol):
        tols = np.array([float(tol(t)) for t in pts])
    else:
        tols = np.broadcast_to(np.asarray(tol, dtype=np.float64), (len(pts),)).copy()
    if np.any(tols < 0.0):
        raise ValueError("tolerances must be non-negative")

    slacks = np.empty(len(pts))
    for i, t in enumerate(pts):
        h = np.atleast_1d(np.asarray(h_eval(t), dtype=np.float64))
        n2 = float(t @ t)
        slacks[i] = float(t @ h) - (A * n2 - B)
    viol = tuple(int(i) for i in np.nonzero(slacks < -tols)[0])
    amin = int(np.argmin(slacks))
    return DissipativityReport(
        slacks=slacks,
        tols=tols,
        min_slack=float(slacks[amin]),
        argmin_index=amin,
        violation_indices=viol,
        passed=len(viol) == 0,
    )


def empirical_moment(record, p: int) -> np.ndarray:
    """Running mean of |theta|^(2p) over the recorded states of a run."""
    if p < 0:
        raise ValueError(f"moment order must be non-negative, got {p}")
    norms = np.asarray(record.theta_norms, dtype=np.float64)
    with np.errstate(over="ignore"):
        vals = norms ** (2 * p)
    return np.cumsum(vals) / np.arange(1, norms.size + 1)


@dataclass(frozen=True)
class EmpiricalDistribution1D:
    """Sorted sample set standing in for a 1-D law."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("need a non-empty 1-D sample array")
        if np.any(np.diff(s) < 0.0):
            raise ValueError("samples must be sorted ascending")
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_samples(cls, values) -> "EmpiricalDistribution1D":
        return cls(np.sort(np.asarray(values, dtype=np.float64)))

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def mean(self) -> float:
        return float(self.samples.mean())

    def var(self) -> float:
        return float(self.samples.var())


def _simpson_cell_masses(logw_nodes: np.ndarray, logw_mids: np.ndarray, h: float) -> np.ndarray:
    # per-cell Simpson (h/6)(f_i + 4 f_mid + f_{i+1}), stabilized by the
    # global log-max so the peak has weight 1 exactly
    m = max(float(np.max(logw_nodes)), float(np.max(logw_mids)))
    wn = np.exp(logw_nodes - m)
    wm = np.exp(logw_mids - m)
    return (h / 6.0) * (wn[:-1] + 4.0 * wm + wn[1:])


def gibbs_sampler_1d(
    u: Callable[[np.ndarray], np.ndarray],
    beta: float,
    support: Optional[tuple[float, float]],
    rng: np.random.Generator,
    n_samples: int,
    n_cells: int = 1 << 14,
) -> EmpiricalDistribution1D:
    """Draw n_samples from the density proportional to exp(-beta u(x)).

    u must accept a float64 array and return elementwise values. support
    None starts from [-20, 20] and doubles the span until the boundary
    density falls below 1e-12 of the peak; a density whose tails refuse to
    decay raises rather than returning garbage. Sampling inverts the CDF of
    a composite Simpson quadrature on n_cells uniform cells (n_cells + 1
    nodes), linearly interpolated between nodes.
    """
    if not (math.isfinite(beta) and beta > 0.0):
        raise ValueError(f"beta must be positive and finite, got {beta}")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if n_cells < (1 << 14):
        raise ValueError(f"need at least {1 << 14} cells, got {n_cells}")

    auto = support is None
    lo, hi = (-20.0, 20.0) if auto else (float(support[0]), float(support[1]))
    if not (lo < hi and math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError(f"invalid support [{lo}, {hi}]")

    def density_grid(lo, hi):
        nodes = np.linspace(lo, hi, n_cells + 1)
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        with np.errstate(over="ignore", invalid="ignore"):
            logw_nodes = -beta * np.asarray(u(nodes), dtype=np.float64)
            logw_mids = -beta * np.asarray(u(mids), dtype=np.float64)
        if np.any(np.isnan(logw_nodes)) or np.any(np.isnan(logw_mids)):
            raise ValueError("u produced nan on the support")
        return nodes, logw_nodes, logw_mids

    nodes, lw_n, lw_m = density_grid(lo, hi)
    if auto:
        for _ in range(50):
            peak = float(np.max(lw_n))
            edge = max(lw_n[0], lw_n[-1])
            if edge - peak < math.log(1e-12):
                break
            span = hi - lo
            lo, hi = lo - span / 2.0, hi + span / 2.0
            nodes, lw_n, lw_m = density_grid(lo, hi)
        else:
            raise ValueError(
                "density does not decay on any manageable support; "
                "exp(-beta u) may not be integrable"
            )
        # monotone-tail sanity: log-density must not be rising at the edges
        k = max(2, n_cells // 256)
        if lw_n[0] > lw_n[k] + 1e-9 or lw_n[-1] > lw_n[-1 - k] + 1e-9:
            raise ValueError("density rises toward the support boundary; not integrable")

    h = (hi - lo) / n_cells
    masses = _simpson_cell_masses(lw_n, lw_m, h)
    total = float(masses.sum())
    if not (math.isfinite(total) and total > 0.0):
        raise ValueError("density mass is zero or non-finite on the support")
    cdf = np.concatenate([[0.0], np.cumsum(masses)]) / total
    cdf[-1] = 1.0
    us = rng.random(n_samples)
    return EmpiricalDistribution1D.from_samples(np.interp(us, cdf, nodes))


def _midpoint_quantiles(sorted_vals: np.ndarray, n: int) -> np.ndarray:
    m = sorted_vals.size
    if m == n:
        return sorted_vals
    src = (np.arange(m) + 0.5) / m
    dst = (np.arange(n) + 0.5) / n
    return np.interp(dst, src, sorted_vals)


def _as_sorted(dist) -> np.ndarray:
    if isinstance(dist, EmpiricalDistribution1D):
        return dist.samples
    return np.sort(np.asarray(dist, dtype=np.float64))


def wasserstein_p_1d(a, b, p: int) -> float:
    """Order-p Wasserstein distance between two 1-D sample sets (p in {1, 2}).

    Equal sizes use the exact order-statistics coupling; unequal sizes are
    aligned by midpoint-quantile interpolation at the larger size.
    """
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p}")
    sa, sb = _as_sorted(a), _as_sorted(b)
    n = max(sa.size, sb.size)
    qa = _midpoint_quantiles(sa, n)
    qb = _midpoint_quantiles(sb, n)
    diff = np.abs(qa - qb)
    if p == 1:
        return float(diff.mean())
    return float(math.sqrt(np.mean(diff * diff)))


def gaussian_quantiles(sigma: float, n: int) -> np.ndarray:
    """Deterministic N(0, sigma^2) representative points: quantiles at
    midpoint levels (i + 0.5)/n."""
    return ndtri((np.arange(n) + 0.5) / n) * sigma


def wasserstein_to_gaussian(dist, sigma: float, p: int = 2) -> float:
    """W_p between a sample set and N(0, sigma^2) via analytic quantiles."""
    s = _as_sorted(dist)
    return wasserstein_p_1d(s, gaussian_quantiles(sigma, s.size), p)


def ks_vs_gaussian(dist, sigma: float = 1.0) -> float:
    """One-sample Kolmogorov-Smirnov statistic against N(0, sigma^2)."""
    s = _as_sorted(dist)
    n = s.size
    cdf = ndtr(s / sigma)
    i = np.arange(n)
    return float(np.max(np.maximum(cdf - i / n, (i + 1) / n - cdf)))


def tusla_terminal_law(
    oracle: GradientOracle,
    stream,
    lam: float,
    beta: float,
    reg: RegularizationParams,
    theta0: float,
    n_steps: int,
    n_replicas: int,
    seed: int,
) -> EmpiricalDistribution1D:
    """Terminal law of the tamed update over n_replicas independent chains.

    Vectorized over replicas for 1-D oracles exposing evaluate_batch; each
    step draws one data sample and one Gaussian per replica. The per-replica
    law is identical to running ``optimizers.run`` n_replicas times (the
    update arithmetic is the same overflow-safe drift), but the stream
    layout differs, so seeds are not interchangeable between the two.
    Non-finite replicas are dropped with a warning.
    """
    if oracle.dim() != 1:
        raise ValueError("replica integrator handles 1-D parameters only")
    reg.require_order(oracle.meta().q)
    data_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0])))
    noise_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1, 0])))
    thetas = np.full(n_replicas, float(theta0))
    scale = math.sqrt(2.0 * lam / beta)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            xs = stream.sample_batch(data_rng, n_replicas)
            g = oracle.evaluate_batch(thetas, xs)
            drift = overflow_safe_drift_batch(g, thetas, lam, reg)
            thetas = thetas - lam * drift + scale * noise_rng.standard_normal(n_replicas)
    finite = np.isfinite(thetas)
    if not np.all(finite):
        warnings.warn(
            f"{int(np.sum(~finite))} of {n_replicas} replicas diverged; dropped",
            RuntimeWarning,
            stacklevel=2,
        )
        thetas = thetas[finite]
    if thetas.size == 0:
        raise ValueError("all replicas diverged")
    return EmpiricalDistribution1D.from_samples(thetas)
