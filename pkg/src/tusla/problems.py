"""Benchmark objectives with stochastic gradient oracles.

Three families:

* ``UsProblem`` -- the 1-D double-well-style objective u_s with a flat-ish
  quadratic region around the minimizer theta* = 0.1 and a steep |d|^(2s)
  wall, plus the multiplier-noise gradient estimator it is benchmarked with.
* ``QuadraticProblem`` -- u(theta) = |theta|^2 / 2 with exact gradient; the
  Gaussian-target case used to calibrate samplers.
* ``OneNeuronProblem`` -- a 2-parameter arctan neuron with quadratic weight
  penalty whose gradient field provably escapes every quadratic dissipativity
  envelope along the w2 axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .gradient_oracle import GradientOracle, OracleMeta, ParameterVector

__all__ = [
    "UniformDataSource",
    "ConstantDataSource",
    "u_s_value",
    "u_s_value_batch",
    "u_s_derivative",
    "g_s_sample",
    "g_s_unbiased",
    "UsProblem",
    "QuadraticProblem",
    "one_neuron_parameters",
    "one_neuron_value",
    "one_neuron_gradient",
    "OneNeuronProblem",
]

_CENTER = 0.1  # minimizer of every u_s


def _guard_pow(x: float, n: int) -> float:
    # Python float ** raises OverflowError instead of returning inf; the
    # optimizers rely on inf/nan propagation to detect divergence, so
    # saturate with the correct sign (all callers pass integer n).
    try:
        return x ** n
    except OverflowError:
        if x < 0.0 and n % 2 == 1:
            return -math.inf
        return math.inf


@dataclass(frozen=True)
class UniformDataSource:
    """i.i.d. uniform draws on [lo, hi]; the benchmark uses [0, 11]."""

    lo: float = 0.0
    hi: float = 11.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.lo, self.hi))

    def sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class ConstantDataSource:
    """Degenerate stream returning one fixed sample; for data-free oracles."""

    value: object = 0.0

    def sample(self, rng: np.random.Generator) -> object:
        return self.value

    def sample_batch(self, rng: np.random.Generator, n: int) -> np.ndarray:
        v = np.asarray(self.value, dtype=np.float64)
        return np.broadcast_to(v, (n,) + v.shape).copy()


def u_s_value(theta: float, s: int) -> float:
    """u_s(theta): quadratic basin inside |theta - 0.1| <= 1, linear + steep
    polynomial wall outside. Continuous across the branch boundary."""
    d = theta - _CENTER
    if abs(d) <= 1.0:
        return d * d / 22.0 + _guard_pow(d, 2 * s)
    return (abs(d) - 0.5) / 11.0 + _guard_pow(d, 2 * s)


def u_s_value_batch(theta: np.ndarray, s: int) -> np.ndarray:
    """Vectorized u_s_value; density evaluations for samplers."""
    d = np.asarray(theta, dtype=np.float64) - _CENTER
    with np.errstate(over="ignore"):
        pen = d ** (2 * s)
        inner = d * d / 22.0 + pen
        outer = (np.abs(d) - 0.5) / 11.0 + pen
    return np.where(np.abs(d) <= 1.0, inner, outer)


def u_s_derivative(theta: float, s: int) -> float:
    """Exact derivative of u_s (continuous; the branches agree at |d| = 1)."""
    d = theta - _CENTER
    pen = 0.0 if s == 0 else 2.0 * s * _guard_pow(d, 2 * s - 1)
    if abs(d) <= 1.0:
        return d / 11.0 + pen
    return math.copysign(1.0 / 11.0, d) + pen


def _multiplier(x: float) -> float:
    # 12 * 1_{x in [0,1]} - 1: mean 1/11 under U[0, 11].
    return 11.0 if 0.0 <= x <= 1.0 else -1.0


def g_s_sample(theta: float, x: float, s: int) -> float:
    """Benchmark gradient estimator: the multiplier scales the whole bracket.

    Mean over x ~ U[0,11] is (1/11) * bracket, which is NOT u_s'(theta): the
    basin term enters squared and the wall term is scaled down elevenfold.
    The bracket also steps from 1 to 1/2 across |theta - 0.1| = 1, so the
    estimator is discontinuous there. Kept exactly in this form because it is
    what the optimizer comparisons are defined on; see g_s_unbiased for a
    consistent estimator.
    """
    d = theta - _CENTER
    pen = 0.0 if s == 0 else 2.0 * s * _guard_pow(d, 2 * s - 1)
    if abs(d) <= 1.0:
        bracket = d * d + pen
    else:
        bracket = (abs(d) - 0.5) + pen
    return _multiplier(x) * bracket


def g_s_unbiased(theta: float, x: float, s: int) -> float:
    """Estimator with the multiplier on the basin slope only.

    E[multiplier] = 1/11, so the mean over x ~ U[0,11] equals u_s'(theta)
    exactly on both branches, and the sample path is continuous in theta.
    """
    d = theta - _CENTER
    pen = 0.0 if s == 0 else 2.0 * s * _guard_pow(d, 2 * s - 1)
    lin = d if abs(d) <= 1.0 else math.copysign(1.0, d)
    return _multiplier(x) * lin + pen


def _us_ratio_sup(s: int, unbiased: bool) -> float:
    # sup over xi of |d/dtheta estimator(xi)| / (1 + |xi|)^(q-1), maximized
    # over the multiplier value (|mult| <= 11). Dense grid; the sup is
    # attained at moderate |xi| because the envelope degree q - 1 matches the
    # top derivative degree plus one.
    q = max(2 * s, 1)
    xs = np.linspace(-8.0, 8.2, 400001)
    d = xs - _CENTER
    if s == 0:
        pen_d = np.zeros_like(d)
    else:
        with np.errstate(over="ignore"):
            pen_d = 2.0 * s * (2 * s - 1) * d ** (2 * s - 2)
    inner = np.abs(d) <= 1.0
    if unbiased:
        # derivative = mult * lin' + pen'; lin' = 1 inside, 0 outside
        deriv = 11.0 * inner.astype(float) + np.abs(pen_d)
    else:
        # derivative = mult * bracket'; bracket' = 2d inside, sign(d) outside
        base = np.where(inner, 2.0 * np.abs(d), 1.0)
        deriv = 11.0 * (base + np.abs(pen_d))
    ratio = deriv / (1.0 + np.abs(xs)) ** (q - 1)
    return float(np.max(ratio))


@lru_cache(maxsize=None)
def _us_l1(s: int, unbiased: bool) -> float:
    return 1.1 * _us_ratio_sup(s, unbiased)


@dataclass(frozen=True)
class UsProblem(GradientOracle):
    """Oracle for u_s. ``unbiased`` selects the consistent estimator.

    Declared growth constants: q = max(2s, 1), rho = 1, and L1 from a dense
    grid maximization of the branchwise derivative ratio (with 10% headroom).
    For the default estimator the constants are valid on each branch
    separately; its jump at |theta - 0.1| = 1 admits no finite global
    Lipschitz constant. The unbiased estimator satisfies the bound globally.
    """

    s: int = 2
    unbiased: bool = False
    theta_star: float = field(default=_CENTER, init=False)

    def __post_init__(self) -> None:
        if not (isinstance(self.s, int) and self.s >= 0):
            raise ValueError(f"s must be a non-negative integer, got {self.s}")

    def meta(self) -> OracleMeta:
        return OracleMeta(q=float(max(2 * self.s, 1)), rho=1.0, L1=_us_l1(self.s, self.unbiased))

    def dim(self) -> int:
        return 1

    def evaluate_scalar(self, theta: float, x: float) -> float:
        if self.unbiased:
            return g_s_unbiased(theta, x, self.s)
        return g_s_sample(theta, x, self.s)

    def evaluate(self, theta: ParameterVector, x: float) -> ParameterVector:
        return np.array([self.evaluate_scalar(float(theta[0]), x)])

    def evaluate_batch(self, thetas: np.ndarray, xs: np.ndarray) -> np.ndarray:
        d = thetas - _CENTER
        s = self.s
        mult = np.where((xs >= 0.0) & (xs <= 1.0), 11.0, -1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            pen = np.zeros_like(d) if s == 0 else 2.0 * s * d ** (2 * s - 1)
            inner = np.abs(d) <= 1.0
            if self.unbiased:
                lin = np.where(inner, d, np.sign(d))
                return mult * lin + pen
            bracket = np.where(inner, d * d, np.abs(d) - 0.5) + pen
            return mult * bracket

    def value(self, theta: float) -> float:
        return u_s_value(float(theta), self.s)

    def g0_norm(self, x: float) -> float:
        return abs(self.evaluate_scalar(0.0, x))

    def k_mean_exact(self) -> float:
        """E[K(X)] under X ~ U[0, 11], in closed form.

        E[|multiplier|] = 21/11; the theta = 0 bracket is deterministic.
        """
        m = self.meta()
        d = -_CENTER
        pen = 0.0 if self.s == 0 else 2.0 * self.s * d ** (2 * self.s - 1)
        e_mult_abs = 21.0 / 11.0
        if self.unbiased:
            # |G(0,x)| = |mult * d + pen| with mult in {11 (w.p. 1/11), -1}
            e_g0 = (abs(11.0 * d + pen) + 10.0 * abs(-d + pen)) / 11.0
        else:
            e_g0 = e_mult_abs * abs(d * d + pen)
        return 2.0 ** m.q * (m.L1 * 6.5 + e_g0)

    def x_rho_mean_exact(self) -> float:
        """E[(1 + |X|)^rho] = 6.5 for rho = 1 under U[0, 11]."""
        return 6.5


@dataclass(frozen=True)
class QuadraticProblem(GradientOracle):
    """u(theta) = |theta|^2 / 2 with exact (data-free) gradient G = theta."""

    d: int = 1

    def meta(self) -> OracleMeta:
        # |G - G'| = |theta - theta'| exactly, so L1 = 1, q = 1, rho = 1.
        return OracleMeta(q=1.0, rho=1.0, L1=1.0)

    def dim(self) -> int:
        return self.d

    def evaluate(self, theta: ParameterVector, x: object) -> ParameterVector:
        return np.asarray(theta, dtype=np.float64).copy()

    def evaluate_scalar(self, theta: float, x: object) -> float:
        return theta

    def evaluate_batch(self, thetas: np.ndarray, xs: np.ndarray) -> np.ndarray:
        return thetas.copy()

    def value(self, theta) -> float:
        v = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        return 0.5 * float(np.dot(v, v))

    def g0_norm(self, x: object) -> float:
        return 0.0

    @property
    def theta_star(self) -> float:
        return 0.0


def one_neuron_parameters(eta: float) -> tuple[float, float]:
    """(w1_star, S) for the arctan neuron: chosen so w1_star * 1 + S = -1."""
    w1_star = (4.0 + eta + 1.0) * (1.0 + math.pi ** 2 / 16.0)
    return w1_star, -w1_star - 1.0


def one_neuron_value(w1: float, w2: float, x: float, y: float, eta: float) -> float:
    _, s_off = one_neuron_parameters(eta)
    m = math.atan(w1 * x + s_off)
    resid = y - w2 * m
    return resid * resid + eta * (w1 * w1 + w2 * w2)


def one_neuron_gradient(w1: float, w2: float, x: float, y: float, eta: float) -> np.ndarray:
    """Exact gradient of one_neuron_value in (w1, w2)."""
    _, s_off = one_neuron_parameters(eta)
    z = w1 * x + s_off
    m = math.atan(z)
    dm = 1.0 / (1.0 + z * z)
    resid = y - w2 * m
    return np.array(
        [
            -2.0 * resid * w2 * dm * x + 2.0 * eta * w1,
            -2.0 * resid * m + 2.0 * eta * w2,
        ]
    )


@dataclass(frozen=True)
class OneNeuronProblem(GradientOracle):
    """Two-parameter arctan neuron with quadratic weight penalty.

    Along w2 -> infinity at w1 = w1_star and sample (x, y) = (1, 0) the
    inner product <grad, w> behaves like -c * w2^2 with c > 2, so no pair
    (A, B) with A > 0 can satisfy <grad, w> >= A |w|^2 - B: quadratic
    penalties do not restore dissipativity here. The superlinear penalty
    (r >= q/2 + 1 = 2.5) does.
    """

    eta: float = 0.01
    w1_star: float = field(init=False)
    S: float = field(init=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eta) and 0.0 <= self.eta < 1.0):
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        w1s, s_off = one_neuron_parameters(self.eta)
        object.__setattr__(self, "w1_star", w1s)
        object.__setattr__(self, "S", s_off)

    def meta(self) -> OracleMeta:
        # q = 3 (the gradient grows cubically in |w| through resid * w2 terms),
        # rho = 2, L1 = 12: twice the largest Lipschitz ratio observed over
        # 4e5 sampled pairs spanning |w| in [1e-2, 1e3].
        return OracleMeta(q=3.0, rho=2.0, L1=12.0)

    def dim(self) -> int:
        return 2

    def evaluate(self, theta: ParameterVector, x) -> ParameterVector:
        xv, yv = float(x[0]), float(x[1])
        return one_neuron_gradient(float(theta[0]), float(theta[1]), xv, yv, self.eta)

    def value(self, theta: ParameterVector, x) -> float:
        xv, yv = float(x[0]), float(x[1])
        return one_neuron_value(float(theta[0]), float(theta[1]), xv, yv, self.eta)

    def g0_norm(self, x) -> float:
        # At w = 0 only the w2 component survives: |G(0, x)| = 2|y||atan(S)|.
        return 2.0 * abs(float(x[1])) * abs(math.atan(self.S))
