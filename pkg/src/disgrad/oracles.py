"""Inexact first-order oracles.

A convex function f admits a first-order (delta, L)-oracle when every query
point x yields a pair (v, g) with

    0 <= f(y) - v - g^T (y - x) <= (L / 2) ||y - x||^2 + delta   for all y.

The pair is a linear model that never overestimates f, and whose gap to f is
controlled by the usual quadratic upper model up to an additive accuracy
delta.  This module provides the algebra on declared (delta, L) pairs, an
empirical certification harness for the two inequalities, and the concrete
oracles used by the experiment runner:

* exact gradients of smooth quadratics (delta = 0),
* value-perturbed quadratics with a seeded one-sided error, and
* the Huber-smoothed lasso oracle, where the l1 term of each local objective
  is replaced by a smooth lower approximation.

All oracle evaluations are pure functions of their arguments (the noisy
variant derives its perturbation from an explicit seed and the round index),
so they are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameter

Array = np.ndarray

# Smallest admissible Huber smoothing; keeps 1/delta finite.
HUBER_DELTA_FLOOR = float(np.finfo(float).tiny)


@dataclass(frozen=True)
class OracleSpec:
    """Declared accuracy/curvature pair of an inexact oracle."""

    delta: float
    lipschitz: float
    dimension: int

    def __post_init__(self) -> None:
        if not self.delta >= 0:
            raise InvalidParameter(f"oracle accuracy must be >= 0, got {self.delta}")
        if not self.lipschitz > 0:
            raise InvalidParameter(f"oracle curvature must be > 0, got {self.lipschitz}")
        if self.dimension < 1:
            raise InvalidParameter(f"dimension must be a positive integer, got {self.dimension}")


def scale_oracle(spec: OracleSpec, c: float) -> OracleSpec:
    """Spec admitted by c*f when f admits `spec`; both constants scale by c."""
    if not c > 0:
        raise InvalidParameter(f"scale factor must be > 0, got {c}")
    return OracleSpec(c * spec.delta, c * spec.lipschitz, spec.dimension)


def sum_oracles(specs: Sequence[OracleSpec]) -> OracleSpec:
    """Spec admitted by a sum of functions: accuracies and curvatures add."""
    if len(specs) == 0:
        raise InvalidParameter("sum_oracles requires a nonempty list of specs")
    dims = {s.dimension for s in specs}
    if len(dims) != 1:
        raise InvalidParameter(f"mismatched oracle dimensions: {sorted(dims)}")
    return OracleSpec(
        sum(s.delta for s in specs),
        sum(s.lipschitz for s in specs),
        specs[0].dimension,
    )


@dataclass(frozen=True)
class OracleResponse:
    """Value/gradient pair returned by one oracle call."""

    value: float
    gradient: Array

    def __post_init__(self) -> None:
        grad = np.asarray(self.gradient, dtype=float)
        if grad.ndim != 1:
            raise InvalidParameter(f"gradient must be a vector, got shape {grad.shape}")
        if not np.isfinite(self.value) or not np.all(np.isfinite(grad)):
            raise InvalidParameter("oracle response contains non-finite entries")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "gradient", grad)


def huber(x: float | Array, delta: float) -> float | Array:
    """Smooth lower model of ``|x|``.

    Quadratic ``x**2 / (2 delta)`` on ``[-delta, delta]`` and ``|x| - delta/2``
    outside; the two branches agree at ``|x| = delta``.  Satisfies
    ``huber(x) <= |x| <= huber(x) + delta/2`` everywhere.
    """
    if not delta > 0:
        raise InvalidParameter(f"huber smoothing must be > 0, got {delta}")
    ax = np.abs(x)
    out = np.where(ax <= delta, np.square(x) / (2.0 * delta), ax - 0.5 * delta)
    if np.ndim(x) == 0:
        return float(out)
    return out


def huber_grad(x: float | Array, delta: float) -> float | Array:
    """Derivative of :func:`huber`: ``x / delta`` inside, ``sign(x)`` outside."""
    if not delta > 0:
        raise InvalidParameter(f"huber smoothing must be > 0, got {delta}")
    ax = np.abs(x)
    out = np.where(ax <= delta, np.asarray(x, dtype=float) / delta, np.sign(x))
    if np.ndim(x) == 0:
        return float(out)
    return out


def spectral_norm_sq(a: Array, rel_tol: float = 1e-8, max_iter: int = 10000) -> float:
    """Squared spectral norm of a matrix by power iteration on ``a^T a``."""
    a = np.asarray(a, dtype=float)
    gram = a.T @ a
    n = gram.shape[0]
    v = np.arange(1.0, n + 1.0)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return 0.0
        v = w / lam_new
        if abs(lam_new - lam) <= rel_tol * lam_new:
            return lam_new
        lam = lam_new
    return lam


@dataclass(frozen=True)
class LassoLocalProblem:
    """One agent's share of a lasso instance, with Huber-smoothed l1 term.

    The smoothed local objective is
    ``0.5 ||a_mat x - y_vec||^2 + lambda_over_m * sum_j huber(x_j)``;
    its exact first-order information is an inexact oracle for the true
    (nonsmooth) local objective with the l1 term.
    """

    a_mat: Array
    y_vec: Array
    lambda_over_m: float
    huber_delta: float

    def __post_init__(self) -> None:
        a = np.asarray(self.a_mat, dtype=float)
        y = np.asarray(self.y_vec, dtype=float)
        if a.ndim != 2 or y.ndim != 1:
            raise InvalidParameter("a_mat must be a matrix and y_vec a vector")
        if a.shape[0] != y.shape[0]:
            raise InvalidParameter(
                f"row count mismatch: a_mat has {a.shape[0]} rows, y_vec has {y.shape[0]}"
            )
        if not self.lambda_over_m > 0:
            raise InvalidParameter(f"regularization share must be > 0, got {self.lambda_over_m}")
        if not 0 < self.huber_delta <= 1:
            raise InvalidParameter(f"huber_delta must lie in (0, 1], got {self.huber_delta}")
        object.__setattr__(self, "a_mat", a)
        object.__setattr__(self, "y_vec", y)

    @property
    def dimension(self) -> int:
        return self.a_mat.shape[1]

    def smoothed_value(self, x: Array) -> float:
        r = self.a_mat @ x - self.y_vec
        return float(0.5 * (r @ r) + self.lambda_over_m * np.sum(huber(x, self.huber_delta)))

    def true_value(self, x: Array) -> float:
        """Nonsmooth local objective with the exact l1 term."""
        r = self.a_mat @ x - self.y_vec
        return float(0.5 * (r @ r) + self.lambda_over_m * np.sum(np.abs(x)))

    def certified_spec(self) -> OracleSpec:
        """Tightest (delta, L) this module certifies for the smoothed oracle.

        The l1 gap is ``lambda_over_m * n * huber_delta / 2`` and the gradient
        Lipschitz constant is ``||a_mat||^2 + lambda_over_m / huber_delta``.
        """
        n = self.dimension
        delta = self.lambda_over_m * n * self.huber_delta / 2.0
        lip = spectral_norm_sq(self.a_mat) + self.lambda_over_m / self.huber_delta
        return OracleSpec(delta, lip, n)

    def conservative_spec(self) -> OracleSpec:
        """Looser constants that drop the regularization share.

        Valid whenever ``lambda_over_m <= 1``:
        ``(n * huber_delta / 2, sqrt(n) / huber_delta + ||a_mat||^2)``.
        """
        n = self.dimension
        delta = n * self.huber_delta / 2.0
        lip = np.sqrt(n) / self.huber_delta + spectral_norm_sq(self.a_mat)
        return OracleSpec(delta, lip, n)


def lasso_oracle_eval(problem: LassoLocalProblem, x: Array) -> OracleResponse:
    """Exact value/gradient of the Huber-smoothed local lasso objective."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dimension,):
        raise InvalidParameter(
            f"query point has shape {x.shape}, expected ({problem.dimension},)"
        )
    r = problem.a_mat @ x - problem.y_vec
    value = 0.5 * (r @ r) + problem.lambda_over_m * np.sum(huber(x, problem.huber_delta))
    grad = problem.a_mat.T @ r + problem.lambda_over_m * huber_grad(x, problem.huber_delta)
    return OracleResponse(float(value), grad)


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of the two oracle inequalities at a single probe point."""

    probe: Array
    lower_margin: float
    upper_margin: float
    passed: bool


@dataclass(frozen=True)
class CertificationReport:
    """Per-probe results plus the worst margins seen."""

    results: tuple[ProbeResult, ...]
    worst_lower: float
    worst_upper: float
    passed: bool

    @property
    def failures(self) -> tuple[ProbeResult, ...]:
        return tuple(r for r in self.results if not r.passed)


def certify_oracle(
    f_true: Callable[[Array], float],
    oracle_at_x: OracleResponse,
    x: Array,
    probes: Sequence[Array],
    spec: OracleSpec,
    slack: float = 1e-9,
) -> CertificationReport:
    """Check both oracle inequalities at each probe point.

    For each probe y, evaluates ``gap = f_true(y) - v - g^T (y - x)`` and
    checks ``gap >= -slack`` (lower) and
    ``(L/2)||y - x||^2 + delta - gap >= -slack`` (upper).  The slack absorbs
    floating-point rounding; the inequalities are exact in real arithmetic.
    """
    if len(probes) == 0:
        raise InvalidParameter("certify_oracle requires at least one probe")
    x = np.asarray(x, dtype=float)
    results = []
    for probe in probes:
        y = np.asarray(probe, dtype=float)
        d = y - x
        gap = float(f_true(y)) - oracle_at_x.value - float(oracle_at_x.gradient @ d)
        lower = gap
        upper = 0.5 * spec.lipschitz * float(d @ d) + spec.delta - gap
        results.append(ProbeResult(y, lower, upper, lower >= -slack and upper >= -slack))
    worst_lower = min(r.lower_margin for r in results)
    worst_upper = min(r.upper_margin for r in results)
    return CertificationReport(
        tuple(results), worst_lower, worst_upper, all(r.passed for r in results)
    )


def default_probes(
    x: Array,
    seed: int = 0,
    count: int = 64,
    coord_scales: Sequence[float] = (0.1, 1.0, 10.0),
    box_radius: float = 10.0,
) -> list[Array]:
    """Default certification probe set around a query point.

    The iterate itself, coordinate perturbations at the given scales, and
    seeded uniform draws in a box of the given radius, padded to `count`.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    probes: list[Array] = [x.copy()]
    for scale in coord_scales:
        for j in range(n):
            e = np.zeros(n)
            e[j] = scale
            probes.append(x + e)
            probes.append(x - e)
    rng = np.random.default_rng(seed)
    while len(probes) < count:
        probes.append(x + rng.uniform(-box_radius, box_radius, size=n))
    return probes[:count]


def noisy_oracle_eval(
    value_fn: Callable[[Array], float],
    grad_fn: Callable[[Array], Array],
    x: Array,
    delta_k: float,
    rng: np.random.Generator,
) -> OracleResponse:
    """Value-perturbed exact oracle.

    Subtracts a draw from ``uniform[0, delta_k / 2]`` from the exact value and
    leaves the gradient exact, which satisfies the (delta_k, L) inequalities
    for any L at least the true gradient Lipschitz constant.
    """
    if delta_k < 0:
        raise InvalidParameter(f"oracle accuracy must be >= 0, got {delta_k}")
    x = np.asarray(x, dtype=float)
    u = float(rng.uniform(0.0, delta_k / 2.0)) if delta_k > 0 else 0.0
    return OracleResponse(float(value_fn(x)) - u, np.asarray(grad_fn(x), dtype=float))


@dataclass(frozen=True)
class AccuracyBounds:
    """Certified per-round accuracy/curvature bounds over all agents."""

    delta_max: float
    delta_sum: float
    lipschitz_max: float


class LassoHuberOracles:
    """Per-agent Huber-smoothed lasso oracles over row blocks of (A, y).

    The network objective is ``0.5 ||A z - y||^2 + lambda_total ||z||_1``
    with rows of (A, y) split across agents; agent i sees block i plus a
    ``lambda_total / m`` share of the l1 term.  The accuracy parameter passed
    to :meth:`evaluate_all` is used directly as the Huber smoothing width,
    clamped to (0, 1].
    """

    def __init__(self, blocks: Sequence[tuple[Array, Array]], lambda_total: float):
        if len(blocks) == 0:
            raise InvalidParameter("at least one agent block is required")
        if not lambda_total > 0:
            raise InvalidParameter(f"lambda_total must be > 0, got {lambda_total}")
        self.num_agents = len(blocks)
        self.lambda_total = float(lambda_total)
        self.lambda_over_m = float(lambda_total) / self.num_agents
        self._a_blocks = [np.asarray(a, dtype=float) for a, _ in blocks]
        self._y_blocks = [np.asarray(y, dtype=float) for _, y in blocks]
        dims = {a.shape[1] for a in self._a_blocks}
        if len(dims) != 1:
            raise InvalidParameter(f"agent blocks disagree on dimension: {sorted(dims)}")
        self.dimension = dims.pop()
        for a, y in zip(self._a_blocks, self._y_blocks):
            if a.shape[0] != y.shape[0]:
                raise InvalidParameter("block row counts of A and y disagree")
        self._norm_sq = np.array([spectral_norm_sq(a) for a in self._a_blocks])
        # Uniform block sizes allow one batched einsum per round.
        sizes = {a.shape[0] for a in self._a_blocks}
        self._uniform = len(sizes) == 1
        if self._uniform:
            self._a_stack = np.stack(self._a_blocks)
            self._y_stack = np.stack(self._y_blocks)

    @staticmethod
    def clamp_smoothing(delta_k: float) -> float:
        return float(min(max(delta_k, HUBER_DELTA_FLOOR), 1.0))

    def local_problem(self, i: int, delta_k: float) -> LassoLocalProblem:
        return LassoLocalProblem(
            self._a_blocks[i],
            self._y_blocks[i],
            self.lambda_over_m,
            self.clamp_smoothing(delta_k),
        )

    def evaluate_agent(self, i: int, x: Array, delta_k: float, k: int = 0) -> OracleResponse:
        return lasso_oracle_eval(self.local_problem(i, delta_k), x)

    def evaluate_all(self, x: Array, delta_k: float, k: int = 0) -> tuple[Array, Array]:
        """Values and gradients for all agents at their own query rows."""
        hd = self.clamp_smoothing(delta_k)
        if self._uniform:
            r = np.einsum("mij,mj->mi", self._a_stack, x) - self._y_stack
            values = 0.5 * np.einsum("mi,mi->m", r, r)
            values = values + self.lambda_over_m * np.sum(huber(x, hd), axis=1)
            grads = np.einsum("mij,mi->mj", self._a_stack, r)
            grads = grads + self.lambda_over_m * huber_grad(x, hd)
            return values, grads
        values = np.empty(self.num_agents)
        grads = np.empty_like(np.asarray(x, dtype=float))
        for i in range(self.num_agents):
            resp = self.evaluate_agent(i, x[i], delta_k, k)
            values[i] = resp.value
            grads[i] = resp.gradient
        return values, grads

    def accuracy_bounds(self, delta_k: float) -> AccuracyBounds:
        hd = self.clamp_smoothing(delta_k)
        per_agent = self.lambda_over_m * self.dimension * hd / 2.0
        lip = float(np.max(self._norm_sq)) + self.lambda_over_m / hd
        return AccuracyBounds(per_agent, per_agent * self.num_agents, lip)

    def true_local(self, i: int, z: Array) -> float:
        r = self._a_blocks[i] @ z - self._y_blocks[i]
        return float(0.5 * (r @ r) + self.lambda_over_m * np.sum(np.abs(z)))

    def true_objective(self, z: Array) -> float:
        """Nonsmooth network objective at a single point."""
        z = np.asarray(z, dtype=float)
        total = self.lambda_total * float(np.sum(np.abs(z)))
        for a, y in zip(self._a_blocks, self._y_blocks):
            r = a @ z - y
            total += 0.5 * float(r @ r)
        return total

    def stacked_data(self) -> tuple[Array, Array]:
        return np.vstack(self._a_blocks), np.concatenate(self._y_blocks)


class ExactQuadraticOracles:
    """Exact (0, L)-oracles for per-agent quadratics ``0.5 q_i ||x - c_i||^2``."""

    def __init__(self, centers: Array, curvatures: Array):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        curvatures = np.asarray(curvatures, dtype=float)
        if centers.shape[0] != curvatures.shape[0]:
            raise InvalidParameter("one curvature per center is required")
        if not np.all(curvatures > 0):
            raise InvalidParameter("curvatures must all be > 0")
        self.centers = centers
        self.curvatures = curvatures
        self.num_agents = centers.shape[0]
        self.dimension = centers.shape[1]

    def evaluate_agent(self, i: int, x: Array, delta_k: float, k: int = 0) -> OracleResponse:
        x = np.asarray(x, dtype=float)
        d = x - self.centers[i]
        q = self.curvatures[i]
        return OracleResponse(0.5 * q * float(d @ d), q * d)

    def evaluate_all(self, x: Array, delta_k: float, k: int = 0) -> tuple[Array, Array]:
        d = x - self.centers
        values = 0.5 * self.curvatures * np.einsum("mj,mj->m", d, d)
        grads = self.curvatures[:, None] * d
        return values, grads

    def accuracy_bounds(self, delta_k: float) -> AccuracyBounds:
        return AccuracyBounds(0.0, 0.0, float(np.max(self.curvatures)))

    def true_local(self, i: int, z: Array) -> float:
        d = np.asarray(z, dtype=float) - self.centers[i]
        return 0.5 * float(self.curvatures[i]) * float(d @ d)

    def true_objective(self, z: Array) -> float:
        d = np.asarray(z, dtype=float) - self.centers
        return float(np.sum(0.5 * self.curvatures * np.einsum("mj,mj->m", d, d)))


class NoisyQuadraticOracles(ExactQuadraticOracles):
    """Quadratic oracles with a seeded one-sided value perturbation.

    The perturbation for agent i at round k is entry i of a uniform row
    derived from a counter-based generator keyed on (seed, k), so repeated
    evaluation of the same round is reproducible and order-independent.
    """

    def __init__(self, centers: Array, curvatures: Array, seed: int):
        super().__init__(centers, curvatures)
        self.seed = int(seed)

    def _noise_row(self, k: int) -> Array:
        bitgen = np.random.Philox(key=self.seed, counter=int(k))
        return np.random.Generator(bitgen).random(self.num_agents)

    def evaluate_agent(self, i: int, x: Array, delta_k: float, k: int = 0) -> OracleResponse:
        exact = super().evaluate_agent(i, x, delta_k, k)
        if delta_k < 0:
            raise InvalidParameter(f"oracle accuracy must be >= 0, got {delta_k}")
        u = self._noise_row(k)[i] * (delta_k / 2.0)
        return OracleResponse(exact.value - u, exact.gradient)

    def evaluate_all(self, x: Array, delta_k: float, k: int = 0) -> tuple[Array, Array]:
        values, grads = super().evaluate_all(x, delta_k, k)
        if delta_k < 0:
            raise InvalidParameter(f"oracle accuracy must be >= 0, got {delta_k}")
        if delta_k > 0:
            values = values - self._noise_row(k) * (delta_k / 2.0)
        return values, grads

    def accuracy_bounds(self, delta_k: float) -> AccuracyBounds:
        per_agent = delta_k / 2.0
        return AccuracyBounds(per_agent, per_agent * self.num_agents, float(np.max(self.curvatures)))
