"""Centralized baseline solvers with certified optimality gaps.

These solvers come from a different algorithm family than the distributed
iteration under test, so their solutions can serve as independent ground
truth: proximal gradient with soft thresholding for lasso, the exact closed
form for sums of quadratics, and a golden-section refiner for one-dimensional
convex objectives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameter

Array = np.ndarray

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ReferenceSolution:
    """An optimum estimate together with a certified optimality gap."""

    x_star: Array
    f_star: float
    gap_bound: float
    iterations_used: int
    converged: bool = True
    note: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_star", np.atleast_1d(np.asarray(self.x_star, dtype=float)))
        if self.gap_bound < 0:
            raise InvalidParameter("gap bound must be >= 0")


def soft_threshold(x: Array, t: float) -> Array:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def solve_lasso_prox(
    a: Array,
    y: Array,
    lam: float,
    tol: float = 1e-10,
    max_iter: int = 200000,
) -> ReferenceSolution:
    """Proximal gradient (soft thresholding) with backtracking line search.

    Minimizes ``0.5 ||a x - y||^2 + lam ||x||_1`` for lam >= 0.  At each
    iterate the prox step exposes an explicit subgradient
    ``xi = grad_smooth(x+) - grad_smooth(x) + (x - x+) / t`` of the full
    objective at x+; when the smooth part is strongly convex with modulus mu
    (the smallest eigenvalue of a^T a) this certifies the gap
    ``f(x+) - f* <= ||xi||^2 / (2 mu)``.  Iterations stop once that certified
    gap falls to `tol`.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise InvalidParameter(f"lam must be >= 0, got {lam}")
    n = a.shape[1]
    gram = a.T @ a
    aty = a.T @ y
    eigs = np.linalg.eigvalsh(gram)
    lip = float(max(eigs[-1], 1e-30))
    mu = float(max(eigs[0], 0.0))

    def smooth_grad(x: Array) -> Array:
        return gram @ x - aty

    def objective(x: Array) -> float:
        r = a @ x - y
        return 0.5 * float(r @ r) + lam * float(np.sum(np.abs(x)))

    def smooth_value(x: Array) -> float:
        r = a @ x - y
        return 0.5 * float(r @ r)

    x = np.zeros(n)
    t = 1.0 / lip
    gap = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = smooth_grad(x)
        sx = smooth_value(x)
        # Backtrack until the step satisfies the local upper quadratic model.
        while True:
            x_next = soft_threshold(x - t * g, lam * t)
            d = x_next - x
            if smooth_value(x_next) <= sx + float(g @ d) + float(d @ d) / (2.0 * t):
                break
            t *= 0.5
        xi = smooth_grad(x_next) - g + (x - x_next) / t
        xi_norm = float(np.linalg.norm(xi))
        if mu > 0:
            gap = xi_norm**2 / (2.0 * mu)
        else:
            gap = xi_norm
        x = x_next
        if gap <= tol:
            return ReferenceSolution(x, objective(x), gap, iterations)
        t = min(t * 1.1, 1.0 / max(mu, lip * 1e-12))
    note = "subgradient-norm certificate only" if mu == 0 else ""
    return ReferenceSolution(
        x, objective(x), gap, iterations, converged=False,
        note=(note + f" stopped at gap {gap:.3e} > tol {tol:.3e}").strip(),
    )


def solve_quadratic_sum(
    centers: Sequence[Array] | Array, curvatures: Sequence[float] | Array
) -> ReferenceSolution:
    """Exact minimizer of ``sum_i 0.5 q_i ||x - c_i||^2``: the weighted mean."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    curvatures = np.asarray(curvatures, dtype=float)
    if centers.shape[0] == 0:
        raise InvalidParameter("at least one quadratic term is required")
    if centers.shape[0] != curvatures.shape[0]:
        raise InvalidParameter("one curvature per center is required")
    if not np.all(curvatures > 0):
        raise InvalidParameter("curvatures must all be > 0")
    x_star = (curvatures[:, None] * centers).sum(axis=0) / curvatures.sum()
    d = x_star - centers
    f_star = float(np.sum(0.5 * curvatures * np.einsum("mj,mj->m", d, d)))
    return ReferenceSolution(x_star, f_star, 0.0, 0)


def grid_refine_1d(
    f: Callable[[float], float],
    bracket: tuple[float, float],
    tol: float = 1e-8,
    max_iter: int = 10000,
) -> ReferenceSolution:
    """Golden-section refinement of a convex function over a bracket.

    Shrinks the bracket to width `tol`.  The certified gap uses convexity:
    with best point x and the adjacent secant slopes s-, s+, every point of
    the final bracket satisfies ``f >= f(x) - max(|s-|, |s+|) * width``.  A
    minimum on the bracket boundary is reported (the true minimizer may lie
    outside) and the returned point is the boundary itself.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise InvalidParameter(f"bracket must satisfy lo < hi, got {bracket}")
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    iterations = 0
    while hi - lo > tol and iterations < max_iter:
        iterations += 1
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    flo, fhi = f(lo), f(hi)
    points = [(lo, flo), (c, fc), (d, fd), (hi, fhi)]
    points.sort(key=lambda p: p[0])
    xs = [p[0] for p in points]
    fs = [p[1] for p in points]
    best = int(np.argmin(fs))
    x_best, f_best = xs[best], fs[best]
    slopes = []
    if best > 0 and xs[best] > xs[best - 1]:
        slopes.append(abs((f_best - fs[best - 1]) / (xs[best] - xs[best - 1])))
    if best < len(xs) - 1 and xs[best + 1] > xs[best]:
        slopes.append(abs((fs[best + 1] - f_best) / (xs[best + 1] - xs[best])))
    width = xs[-1] - xs[0]
    gap = max(slopes) * width if slopes else 0.0
    note = ""
    boundary = best in (0, len(xs) - 1)
    if boundary:
        note = "minimum at bracket boundary; true minimizer may lie outside"
    return ReferenceSolution(
        np.array([x_best]), float(f_best), float(gap), iterations,
        converged=not boundary, note=note,
    )
