"""Unconstrained maximization of the divergence objective.

Scale invariance of D_CS lets the unit-sphere constraint be replaced by the
penalty ``-(|v|^2 - 1)^2``; the penalized function has the same maximizers
and can be handed to ordinary quasi-Newton / conjugate gradient methods.
Both methods here minimize the negated objective with a strong Wolfe line
search.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import AllRunsFailed, LineSearchFailure, NonFiniteObjective

log = logging.getLogger(__name__)


class Evaluation(NamedTuple):
    value: float
    gradient: np.ndarray | None
    exp_calls: int = 0
    naive_pairs: int = 0


class ObjectiveHandle:
    """Callable objective ``v -> Evaluation`` with running counters."""

    def __init__(self, fun: Callable[[np.ndarray], Evaluation]):
        self.fun = fun
        self.evaluations = 0
        self.exp_calls = 0
        self.naive_pairs = 0

    def __call__(self, v) -> Evaluation:
        ev = self.fun(np.asarray(v, dtype=np.float64))
        self.evaluations += 1
        self.exp_calls += ev.exp_calls
        self.naive_pairs += ev.naive_pairs
        return ev


def penalized_objective(base: ObjectiveHandle) -> ObjectiveHandle:
    """Wrap *base* as ``f(v) - (<v, v> - 1)^2``.

    The gradient gains ``-4 v (<v, v> - 1)``; counters pass through.
    """

    def fun(v):
        ev = base(v)
        excess = float(v @ v) - 1.0
        value = ev.value - excess * excess
        grad = None if ev.gradient is None else ev.gradient - 4.0 * excess * v
        return Evaluation(value, grad, ev.exp_calls, ev.naive_pairs)

    return ObjectiveHandle(fun)


def dcs_objective(dataset, params, approx=None) -> ObjectiveHandle:
    """Raw (unpenalized) D_CS objective owning its own sort cache."""
    from .approx import ApproxConfig, SortCache
    from .potential import dcs_evaluate

    approx = approx or ApproxConfig()
    cache = SortCache() if approx.mode == "discard" else None

    def fun(v):
        res = dcs_evaluate(dataset, v, params, approx, want_gradient=True, cache=cache)
        return Evaluation(res.value, res.gradient, res.stats.exp_calls,
                          res.stats.naive_pairs)

    return ObjectiveHandle(fun)


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "cg"
    max_iterations: int = 500
    gradient_tolerance: float = 1e-5
    lbfgs_memory: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float | None = None
    max_line_search_steps: int = 40
    seed: int = 0
    armijo_fallback: bool = True

    def __post_init__(self):
        if self.method not in ("cg", "lbfgs"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_iterations < 0 or self.lbfgs_memory < 1 or self.max_line_search_steps < 1:
            raise ValueError("iteration limits must be positive")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if not 0 < self.wolfe_c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")

    @property
    def c2(self) -> float:
        if self.wolfe_c2 is not None:
            return self.wolfe_c2
        return 0.9 if self.method == "lbfgs" else 0.4


@dataclass(frozen=True)
class OptimizationResult:
    v_final: np.ndarray
    value_final: float
    iterations: int
    function_evaluations: int
    exp_calls_total: int
    converged: bool
    final_norm: float
    naive_pairs_total: int = 0
    message: str = ""
    fallback_steps: int = 0
    trace: tuple = field(default=(), repr=False)


# -- line search -------------------------------------------------------------

def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating two points with slopes, or None."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def _quad_min(a, fa, ga, b, fb):
    denom = 2.0 * (fb - fa - ga * (b - a))
    if denom <= 0:
        return None
    return a - ga * (b - a) ** 2 / denom


class _NoStep(LineSearchFailure):
    """Line search failure carrying the best sufficient-decrease trial seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def strong_wolfe(phi, f0, g0, alpha1, c1, c2, max_steps, alpha_max=1e10, xtol=1e-10):
    """Step length satisfying the strong Wolfe conditions for a minimization.

    ``phi(alpha)`` returns ``(f, slope, payload)``; a non-finite ``f`` is an
    infeasible trial and is bracketed away like an overly long step.
    Returns ``(alpha, f, slope, payload)``.  On failure the raised
    :class:`LineSearchFailure` has a ``best`` attribute holding the lowest
    trial that satisfied the sufficient decrease condition (or ``None``).
    """
    steps = 0
    best = None

    def trial(alpha):
        nonlocal steps, best
        if steps >= max_steps:
            raise _NoStep(f"no acceptable step after {steps} trials", best)
        steps += 1
        out = phi(alpha)
        f = out[0]
        if math.isfinite(f) and f <= f0 + c1 * alpha * g0 and (best is None or f < best[1]):
            best = (alpha, *out)
        return out

    def zoom(lo, hi):
        # lo/hi: (alpha, f, slope, payload); lo satisfies sufficient decrease
        while True:
            a_lo, f_lo, g_lo, _ = lo
            a_hi, f_hi, g_hi, _ = hi
            width = a_hi - a_lo
            if abs(width) <= xtol * max(abs(a_lo), abs(a_hi)):
                raise _NoStep("bracket collapsed", best)
            cand = None
            if math.isfinite(f_hi):
                if g_hi is not None:
                    cand = _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
                if cand is None:
                    cand = _quad_min(a_lo, f_lo, g_lo, a_hi, f_hi)
            left, right = sorted((a_lo, a_hi))
            guard = 0.1 * (right - left)
            if cand is None or not (left + guard <= cand <= right - guard):
                cand = 0.5 * (a_lo + a_hi)
            f, g, pay = trial(cand)
            if not math.isfinite(f) or f > f0 + c1 * cand * g0 or f >= f_lo:
                hi = (cand, f, g, pay)
            else:
                if abs(g) <= -c2 * g0:
                    return cand, f, g, pay
                if g * (a_hi - a_lo) >= 0:
                    hi = lo
                lo = (cand, f, g, pay)

    prev = (0.0, f0, g0, None)
    alpha = min(alpha1, alpha_max)
    first = True
    while True:
        f, g, pay = trial(alpha)
        cur = (alpha, f, g, pay)
        if not math.isfinite(f) or f > f0 + c1 * alpha * g0 or (not first and f >= prev[1]):
            return zoom(prev, cur)
        if abs(g) <= -c2 * g0:
            return cur
        if g >= 0:
            return zoom(cur, prev)
        if alpha >= alpha_max:
            raise _NoStep("step length reached alpha_max", best)
        prev = cur
        alpha = min(2.0 * alpha, alpha_max)
        first = False


# -- driver ------------------------------------------------------------------

def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def optimize(obj: ObjectiveHandle, v0, cfg: OptimizerConfig) -> OptimizationResult:
    """Maximize *obj* from *v0* with PR+ conjugate gradients or L-BFGS.

    Stops when ``max|grad| <= cfg.gradient_tolerance`` (converged) or after
    ``cfg.max_iterations`` accepted steps.  A failed line search ends the run
    at the best iterate with ``converged=False``; with ``cfg.armijo_fallback``
    the best sufficient-decrease trial of a failed search is taken first and
    the search direction restarted, and only a second consecutive failure
    ends the run.  Approximate objectives are piecewise smooth with small
    jumps, which the curvature condition cannot always accommodate.

    Raises
    ------
    NonFiniteObjective
        If the objective evaluates to NaN.
    """
    x = np.array(v0, dtype=np.float64)
    evals0, calls0, naive0 = obj.evaluations, obj.exp_calls, obj.naive_pairs

    def neg(v):
        ev = obj(v)
        if math.isnan(ev.value):
            raise NonFiniteObjective(f"objective is NaN at v={v!r}")
        if not math.isfinite(ev.value) or ev.gradient is None:
            return math.inf, None, ev
        return -ev.value, -ev.gradient, ev

    f, g, _ = neg(x)
    trace = [-f]
    iterations = 0
    fallback_steps = 0
    converged = False
    message = ""
    if g is None:
        message = "objective not finite at the starting point"
    else:
        d_prev = g_prev = None
        s_hist, y_hist = [], []
        f_prev = None
        c2 = cfg.c2
        failures = 0
        while True:
            if np.max(np.abs(g)) <= cfg.gradient_tolerance:
                converged = True
                message = "gradient tolerance reached"
                break
            if iterations >= cfg.max_iterations:
                message = "iteration limit reached"
                break
            if cfg.method == "cg":
                d = -g
                if d_prev is not None:
                    beta = max(0.0, g @ (g - g_prev) / (g_prev @ g_prev))
                    d = -g + beta * d_prev
                    if g @ d >= 0:
                        d = -g
            else:
                d = _two_loop(g, s_hist, y_hist)
                if g @ d >= 0:
                    s_hist.clear()
                    y_hist.clear()
                    d = -g
            slope0 = float(g @ d)
            if iterations == 0 or f_prev is None:
                alpha0 = min(1.0, 1.0 / np.linalg.norm(g))
            elif cfg.method == "cg":
                alpha0 = min(1.0, 1.01 * 2.0 * (f - f_prev) / slope0)
                if not alpha0 > 0:
                    alpha0 = 1.0
            else:
                alpha0 = 1.0

            def phi(alpha, x=x, d=d):
                fv, gv, ev = neg(x + alpha * d)
                slope = None if gv is None else float(gv @ d)
                return fv, slope, gv

            try:
                alpha, f_new, _, g_new = strong_wolfe(
                    phi, f, slope0, alpha0, cfg.wolfe_c1, c2, cfg.max_line_search_steps)
                failures = 0
            except LineSearchFailure as exc:
                best = getattr(exc, "best", None)
                failures += 1
                if not cfg.armijo_fallback or best is None or failures > 1:
                    message = f"line search failure: {exc}"
                    log.debug(message)
                    break
                # sufficient decrease only; restart the direction afterwards
                alpha, f_new, _, g_new = best
                fallback_steps += 1
                d_prev = None
                s_hist.clear()
                y_hist.clear()
            x_new = x + alpha * d
            if cfg.method == "lbfgs":
                s, y = x_new - x, g_new - g
                if s @ y > 1e-12 * (y @ y):
                    s_hist.append(s)
                    y_hist.append(y)
                    if len(s_hist) > cfg.lbfgs_memory:
                        s_hist.pop(0)
                        y_hist.pop(0)
            f_prev, g_prev = f, g
            if not failures:
                d_prev = d
            x, f, g = x_new, f_new, g_new
            iterations += 1
            trace.append(-f)

    return OptimizationResult(
        v_final=x,
        value_final=-f,
        iterations=iterations,
        function_evaluations=obj.evaluations - evals0,
        exp_calls_total=obj.exp_calls - calls0,
        converged=converged,
        final_norm=float(np.linalg.norm(x)),
        naive_pairs_total=obj.naive_pairs - naive0,
        message=message,
        fallback_steps=fallback_steps,
        trace=tuple(trace),
    )


def starting_points(seed, n_starts: int, dim: int) -> np.ndarray:
    """Unit-norm random starts; depend only on ``(seed, n_starts, dim)``."""
    rng = np.random.default_rng(seed)
    starts = rng.standard_normal((n_starts, dim))
    return starts / np.linalg.norm(starts, axis=1, keepdims=True)


def multi_restart(train_closure, n_starts: int, seed, dim: int,
                  runs: list | None = None) -> OptimizationResult:
    """Run *train_closure* from ``n_starts`` seeded starts and keep the best.

    Runs that raise :class:`NonFiniteObjective` or end at a non-finite value
    count as failures.  If *runs* is given every individual result (or the
    exception) is appended to it.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    best = None
    for v0 in starting_points(seed, n_starts, dim):
        try:
            res = train_closure(v0)
        except NonFiniteObjective as exc:
            if runs is not None:
                runs.append(exc)
            continue
        if runs is not None:
            runs.append(res)
        if not math.isfinite(res.value_final):
            continue
        if best is None or res.value_final > best.value_final:
            best = res
    if best is None:
        raise AllRunsFailed(f"all {n_starts} restarts ended at a non-finite value")
    return best
