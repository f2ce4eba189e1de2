"""Information potentials and the Cauchy-Schwarz divergence objective.

An information potential between two projected samples ``A`` and ``B`` with
kernel variance ``V`` is

    ip(A, B; V) = 1 / (sqrt(2 pi V) |A| |B|) * sum_{a, b} exp(-(a - b)^2 / (2 V))

and the divergence of the two projected class densities is

    D_CS = -2 log ip(X-, X+) + log ip(X-, X-) + log ip(X+, X+).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    KdeParams,
    LabeledDataset,
    VarianceProfile,
    project,
    sigma2_gradient,
    variance_profile,
)
from .errors import DegenerateProjection, EmptyInput, NonPositiveVariance

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PotentialValue:
    value: float
    gradient: np.ndarray | None
    exp_calls: int
    naive_pairs: int


class GradContext(NamedTuple):
    """What an evaluator needs to differentiate through the projection.

    ``dvar`` is the gradient of the kernel variance ``V`` with respect to
    the projection vector.
    """

    points_a: np.ndarray
    points_b: np.ndarray
    dvar: np.ndarray


class KernelSums(NamedTuple):
    total: float          # sum w e
    row: np.ndarray       # per-a sum of w e (a - b)
    col: np.ndarray       # per-b sum of w e (a - b)
    sq: float             # sum w e (a - b)^2


def check_inputs(proj_a, proj_b, var):
    a = np.asarray(proj_a, dtype=np.float64)
    b = np.asarray(proj_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise EmptyInput("information potential of an empty sample")
    if not var > 0:
        raise NonPositiveVariance(f"kernel variance must be positive, got {var}")
    return a, b


def prefactor(var: float, n_a: int, n_b: int) -> float:
    return 1.0 / (math.sqrt(TWO_PI * var) * n_a * n_b)


def dense_sums(a, b, var, weights_a=None, weights_b=None, need_grad=False) -> KernelSums:
    """Kernel sums over the full ``len(a) x len(b)`` grid of pairs."""
    diff = a[:, None] - b[None, :]
    e = np.exp(diff * diff * (-0.5 / var))
    if weights_a is not None:
        e *= weights_a[:, None]
        e *= weights_b[None, :]
    if not need_grad:
        return KernelSums(float(e.sum()), None, None, 0.0)
    ed = e * diff
    return KernelSums(float(e.sum()), ed.sum(axis=1), ed.sum(axis=0),
                      float((ed * diff).sum()))


def pair_sums(a, b, ia, ib, var, need_grad=False) -> KernelSums:
    """Kernel sums over an explicit list of ``(a[ia[k]], b[ib[k]])`` pairs."""
    diff = a[ia] - b[ib]
    e = np.exp(diff * diff * (-0.5 / var))
    if not need_grad:
        return KernelSums(float(e.sum()), None, None, 0.0)
    ed = e * diff
    row = np.bincount(ia, weights=ed, minlength=len(a))
    col = np.bincount(ib, weights=ed, minlength=len(b))
    return KernelSums(float(e.sum()), row, col, float((ed * diff).sum()))


def assemble(sums: KernelSums, var, n_a, n_b, ctx: GradContext | None):
    """Turn kernel sums into ``(value, gradient)``.

    The gradient has three parts: the pairwise projection term, the
    dependence of every exponent on ``V``, and the ``1/sqrt(V)`` prefactor.
    ``ctx.points_a`` / ``points_b`` must be aligned with ``sums.row`` /
    ``sums.col`` (original points, or bin representatives).
    """
    c = prefactor(var, n_a, n_b)
    value = c * sums.total
    if ctx is None:
        return value, None
    pair_term = (ctx.points_a.T @ sums.row - ctx.points_b.T @ sums.col) * (-c / var)
    var_term = (c * sums.sq / (2.0 * var * var) - value / (2.0 * var)) * ctx.dvar
    return value, pair_term + var_term


def ip_exact(proj_a, proj_b, var: float, want_gradient: bool = False,
             grad_context: GradContext | None = None) -> PotentialValue:
    """Information potential summed over every pair.

    Examples
    --------
    >>> round(ip_exact([0.0], [1.0], 1.0).value, 5)
    0.24197
    """
    a, b = check_inputs(proj_a, proj_b, var)
    if want_gradient and grad_context is None:
        raise ValueError("gradient requested without a GradContext")
    sums = dense_sums(a, b, var, need_grad=want_gradient)
    value, grad = assemble(sums, var, len(a), len(b),
                           grad_context if want_gradient else None)
    n = len(a) * len(b)
    return PotentialValue(value, grad, n, n)


@dataclass(frozen=True)
class EvalStats:
    exp_calls: int = 0
    naive_pairs: int = 0

    def __add__(self, other: "EvalStats") -> "EvalStats":
        return EvalStats(self.exp_calls + other.exp_calls,
                         self.naive_pairs + other.naive_pairs)


@dataclass(frozen=True)
class DcsValue:
    """Divergence value plus everything needed to audit it.

    ``partitions`` maps each term (``"cross"``, ``"neg"``, ``"pos"``) to the
    retained pair set or bin assignment the approximate evaluators used; feed
    it back through ``dcs_evaluate(frozen=...)`` to evaluate the same
    approximation at a nearby ``v``.
    """

    value: float
    gradient: np.ndarray | None
    stats: EvalStats
    terms: dict = field(default_factory=dict)
    profile: VarianceProfile | None = None
    partitions: dict = field(default_factory=dict)
    flags: tuple = ()


TERMS = ("cross", "neg", "pos")


def variance_gradients(dataset, proj_neg, proj_pos, prof: VarianceProfile):
    """``dV/dv`` for the cross, negative-self and positive-self variances."""
    gn = prof.kappa_neg * sigma2_gradient(dataset.points_neg, proj_neg)
    gp = prof.kappa_pos * sigma2_gradient(dataset.points_pos, proj_pos)
    return gn + gp, 2.0 * gn, 2.0 * gp


def _combine(ip_cross, ip_neg, ip_pos):
    """-2 log ip_x + log ip_-- + log ip_++ with deterministic zero handling."""
    flags = []
    if ip_neg <= 0.0 or ip_pos <= 0.0:
        flags.append("self_potential_underflow")
        if ip_cross <= 0.0:
            flags.append("cross_potential_underflow")
        return -math.inf, tuple(flags)
    if ip_cross <= 0.0:
        return math.inf, ("cross_potential_underflow",)
    return -2.0 * math.log(ip_cross) + math.log(ip_neg) + math.log(ip_pos), ()


def dcs_evaluate(dataset: LabeledDataset, v, params: KdeParams, evaluator=None,
                 want_gradient: bool = True, cache=None, frozen=None) -> DcsValue:
    """Cauchy-Schwarz divergence of the projected class KDEs.

    Parameters
    ----------
    evaluator : ApproxConfig, optional
        Which potential evaluator to use; exact summation by default.
    cache : SortCache, optional
        Sorting state reused between calls (discard mode only).
    frozen : dict, optional
        ``DcsValue.partitions`` of an earlier call. Approximate evaluators then
        reuse that pair set / bin assignment instead of recomputing it.

    A collapsed projection yields ``value = -inf`` and no gradient; so does a
    self potential that underflows to zero.  A cross potential of zero gives
    ``+inf``.  Both cases are listed in ``flags``.
    """
    from .approx import ApproxConfig, evaluate_term

    if evaluator is None:
        evaluator = ApproxConfig()
    v = np.asarray(v, dtype=np.float64)
    proj_neg = project(dataset.points_neg, v)
    proj_pos = project(dataset.points_pos, v)
    try:
        prof = variance_profile(dataset, v, params, proj_neg, proj_pos)
    except DegenerateProjection:
        return DcsValue(-math.inf, None, EvalStats(), flags=("degenerate_projection",))

    if cache is not None and evaluator.mode == "discard":
        cache.update(proj_neg, proj_pos)
        orders = (cache.perm_neg, cache.perm_pos)
    else:
        orders = (None, None)

    dvars = (None, None, None)
    if want_gradient:
        dvars = variance_gradients(dataset, proj_neg, proj_pos, prof)
    X = {"neg": dataset.points_neg, "pos": dataset.points_pos}
    P = {"neg": proj_neg, "pos": proj_pos}
    O = {"neg": orders[0], "pos": orders[1]}
    layout = {
        "cross": ("neg", "pos", prof.v_cross, dvars[0]),
        "neg": ("neg", "neg", prof.v_self_neg, dvars[1]),
        "pos": ("pos", "pos", prof.v_self_pos, dvars[2]),
    }
    terms, parts = {}, {}
    stats = EvalStats()
    for name in TERMS:
        ca, cb, var, dvar = layout[name]
        pv, part = evaluate_term(
            evaluator, P[ca], P[cb], X[ca], X[cb], var,
            order_a=O[ca], order_b=O[cb],
            want_gradient=want_gradient, dvar=dvar,
            frozen=None if frozen is None else frozen.get(name),
        )
        terms[name] = pv
        parts[name] = part
        stats = stats + EvalStats(pv.exp_calls, pv.naive_pairs)

    value, flags = _combine(terms["cross"].value, terms["neg"].value, terms["pos"].value)
    grad = None
    if want_gradient and math.isfinite(value):
        grad = (-2.0 * terms["cross"].gradient / terms["cross"].value
                + terms["neg"].gradient / terms["neg"].value
                + terms["pos"].gradient / terms["pos"].value)
    return DcsValue(value, grad, stats, terms, prof, parts, flags)
