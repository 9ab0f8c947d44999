"""Onboard prioritization: utility-ordered filter execution with an adaptive
confidence band, plus the CPU/xPU timing model.

The hot loop in :func:`prioritize_image` works on a :class:`CompiledFormula`
(flat lists indexed by filter position) so the simulator can prioritize tens
of thousands of images per run.  The public helpers (:func:`effective_time`,
:func:`utility`, :func:`greedy_choice`, ...) are the readable versions of the
same rules and are what the tests check the compiled path against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

from .formula import (
    P_COMPUTE,
    CatalogError,
    DnfFormula,
    ExecutionState,
    Filter,
    FilterCatalog,
    confidence,
    decided_priority,
    is_decided,
    live_terms,
    priority_label,
    term_alive,
)

ALPHA_FLOOR_EPS = 0.01


# ---------------------------------------------------------------------------
# Cost and utility
# ---------------------------------------------------------------------------

def effective_time(filt: Filter, state: ExecutionState, catalog: FilterCatalog) -> float:
    if filt.backbone is None or filt.backbone in state.loaded_backbones:
        return filt.head_time
    return filt.head_time + catalog.backbones[filt.backbone].load_time


def live_term_count(fid: int, formula: DnfFormula, state: ExecutionState) -> int:
    return sum(1 for t in formula.terms if fid in t.filters and term_alive(t, state))


def utility(filt: Filter, formula: DnfFormula, state: ExecutionState, catalog: FilterCatalog) -> float:
    n = live_term_count(filt.id, formula, state)
    if n == 0:
        return 0.0
    return (1.0 - filt.pass_prob) * filt.tpr * n / effective_time(filt, state, catalog)


def _candidates(formula: DnfFormula, state: ExecutionState) -> list[int]:
    alive = live_terms(formula, state)
    ids = set()
    for t in alive:
        ids.update(f for f in t.filters if f not in state.outcomes)
    return sorted(ids)


def greedy_choice(formula: DnfFormula, state: ExecutionState, catalog: FilterCatalog) -> int | None:
    """Unevaluated live filter with the highest utility; lowest id wins ties."""
    best, best_u = None, -1.0
    for fid in _candidates(formula, state):
        u = utility(catalog[fid], formula, state, catalog)
        if u > best_u:
            best, best_u = fid, u
    return best


def static_choice(formula: DnfFormula, state: ExecutionState, catalog: FilterCatalog) -> int | None:
    """Cheapest unevaluated live filter by its own execution time (no state, no
    probabilities); lowest id wins ties."""
    cands = _candidates(formula, state)
    if not cands:
        return None
    return min(cands, key=lambda fid: (catalog[fid].head_time, fid))


# ---------------------------------------------------------------------------
# Adaptive threshold
# ---------------------------------------------------------------------------

@dataclass
class ThresholdController:
    alpha: float = 0.90
    beta: float = 0.01
    lambda1: float = 0.05
    lambda2: float = 0.10
    target_power_fraction: float = 0.70
    # None disables the rejection-rate term (no look-ahead target available)
    target_reject_rate: float | None = 0.0
    dep_count: int = 0
    computed_count: int = 0
    dynamic: bool = True

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.beta < self.alpha:
            raise ValueError(f"need beta < alpha, got beta={self.beta} alpha={self.alpha}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("gains must be non-negative")
        if not 0.0 < self.target_power_fraction <= 1.0:
            raise ValueError("target_power_fraction must be in (0, 1]")

    @property
    def r_dep(self) -> float:
        return self.dep_count / max(1, self.computed_count)

    def record(self, priority) -> None:
        self.computed_count += 1
        if priority == P_COMPUTE:
            self.dep_count += 1


def update_alpha(controller: ThresholdController, power_ratio: float) -> float:
    """One step of the threshold update; returns (and stores) the new alpha.

    ``power_ratio`` is current charge over target charge.
    """
    if not controller.dynamic:
        return controller.alpha
    step = controller.lambda1 * (power_ratio - 1.0)
    if controller.target_reject_rate is not None:
        step += controller.lambda2 * (controller.r_dep - controller.target_reject_rate)
    alpha = min(1.0, controller.alpha + step)
    controller.alpha = max(min(1.0, controller.beta + ALPHA_FLOOR_EPS), alpha)
    return controller.alpha


# ---------------------------------------------------------------------------
# CPU/xPU timing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimingModel:
    """Per-filter overheads around xPU execution.

    Sequential mode pays select + load + execute + comm for every filter.
    Pipelined mode hides the selection and loading of filter k+1 under the
    execution of filter k, unless the prefetch guessed the wrong filter.
    """

    mode: str = "pipelined"
    select_time: float = 0.0
    load_time: float = 0.0
    comm_overhead: float = 0.0
    prefetch_hit_prob: float = 1.0

    def __post_init__(self):
        if self.mode not in ("sequential", "pipelined"):
            raise ValueError(f"unknown timing mode {self.mode!r}")
        for name in ("select_time", "load_time", "comm_overhead"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if not 0.0 <= self.prefetch_hit_prob <= 1.0:
            raise ValueError("prefetch_hit_prob must be in [0, 1]")


def sequence_time(exec_times: Sequence[float], timing: TimingModel, rng=None) -> float:
    """Wall time to run filters whose effective execution times are ``exec_times``.

    ``rng`` (anything with ``.random()``) samples prefetch hits; it is only
    consulted when the hit probability is strictly between 0 and 1.
    """
    prep = timing.select_time + timing.load_time
    total = 0.0
    for k, t in enumerate(exec_times):
        total += prep + t + timing.comm_overhead
        if k == 0 or timing.mode == "sequential":
            continue
        p = timing.prefetch_hit_prob
        if p >= 1.0:
            hit = True
        elif p <= 0.0:
            hit = False
        else:
            hit = rng.random() < p
        if hit:
            total -= min(prep, exec_times[k - 1])
    return total


# ---------------------------------------------------------------------------
# Outcomes
# ---------------------------------------------------------------------------

class OutcomeSource(Protocol):
    def __call__(self, filt: Filter) -> bool: ...


class SimulatedOutcomes:
    """Noisy filter reports over a hidden ground-truth vector.

    ``uniforms[fid]`` is the pre-drawn uniform for that filter on this image;
    drawing per (image, filter) keeps error sets nested across accuracy
    sweeps run on the same seed.
    """

    def __init__(self, truth: Mapping[int, bool], uniforms: Mapping[int, float]):
        self.truth = truth
        self.uniforms = uniforms

    def __call__(self, filt: Filter) -> bool:
        u = self.uniforms[filt.id]
        if self.truth[filt.id]:
            return u < filt.tpr
        return u < filt.fpr


class TruthOutcomes:
    """Filters report ground truth exactly."""

    def __init__(self, truth: Mapping[int, bool]):
        self.truth = truth

    def __call__(self, filt: Filter) -> bool:
        return bool(self.truth[filt.id])


# ---------------------------------------------------------------------------
# Compiled formulas
# ---------------------------------------------------------------------------

class CompiledFormula:
    """Flat, index-based view of a formula against one catalog."""

    __slots__ = (
        "formula", "catalog", "fids", "filters", "p", "tpr", "head", "static_time",
        "bb", "bb_time", "terms", "term_prio", "filter_terms",
    )

    def __init__(self, formula: DnfFormula, catalog: FilterCatalog):
        self.formula = formula
        self.catalog = catalog
        fids = sorted(formula.filter_ids)
        pos = {fid: i for i, fid in enumerate(fids)}
        self.fids = fids
        self.filters = [catalog[fid] for fid in fids]
        self.p = [f.pass_prob for f in self.filters]
        self.tpr = [f.tpr for f in self.filters]
        self.head = [f.head_time for f in self.filters]
        self.bb = [-1 if f.backbone is None else f.backbone for f in self.filters]
        self.bb_time = [0.0 if f.backbone is None else catalog.backbones[f.backbone].load_time
                        for f in self.filters]
        self.static_time = self.head
        self.terms = [tuple(sorted(pos[fid] for fid in t.filters)) for t in formula.terms]
        self.term_prio = [t.priority for t in formula.terms]
        self.filter_terms = [[] for _ in fids]
        for ti, members in enumerate(self.terms):
            for i in members:
                self.filter_terms[i].append(ti)


_COMPILED: dict = {}


def compile_formula(formula: DnfFormula, catalog: FilterCatalog) -> CompiledFormula:
    key = (formula, id(catalog))
    hit = _COMPILED.get(key)
    if hit is not None and hit.catalog is catalog:
        return hit
    for fid in formula.filter_ids:
        if fid not in catalog:
            raise CatalogError(f"unknown filter id {fid}")
    if len(_COMPILED) > 50_000:
        _COMPILED.clear()
    cf = _COMPILED[key] = CompiledFormula(formula, catalog)
    return cf


# ---------------------------------------------------------------------------
# Per-image prioritization loop
# ---------------------------------------------------------------------------

@dataclass
class PrioritizationResult:
    priority: float
    filters_run: tuple
    outcomes: dict
    exec_times: tuple
    compute_time: float
    energy: float
    final_confidence: float
    confidences: tuple
    alpha: float
    beta: float
    reason: str  # satisfied | confident | rejected | exhausted

    @property
    def exec_total(self) -> float:
        return sum(self.exec_times)

    def trace_record(self, image_id=None) -> dict:
        return {
            "image": image_id,
            "filters_run": list(self.filters_run),
            "filter_times": [round(t, 9) for t in self.exec_times],
            "confidence": [round(c, 12) for c in self.confidences],
            "alpha": round(self.alpha, 12),
            "priority": priority_label(self.priority),
            "reason": self.reason,
            "compute_time": round(self.compute_time, 9),
        }


def prioritize_image(
    formula: DnfFormula,
    catalog: FilterCatalog,
    controller: ThresholdController,
    outcome_source: Callable[[Filter], bool],
    timing: TimingModel = TimingModel(),
    rng=None,
    order: str = "utility",
    compute_power: float = 0.0,
    reject_priority=P_COMPUTE,
) -> PrioritizationResult:
    """Run filters on one image until its confidence leaves [beta, alpha].

    ``order`` is ``"utility"`` (greedy cost-benefit ordering) or ``"static"``
    (ascending filter time, the ordering used by the comparison baseline).
    Rejected images get ``reject_priority``.
    """
    cf = compile_formula(formula, catalog)
    alpha, beta = controller.alpha, controller.beta
    if not beta < alpha:
        raise ValueError("need beta < alpha")
    static = order == "static"
    if not static and order != "utility":
        raise ValueError(f"unknown order {order!r}")

    n_f = len(cf.fids)
    n_t = len(cf.terms)
    p, tpr, head, bb, bb_time = cf.p, cf.tpr, cf.head, cf.bb, cf.bb_time
    filter_terms = cf.filter_terms
    done = [False] * n_f
    term_dead = [False] * n_t
    term_left = [len(m) for m in cf.terms]
    term_prob = []
    for members in cf.terms:
        prod = 1.0
        for i in members:
            prod *= p[i]
        term_prob.append(prod)
    alive = [len(ft) for ft in filter_terms]  # live-term count per filter
    loaded = set()
    run: list[int] = []
    outcomes: dict[int, bool] = {}
    times: list[float] = []

    def conf() -> float:
        miss = 1.0
        for ti in range(n_t):
            if not term_dead[ti]:
                miss *= 1.0 - term_prob[ti]
        return 1.0 - miss

    c = conf()
    trajectory = [c]
    satisfied = False
    n_alive_terms = n_t
    while beta <= c <= alpha and not satisfied and n_alive_terms:
        best, best_u = -1, -1.0
        if static:
            best_t = math.inf
            for i in range(n_f):
                if not done[i] and alive[i] and head[i] < best_t:
                    best, best_t = i, head[i]
        else:
            for i in range(n_f):
                if done[i] or not alive[i]:
                    continue
                t = head[i] if (bb[i] < 0 or bb[i] in loaded) else head[i] + bb_time[i]
                u = (1.0 - p[i]) * tpr[i] * alive[i] / t
                if u > best_u:
                    best, best_u = i, u
        if best < 0:
            break
        i = best
        t = head[i] if (bb[i] < 0 or bb[i] in loaded) else head[i] + bb_time[i]
        if bb[i] >= 0:
            loaded.add(bb[i])
        v = bool(outcome_source(cf.filters[i]))
        done[i] = True
        fid = cf.fids[i]
        run.append(fid)
        outcomes[fid] = v
        times.append(t)
        for ti in filter_terms[i]:
            if term_dead[ti]:
                continue
            if v:
                term_left[ti] -= 1
                prod = 1.0
                for j in cf.terms[ti]:
                    if not done[j]:
                        prod *= p[j]
                term_prob[ti] = prod
                if term_left[ti] == 0:
                    satisfied = True
            else:
                term_dead[ti] = True
                n_alive_terms -= 1
                for j in cf.terms[ti]:
                    alive[j] -= 1
        c = 1.0 if satisfied else conf()
        trajectory.append(c)

    if satisfied:
        prio = max(cf.term_prio[ti] for ti in range(n_t) if not term_dead[ti] and term_left[ti] == 0)
        reason = "satisfied"
    elif n_alive_terms and c > alpha:
        prio = max(cf.term_prio[ti] for ti in range(n_t) if not term_dead[ti])
        reason = "confident"
    elif n_alive_terms and c >= beta:
        prio = reject_priority
        reason = "exhausted"
    else:
        prio = reject_priority
        reason = "rejected"

    compute = sequence_time(times, timing, rng) if times else 0.0
    return PrioritizationResult(
        priority=prio,
        filters_run=tuple(run),
        outcomes=outcomes,
        exec_times=tuple(times),
        compute_time=compute,
        energy=compute * compute_power,
        final_confidence=c,
        confidences=tuple(trajectory),
        alpha=alpha,
        beta=beta,
        reason=reason,
    )


def prioritize_reference(
    formula: DnfFormula,
    catalog: FilterCatalog,
    alpha: float,
    beta: float,
    outcome_source: Callable[[Filter], bool],
    choose=greedy_choice,
    state: ExecutionState | None = None,
):
    """Straight transcription of the runtime loop over the public helpers.

    Returns (priority, filters_run, state).  Used as a cross-check for the
    compiled loop and by the benchmark policies.
    """
    state = state.copy() if state is not None else ExecutionState()
    c = confidence(formula, state, catalog)
    run = []
    while beta <= c <= alpha and not is_decided(formula, state):
        fid = choose(formula, state, catalog)
        if fid is None:
            break
        state.record(catalog[fid], outcome_source(catalog[fid]))
        run.append(fid)
        c = confidence(formula, state, catalog)
    got = decided_priority(formula, state)
    if got is not None:
        return got, run, state
    alive = live_terms(formula, state)
    if alive and c > alpha:
        return max(t.priority for t in alive), run, state
    return P_COMPUTE, run, state
