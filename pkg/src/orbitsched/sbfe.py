"""Reference policies for filter ordering and the benchmark suite.

Every policy here works on the *residual* of a formula: the multiset of
still-live terms, each reduced to its unevaluated filters, plus the set of
loaded backbones that still matter.  Confidence, liveness, utility and
effective time are all functions of that residual, so expected costs can be
memoized on it instead of on full execution histories.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .formula import (
    DnfFormula,
    ExecutionState,
    FilterCatalog,
    Term,
    encode_formula,
    evaluate,
)
from .runtime import prioritize_reference, static_choice, greedy_choice

EXACT_MAX_FILTERS = 20


class SolverCapacityError(ValueError):
    """Formula too large for exhaustive search; callers must truncate it."""


class EvaluationPolicy(Protocol):
    def __call__(self, formula: DnfFormula, state: ExecutionState, catalog: FilterCatalog) -> int | None: ...


# ---------------------------------------------------------------------------
# Residual-state machinery
# ---------------------------------------------------------------------------

class _Residual:
    """Bitmask view of one formula for residual-state recursions."""

    def __init__(self, formula: DnfFormula, catalog: FilterCatalog):
        self.fids = sorted(formula.filter_ids)
        pos = {fid: i for i, fid in enumerate(self.fids)}
        filters = [catalog[f] for f in self.fids]
        self.p = [f.pass_prob for f in filters]
        self.tpr = [f.tpr for f in filters]
        self.head = [f.head_time for f in filters]
        bb_ids = sorted({f.backbone for f in filters if f.backbone is not None})
        bb_pos = {b: k for k, b in enumerate(bb_ids)}
        self.bb_bit = [0 if f.backbone is None else 1 << bb_pos[f.backbone] for f in filters]
        self.bb_time = [0.0 if f.backbone is None else catalog.backbones[f.backbone].load_time for f in filters]
        self.root = tuple(sorted(sum(1 << pos[f] for f in t.filters) for t in formula.terms))
        self.pos = pos
        self._prod: dict[int, float] = {}

    def prod(self, mask: int) -> float:
        got = self._prod.get(mask)
        if got is None:
            got = 1.0
            m, i = mask, 0
            while m:
                if m & 1:
                    got *= self.p[i]
                m >>= 1
                i += 1
            self._prod[mask] = got
        return got

    def confidence(self, masks) -> float:
        miss = 1.0
        for m in masks:
            miss *= 1.0 - self.prod(m)
        return 1.0 - miss

    def relevant_bb(self, union: int) -> int:
        out, i = 0, 0
        while union:
            if union & 1:
                out |= self.bb_bit[i]
            union >>= 1
            i += 1
        return out

    def t_eff(self, i: int, loaded: int) -> float:
        bit = self.bb_bit[i]
        if bit == 0 or loaded & bit:
            return self.head[i]
        return self.head[i] + self.bb_time[i]

    def children(self, masks, i: int):
        """Residuals after filter i passes / fails.  ``None`` marks a decided
        (terminal) residual."""
        bit = 1 << i
        passed = []
        for m in masks:
            if m & bit:
                m &= ~bit
                if m == 0:
                    passed = None
                    break
            passed.append(m)
        failed = [m for m in masks if not m & bit]
        return (tuple(sorted(passed)) if passed is not None else None), (tuple(failed) if failed else None)

    def key(self, masks, loaded: int):
        union = 0
        for m in masks:
            union |= m
        return masks, loaded & self.relevant_bb(union), union

    def from_state(self, formula: DnfFormula, state: ExecutionState):
        masks = []
        for t in formula.terms:
            m, dead = 0, False
            for f in t.filters:
                v = state.outcomes.get(f)
                if v is None:
                    m |= 1 << self.pos[f]
                elif not v:
                    dead = True
                    break
            if dead:
                continue
            if m == 0:
                return None, 0
            masks.append(m)
        if not masks:
            return None, 0
        loaded = 0
        for f in state.outcomes:
            if f in self.pos:
                loaded |= self.bb_bit[self.pos[f]]
        return tuple(sorted(masks)), loaded


def _in_band(res: _Residual, masks, beta: float, alpha: float) -> bool:
    return beta <= res.confidence(masks) <= alpha


# ---------------------------------------------------------------------------
# Exact policy
# ---------------------------------------------------------------------------

class ExactPolicy:
    """Expected-cost-optimal adaptive policy (memoized recursion).

    ``expected_cost`` is the minimum over all adaptive policies of the expected
    sum of effective times until the confidence leaves [beta, alpha] or the
    formula is decided, with filter outcomes independent with probability
    ``pass_prob``.
    """

    def __init__(self, formula: DnfFormula, catalog: FilterCatalog, beta: float = 0.0, alpha: float = 1.0):
        if len(formula.filter_ids) > EXACT_MAX_FILTERS:
            raise SolverCapacityError(
                f"formula has {len(formula.filter_ids)} filters; exact solver is capped at {EXACT_MAX_FILTERS}"
            )
        self.formula = formula
        self.catalog = catalog
        self.beta, self.alpha = beta, alpha
        self._res = _Residual(formula, catalog)
        self._memo: dict = {}
        self.expected_cost = self._value(self._res.root, 0)

    @property
    def states_explored(self) -> int:
        return len(self._memo)

    def _value(self, masks, loaded) -> float:
        if masks is None:
            return 0.0
        res = self._res
        key = res.key(masks, loaded)
        hit = self._memo.get(key[:2])
        if hit is not None:
            return hit[0]
        masks, loaded, union = key
        if not _in_band(res, masks, self.beta, self.alpha):
            self._memo[(masks, loaded)] = (0.0, None)
            return 0.0
        best, best_i = math.inf, None
        i, u = 0, union
        while u:
            if u & 1:
                bit = res.bb_bit[i]
                nl = loaded | bit
                passed, failed = res.children(masks, i)
                p = res.p[i]
                cost = res.t_eff(i, loaded)
                if p > 0.0:
                    cost += p * self._value(passed, nl)
                if p < 1.0:
                    cost += (1.0 - p) * self._value(failed, nl)
                if cost < best - 1e-15:
                    best, best_i = cost, i
            u >>= 1
            i += 1
        self._memo[(masks, loaded)] = (best, best_i)
        return best

    def __call__(self, formula: DnfFormula, state: ExecutionState, catalog: FilterCatalog) -> int | None:
        masks, loaded = self._res.from_state(formula, state)
        if masks is None:
            return None
        self._value(masks, loaded)
        masks_k, loaded_k, _ = self._res.key(masks, loaded)
        _, i = self._memo[(masks_k, loaded_k)]
        return None if i is None else self._res.fids[i]


def exact_policy(formula: DnfFormula, catalog: FilterCatalog, beta: float = 0.0, alpha: float = 1.0) -> ExactPolicy:
    return ExactPolicy(formula, catalog, beta, alpha)


# ---------------------------------------------------------------------------
# Expected cost of arbitrary policies
# ---------------------------------------------------------------------------

def _greedy_index(res: _Residual, masks, loaded, union) -> int:
    best, best_u, i, u = -1, -1.0, 0, union
    while u:
        if u & 1:
            bit = 1 << i
            n = sum(1 for m in masks if m & bit)
            util = (1.0 - res.p[i]) * res.tpr[i] * n / res.t_eff(i, loaded)
            if util > best_u:
                best, best_u = i, util
        u >>= 1
        i += 1
    return best


def _static_index(res: _Residual, masks, loaded, union) -> int:
    best, best_t, i, u = -1, math.inf, 0, union
    while u:
        if u & 1 and res.head[i] < best_t:
            best, best_t = i, res.head[i]
        u >>= 1
        i += 1
    return best


_SELECTORS = {"greedy": _greedy_index, "static": _static_index}


def policy_expected_cost(
    formula: DnfFormula,
    catalog: FilterCatalog,
    policy: str = "greedy",
    beta: float = 0.0,
    alpha: float = 1.0,
) -> float:
    """Expected effective-time cost of the greedy or static policy."""
    res = _Residual(formula, catalog)
    pick = _SELECTORS[policy]
    memo: dict = {}

    def value(masks, loaded):
        if masks is None:
            return 0.0
        masks, loaded, union = res.key(masks, loaded)
        k = (masks, loaded)
        if k in memo:
            return memo[k]
        if not _in_band(res, masks, beta, alpha):
            memo[k] = 0.0
            return 0.0
        i = pick(res, masks, loaded, union)
        passed, failed = res.children(masks, i)
        p = res.p[i]
        nl = loaded | res.bb_bit[i]
        cost = res.t_eff(i, loaded)
        if p > 0.0:
            cost += p * value(passed, nl)
        if p < 1.0:
            cost += (1.0 - p) * value(failed, nl)
        memo[k] = cost
        return cost

    return value(res.root, 0)


def greedy_policy(formula: DnfFormula, catalog: FilterCatalog) -> EvaluationPolicy:
    return greedy_choice


def static_baseline_policy(formula: DnfFormula, catalog: FilterCatalog) -> EvaluationPolicy:
    """Filters in ascending execution time; a failed filter kills the rest of
    its term, a satisfied term ends evaluation."""
    return static_choice


def run_policy(
    policy: EvaluationPolicy,
    formula: DnfFormula,
    catalog: FilterCatalog,
    truth: Mapping[int, bool],
    beta: float = 0.0,
    alpha: float = 1.0,
) -> tuple[list[int], float]:
    """Execute a policy against a ground-truth outcome vector.  Returns the
    executed filters and their summed effective time."""
    _, run, _ = prioritize_reference(
        formula, catalog, alpha, beta, lambda f: bool(truth[f.id]), choose=policy
    )
    return run, trace_cost(run, catalog)


def trace_cost(filters_run: Sequence[int], catalog: FilterCatalog) -> float:
    loaded = set()
    total = 0.0
    for fid in filters_run:
        f = catalog[fid]
        total += f.head_time
        if f.backbone is not None and f.backbone not in loaded:
            loaded.add(f.backbone)
            total += catalog.backbones[f.backbone].load_time
    return total


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------

def oracle_policy(formula: DnfFormula, truth: Mapping[int, bool], catalog: FilterCatalog) -> list[int]:
    """Cheapest set of filters whose true outcomes decide the formula, ordered
    so filters sharing a backbone run back to back."""
    if len(formula.filter_ids) > EXACT_MAX_FILTERS:
        raise SolverCapacityError(f"oracle is capped at {EXACT_MAX_FILTERS} filters")
    if evaluate(formula, truth):
        best, best_cost = None, math.inf
        for term in formula.terms:
            if all(truth[f] for f in term.filters):
                cost = trace_cost(sorted(term.filters), catalog)
                if cost < best_cost:
                    best, best_cost = set(term.filters), cost
        return _certificate_order(best, catalog)

    # hitting set of failing filters, one per term (branch and bound)
    terms = [sorted(f for f in t.filters if not truth[f]) for t in formula.terms]
    terms.sort(key=len)
    best: list = [None, math.inf]

    def search(k: int, chosen: frozenset, cost: float):
        if cost >= best[1]:
            return
        while k < len(terms) and chosen.intersection(terms[k]):
            k += 1
        if k == len(terms):
            best[0], best[1] = chosen, cost
            return
        for fid in terms[k]:
            nxt = chosen | {fid}
            search(k + 1, nxt, trace_cost(sorted(nxt), catalog))

    search(0, frozenset(), 0.0)
    return _certificate_order(set(best[0]), catalog)


def _certificate_order(fids, catalog: FilterCatalog) -> list[int]:
    def key(fid):
        b = catalog[fid].backbone
        return (-1 if b is None else b, fid)
    return sorted(fids, key=key)


# ---------------------------------------------------------------------------
# Suite generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteItem:
    scenario: str
    formula: DnfFormula


def truncate_formula(formula: DnfFormula, max_filters: int, rng: random.Random) -> DnfFormula:
    """Keep terms (in random order) while the formula has at most
    ``max_filters`` distinct filters; the first term is itself truncated if
    it alone is too large."""
    terms = list(formula.terms)
    rng.shuffle(terms)
    kept: list[Term] = []
    used: set = set()
    seen: set = set()
    for term in terms:
        fs = set(term.filters)
        if len(used | fs) > max_filters:
            if kept:
                continue
            fs = set(rng.sample(sorted(fs), max_filters))
        fs = frozenset(fs)
        if fs in seen:
            continue
        seen.add(fs)
        used |= fs
        kept.append(Term(fs, term.priority))
    return DnfFormula(tuple(kept))


def generate_suite(
    pools: Mapping[str, Sequence[DnfFormula]],
    max_filters: int = 15,
    count: int = 2473,
    seed: int = 0,
) -> list[SuiteItem]:
    """Seeded benchmark suite drawn round-robin from per-scenario formula pools."""
    if not pools or not any(pools.values()):
        raise ValueError("scenario query pool is empty")
    rng = random.Random(seed)
    names = sorted(n for n, pool in pools.items() if pool)
    out = []
    for k in range(count):
        name = names[k % len(names)]
        pool = pools[name]
        formula = pool[rng.randrange(len(pool))]
        out.append(SuiteItem(name, truncate_formula(formula, max_filters, rng)))
    return out


def suite_bytes(items: Iterable[SuiteItem]) -> bytes:
    return b"".join(it.scenario.encode() + b"\0" + encode_formula(it.formula) for it in items)


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

def sample_truth(formula: DnfFormula, catalog: FilterCatalog, rng: random.Random) -> dict[int, bool]:
    return {fid: rng.random() < catalog[fid].pass_prob for fid in sorted(formula.filter_ids)}


@dataclass
class PolicyBenchResult:
    beta: float
    alpha: float
    n_formulas: int
    skipped: int
    costs: dict = field(default_factory=dict)  # policy -> list of per-formula times

    def mean(self, policy: str) -> float:
        return statistics.fmean(self.costs[policy]) if self.costs[policy] else float("nan")

    def median(self, policy: str) -> float:
        return statistics.median(self.costs[policy]) if self.costs[policy] else float("nan")

    @property
    def relative_error(self) -> float:
        """(greedy - exact) / exact on mean evaluation time."""
        return (self.mean("greedy") - self.mean("exact")) / self.mean("exact")

    def table(self) -> list[dict]:
        return [
            {"policy": p, "mean_s": round(self.mean(p), 6), "median_s": round(self.median(p), 6)}
            for p in self.costs
        ]


def bench_suite(
    items: Sequence[SuiteItem],
    catalogs: Mapping[str, FilterCatalog],
    beta: float = 0.0,
    alpha: float = 1.0,
    seed: int = 0,
    exact_cap: int = EXACT_MAX_FILTERS,
    progress: Callable[[int], None] | None = None,
) -> PolicyBenchResult:
    """Expected evaluation time per formula for greedy, exact and static
    policies; the oracle and the ``*_sampled`` columns use one seeded ground
    truth per formula."""
    result = PolicyBenchResult(beta, alpha, 0, 0, {
        "greedy": [], "exact": [], "oracle": [], "static": [], "exact_sampled": [], "greedy_sampled": [],
    })
    for k, item in enumerate(items):
        catalog = catalogs[item.scenario]
        if len(item.formula.filter_ids) > exact_cap:
            result.skipped += 1
            continue
        rng = random.Random(f"{seed}:{k}")
        exact = ExactPolicy(item.formula, catalog, beta, alpha)
        result.costs["exact"].append(exact.expected_cost)
        result.costs["greedy"].append(policy_expected_cost(item.formula, catalog, "greedy", beta, alpha))
        result.costs["static"].append(policy_expected_cost(item.formula, catalog, "static", beta, alpha))
        truth = sample_truth(item.formula, catalog, rng)
        result.costs["oracle"].append(trace_cost(oracle_policy(item.formula, truth, catalog), catalog))
        result.costs["exact_sampled"].append(run_policy(exact, item.formula, catalog, truth, beta, alpha)[1])
        result.costs["greedy_sampled"].append(run_policy(greedy_choice, item.formula, catalog, truth, beta, alpha)[1])
        result.n_formulas += 1
        if progress is not None:
            progress(k)
    return result
