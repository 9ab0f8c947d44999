"""Brute-force reference implementations used by ``verify`` and the tests.

These are deliberately naive: explicit outcome enumeration and unmemoized
decision-tree search, sharing nothing with the optimized code paths beyond
the data types.
"""

from __future__ import annotations

import itertools
import math
import random

from .codec import decode_schedule, encode_schedule
from .formula import (
    Backbone,
    DnfFormula,
    ExecutionState,
    Filter,
    FilterCatalog,
    Term,
    confidence,
    is_decided,
)
from .ground import ScheduleEntry, merge_slots
from .metrics import percentile


def confidence_bruteforce(formula: DnfFormula, state: ExecutionState, catalog: FilterCatalog) -> float:
    """P(formula true | executed outcomes) by enumerating the unexecuted filters."""
    free = sorted(f for f in formula.filter_ids if f not in state.outcomes)
    total = 0.0
    for bits in itertools.product((False, True), repeat=len(free)):
        w = 1.0
        full = dict(state.outcomes)
        for fid, b in zip(free, bits):
            p = catalog[fid].pass_prob
            w *= p if b else 1.0 - p
            full[fid] = b
        if any(all(full[f] for f in t.filters) for t in formula.terms):
            total += w
    return total


def _t_eff(catalog: FilterCatalog, fid: int, loaded: set) -> float:
    f = catalog[fid]
    if f.backbone is None or f.backbone in loaded:
        return f.head_time
    return f.head_time + catalog.backbones[f.backbone].load_time


def decision_tree_minimum(formula: DnfFormula, catalog: FilterCatalog, beta: float = 0.0, alpha: float = 1.0) -> float:
    """Minimum expected cost over every adaptive decision tree (no memoization)."""

    def value(outcomes: dict, loaded: frozenset) -> float:
        state = ExecutionState(outcomes, loaded)
        if is_decided(formula, state):
            return 0.0
        c = confidence(formula, state, catalog)
        if c < beta or c > alpha:
            return 0.0
        best = math.inf
        for fid in sorted(formula.filter_ids - outcomes.keys()):
            f = catalog[fid]
            nl = loaded | ({f.backbone} if f.backbone is not None else set())
            cost = _t_eff(catalog, fid, set(loaded))
            for outcome, w in ((True, f.pass_prob), (False, 1.0 - f.pass_prob)):
                if w > 0:
                    cost += w * value({**outcomes, fid: outcome}, frozenset(nl))
            best = min(best, cost)
        return best

    return value({}, frozenset())


# -- random instance generators ---------------------------------------------------

def random_catalog(rng: random.Random, n_filters: int, n_backbones: int = 0) -> FilterCatalog:
    bbs = [Backbone(b, rng.uniform(0.2, 2.0)) for b in range(n_backbones)]
    filters = []
    for fid in range(1, n_filters + 1):
        bb = rng.randrange(n_backbones) if n_backbones and rng.random() < 0.7 else None
        filters.append(Filter(fid, rng.uniform(0.05, 2.0), rng.uniform(0.02, 0.98), 0.95, 0.05, bb))
    return FilterCatalog(filters, bbs)


def random_formula(rng: random.Random, fids, disjoint: bool = False, max_terms: int = 4) -> DnfFormula:
    fids = list(fids)
    rng.shuffle(fids)
    n_terms = rng.randint(1, min(max_terms, len(fids)))
    terms, seen = [], set()
    if disjoint:
        cuts = sorted(rng.sample(range(1, len(fids)), n_terms - 1)) if n_terms > 1 else []
        groups = [fids[a:b] for a, b in zip([0] + cuts, cuts + [len(fids)])]
        for g in groups:
            terms.append(Term(tuple(g), rng.choice((2, 3, 4, 5))))
        return DnfFormula(tuple(terms))
    for _ in range(n_terms):
        fs = frozenset(rng.sample(fids, rng.randint(1, min(4, len(fids)))))
        if fs in seen:
            continue
        seen.add(fs)
        terms.append(Term(fs, rng.choice((2, 3, 4, 5))))
    return DnfFormula(tuple(terms))


def random_state(rng: random.Random, formula: DnfFormula, catalog: FilterCatalog) -> ExecutionState:
    state = ExecutionState()
    for fid in sorted(formula.filter_ids):
        if rng.random() < 0.3:
            state.record(catalog[fid], rng.random() < 0.5)
    return state


def random_schedule(rng: random.Random, n_slots: int | None = None, n_unique: int | None = None) -> list[ScheduleEntry]:
    n_slots = rng.randint(0, 300) if n_slots is None else n_slots
    n_unique = rng.randint(1, 30) if n_unique is None else n_unique
    pool = []
    fids = list(range(1, 40))
    while len(pool) < n_unique:
        f = random_formula(rng, rng.sample(fids, rng.randint(1, 6)))
        if f not in pool:
            pool.append(f)
    slots = []
    while len(slots) < n_slots:
        f = None if rng.random() < 0.2 else rng.choice(pool)
        slots.extend([f] * rng.choice((1, 1, 2, 5, 40)))
    return merge_slots(slots[:n_slots])


# -- suites used by ``verify`` ----------------------------------------------------

def check_confidence(n: int = 1000, seed: int = 0, max_filters: int = 12) -> int:
    """Number of mismatches between confidence and enumeration on filter-disjoint formulas."""
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        k = rng.randint(1, max_filters)
        cat = random_catalog(rng, k)
        formula = random_formula(rng, range(1, k + 1), disjoint=True)
        state = random_state(rng, formula, cat)
        if abs(confidence(formula, state, cat) - confidence_bruteforce(formula, state, cat)) > 1e-12:
            bad += 1
    return bad


def check_exact(n: int = 200, seed: int = 0, max_filters: int = 6) -> int:
    from .sbfe import ExactPolicy

    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        k = rng.randint(1, max_filters)
        cat = random_catalog(rng, k, n_backbones=rng.randint(0, 2))
        formula = random_formula(rng, range(1, k + 1))
        if abs(ExactPolicy(formula, cat).expected_cost - decision_tree_minimum(formula, cat)) > 1e-9:
            bad += 1
    return bad


def check_codec(n: int = 10_000, seed: int = 0) -> int:
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        entries = random_schedule(rng, n_slots=rng.randint(0, 60), n_unique=rng.randint(1, 8))
        if decode_schedule(encode_schedule(entries)) != entries:
            bad += 1
    return bad


def check_percentile(n: int = 2000, seed: int = 0) -> int:
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        xs = [rng.uniform(0, 1000) for _ in range(rng.randint(1, 50))]
        q = rng.choice((50, 90, 95, rng.uniform(0, 100)))
        s = sorted(xs)
        rank = max(1, math.ceil(q * len(s) / 100))
        if percentile(xs, q) != s[rank - 1]:
            bad += 1
    return bad


SUITES = {
    "confidence-enumeration": check_confidence,
    "exact-solver-optimality": check_exact,
    "codec-round-trip": check_codec,
    "percentile": check_percentile,
}
