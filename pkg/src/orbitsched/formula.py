"""Filters, positive DNF formulas and the confidence calculus.

A formula is a disjunction of conjunctive terms over filter ids.  Each term
carries the priority an image earns when every filter in it passes.  The
confidence of a formula under a partial execution state is

    1 - prod_T (1 - P(T, E))

with ``P(T, E) = 0`` when some filter of ``T`` failed and the product of the
pass probabilities of the still-unevaluated filters otherwise.  Terms are
treated as independent even when they share filters; that is the runtime's
contract and is deliberately not corrected here.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

# Transmit tier between priority 2 and priority 1 for images that were
# processed onboard but rejected.
P_COMPUTE = 1.5
PRIORITY_TIERS = (5, 4, 3, 2, P_COMPUTE, 1)
TERM_PRIORITIES = (2, 3, 4, 5)


def priority_label(priority) -> str:
    return "p_compute" if priority == P_COMPUTE else str(int(priority))


class CatalogError(KeyError):
    """A formula references a filter or backbone missing from the catalog."""


class FormulaError(ValueError):
    pass


@dataclass(frozen=True)
class Backbone:
    id: int
    load_time: float
    name: str = ""

    def __post_init__(self):
        if self.id < 0:
            raise FormulaError(f"backbone id must be non-negative, got {self.id}")
        if not self.load_time > 0:
            raise FormulaError(f"backbone {self.id}: load_time must be > 0")


@dataclass(frozen=True)
class Filter:
    """A stochastic predicate over an image.

    ``head_time`` is the cost of the filter itself; when ``backbone`` is set
    the backbone's load time is paid once per image before any of its heads.
    """

    id: int
    head_time: float
    pass_prob: float
    tpr: float = 0.95
    fpr: float = 0.05
    backbone: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.id < 0 or self.id > 0xFFFF:
            raise FormulaError(f"filter id out of range: {self.id}")
        if not self.head_time > 0:
            raise FormulaError(f"filter {self.id}: head_time must be > 0")
        if not 0.0 <= self.pass_prob <= 1.0:
            raise FormulaError(f"filter {self.id}: pass_prob {self.pass_prob} not in [0, 1]")
        if not 0.0 < self.tpr <= 1.0 or not 0.0 <= self.fpr < 1.0:
            raise FormulaError(f"filter {self.id}: tpr/fpr out of range")
        if not self.tpr > self.fpr:
            raise FormulaError(f"filter {self.id}: tpr must exceed fpr")


class FilterCatalog:
    """Immutable lookup of filters and backbones for one scenario."""

    def __init__(self, filters: Iterable[Filter], backbones: Iterable[Backbone] = ()):
        self.filters: dict[int, Filter] = {}
        for f in filters:
            if f.id in self.filters:
                raise FormulaError(f"duplicate filter id {f.id}")
            self.filters[f.id] = f
        self.backbones: dict[int, Backbone] = {}
        for b in backbones:
            if b.id in self.backbones:
                raise FormulaError(f"duplicate backbone id {b.id}")
            self.backbones[b.id] = b
        for f in self.filters.values():
            if f.backbone is not None and f.backbone not in self.backbones:
                raise CatalogError(f"filter {f.id} references unknown backbone {f.backbone}")

    def __getitem__(self, fid: int) -> Filter:
        try:
            return self.filters[fid]
        except KeyError:
            raise CatalogError(f"unknown filter id {fid}") from None

    def __contains__(self, fid) -> bool:
        return fid in self.filters

    def __iter__(self):
        return iter(self.filters.values())

    def __len__(self) -> int:
        return len(self.filters)

    def backbone_time(self, fid: int) -> float:
        b = self[fid].backbone
        return 0.0 if b is None else self.backbones[b].load_time

    def standalone_time(self, fid: int) -> float:
        """Cost of running the filter from scratch (backbone + head)."""
        return self[fid].head_time + self.backbone_time(fid)

    def by_name(self, name: str) -> Filter:
        for f in self.filters.values():
            if f.name == name:
                return f
        raise CatalogError(f"unknown filter name {name!r}")

    def with_pass_probs(self, pass_probs: Mapping[int, float]) -> "FilterCatalog":
        filters = [replace(f, pass_prob=float(pass_probs.get(f.id, f.pass_prob))) for f in self]
        return FilterCatalog(filters, self.backbones.values())

    def with_accuracy(self, tpr: float, fpr: float) -> "FilterCatalog":
        return FilterCatalog([replace(f, tpr=tpr, fpr=fpr) for f in self], self.backbones.values())

    def single_task(self) -> "FilterCatalog":
        """Every filter standalone, paying its backbone as part of its own time."""
        filters = [replace(f, head_time=self.standalone_time(f.id), backbone=None) for f in self]
        return FilterCatalog(filters)

    def fingerprint(self) -> tuple:
        return (
            tuple(sorted((f.id, f.head_time, f.pass_prob, f.tpr, f.fpr, f.backbone) for f in self)),
            tuple(sorted((b.id, b.load_time) for b in self.backbones.values())),
        )


@dataclass(frozen=True)
class Term:
    filters: frozenset
    priority: int

    def __post_init__(self):
        fs = self.filters
        if not isinstance(fs, frozenset):
            fs = list(fs)
            if len(set(fs)) != len(fs):
                raise FormulaError(f"duplicate filter in term {fs}")
            object.__setattr__(self, "filters", frozenset(fs))
        if not self.filters:
            raise FormulaError("term must contain at least one filter")
        if self.priority not in TERM_PRIORITIES:
            raise FormulaError(f"term priority must be in {TERM_PRIORITIES}, got {self.priority}")

    def sort_key(self):
        return (-self.priority, tuple(sorted(self.filters)))


@dataclass(frozen=True)
class DnfFormula:
    """Disjunction of terms.  Terms are kept in a canonical order so equal
    term sets compare (and hash) equal."""

    terms: tuple
    filter_ids: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        terms = tuple(sorted(self.terms, key=Term.sort_key))
        if not terms:
            raise FormulaError("formula must contain at least one term")
        seen = set()
        for t in terms:
            if t.filters in seen:
                raise FormulaError(f"duplicate term over filters {sorted(t.filters)}")
            seen.add(t.filters)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "filter_ids", frozenset().union(*(t.filters for t in terms)))

    @classmethod
    def of(cls, *terms) -> "DnfFormula":
        """``DnfFormula.of(({1, 2}, 3), ({4}, 5))``"""
        return cls(tuple(Term(tuple(fs), p) for fs, p in terms))

    def validate(self, catalog: FilterCatalog) -> None:
        for fid in self.filter_ids:
            catalog[fid]

    @property
    def max_priority(self) -> int:
        return self.terms[0].priority

    def __len__(self):
        return len(self.terms)


class ExecutionState:
    """Outcomes of executed filters plus the backbones loaded for one image."""

    __slots__ = ("outcomes", "loaded_backbones")

    def __init__(self, outcomes: Mapping[int, bool] | None = None, loaded_backbones: Iterable[int] = ()):
        self.outcomes: dict[int, bool] = dict(outcomes or {})
        self.loaded_backbones: set[int] = set(loaded_backbones)

    def record(self, filt: Filter, outcome: bool) -> None:
        if filt.id in self.outcomes:
            raise FormulaError(f"filter {filt.id} already executed")
        self.outcomes[filt.id] = bool(outcome)
        if filt.backbone is not None:
            self.loaded_backbones.add(filt.backbone)

    def copy(self) -> "ExecutionState":
        return ExecutionState(self.outcomes, self.loaded_backbones)

    def __contains__(self, fid) -> bool:
        return fid in self.outcomes

    def __repr__(self):
        return f"ExecutionState({self.outcomes!r}, loaded={sorted(self.loaded_backbones)})"


def term_probability(term: Term, state: ExecutionState, catalog: FilterCatalog) -> float:
    outcomes = state.outcomes
    prob = 1.0
    for fid in term.filters:
        filt = catalog[fid]
        seen = outcomes.get(fid)
        if seen is None:
            prob *= filt.pass_prob
        elif not seen:
            return 0.0
    return prob


def term_alive(term: Term, state: ExecutionState) -> bool:
    outcomes = state.outcomes
    return all(outcomes.get(fid, True) for fid in term.filters)


def term_satisfied(term: Term, state: ExecutionState) -> bool:
    outcomes = state.outcomes
    return all(outcomes.get(fid, False) for fid in term.filters)


def confidence(formula: DnfFormula, state: ExecutionState, catalog: FilterCatalog) -> float:
    miss = 1.0
    for term in formula.terms:
        miss *= 1.0 - term_probability(term, state, catalog)
    return 1.0 - miss


def decided_priority(formula: DnfFormula, state: ExecutionState) -> int | None:
    """Highest priority among fully satisfied terms, or None."""
    # terms are sorted by descending priority
    for term in formula.terms:
        if term_satisfied(term, state):
            return term.priority
    return None


def live_terms(formula: DnfFormula, state: ExecutionState) -> list:
    return [t for t in formula.terms if term_alive(t, state)]


def is_decided(formula: DnfFormula, state: ExecutionState) -> bool:
    """True once the formula's Boolean value no longer depends on unexecuted filters."""
    alive = False
    for term in formula.terms:
        if term_satisfied(term, state):
            return True
        alive = alive or term_alive(term, state)
    return not alive


def evaluate(formula: DnfFormula, outcomes: Mapping[int, bool]) -> bool:
    return any(all(outcomes[f] for f in t.filters) for t in formula.terms)


def true_priority(formula: DnfFormula, outcomes: Mapping[int, bool]):
    """Priority the formula assigns under a complete outcome vector."""
    for term in formula.terms:
        if all(outcomes[f] for f in term.filters):
            return term.priority
    return P_COMPUTE


# ---------------------------------------------------------------------------
# Wire encoding shared with the schedule codec.
#   term    = u8 priority, u8 filter count, u16le filter ids (ascending)
#   formula = u8 term count, terms
# ---------------------------------------------------------------------------

def encode_formula(formula: DnfFormula) -> bytes:
    if len(formula.terms) > 255:
        raise FormulaError("formula has more than 255 terms")
    out = bytearray([len(formula.terms)])
    for term in formula.terms:
        ids = sorted(term.filters)
        if len(ids) > 255:
            raise FormulaError("term has more than 255 filters")
        out += bytes([term.priority, len(ids)])
        out += struct.pack(f"<{len(ids)}H", *ids)
    return bytes(out)


def decode_formula(buf: bytes, offset: int = 0) -> tuple[DnfFormula, int]:
    """Decode one formula at ``offset``; returns (formula, next offset)."""
    try:
        n_terms = buf[offset]
        pos = offset + 1
        terms = []
        for _ in range(n_terms):
            priority, count = buf[pos], buf[pos + 1]
            pos += 2
            end = pos + 2 * count
            if end > len(buf):
                raise IndexError
            ids = struct.unpack_from(f"<{count}H", buf, pos)
            pos = end
            terms.append(Term(frozenset(ids), priority))
    except IndexError:
        raise FormulaError(f"truncated formula starting at offset {offset}") from None
    return DnfFormula(tuple(terms)), pos


def formula_size(formula: DnfFormula) -> int:
    return 1 + sum(2 + 2 * len(t.filters) for t in formula.terms)
