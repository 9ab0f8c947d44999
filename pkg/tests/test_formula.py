import itertools

import pytest
from hypothesis import given, settings, strategies as st

from orbitsched.formula import (
    P_COMPUTE,
    CatalogError,
    DnfFormula,
    ExecutionState,
    FormulaError,
    Term,
    confidence,
    decode_formula,
    decided_priority,
    encode_formula,
    evaluate,
    term_probability,
)
from orbitsched.oracles import confidence_bruteforce

from conftest import F, make_catalog


def state_of(catalog, outcomes):
    s = ExecutionState()
    for fid, v in outcomes.items():
        s.record(catalog[fid], v)
    return s


def test_term_probability_known_failure(catalog3):
    t = Term((1,), 3)
    assert term_probability(t, state_of(catalog3, {1: False}), catalog3) == 0.0


def test_term_probability_single_factor():
    cat = make_catalog([0.5, 0.3])
    t = Term((1, 2), 3)
    assert term_probability(t, state_of(cat, {1: True}), cat) == pytest.approx(0.3)


def test_term_probability_product_matches_enumeration(catalog3):
    t = Term((1, 2, 3), 3)
    brute = 0.0
    for bits in itertools.product((0, 1), repeat=3):
        w = 1.0
        for b, p in zip(bits, (0.5, 0.4, 0.2)):
            w *= p if b else 1 - p
        brute += w * all(bits)
    assert term_probability(t, ExecutionState(), catalog3) == pytest.approx(brute, abs=1e-15)
    assert brute == pytest.approx(0.04)


def test_unknown_filter_is_catalog_error(catalog3):
    with pytest.raises(CatalogError):
        term_probability(Term((9,), 2), ExecutionState(), catalog3)


def test_confidence_examples():
    cat = make_catalog([0.5, 0.5, 0.2])
    assert confidence(F(({1}, 3)), ExecutionState(), cat) == 0.5
    assert confidence(F(({1}, 3)), state_of(cat, {1: True}), cat) == 1.0
    phi = F(({1, 2}, 3), ({3}, 4))
    assert confidence(phi, ExecutionState(), cat) == pytest.approx(0.4, abs=1e-15)
    assert confidence_bruteforce(phi, ExecutionState(), cat) == pytest.approx(0.4, abs=1e-15)


def test_confidence_exact_extremes():
    cat = make_catalog([0.3, 0.6, 0.9])
    phi = F(({1, 2}, 3), ({3}, 5))
    assert confidence(phi, state_of(cat, {1: False, 3: False}), cat) == 0.0
    assert confidence(phi, state_of(cat, {3: True}), cat) == 1.0


def test_decided_priority_examples():
    cat = make_catalog([0.5, 0.5])
    phi = F(({1}, 3), ({2}, 5))
    assert decided_priority(phi, state_of(cat, {1: True})) == 3
    assert decided_priority(phi, state_of(cat, {1: True, 2: True})) == 5
    assert decided_priority(phi, state_of(cat, {1: False})) is None


def test_duplicate_terms_rejected():
    with pytest.raises(FormulaError):
        F(({1, 2}, 3), ({2, 1}, 4))


def test_priority_one_terms_rejected():
    with pytest.raises(FormulaError):
        Term((1,), 1)


def test_outcomes_never_overwritten(catalog3):
    s = ExecutionState()
    s.record(catalog3[1], True)
    with pytest.raises(FormulaError):
        s.record(catalog3[1], False)


def test_loaded_backbones_tracked():
    cat = make_catalog([0.5, 0.5], backbones=[0, None], bb_times={0: 0.8})
    s = ExecutionState()
    s.record(cat[1], False)
    s.record(cat[2], True)
    assert s.loaded_backbones == {0}


def test_wire_encoding_layout():
    phi = F(({3, 1}, 4))
    assert encode_formula(phi) == bytes([1, 4, 2, 1, 0, 3, 0])
    back, end = decode_formula(encode_formula(phi))
    assert back == phi and end == 7


# -- properties -------------------------------------------------------------------

@st.composite
def formula_and_state(draw, max_filters=8, disjoint=False):
    n = draw(st.integers(1, max_filters))
    probs = draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n))
    cat = make_catalog(probs)
    fids = list(range(1, n + 1))
    if disjoint:
        perm = draw(st.permutations(fids))
        k = draw(st.integers(1, n))
        cuts = sorted(draw(st.sets(st.integers(1, n - 1), max_size=k - 1))) if n > 1 else []
        groups = [perm[a:b] for a, b in zip([0] + cuts, cuts + [n])]
    else:
        groups = draw(st.lists(st.sets(st.sampled_from(fids), min_size=1, max_size=4), min_size=1, max_size=5,
                               unique_by=frozenset))
    prios = draw(st.lists(st.sampled_from((2, 3, 4, 5)), min_size=len(groups), max_size=len(groups)))
    phi = DnfFormula(tuple(Term(tuple(g), p) for g, p in zip(groups, prios)))
    outcomes = draw(st.dictionaries(st.sampled_from(fids), st.booleans()))
    return cat, phi, state_of(cat, outcomes)


@settings(max_examples=300, deadline=None)
@given(formula_and_state(max_filters=10, disjoint=True))
def test_confidence_equals_enumeration_for_disjoint_terms(args):
    cat, phi, state = args
    assert abs(confidence(phi, state, cat) - confidence_bruteforce(phi, state, cat)) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(formula_and_state(), st.data())
def test_confidence_monotone_under_revelation(args, data):
    cat, phi, state = args
    free = sorted(phi.filter_ids - state.outcomes.keys())
    if not free:
        return
    fid = data.draw(st.sampled_from(free))
    c0 = confidence(phi, state, cat)
    up, down = state.copy(), state.copy()
    up.record(cat[fid], True)
    down.record(cat[fid], False)
    assert confidence(phi, up, cat) >= c0 - 1e-12
    assert confidence(phi, down, cat) <= c0 + 1e-12


@settings(max_examples=300, deadline=None)
@given(formula_and_state())
def test_confidence_extremes_characterized(args):
    cat, phi, state = args
    # probabilities strictly inside (0, 1) so 0/1 can only come from outcomes
    cat = cat.with_pass_probs({f.id: min(0.99, max(0.01, f.pass_prob)) for f in cat})
    c = confidence(phi, state, cat)
    satisfied = decided_priority(phi, state) is not None
    all_dead = all(any(state.outcomes.get(f) is False for f in t.filters) for t in phi.terms)
    assert (c == 1.0) == satisfied
    assert (c == 0.0) == all_dead
    for t in phi.terms:
        assert 0.0 <= term_probability(t, state, cat) <= 1.0


@settings(max_examples=200, deadline=None)
@given(formula_and_state())
def test_wire_round_trip(args):
    _, phi, _ = args
    back, end = decode_formula(encode_formula(phi))
    assert back == phi and end == len(encode_formula(phi))


def test_evaluate_matches_priority_rule():
    phi = F(({1}, 3), ({2}, 5))
    assert evaluate(phi, {1: True, 2: False})
    assert not evaluate(phi, {1: False, 2: False})
    from orbitsched.formula import true_priority
    assert true_priority(phi, {1: True, 2: True}) == 5
    assert true_priority(phi, {1: False, 2: False}) == P_COMPUTE
