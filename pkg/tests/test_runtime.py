import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from orbitsched.formula import P_COMPUTE, DnfFormula, ExecutionState, Term, evaluate
from orbitsched.runtime import (
    ThresholdController,
    TimingModel,
    TruthOutcomes,
    SimulatedOutcomes,
    effective_time,
    greedy_choice,
    prioritize_image,
    prioritize_reference,
    sequence_time,
    update_alpha,
    utility,
)

from conftest import F, make_catalog


def ctl(alpha=0.95, beta=0.01, **kw):
    return ThresholdController(alpha=alpha, beta=beta, **kw)


# -- effective time and utility ---------------------------------------------------

def test_effective_time_branches():
    cat = make_catalog([0.5, 0.5, 0.5], times=[0.2, 0.05, 0.05], backbones=[None, 0, 0], bb_times={0: 0.8})
    s = ExecutionState()
    assert effective_time(cat[1], s, cat) == pytest.approx(0.2)
    assert effective_time(cat[2], s, cat) == pytest.approx(0.85)
    s.record(cat[3], True)
    assert effective_time(cat[2], s, cat) == pytest.approx(0.05)


def test_utility_direct_substitution():
    cat = make_catalog([0.5, 0.5], times=[1.0, 1.0], tpr=0.9)
    phi = F(({1}, 3), ({1, 2}, 4))
    assert utility(cat[1], phi, ExecutionState(), cat) == pytest.approx(0.5 * 0.9 * 2 / 1.0)


def test_utility_zero_for_dead_terms():
    cat = make_catalog([0.5, 0.5, 0.5])
    phi = F(({1, 2}, 3), ({3}, 4))
    s = ExecutionState()
    s.record(cat[1], False)
    assert utility(cat[2], phi, s, cat) == 0.0


def test_greedy_picks_argmax_utility():
    from orbitsched.formula import Filter, FilterCatalog
    cat = FilterCatalog([Filter(1, 0.5, 0.1, 0.9, 0.05), Filter(2, 1.0, 0.5, 0.95, 0.05)])
    phi = F(({1}, 3), ({2}, 4), ({2, 1}, 5))
    # A: (0.9)(0.9)(2)/0.5 = 3.24 with two live terms; check the single-term case too
    phi1 = F(({1}, 3), ({2}, 4))
    assert utility(cat[1], phi1, ExecutionState(), cat) == pytest.approx(1.62)
    assert greedy_choice(phi1, ExecutionState(), cat) == 1
    assert greedy_choice(phi, ExecutionState(), cat) == 1


def test_greedy_ties_go_to_lowest_id():
    cat = make_catalog([0.5, 0.5, 0.5])
    assert greedy_choice(F(({3}, 2), ({2}, 2), ({1}, 2)), ExecutionState(), cat) == 1


# -- prioritize_image examples ------------------------------------------------------

def test_single_filter_pass_and_fail():
    cat = make_catalog([0.5])
    phi = F(({1}, 4))
    r = prioritize_image(phi, cat, ctl(), TruthOutcomes({1: True}))
    assert r.priority == 4 and r.filters_run == (1,) and r.final_confidence == 1.0
    r = prioritize_image(phi, cat, ctl(), TruthOutcomes({1: False}))
    assert r.priority == P_COMPUTE and r.final_confidence == 0.0


def test_confident_exit_before_any_filter():
    cat = make_catalog([0.9, 0.9])
    r = prioritize_image(F(({1, 2}, 3)), cat, ctl(alpha=0.8), TruthOutcomes({1: False, 2: False}))
    assert r.priority == 3 and r.filters_run == () and r.final_confidence == pytest.approx(0.81)
    assert r.compute_time == 0.0


def test_energy_is_time_times_power():
    cat = make_catalog([0.5, 0.5], times=[1.0, 2.0])
    r = prioritize_image(F(({1, 2}, 3)), cat, ctl(alpha=1.0, beta=0.0), TruthOutcomes({1: True, 2: True}),
                         compute_power=2.0)
    assert r.compute_time == pytest.approx(3.0)
    assert r.energy == pytest.approx(6.0)


def test_beta_not_below_alpha_rejected():
    with pytest.raises(ValueError):
        ThresholdController(alpha=0.2, beta=0.2)


# -- update_alpha examples ----------------------------------------------------------

def test_update_alpha_fixed_point():
    c = ctl(alpha=0.5, lambda1=0.1, lambda2=0.1, target_reject_rate=0.25, dep_count=1, computed_count=4)
    assert update_alpha(c, 1.0) == pytest.approx(0.5)


def test_update_alpha_cap():
    c = ctl(alpha=0.95, lambda1=0.1, lambda2=0.0)
    assert update_alpha(c, 2.0) == 1.0


def test_update_alpha_arithmetic():
    c = ctl(alpha=0.5, lambda1=0.2, lambda2=0.3, target_reject_rate=0.4, dep_count=1, computed_count=10)
    assert update_alpha(c, 0.8) == pytest.approx(0.37)


def test_update_alpha_floor_keeps_band():
    c = ctl(alpha=0.05, beta=0.01, lambda1=1.0, lambda2=0.0)
    assert update_alpha(c, 0.0) == pytest.approx(0.02)


# -- timing -----------------------------------------------------------------------

def test_sequence_time_single_filter():
    for mode in ("sequential", "pipelined"):
        tm = TimingModel(mode, select_time=0.1, comm_overhead=0.05)
        assert sequence_time([1.0], tm) == pytest.approx(1.15)


def test_sequence_time_two_filters():
    seq = TimingModel("sequential", select_time=0.1, comm_overhead=0.05)
    pip = TimingModel("pipelined", select_time=0.1, comm_overhead=0.05, prefetch_hit_prob=1.0)
    miss = TimingModel("pipelined", select_time=0.1, comm_overhead=0.05, prefetch_hit_prob=0.0)
    assert sequence_time([1.0, 1.0], seq) == pytest.approx(2.30)
    assert sequence_time([1.0, 1.0], pip) == pytest.approx(2.20)
    assert sequence_time([1.0, 1.0], miss) == pytest.approx(2.30)


def test_overlap_bounded_by_previous_execution():
    pip = TimingModel("pipelined", select_time=0.3, load_time=0.2)
    # second prep (0.5) can hide under at most 0.1 s of first execution
    assert sequence_time([0.1, 1.0], pip) == pytest.approx(0.6 + 1.5 - 0.1)


@settings(max_examples=500, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), max_size=12), st.floats(0, 1), st.floats(0, 0.5), st.floats(0, 0.5),
       st.integers(0, 2**32 - 1))
def test_pipelined_never_slower(times, hit, sel, comm, seed):
    seq = TimingModel("sequential", select_time=sel, comm_overhead=comm)
    pip = TimingModel("pipelined", select_time=sel, comm_overhead=comm, prefetch_hit_prob=hit)
    assert sequence_time(times, pip, random.Random(seed)) <= sequence_time(times, seq) + 1e-9


# -- reference equivalence and soundness -----------------------------------------------

@st.composite
def instance(draw, max_filters=8):
    n = draw(st.integers(1, max_filters))
    probs = draw(st.lists(st.floats(0.01, 0.99), min_size=n, max_size=n))
    times = draw(st.lists(st.floats(0.05, 3.0), min_size=n, max_size=n))
    bbs = draw(st.lists(st.sampled_from([None, 0, 1]), min_size=n, max_size=n))
    cat = make_catalog(probs, times, bbs, {0: 0.7, 1: 1.3})
    fids = list(range(1, n + 1))
    groups = draw(st.lists(st.sets(st.sampled_from(fids), min_size=1, max_size=4), min_size=1, max_size=5,
                           unique_by=frozenset))
    prios = draw(st.lists(st.sampled_from((2, 3, 4, 5)), min_size=len(groups), max_size=len(groups)))
    phi = DnfFormula(tuple(Term(tuple(g), p) for g, p in zip(groups, prios)))
    truth = {f: draw(st.booleans()) for f in fids}
    return cat, phi, truth


@settings(max_examples=400, deadline=None)
@given(instance(), st.floats(0.0, 0.5), st.floats(0.5, 1.0))
def test_compiled_loop_matches_reference(inst, beta, alpha):
    cat, phi, truth = inst
    if not beta < alpha:
        return
    r = prioritize_image(phi, cat, ctl(alpha=alpha, beta=beta), TruthOutcomes(truth))
    prio, run, _ = prioritize_reference(phi, cat, alpha, beta, TruthOutcomes(truth))
    assert list(r.filters_run) == run
    assert r.priority == prio


def test_full_evaluation_matches_direct_evaluation_exhaustively():
    rng = random.Random(5)
    for _ in range(40):
        n = rng.randint(1, 6)
        cat = make_catalog([rng.uniform(0.05, 0.95) for _ in range(n)])
        from orbitsched.oracles import random_formula
        phi = random_formula(rng, range(1, n + 1))
        for bits in itertools.product((False, True), repeat=n):
            truth = dict(zip(range(1, n + 1), bits))
            r = prioritize_image(phi, cat, ctl(alpha=1.0, beta=0.0), TruthOutcomes(truth))
            assert (r.priority != P_COMPUTE) == evaluate(phi, truth)


def test_simulated_outcomes_noise():
    cat = make_catalog([0.5], tpr=0.9, fpr=0.1)
    assert SimulatedOutcomes({1: True}, {1: 0.85})(cat[1]) is True
    assert SimulatedOutcomes({1: True}, {1: 0.95})(cat[1]) is False
    assert SimulatedOutcomes({1: False}, {1: 0.05})(cat[1]) is True
    assert SimulatedOutcomes({1: False}, {1: 0.5})(cat[1]) is False


def test_trace_record_fields():
    cat = make_catalog([0.5, 0.5])
    r = prioritize_image(F(({1, 2}, 3)), cat, ctl(), TruthOutcomes({1: True, 2: True}))
    rec = r.trace_record(7)
    assert rec["image"] == 7 and rec["filters_run"] == [1, 2] and rec["priority"] == "3"
    assert len(rec["confidence"]) == 3 and len(rec["filter_times"]) == 2
