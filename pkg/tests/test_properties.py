"""Randomized invariant checks, 10^4 cases each."""

import random

from hypothesis import HealthCheck, given, settings, strategies as st

from orbitsched.formula import PRIORITY_TIERS, ExecutionState, term_alive
from orbitsched.oracles import random_catalog, random_formula
from orbitsched.runtime import ThresholdController, TimingModel, SimulatedOutcomes, prioritize_image, update_alpha
from orbitsched.sim import DELIVERED, QUEUED, Image, integrate_battery

from test_sim import _sat

N = 10_000
many = settings(max_examples=N, deadline=None, derandomize=True,
                suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**32 - 1)


def random_run(seed, order="utility", alpha=None, beta=None):
    rng = random.Random(seed)
    k = rng.randint(1, 10)
    cat = random_catalog(rng, k, n_backbones=rng.randint(0, 3))
    formula = random_formula(rng, range(1, k + 1), max_terms=5)
    beta = rng.choice((0.0, 0.01, rng.uniform(0, 0.3))) if beta is None else beta
    alpha = rng.choice((1.0, rng.uniform(beta + 0.01, 1.0))) if alpha is None else alpha
    truth = {f.id: rng.random() < 0.5 for f in cat}
    noise = {f.id: rng.random() for f in cat}
    ctl = ThresholdController(alpha=alpha, beta=beta)
    res = prioritize_image(formula, cat, ctl, SimulatedOutcomes(truth, noise), TimingModel(), random.Random(seed),
                           order, 2.0)
    return formula, cat, res


@many
@given(seeds, st.sampled_from(["utility", "static"]))
def test_termination_bound(seed, order):
    formula, _, res = random_run(seed, order)
    assert len(res.filters_run) <= len(formula.filter_ids)
    assert len(res.confidences) == len(res.filters_run) + 1
    assert res.reason in {"satisfied", "confident", "rejected", "exhausted"}
    assert res.priority in PRIORITY_TIERS


@many
@given(seeds, st.sampled_from(["utility", "static"]))
def test_no_repeated_or_dead_filter(seed, order):
    formula, cat, res = random_run(seed, order)
    assert len(set(res.filters_run)) == len(res.filters_run)
    state = ExecutionState()
    for fid in res.filters_run:
        assert fid in formula.filter_ids
        assert any(fid in t.filters and term_alive(t, state) for t in formula.terms)
        state.record(cat[fid], res.outcomes[fid])


@many
@given(st.floats(0, 1), st.floats(0, 0.5), st.floats(0, 1), st.floats(0, 1), st.floats(0, 3),
       st.integers(0, 50), st.integers(0, 50), st.one_of(st.none(), st.floats(0, 1)))
def test_alpha_stays_in_unit_interval(a0, beta, l1, l2, power, dep, extra, target):
    if not beta < a0:
        a0 = min(1.0, beta + 0.5)
    ctl = ThresholdController(alpha=a0, beta=beta, lambda1=l1, lambda2=l2, target_reject_rate=target,
                              dep_count=dep, computed_count=dep + extra)
    for _ in range(3):
        a = update_alpha(ctl, power)
        assert 0.0 <= a <= 1.0
        assert a > beta


@many
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 19), st.sampled_from(PRIORITY_TIERS)),
                min_size=1, max_size=40))
def test_queue_discipline(ops):
    sat = _sat()
    imgs = {}
    for op, i, tier in ops:
        if op == 0 and i not in imgs:
            img = Image(i, 0, i, float((i * 7) % 13), 10, 1)
            imgs[i] = img
            sat.enqueue(img, tier)
        elif op == 1 and i in imgs:
            sat.retier(imgs[i], tier)
        elif op == 2:
            queued = [m for m in imgs.values() if m.state == QUEUED]
            img = sat.pop_next()
            if not queued:
                assert img is None
                continue
            best = min(queued, key=lambda m: (PRIORITY_TIERS.index(m.tier), m.t, m.id))
            assert img is best
            img.state = DELIVERED
    assert sat.discipline_violations == 0
    total = sum(m.remaining for m in imgs.values() if m.state == QUEUED)
    assert abs(sum(sat.tier_bytes.values()) - total) < 1e-6


@many
@given(st.floats(0, 1e5), st.floats(1, 1e5),
       st.lists(st.tuples(st.floats(0, 1e3), st.floats(0, 1e3)), min_size=1, max_size=30))
def test_energy_conservation(b0, cap, flows):
    b = min(b0, cap)
    start = b
    gen = use = cur = short = 0.0
    for g, c in flows:
        b, over, miss = integrate_battery(b, cap, g, c)
        assert 0.0 <= b <= cap
        assert over == 0.0 or miss == 0.0
        gen, use, cur, short = gen + g, use + c, cur + over, short + miss
    assert abs(start + gen - use - cur + short - b) <= 1e-9 * max(1.0, start + gen + use)


@many
@given(seeds)
def test_deterministic_under_seed(seed):
    _, _, a = random_run(seed)
    _, _, b = random_run(seed)
    assert a == b
