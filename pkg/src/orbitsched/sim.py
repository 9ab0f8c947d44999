"""Fixed-step constellation simulator.

One tick (default 1 s) runs, in order: schedule uplinks for satellites whose
contact starts, captures, onboard prioritization (resolved at sub-tick
resolution), station-to-satellite link allocation and downlink, and power
integration.  Everything random is drawn from generators seeded by
``(run seed, satellite)``, so variants and accuracy sweeps sharing a seed see
the same captures, ground truth and per-filter error draws.
"""

from __future__ import annotations

import bisect
import heapq
import random
from collections import deque
from dataclasses import dataclass

import numpy as np

from .codec import ScheduleCapacityError, decode_schedule, encode_schedule
from .config import RunConfig
from .formula import P_COMPUTE, PRIORITY_TIERS, FilterCatalog
from .ground import FilterReport, FilterStats, FormulaBuilder, QueryIndex, merge_slots, update_filter_stats
from .lookahead import DownlinkWindow, ForecastCapture, forecast_contact
from .metrics import EnergyLog, ImageRecord, MetricsLog
from .orbit import Ephemeris, compute_ephemeris, get_preset
from .runtime import SimulatedOutcomes, ThresholdController, TimingModel, prioritize_image, update_alpha
from .scenarios import ScenarioSpec, build_scenario, catalog_for, get_accelerator

QUEUED, INFLIGHT, DELIVERED = 0, 1, 2
UNINFORMED_PASS_PROB = 0.5
WINDOW_6H = 6 * 3600.0


@dataclass(frozen=True)
class VariantSettings:
    order: str  # utility | static
    alpha: float
    beta: float
    dynamic: bool
    ground: bool  # look-ahead p*, rejection target and pass-rate statistics
    reject_priority: float
    timing: TimingModel


def resolve_variant(cfg: RunConfig) -> VariantSettings:
    t = cfg.timing
    if cfg.variant == "baseline":
        # fixed order: the next filter is always known, so prefetch never misses
        return VariantSettings("static", 1.0, 0.0, False, False, 1,
                               TimingModel("pipelined", 0.0, t.load_time, t.comm_overhead, 1.0))
    return VariantSettings(
        order="utility" if cfg.filter_ordering else "static",
        alpha=cfg.alpha0 if cfg.dynamic_threshold else cfg.static_alpha,
        beta=cfg.beta,
        dynamic=cfg.dynamic_threshold,
        ground=cfg.ground_scheduler,
        reject_priority=P_COMPUTE,
        timing=TimingModel("pipelined", t.select_time if cfg.filter_ordering else 0.0, t.load_time,
                           t.comm_overhead, t.prefetch_hit_prob if cfg.filter_ordering else 1.0),
    )


class Image:
    __slots__ = ("id", "sat", "idx", "t", "size", "tier", "state", "remaining", "assigned", "truth",
                 "compute_time", "filters_run", "first_contact", "first_window_end", "downlink", "formula")

    def __init__(self, id, sat, idx, t, size, truth):
        self.id = id
        self.sat = sat
        self.idx = idx
        self.t = t
        self.size = size
        self.tier = 1
        self.state = QUEUED
        self.remaining = float(size)
        self.assigned = 1
        self.truth = truth
        self.compute_time = None
        self.filters_run = 0
        self.first_contact = None
        self.first_window_end = None
        self.downlink = None
        self.formula = None

    def key(self):
        return (self.t, self.id)


@dataclass
class CapturePlan:
    """Pre-drawn captures of one satellite."""

    times: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    matches: list  # frozenset of query ids per capture
    truth_u: np.ndarray  # (N, n_filters) uniforms deciding ground truth
    noise_u: np.ndarray  # (N, n_filters) uniforms deciding report errors


def draw_capture_plan(eph: Ephemeris, sat: int, rate: float, duration: float, index: QueryIndex,
                      n_filters: int, seed: int) -> CapturePlan:
    rng = np.random.default_rng([seed, sat, 0])
    if rate > 0:
        n_max = int(rate * duration * 1.5 + 50)
        gaps = rng.exponential(1.0 / rate, size=n_max)
        times = np.cumsum(gaps)
        while times[-1] < duration:
            times = np.concatenate([times, times[-1] + np.cumsum(rng.exponential(1.0 / rate, size=n_max))])
        times = times[times < duration]
    else:
        times = np.zeros(0)
    lat, lon = eph.position_at(sat, times)
    matches = index.match_many(lat, lon) if len(times) else []
    rng2 = np.random.default_rng([seed, sat, 1])
    truth_u = rng2.random((len(times), n_filters))
    noise_u = rng2.random((len(times), n_filters))
    return CapturePlan(times, np.asarray(lat), np.asarray(lon), [frozenset(m) for m in matches], truth_u, noise_u)


def integrate_battery(battery: float, capacity: float, generated: float, consumed: float):
    """Advance the battery by one tick.

    Returns ``(battery, curtailed, shortfall)``: surplus above capacity is
    curtailed and demand the empty battery cannot cover is recorded as a
    shortfall, so ``battery + generated - consumed - curtailed + shortfall``
    equals the new charge exactly.
    """
    b = battery + generated - consumed
    if b > capacity:
        return capacity, b - capacity, 0.0
    if b < 0.0:
        return 0.0, 0.0, -b
    return b, 0.0, 0.0


def allocate_bandwidth(visible: dict, weights: dict, last_served: dict) -> dict:
    """Greedy one-to-one station -> satellite matching.

    ``visible`` maps station -> satellites in view that have data; the pair
    with the heaviest satellite weight ``(top tier, bytes in top tier)`` is
    taken first; ties go to the least recently served satellite, then to
    lower ids.
    """
    pairs = []
    for g, sats in visible.items():
        for s in sats:
            w = weights[s]
            pairs.append((-w[0], -w[1], last_served.get(s, -1.0), s, g))
    pairs.sort()
    out = {}
    used = set()
    for _, _, _, s, g in pairs:
        if g in out or s in used:
            continue
        out[g] = s
        used.add(s)
    return out


class Satellite:
    def __init__(self, sid: int, plan: CapturePlan, windows: list, controller: ThresholdController, rng):
        self.id = sid
        self.plan = plan
        self.windows = windows  # contact windows (any station)
        self.window_starts = [w[0] for w in windows]
        self.controller = controller
        self.rng = rng
        self.next_capture = 0
        self.heaps = {p: [] for p in PRIORITY_TIERS}
        self.tier_bytes = {p: 0.0 for p in PRIORITY_TIERS}
        self.inflight: Image | None = None
        self.compute_queue: deque = deque()
        self.compute_free = 0.0
        self.jobs: deque = deque()  # (start, end, image, result)
        self.schedule: dict = {}  # capture index -> formula
        self.battery = 0.0
        self.energy = EnergyLog()
        self.energy_window = EnergyLog()
        self.reports: dict = {}  # fid -> [executed, passed]
        self.was_visible = False
        self.last_served = -1.0
        self.images: list[Image] = []
        self.discipline_violations = 0

    # -- queue -----------------------------------------------------------
    def enqueue(self, img: Image, tier) -> None:
        img.tier = tier
        self.tier_bytes[tier] += img.remaining
        heapq.heappush(self.heaps[tier], (img.t, img.id, img))

    def retier(self, img: Image, tier) -> None:
        if img.state != QUEUED or img.tier == tier:
            return
        self.tier_bytes[img.tier] -= img.remaining
        self.enqueue(img, tier)

    def top_tier(self):
        if self.inflight is not None:
            return self.inflight.tier, self.tier_bytes[self.inflight.tier] + self.inflight.remaining
        for p in PRIORITY_TIERS:
            if self.tier_bytes[p] > 0.5:
                return p, self.tier_bytes[p]
        return None

    def pop_next(self) -> Image | None:
        for p in PRIORITY_TIERS:
            h = self.heaps[p]
            while h:
                _, _, img = heapq.heappop(h)
                if img.state == QUEUED and img.tier == p:
                    self.tier_bytes[p] -= img.remaining
                    for q in PRIORITY_TIERS:
                        if q == p:
                            break
                        if self.tier_bytes[q] > 0.5:
                            self.discipline_violations += 1
                    return img
        return None


class World:
    """Full simulation state; advance with :meth:`step` or :func:`run`."""

    def __init__(self, cfg: RunConfig, spec: ScenarioSpec | None = None, ephemeris: Ephemeris | None = None,
                 trace: bool = False):
        self.cfg = cfg.validate()
        self.settings = resolve_variant(cfg)
        self.spec = spec or build_scenario(cfg.scenario, cfg.scenario_seed)
        self.duration = cfg.hours * 3600.0
        preset = get_preset(cfg.constellation)
        self.stations = preset.stations(cfg.min_elevation)
        self.eph = ephemeris or compute_ephemeris(preset.satellites(), self.stations, self.duration, cfg.dt)
        self.accel = get_accelerator(cfg.accelerator)
        self.trace = [] if trace else None

        catalog = catalog_for(self.spec, cfg.variant, cfg.accelerator)
        if cfg.accuracy is not None:
            catalog = catalog.with_accuracy(cfg.accuracy, 1.0 - cfg.accuracy)
        self.base_catalog = catalog
        if self.settings.ground:
            self.stats = FilterStats({f.id: f.pass_prob for f in catalog}, {f.id: f.tpr for f in catalog})
        else:
            self.stats = FilterStats({f.id: UNINFORMED_PASS_PROB for f in catalog})
        self.catalog = catalog.with_pass_probs(self.stats.pass_prob)

        self.index = QueryIndex(self.spec.queries)
        self.builder = FormulaBuilder(self.index)
        self.fids = sorted(f.id for f in catalog)
        self.fpos = {fid: k for k, fid in enumerate(self.fids)}
        self.rates = np.array([self.spec.base_rates[f] for f in self.fids])

        self._share = self._link_share()
        self._vis_any = self.eph.visible.any(axis=1)
        self.sats: list[Satellite] = []
        next_id = 0
        for s in range(self.eph.lat.shape[0]):
            plan = draw_capture_plan(self.eph, s, cfg.capture_rate, self.duration, self.index, len(self.fids), cfg.seed)
            ctl = ThresholdController(alpha=self.settings.alpha, beta=self.settings.beta, lambda1=cfg.lambda1,
                                      lambda2=cfg.lambda2, target_power_fraction=cfg.power.target_fraction,
                                      target_reject_rate=None, dynamic=self.settings.dynamic)
            sat = Satellite(s, plan, self.eph.contact_windows(s), ctl, random.Random(f"{cfg.seed}:{s}:prefetch"))
            sat.battery = cfg.power.initial_fraction * cfg.power.battery_wh * 3600.0
            sat.truth = self._ground_truth(plan)
            sat.times = plan.times.tolist()
            sat.forecast_caps = [ForecastCapture(t, cfg.image_size, f)
                                 for t, f in zip(sat.times, (self.builder(m, 2) if m else None for m in plan.matches))]
            sat.first_id = next_id
            next_id += len(plan.times)
            self.sats.append(sat)
        self.t = 0.0
        self.k = 0
        self.log = MetricsLog()
        for sat in self.sats:
            self._uplink(sat, 0.0)

    # -- setup helpers -----------------------------------------------------
    def _ground_truth(self, plan: CapturePlan) -> list:
        out = []
        positive = plan.truth_u < self.rates
        for i, m in enumerate(plan.matches):
            best = 1
            for qid in m:
                q = self.index[qid]
                if q.latency_sensitive and q.priority > best and all(positive[i, self.fpos[f]] for f in q.filters):
                    best = q.priority
            out.append(best)
        return out

    def _link_share(self) -> np.ndarray:
        """Expected fraction of a link each satellite gets per tick."""
        vis = self.eph.visible  # (S, G, T)
        per_station = vis.sum(axis=0)  # (G, T)
        share = np.where(vis, 1.0 / np.maximum(per_station, 1)[None], 0.0)
        return share.max(axis=1)

    def _windows(self, sat: Satellite, start: float, end: float) -> list[DownlinkWindow]:
        out = []
        bw = self.cfg.bandwidth
        dt = self.eph.dt
        for a, b in sat.windows:
            lo, hi = max(a, start), min(b, end)
            if hi <= lo:
                continue
            i0, i1 = self.eph.index(lo), max(self.eph.index(lo) + 1, self.eph.index(hi - 1e-9) + 1)
            share = float(self._share[sat.id, i0:i1].mean())
            out.append(DownlinkWindow(sat.id, -1, lo, hi, bw * share))
        return out

    def _next_contact_after(self, sat: Satellite, t: float) -> float:
        for a, b in sat.windows:
            if a > t:
                return a
        return self.duration

    # -- ground side -------------------------------------------------------
    def _uplink(self, sat: Satellite, now: float) -> None:
        cfg = self.cfg
        if self.settings.ground and cfg.stats_updates and sat.reports:
            reports = [FilterReport(f, n, k) for f, (n, k) in sorted(sat.reports.items())]
            self.stats = update_filter_stats(self.stats, reports, now)
            self.catalog = self.base_catalog.with_pass_probs(self.stats.pass_prob)
            sat.reports = {}
        plan = sat.plan
        seg_end = self._next_contact_after(sat, now)
        i0 = bisect.bisect_left(plan.times, now)
        i1 = bisect.bisect_left(plan.times, seg_end)
        p_star = 2
        if self.settings.ground:
            horizon = now + cfg.lookahead_hours * 3600.0
            j1 = bisect.bisect_left(plan.times, horizon)
            caps = sat.forecast_caps[i0:j1]
            backlog = dict(sat.tier_bytes)
            if sat.inflight is not None:
                backlog[sat.inflight.tier] += sat.inflight.remaining
            fc = forecast_contact(caps, self._windows(sat, now, horizon), self.stats, backlog)
            p_star = fc.schedule_p_star
            sat.controller.target_reject_rate = fc.r_reject
            self.log.forecasts.append((sat.id, now, fc.to_dict()))
        slots = [self.builder(plan.matches[i], p_star) if plan.matches[i] else None for i in range(i0, i1)]
        entries = merge_slots(slots)
        decoded = []
        for part in _split_for_codec(entries):
            decoded.extend(decode_schedule(encode_schedule(part)))
        sat.schedule = {i0 + loc: e.formula for e in decoded for loc in e.locs}

    # -- one tick ------------------------------------------------------------
    def step(self, dt: float | None = None) -> None:
        dt = self.cfg.dt if dt is None else dt
        if dt != self.eph.dt:
            raise ValueError("tick length must match the ephemeris grid")
        t0, t1 = self.t, self.t + dt
        k = self.k
        pw = self.cfg.power
        cap_j = pw.battery_wh * 3600.0
        vis_any = self._vis_any[:, k].tolist()
        lit = self.eph.sunlit[:, k].tolist()

        for sat in self.sats:
            visible = vis_any[sat.id]
            if visible and not sat.was_visible and t0 > 0:
                self._uplink(sat, t0)
            sat.was_visible = visible
            self._capture(sat, t1)
            if sat.battery >= pw.compute_reserve * cap_j:
                self._start_jobs(sat, t1)
            elif sat.compute_free < t1:
                sat.compute_free = t1
            if sat.jobs:
                self._finish_jobs(sat, t1, cap_j)

        tx_time = self._downlink(vis_any, k, t0, dt, cap_j) if any(vis_any) else {}

        base = (pw.adacs_w + pw.camera_w) * dt
        comp_w = self.accel.power
        in_window = t0 < WINDOW_6H
        for sat in self.sats:
            busy = 0.0
            if sat.jobs:
                for a, b, _, _ in sat.jobs:
                    if b > t0 and a < t1:
                        busy += min(b, t1) - max(a, t0)
                while sat.jobs and sat.jobs[0][1] <= t1 and sat.jobs[0][3] is None:
                    sat.jobs.popleft()
            gen = pw.solar_w * dt if lit[sat.id] else 0.0
            rx = pw.receiver_w * dt if vis_any[sat.id] else 0.0
            tx = pw.transmitter_w * tx_time.get(sat.id, 0.0)
            cmp_e = comp_w * busy
            sat.energy.add(gen, pw.adacs_w * dt, pw.camera_w * dt, rx, tx, cmp_e)
            if in_window:
                sat.energy_window.add(gen, pw.adacs_w * dt, pw.camera_w * dt, rx, tx, cmp_e)
            sat.battery, over, short = integrate_battery(sat.battery, cap_j, gen, base + rx + tx + cmp_e)
            if over or short:
                sat.energy.curtailed += over
                sat.energy.shortfall += short
                if in_window:
                    sat.energy_window.curtailed += over
                    sat.energy_window.shortfall += short
        period = self.cfg.alpha_update_period
        if self.settings.dynamic and period > 0 and int(t1 // period) > int(t0 // period):
            for sat in self.sats:
                self._update_alpha(sat, t1, cap_j)
        self.t = t1
        self.k += 1

    def _capture(self, sat: Satellite, t1: float) -> None:
        plan = sat.plan
        times = sat.times
        n = len(times)
        while sat.next_capture < n and times[sat.next_capture] < t1:
            i = sat.next_capture
            sat.next_capture += 1
            img = Image(sat.first_id + i, sat.id, i, times[i], self.cfg.image_size, sat.truth[i])
            w = bisect.bisect_right(sat.window_starts, img.t) - 1
            if w >= 0 and sat.windows[w][1] > img.t:
                img.first_contact, img.first_window_end = img.t, sat.windows[w][1]
            elif w + 1 < len(sat.windows):
                img.first_contact, img.first_window_end = sat.windows[w + 1]
            sat.images.append(img)
            sat.enqueue(img, 1)
            img.formula = sat.schedule.get(i)
            if img.formula is not None:
                sat.compute_queue.append(img)

    def _start_jobs(self, sat: Satellite, t1: float) -> None:
        s = self.settings
        while sat.compute_queue and sat.compute_free < t1:
            img = sat.compute_queue.popleft()
            if img.state != QUEUED:
                continue
            start = max(sat.compute_free, img.t)
            i = img.idx
            truth = {fid: bool(sat.plan.truth_u[i, k] < self.rates[k]) for fid, k in self.fpos.items()}
            noise = {fid: float(sat.plan.noise_u[i, k]) for fid, k in self.fpos.items()}
            res = prioritize_image(img.formula, self.catalog, sat.controller, SimulatedOutcomes(truth, noise),
                                   s.timing, sat.rng, s.order, self.accel.power, s.reject_priority)
            end = start + res.compute_time
            sat.jobs.append((start, end, img, res))
            sat.compute_free = end

    def _finish_jobs(self, sat: Satellite, t1: float, cap_j: float) -> None:
        ctl = sat.controller
        for n_job, job in enumerate(sat.jobs):
            start, end, img, res = job
            if res is None:
                continue
            if end > t1:
                break
            sat.jobs[n_job] = (start, end, img, None)
            img.compute_time = res.compute_time
            img.filters_run = len(res.filters_run)
            img.assigned = res.priority
            sat.retier(img, res.priority)
            for fid, v in res.outcomes.items():
                c = sat.reports.setdefault(fid, [0, 0])
                c[0] += 1
                c[1] += int(v)
            ctl.record(res.priority)
            if self.cfg.alpha_update_period <= 0:
                self._update_alpha(sat, end, cap_j)
            if self.trace is not None:
                rec = res.trace_record(img.id)
                rec["t"] = round(end, 6)
                rec["sat"] = sat.id
                self.trace.append(rec)

    def _update_alpha(self, sat: Satellite, t: float, cap_j: float) -> None:
        update_alpha(sat.controller, sat.battery / (self.cfg.power.target_fraction * cap_j))
        self.log.alpha_trace.append((t, sat.id, sat.controller.alpha))

    def _downlink(self, vis_any: list, k: int, t0: float, dt: float, cap_j: float) -> dict:
        pw = self.cfg.power
        bw = self.cfg.bandwidth
        cand = {}
        weights = {}
        for sat in self.sats:
            if not vis_any[sat.id] or sat.battery < pw.transmit_reserve * cap_j:
                continue
            top = sat.top_tier()
            if top is None:
                continue
            weights[sat.id] = top
            for g in np.flatnonzero(self.eph.visible[sat.id, :, k]).tolist():
                cand.setdefault(g, []).append(sat.id)
        if not cand or bw <= 0:
            return {}
        served = allocate_bandwidth(cand, weights, {s.id: s.last_served for s in self.sats})
        used = {}
        for g in sorted(served):
            sat = self.sats[served[g]]
            sat.last_served = t0
            budget = bw * dt
            spent = 0.0
            cursor = t0
            while budget > 1e-9:
                img = sat.inflight
                if img is None:
                    img = sat.pop_next()
                    if img is None:
                        break
                    img.state = INFLIGHT
                    sat.inflight = img
                if img.t > cursor:
                    # captured later in this tick: the link idles until then
                    budget -= (img.t - cursor) * bw
                    cursor = img.t
                    if budget <= 1e-9:
                        break
                x = min(budget, img.remaining)
                img.remaining -= x
                budget -= x
                spent += x
                cursor += x / bw
                if img.remaining <= 1e-9:
                    img.remaining = 0.0
                    img.state = DELIVERED
                    img.downlink = cursor
                    sat.inflight = None
            used[sat.id] = spent / bw
        return used

    # -- results ---------------------------------------------------------------
    def finished(self) -> bool:
        return self.k >= len(self.eph.times)

    def finalize(self) -> MetricsLog:
        log = self.log
        log.end_time = self.t
        log.images = []
        for sat in self.sats:
            for img in sat.images:
                log.images.append(ImageRecord(img.id, sat.id, img.t, img.first_contact, img.first_window_end,
                                              img.downlink, img.compute_time, img.filters_run, img.assigned,
                                              img.truth))
            log.energy.append(sat.energy)
            log.energy_window.append(sat.energy_window)
        log.images.sort(key=lambda r: r.id)
        return log


def _split_for_codec(entries):
    """Chunks small enough for one compressed schedule each."""
    try:
        encode_schedule(entries)
        return [entries]
    except ScheduleCapacityError:
        mid = len(entries) // 2
        return _split_for_codec(entries[:mid]) + _split_for_codec(entries[mid:])


def step(world: World, dt: float | None = None) -> World:
    world.step(dt)
    return world


def run(cfg: RunConfig, spec: ScenarioSpec | None = None, ephemeris: Ephemeris | None = None,
        trace: bool = False) -> tuple[MetricsLog, World]:
    world = World(cfg, spec, ephemeris, trace)
    while not world.finished():
        world.step()
    return world.finalize(), world
