"""Frame-level Monte-Carlo validation of a solved allocation policy.

Per frame and user: draw a Gamma(n_antennas, 1) beamformed channel gain
(block fading, one independent draw per frame -- the ensemble
interpretation), draw Poisson arrivals, apply the channel-inversion power
policy with its cap, serve the queue at the nominal rate (or the reduced
finite-blocklength rate in deep fades, dropping the shortfall), and tally
dropping, delay violations and transmit power.

Streams are counter-based (Philox) and keyed by (seed, stream, user), so
results are a deterministic function of (policy, frames, seed, streams)
independent of execution order or parallelism degree.

The hot path skips frames that provably do nothing: a frame with an empty
queue, no arrivals and no deep fade leaves every counter unchanged, so only
event frames (and busy spells after them) run through the Python queue
update; channel draws and power statistics stay vectorized.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import Allocation, QosBudget, SystemConfig, UserProfile
from .rate import achievable_rate
from .traffic import effective_bandwidth

_CHUNK = 1 << 20


@dataclass(frozen=True)
class UserPolicy:
    """Per-user slice of a simulation policy."""

    bandwidth: float
    snr_target: float
    gain_threshold: float
    power_cap: float
    service_rate_nominal: float  # effective bandwidth, packets/frame
    alpha: float
    arrival_rate: float  # packets/frame
    eps_c: float
    inversion_coeff: float  # N0 * W * gamma / alpha; tx power is this / g


@dataclass(frozen=True)
class SimPolicy:
    """Everything the simulator needs, lifted from an Allocation."""

    users: tuple[UserPolicy, ...]
    antennas: int
    queue_delay_frames: int
    cfg: SystemConfig

    @staticmethod
    def from_allocation(alloc: Allocation, cfg: SystemConfig,
                        users: list[UserProfile],
                        qos: QosBudget) -> "SimPolicy":
        if len(users) != len(alloc.bandwidths):
            raise ValueError("allocation and user list disagree on K")
        ups = []
        for k, usr in enumerate(users):
            eb = effective_bandwidth(usr.arrival_rate, qos.eps_q,
                                     qos.queue_delay_frames)
            ups.append(UserPolicy(
                bandwidth=alloc.bandwidths[k],
                snr_target=alloc.snr_targets[k],
                gain_threshold=alloc.gain_thresholds[k],
                power_cap=alloc.power_caps[k],
                service_rate_nominal=eb.value,
                alpha=usr.gain,
                arrival_rate=usr.arrival_rate,
                eps_c=qos.eps_c,
                inversion_coeff=(cfg.noise_psd * alloc.bandwidths[k]
                                 * alloc.snr_targets[k] / usr.gain),
            ))
        return SimPolicy(users=tuple(ups), antennas=alloc.antennas,
                         queue_delay_frames=qos.queue_delay_frames, cfg=cfg)


@dataclass
class QueueState:
    """Mutable per-user queue state and tallies for one stream."""

    queue: float = 0.0
    arrivals: int = 0
    served: float = 0.0
    _served_c: float = 0.0  # Kahan compensation
    dropped: float = 0.0
    _dropped_c: float = 0.0
    drop_events: int = 0
    deep_fades: int = 0
    busy_frames: int = 0
    departed: int = 0
    delay_violations: int = 0
    inflow: float = 0.0
    outflow: float = 0.0
    pending: deque = field(default_factory=deque)

    def _add_served(self, x: float) -> None:
        y = x - self._served_c
        t = self.served + y
        self._served_c = (t - self.served) - y
        self.served = t

    def _add_dropped(self, x: float) -> None:
        y = x - self._dropped_c
        t = self.dropped + y
        self._dropped_c = (t - self.dropped) - y
        self.dropped = t


def draw_channel_gain(rng: np.random.Generator, n: int) -> float:
    """One beamformed channel gain: Gamma(n, 1), n antennas."""
    if n < 1:
        raise ValueError("antenna count must be at least 1")
    return float(rng.standard_gamma(n))


def _deep_fade_rate(g: float, up: UserPolicy, cfg: SystemConfig) -> float:
    """Finite-blocklength service rate at the power cap, clamped at zero."""
    if g <= 0.0:  # measure-zero draw; nothing is deliverable
        return 0.0
    s = achievable_rate(up.power_cap, up.bandwidth, up.alpha, g,
                        up.eps_c, cfg)
    return s if s > 0.0 else 0.0


def _advance(state: QueueState, g: float, a: int, up: UserPolicy,
             dq: int, frame: int, cfg: SystemConfig) -> tuple[float, float]:
    """One frame of the queue recursion; returns (served, dropped).

    A frame with empty queue, no arrivals and no deep fade leaves the state
    untouched, which is what lets the simulator skip such frames wholesale.
    """
    q = state.queue
    if q > 0.0:
        state.busy_frames += 1
    if a:
        state.arrivals += a
    eb = up.service_rate_nominal
    d = 0.0
    if g < up.gain_threshold:
        state.deep_fades += 1
        capacity = _deep_fade_rate(g, up, cfg)
        if q > 0.0:
            # shortfall versus the nominal rate is discarded; the cap rate
            # can exceed the nominal one just below the threshold, in which
            # case nothing needs dropping
            d = eb - capacity
            if d > q:
                d = q
            if d < 0.0:
                d = 0.0
        if d > 0.0:
            state.drop_events += 1
            state._add_dropped(d)
    else:
        capacity = eb
    avail = q + a - d
    served = capacity if capacity < avail else avail
    if served > 0.0:
        state._add_served(served)
    state.queue = avail - served
    if state.queue < 0.0:
        state.queue = 0.0

    # Queueing delay is the WAITING time until a packet's transmission
    # starts (its own transmission frame is budgeted separately), so a
    # packet leaves the tally once the cumulative outflow covers the work
    # queued ahead of it.
    state.outflow += served + d
    if a:
        for _ in range(a):
            state.pending.append((frame, state.inflow))
            state.inflow += 1.0
    pend = state.pending
    while pend and state.outflow > pend[0][1] - 1e-9:
        arr, _ = pend.popleft()
        state.departed += 1
        if frame - arr > dq:
            state.delay_violations += 1
    if state.queue == 0.0:
        # queue emptied: flush stragglers and reset the flow baselines so
        # the float counters never accumulate drift
        while pend:
            arr, _ = pend.popleft()
            state.departed += 1
            if frame - arr > dq:
                state.delay_violations += 1
        state.inflow = 0.0
        state.outflow = 0.0
    return served, d


def step_queue(state: QueueState, g: float, policy: SimPolicy,
               rng: np.random.Generator, user: int = 0,
               frame: int = 0) -> QueueState:
    """Single-frame reference transition: Poisson arrivals then the queue
    update under the gain ``g``.  Returns the mutated state."""
    cfg = policy.cfg
    up = policy.users[user]
    a = int(rng.poisson(up.arrival_rate))
    _advance(state, g, a, up, policy.queue_delay_frames, frame, cfg)
    return state


def _walk_chunk(state: QueueState, g: np.ndarray, a: np.ndarray,
                up: UserPolicy, dq: int, base_frame: int,
                cfg: SystemConfig, walk_all: bool = False) -> None:
    n = len(g)
    if walk_all:
        idx = np.arange(n)
    else:
        idx = np.flatnonzero((g < up.gain_threshold) | (a > 0))
    ei = 0
    m = len(idx)
    pos = -1
    while True:
        if state.queue > 0.0:
            nxt = pos + 1
            if nxt >= n:
                break
            while ei < m and idx[ei] <= nxt:
                ei += 1
        else:
            while ei < m and idx[ei] <= pos:
                ei += 1
            if ei >= m:
                break
            nxt = int(idx[ei])
            ei += 1
        _advance(state, float(g[nxt]), int(a[nxt]), up, dq,
                 base_frame + nxt, cfg)
        pos = nxt


def _run_stream(policy: SimPolicy, cfg: SystemConfig, frames: int,
                seed: int, stream: int, trace_rows: list | None = None):
    """Simulate every user for one stream; returns per-user tallies."""
    dq = policy.queue_delay_frames
    out = []
    for u, up in enumerate(policy.users):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=seed, spawn_key=(stream, u))))
        state = QueueState()
        power_sum = 0.0
        power_c = 0.0
        done = 0
        while done < frames:
            n = min(_CHUNK, frames - done)
            g = rng.standard_gamma(policy.antennas, size=n)
            a = rng.poisson(up.arrival_rate, size=n)
            deep = g < up.gain_threshold
            p = np.where(deep, up.power_cap, up.inversion_coeff / g)
            chunk_power = float(np.sum(p))
            y = chunk_power - power_c
            t = power_sum + y
            power_c = (t - power_sum) - y
            power_sum = t
            if trace_rows is not None:
                for i in range(n):
                    srv, drp = _advance(state, float(g[i]), int(a[i]), up,
                                        dq, done + i, cfg)
                    trace_rows.append((done + i, u, float(g[i]),
                                       float(p[i]), int(a[i]), srv, drp,
                                       state.queue))
            else:
                _walk_chunk(state, g, a, up, dq, done, cfg)
            done += n
        out.append({
            "arrivals": state.arrivals,
            "served": state.served,
            "dropped": state.dropped,
            "drop_events": state.drop_events,
            "deep_fades": state.deep_fades,
            "busy_frames": state.busy_frames,
            "departed": state.departed,
            "delay_violations": state.delay_violations,
            "final_queue": state.queue,
            "power_sum": power_sum,
        })
    return out


@dataclass
class SimReport:
    """Aggregated empirical estimates from one simulation run."""

    frames_run: int
    achieved_eps_h: float
    empirical_mean_tx_power: float
    empirical_delay_violation: float
    arrival_count: float
    drop_count: float
    rng_seed: int
    stream_count: int
    drop_events: int = 0
    deep_fade_count: int = 0
    busy_frames: int = 0
    served_count: float = 0.0
    departed_count: int = 0
    delay_violation_count: int = 0
    final_queue: float = 0.0
    per_user: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "frames_run": self.frames_run,
            "achieved_eps_h": self.achieved_eps_h,
            "empirical_mean_tx_power_w": self.empirical_mean_tx_power,
            "empirical_delay_violation": self.empirical_delay_violation,
            "arrival_count": self.arrival_count,
            "drop_count": self.drop_count,
            "rng_seed": self.rng_seed,
            "stream_count": self.stream_count,
            "drop_events": self.drop_events,
            "deep_fade_count": self.deep_fade_count,
            "busy_frames": self.busy_frames,
            "served_count": self.served_count,
            "departed_count": self.departed_count,
            "delay_violation_count": self.delay_violation_count,
            "final_queue": self.final_queue,
            "per_user": self.per_user,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def run_simulation(policy: SimPolicy, cfg: SystemConfig,
                   users: list[UserProfile], frames: int, seed: int,
                   streams: int = 1, workers: int = 1,
                   trace_path: str | None = None) -> SimReport:
    """Run the fading/queueing simulation and aggregate the tallies.

    ``frames`` are split as evenly as possible across ``streams``
    independent substreams (each restarts from an empty queue); ``workers``
    only controls process parallelism and never changes the result.
    """
    if frames < 1:
        raise ValueError("frames must be at least 1")
    if streams < 1:
        raise ValueError("streams must be at least 1")
    if len(users) != len(policy.users):
        raise ValueError("policy and user list disagree on K")

    base, extra = divmod(frames, streams)
    stream_frames = [base + (1 if s < extra else 0) for s in range(streams)]

    trace_rows: list | None = [] if trace_path else None
    if trace_path and (streams > 1):
        raise ValueError("per-frame tracing supports a single stream only")

    if workers > 1 and trace_rows is None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_stream, policy, cfg, nf, seed, s)
                       for s, nf in enumerate(stream_frames) if nf > 0]
            results = [f.result() for f in futures]
    else:
        results = [_run_stream(policy, cfg, nf, seed, s, trace_rows)
                   for s, nf in enumerate(stream_frames) if nf > 0]

    k = len(policy.users)
    per_user = []
    for u in range(k):
        agg = {key: 0.0 for key in ("arrivals", "served", "dropped",
                                    "power_sum", "final_queue")}
        for key in ("drop_events", "deep_fades", "busy_frames", "departed",
                    "delay_violations"):
            agg[key] = 0
        for res in results:
            for key in agg:
                agg[key] += res[u][key]
        agg["arrivals"] = int(agg["arrivals"])
        agg["achieved_eps_h"] = (agg["dropped"] / agg["arrivals"]
                                 if agg["arrivals"] else 0.0)
        agg["mean_tx_power"] = agg["power_sum"] / frames
        per_user.append(agg)

    arrivals = sum(pu["arrivals"] for pu in per_user)
    dropped = sum(pu["dropped"] for pu in per_user)
    violations = sum(pu["delay_violations"] for pu in per_user)
    report = SimReport(
        frames_run=frames,
        achieved_eps_h=dropped / arrivals if arrivals else 0.0,
        empirical_mean_tx_power=sum(pu["power_sum"] for pu in per_user) / frames,
        empirical_delay_violation=violations / arrivals if arrivals else 0.0,
        arrival_count=float(arrivals),
        drop_count=dropped,
        rng_seed=seed,
        stream_count=streams,
        drop_events=sum(pu["drop_events"] for pu in per_user),
        deep_fade_count=sum(pu["deep_fades"] for pu in per_user),
        busy_frames=sum(pu["busy_frames"] for pu in per_user),
        served_count=sum(pu["served"] for pu in per_user),
        departed_count=sum(pu["departed"] for pu in per_user),
        delay_violation_count=violations,
        final_queue=sum(pu["final_queue"] for pu in per_user),
        per_user=per_user,
    )

    if trace_path:
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", "user", "gain", "tx_power_w", "arrivals",
                        "served", "dropped", "queue_after"])
            for row in trace_rows:
                w.writerow(row)
    return report
