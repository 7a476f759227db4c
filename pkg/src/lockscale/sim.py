"""Discrete-event simulator of the closed lock-contention system.

n customers (cores) cycle between a think station (mean a cycles) and a
service station (mean s cycles).  Two station modes:

  single-server    one FIFO server: the big-lock case the closed-form
                   model describes.
  infinite-server  every customer is served immediately: the perfectly
                   scaling fine-grained / elision case.

Time is kept in integer cycles (64-bit); exponential samples are drawn
by inverse CDF and rounded to the nearest cycle, so long runs cannot
accumulate float drift.  Each customer owns an independent xoshiro256++
stream seeded via splitmix64, which makes every (config, seed) pair
bit-reproducible.

Throughput confidence intervals use batch means over 20 equal batches
of the sample window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

__all__ = [
    "InvalidConfigError",
    "SimConfig",
    "SimResult",
    "run",
    "sweep",
    "derive_seed",
]

_N_BATCHES = 20
_T_95_19DF = 2.093  # two-sided Student t, 19 degrees of freedom

_U64 = np.uint64
_MASK64 = _U64(0xFFFFFFFFFFFFFFFF)


class InvalidConfigError(ValueError):
    """Raised for simulator configurations outside the valid domain."""


@dataclass(frozen=True)
class SimConfig:
    """Closed-system simulation setup.

    warmup defaults to 10% of the sample window when left as None.
    All durations are simulated cycles, not wall time.
    """

    n: int
    a: float
    s: float
    service_dist: str = "exponential"
    think_dist: str = "exponential"
    mode: str = "single-server"
    warmup: int | None = None
    sample: int = 50_000_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise InvalidConfigError(f"customer count must be a positive integer, got {self.n!r}")
        if not (self.a > 0.0) or not (self.s > 0.0):
            raise InvalidConfigError("think and service times must be > 0")
        for name, value in (("service_dist", self.service_dist), ("think_dist", self.think_dist)):
            if value not in ("exponential", "deterministic"):
                raise InvalidConfigError(f"{name} must be 'exponential' or 'deterministic', got {value!r}")
        if self.mode not in ("single-server", "infinite-server"):
            raise InvalidConfigError(f"mode must be 'single-server' or 'infinite-server', got {self.mode!r}")
        if self.sample <= 0:
            raise InvalidConfigError("sample window must be > 0 cycles")
        if self.warmup is not None and self.warmup <= 0:
            raise InvalidConfigError("warmup must be > 0 cycles (or None for the default)")

    @property
    def effective_warmup(self) -> int:
        return self.warmup if self.warmup is not None else max(1, self.sample // 10)


@dataclass(frozen=True)
class SimResult:
    """Sample-window statistics of one simulation run."""

    throughput: float
    mean_queue_length: float
    utilization: float
    ci95_throughput: float
    mean_response_cycles: float
    completions: int


@njit(cache=True, inline="always")
def _splitmix64(x):
    x = (x + _U64(0x9E3779B97F4A7C15)) & _MASK64
    z = x
    z = ((z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)) & _MASK64
    z = ((z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)) & _MASK64
    return z ^ (z >> _U64(31)), x


@njit(cache=True, inline="always")
def _rotl(x, k):
    return ((x << k) | (x >> (_U64(64) - k))) & _MASK64


@njit(cache=True, inline="always")
def _xoshiro_next(state, i):
    # xoshiro256++, one stream per row of `state`
    r = (_rotl((state[i, 0] + state[i, 3]) & _MASK64, _U64(23)) + state[i, 0]) & _MASK64
    t = (state[i, 1] << _U64(17)) & _MASK64
    state[i, 2] ^= state[i, 0]
    state[i, 3] ^= state[i, 1]
    state[i, 1] ^= state[i, 2]
    state[i, 0] ^= state[i, 3]
    state[i, 2] ^= t
    state[i, 3] = _rotl(state[i, 3], _U64(45))
    return r


@njit(cache=True)
def _init_streams(n, seed):
    state = np.empty((n, 4), np.uint64)
    x = _U64(seed)
    for i in range(n):
        for j in range(4):
            v, x = _splitmix64(x)
            state[i, j] = v
    return state


@njit(cache=True, inline="always")
def _draw_cycles(state, i, mean, deterministic):
    if deterministic:
        return np.int64(mean + 0.5)
    u = np.float64(_xoshiro_next(state, i) >> _U64(11)) * (1.0 / 9007199254740992.0)
    return np.int64(-mean * math.log1p(-u) + 0.5)


@njit(cache=True)
def _run_single_server(n, a, s, warmup, sample, seed, det_think, det_serv, n_batches):
    state = _init_streams(n, seed)
    inf = np.int64(1) << np.int64(62)
    t_end = warmup + sample

    think_end = np.empty(n, np.int64)
    arrived = np.zeros(n, np.int64)
    for i in range(n):
        think_end[i] = _draw_cycles(state, i, a, det_think)
    ring = np.empty(n + 1, np.int64)  # FIFO of waiting customers
    head = 0
    tail = 0
    serving = -1
    serve_end = inf
    qlen = 0  # waiting + in service

    area_q = 0.0
    busy = np.int64(0)
    comps = np.int64(0)
    sum_resp = np.int64(0)
    batch_comps = np.zeros(n_batches, np.int64)
    batch_w = sample // n_batches

    last = np.int64(0)
    while True:
        tmin = serve_end
        who = -1
        for i in range(n):
            if think_end[i] < tmin:
                tmin = think_end[i]
                who = i
        cut = tmin if tmin < t_end else t_end
        lo = last if last > warmup else warmup
        if cut > lo:
            area_q += np.float64(cut - lo) * qlen
            if serving >= 0:
                busy += cut - lo
        last = cut
        if tmin > t_end:
            break
        now = tmin
        if who < 0:
            # service completion
            if now > warmup:
                comps += 1
                sum_resp += now - arrived[serving]
                b = (now - warmup - 1) // batch_w
                if b >= n_batches:
                    b = n_batches - 1
                batch_comps[b] += 1
            think_end[serving] = now + _draw_cycles(state, serving, a, det_think)
            qlen -= 1
            if head != tail:
                serving = ring[head]
                head = (head + 1) % (n + 1)
                serve_end = now + _draw_cycles(state, serving, s, det_serv)
            else:
                serving = -1
                serve_end = inf
        else:
            # think done: join the queue
            think_end[who] = inf
            arrived[who] = now
            qlen += 1
            if serving < 0:
                serving = who
                serve_end = now + _draw_cycles(state, who, s, det_serv)
            else:
                ring[tail] = who
                tail = (tail + 1) % (n + 1)
    return comps, area_q, busy, sum_resp, batch_comps


@njit(cache=True)
def _run_infinite_server(n, a, s, warmup, sample, seed, det_think, det_serv, n_batches):
    state = _init_streams(n, seed)
    t_end = warmup + sample

    next_ev = np.empty(n, np.int64)
    in_service = np.zeros(n, np.bool_)
    started = np.zeros(n, np.int64)
    for i in range(n):
        next_ev[i] = _draw_cycles(state, i, a, det_think)
    n_busy = 0

    area_q = 0.0
    busy_area = np.float64(0.0)
    comps = np.int64(0)
    sum_resp = np.int64(0)
    batch_comps = np.zeros(n_batches, np.int64)
    batch_w = sample // n_batches

    last = np.int64(0)
    while True:
        tmin = next_ev[0]
        who = 0
        for i in range(1, n):
            if next_ev[i] < tmin:
                tmin = next_ev[i]
                who = i
        cut = tmin if tmin < t_end else t_end
        lo = last if last > warmup else warmup
        if cut > lo:
            area_q += np.float64(cut - lo) * n_busy
            busy_area += np.float64(cut - lo) * n_busy
        last = cut
        if tmin > t_end:
            break
        now = tmin
        if in_service[who]:
            if now > warmup:
                comps += 1
                sum_resp += now - started[who]
                b = (now - warmup - 1) // batch_w
                if b >= n_batches:
                    b = n_batches - 1
                batch_comps[b] += 1
            in_service[who] = False
            n_busy -= 1
            next_ev[who] = now + _draw_cycles(state, who, a, det_think)
        else:
            in_service[who] = True
            started[who] = now
            n_busy += 1
            next_ev[who] = now + _draw_cycles(state, who, s, det_serv)
    return comps, area_q, busy_area / np.float64(n), sum_resp, batch_comps


def run(config: SimConfig) -> SimResult:
    """Simulate one configuration and return sample-window statistics."""
    warmup = np.int64(config.effective_warmup)
    sample = np.int64(config.sample)
    det_think = config.think_dist == "deterministic"
    det_serv = config.service_dist == "deterministic"
    kernel = _run_single_server if config.mode == "single-server" else _run_infinite_server
    comps, area_q, busy, sum_resp, batch_comps = kernel(
        config.n, config.a, config.s, warmup, sample,
        np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF), det_think, det_serv, _N_BATCHES,
    )
    sample_f = float(sample)
    batch_w = float(sample // _N_BATCHES)
    batch_thr = np.asarray(batch_comps, dtype=np.float64) / batch_w
    if _N_BATCHES > 1:
        ci = _T_95_19DF * float(np.std(batch_thr, ddof=1)) / math.sqrt(_N_BATCHES)
    else:
        ci = float("nan")
    return SimResult(
        throughput=float(comps) / sample_f,
        mean_queue_length=float(area_q) / sample_f,
        utilization=float(busy) / sample_f,
        ci95_throughput=ci,
        mean_response_cycles=float(sum_resp) / float(comps) if comps else float("nan"),
        completions=int(comps),
    )


def derive_seed(seed: int, n: int) -> int:
    """Deterministic per-n child seed for sweeps."""
    x = (seed ^ (n * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def sweep(base: SimConfig, n_values: list[int]) -> list[tuple[int, SimResult]]:
    """Run one simulation per core count, ordered by n.

    Each run gets a child seed derived from (base.seed, n) so points are
    independent yet the whole sweep is reproducible from one seed.
    """
    for n in n_values:
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise InvalidConfigError(f"core counts must be positive integers, got {n!r}")
    out = []
    for n in sorted(n_values):
        cfg = replace(base, n=n, seed=derive_seed(base.seed, n))
        out.append((n, run(cfg)))
    return out
