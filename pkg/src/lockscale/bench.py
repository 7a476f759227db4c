"""Real-thread contention microbenchmark.

Each worker thread runs a closed loop: a critical section of calibrated
busy work under the configured lock, then an exponentially distributed
busy-wait "think" delay.  All threads start behind a common barrier, a
warm-up window is discarded, and only completions inside the sampling
window are counted (per-thread counters, summed afterwards).

Time is counted in abstract busy-work cycles: one cycle is one step of
a data-dependent integer chain compiled with the GIL released, so delay
work from different threads genuinely overlaps.  calibrate() measures
how many of those cycles fit in a nanosecond on this host; delays at
realistic settings are sub-microsecond, far below what sleeping could
express.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import locks as _locks
from .sim import _init_streams, _xoshiro_next, derive_seed

__all__ = [
    "CalibrationError",
    "InvalidBenchConfigError",
    "BenchConfig",
    "BenchResult",
    "calibrate",
    "busy_work",
    "run_bench",
    "sweep_bench",
    "LOCK_KINDS",
]

LOCK_KINDS = ("clh", "ticket", "big-reader", "elided", "none")

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


class CalibrationError(RuntimeError):
    """Monotonic clock and busy loop disagree too much to calibrate."""


class InvalidBenchConfigError(ValueError):
    pass


@njit(cache=True, nogil=True, inline="always")
def _busy_kernel(units, acc):
    # data-dependent LCG chain; the caller folds the result into a
    # checksum so the loop cannot be optimized away
    a = np.uint64(6364136223846793005)
    c = np.uint64(1442695040888963407)
    x = acc
    for _ in range(units):
        x = (x * a + c) & _MASK
    return x


def busy_work(cycles: int, acc: int = 1) -> int:
    """Burn `cycles` units of busy work; returns the running checksum."""
    return int(_busy_kernel(np.int64(cycles), np.uint64(acc)))


@njit(cache=True, nogil=True)
def _free_run_chunk(iters, section_units, mean_delay, stream, acc):
    """A fixed number of no-lock loop iterations, fully compiled so the
    per-iteration harness cost is negligible next to the busy work.  The
    caller checks the stop flag between chunks (a compiled loop cannot
    be relied on to re-read a flag another thread writes).

    Returns (delay cycles spent, checksum)."""
    delay_sum = 0.0
    u64 = np.uint64
    for _ in range(iters):
        acc = _busy_kernel(section_units, acc)
        if mean_delay > 0.0:
            u = np.float64(_xoshiro_next(stream, 0) >> u64(11)) * (1.0 / 9007199254740992.0)
            d = np.int64(-mean_delay * np.log1p(-u) + 0.5)
            if d > 0:
                acc = _busy_kernel(d, acc)
                delay_sum += d
    return delay_sum, acc


def _measure_once(min_seconds: float = 0.1) -> float:
    # returns cycles per nanosecond
    units = 1 << 16
    acc = np.uint64(12345)
    while True:
        t0 = time.perf_counter_ns()
        acc = _busy_kernel(np.int64(units), acc)
        dt = time.perf_counter_ns() - t0
        if dt >= min_seconds * 1e9:
            return units / dt
        units *= 2


def calibrate(attempts: int = 3) -> float:
    """Cycles of busy work per nanosecond of wall time on this host.

    Takes three >= 100 ms measurements and returns the median; if they
    disagree by more than 10% the round is discarded and retried, and
    after `attempts` noisy rounds CalibrationError is raised.
    """
    _busy_kernel(np.int64(1000), np.uint64(1))  # force JIT outside timing
    samples = []
    for _ in range(attempts):
        samples = sorted(_measure_once() for _ in range(3))
        if samples[-1] <= samples[0] * 1.10:
            return samples[1]
    raise CalibrationError(
        f"three consecutive calibrations disagree by more than 10%: {samples}"
    )


@dataclass(frozen=True)
class BenchConfig:
    lock_kind: str = "clh"
    threads: int = 1
    mean_delay_cycles: float = 0.0
    section_work_cycles: int = 360
    warmup_seconds: float = 2.0
    sample_seconds: float = 1.0
    seed: int = 0
    elision_backend: str = "always-succeed"
    elision_abort_probability: float = 0.5
    pin_threads: bool = True

    def __post_init__(self) -> None:
        if self.lock_kind not in LOCK_KINDS:
            raise InvalidBenchConfigError(
                f"lock_kind must be one of {LOCK_KINDS}, got {self.lock_kind!r}"
            )
        if not isinstance(self.threads, int) or isinstance(self.threads, bool) or self.threads < 1:
            raise InvalidBenchConfigError(f"threads must be a positive integer, got {self.threads!r}")
        if self.mean_delay_cycles < 0:
            raise InvalidBenchConfigError("mean delay must be >= 0 cycles")
        if self.section_work_cycles < 0:
            raise InvalidBenchConfigError("section work must be >= 0 cycles")
        if self.warmup_seconds <= 0 or self.sample_seconds <= 0:
            raise InvalidBenchConfigError("warmup and sample durations must be > 0")


@dataclass
class BenchResult:
    total_ops_per_second: float
    per_thread_ops: list[int]
    measured_mean_delay_cycles: float
    calibration: float  # cycles per nanosecond
    flags: list[str] = field(default_factory=list)
    checksum: int = 0


def _make_section(kind: str, config: BenchConfig, shared: dict, thread_index: int):
    """Returns section(units, acc) -> acc for one worker thread."""
    if kind == "none":
        def section(units, acc):
            return _busy_kernel(units, np.uint64(acc))
    elif kind in ("clh", "ticket"):
        lock = shared["lock"]
        def section(units, acc):
            token = lock.acquire()
            acc = _busy_kernel(units, np.uint64(acc))
            lock.release(token)
            return acc
    elif kind == "big-reader":
        lock = shared["lock"]
        slot = lock.register_reader()
        def section(units, acc):
            lock.read_lock(slot)
            acc = _busy_kernel(units, np.uint64(acc))
            lock.read_unlock(slot)
            return acc
    else:  # elided
        lock = shared["lock"]
        def section(units, acc):
            return lock.elided_section(lambda: _busy_kernel(units, np.uint64(acc)))
    return section


def _make_shared_lock(config: BenchConfig):
    if config.lock_kind == "clh":
        return _locks.ClhLock()
    if config.lock_kind == "ticket":
        return _locks.TicketLock()
    if config.lock_kind == "big-reader":
        return _locks.BigReaderLock()
    if config.lock_kind == "elided":
        if config.elision_backend == "always-succeed":
            backend = _locks.AlwaysSucceedBackend()
        elif config.elision_backend == "always-abort":
            backend = _locks.AlwaysAbortBackend()
        elif config.elision_backend == "randomized":
            backend = _locks.RandomizedAbortBackend(
                config.elision_abort_probability, seed=config.seed
            )
        else:
            raise InvalidBenchConfigError(
                f"unknown elision backend {config.elision_backend!r}"
            )
        return _locks.ElidableLock(backend)
    return None


def _pin_current_thread(cpu: int) -> bool:
    try:
        os.sched_setaffinity(0, {cpu})
        return True
    except (AttributeError, OSError):
        return False


def run_bench(config: BenchConfig, cycles_per_ns: float | None = None) -> BenchResult:
    """Run one benchmark cell; one harness per process at a time."""
    if cycles_per_ns is None:
        cycles_per_ns = calibrate()
    # JIT warm before threads start
    _busy_kernel(np.int64(16), np.uint64(1))
    _free_run_chunk(1, np.int64(1), 1.0, _init_streams(1, np.uint64(1)), np.uint64(1))

    ncpu = os.cpu_count() or 1
    flags: list[str] = []
    if config.threads > ncpu:
        flags.append("oversubscribed")

    shared = {"lock": _make_shared_lock(config)}
    section_units = np.int64(config.section_work_cycles)
    phase = np.zeros(1, np.int64)  # 0 warm-up, 1 sample, 2 stop
    barrier = threading.Barrier(config.threads + 1)
    ops = [0] * config.threads
    delay_sums = [0.0] * config.threads
    checksums = [0] * config.threads
    pinned = [False] * config.threads
    seeds = np.random.SeedSequence(config.seed).spawn(config.threads)

    def worker(idx: int) -> None:
        if config.pin_threads and config.threads <= ncpu:
            pinned[idx] = _pin_current_thread(idx % ncpu)
        mean = config.mean_delay_cycles
        acc = np.uint64(idx * 2654435761 + 1)
        if config.lock_kind == "none":
            stream = _init_streams(1, np.uint64(derive_seed(config.seed, idx + 1)))
            # ~1M cycles of work per chunk keeps the Python-level flag
            # check well under 1% of the loop
            iters = max(1, int((1 << 20) / (config.section_work_cycles + mean + 1.0)))
            count = 0
            delay_cycles = 0.0
            barrier.wait()
            while True:
                p = phase[0]
                if p == 2:
                    break
                ds, acc = _free_run_chunk(iters, section_units, float(mean), stream, np.uint64(acc))
                if p == 1:
                    count += iters
                    delay_cycles += ds
            ops[idx] = count
            delay_sums[idx] = delay_cycles
            checksums[idx] = int(acc)
            return
        section = _make_section(config.lock_kind, config, shared, idx)
        rng = np.random.Generator(np.random.Philox(seeds[idx]))
        count = 0
        delay_cycles = 0.0
        chunk = np.empty(0)
        ci = 0
        barrier.wait()
        while True:
            p = phase[0]
            if p == 2:
                break
            acc = section(section_units, acc)
            if mean > 0.0:
                if ci >= len(chunk):
                    chunk = rng.exponential(mean, 2048)
                    ci = 0
                d = int(chunk[ci] + 0.5)
                ci += 1
                if d:
                    acc = _busy_kernel(np.int64(d), np.uint64(acc))
            else:
                d = 0
            if p == 1:
                count += 1
                delay_cycles += d
        ops[idx] = count
        delay_sums[idx] = delay_cycles
        checksums[idx] = int(acc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(config.threads)]
    for t in threads:
        t.start()
    barrier.wait()
    time.sleep(config.warmup_seconds)
    phase[0] = 1
    t0 = time.perf_counter()
    time.sleep(config.sample_seconds)
    phase[0] = 2
    elapsed = time.perf_counter() - t0
    for t in threads:
        t.join()

    if config.pin_threads and config.threads <= ncpu and not all(pinned):
        flags.append("unpinned")
    total = sum(ops)
    mean_delay = sum(delay_sums) / total if total else float("nan")
    chk = 0
    for c in checksums:
        chk ^= c
    return BenchResult(
        total_ops_per_second=total / elapsed,
        per_thread_ops=list(ops),
        measured_mean_delay_cycles=mean_delay,
        calibration=cycles_per_ns,
        flags=flags,
        checksum=chk,
    )


def sweep_bench(
    config: BenchConfig,
    thread_counts: list[int],
    delays: list[float],
) -> list[tuple[int, float, BenchResult]]:
    """Full (threads x delay) cross-product, deterministic row order."""
    from dataclasses import replace

    cycles_per_ns = calibrate()
    rows = []
    for threads in thread_counts:
        for delay in delays:
            cell = replace(config, threads=threads, mean_delay_cycles=delay)
            rows.append((threads, delay, run_bench(cell, cycles_per_ns)))
    return rows
