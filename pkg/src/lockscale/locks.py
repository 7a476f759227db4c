"""Synchronization primitive catalog.

CLH queue lock, ticket lock, big-reader lock, address-ordered multi-lock
acquisition, and a lock-elision wrapper with a retry-threshold fallback
over a pluggable transaction backend.

Waiting strategy: every lock takes a `backoff` policy.

  block (default)  hand off through the interpreter's native futex-backed
                   primitives.  On a GIL interpreter spinning waiters
                   starve the holder of scheduler slices, so this is the
                   only policy that stays fast under contention.
  yield/spin/pause bounded spinning on the lock word, for bare-metal-like
                   platforms or single-waiter experiments.

No lock is re-entrant.  acquire() returns a token that must be passed
to release(); the CLH token is thread-affine (the releasing thread
adopts its predecessor's queue node), the ticket token may be handed to
another thread.  Double release raises LockUsageError.
"""

from __future__ import annotations

import threading
import time
from collections import Counter
from dataclasses import dataclass

__all__ = [
    "LockUsageError",
    "ClhLock",
    "TicketLock",
    "BigReaderLock",
    "OrderedLockSet",
    "TXN_STARTED",
    "TransactionAborted",
    "TransactionBackend",
    "AlwaysSucceedBackend",
    "AlwaysAbortBackend",
    "RandomizedAbortBackend",
    "HardwareRtmBackend",
    "ElidableLock",
]

BACKOFF_POLICIES = ("block", "yield", "spin", "pause")


class LockUsageError(RuntimeError):
    """Misuse of a lock: double release, re-entrancy, bad slot, etc."""


def _make_waiter(policy: str):
    """One failed-check pause for the spinning policies."""
    if policy not in BACKOFF_POLICIES:
        raise LockUsageError(f"unknown backoff policy {policy!r}; pick one of {BACKOFF_POLICIES}")
    if policy == "pause":
        def pause():
            for _ in range(16):
                pass
        return pause
    if policy == "spin":
        return lambda: None
    return lambda: time.sleep(0)  # yield (also the spin part of "block" paths)


# ---------------------------------------------------------------------------
# CLH queue lock


class _ClhNode:
    # `locked` is the flag successors observe; `handoff` is held for the
    # same duration so a blocking successor can wait on its futex instead
    # of burning scheduler slices.
    __slots__ = ("locked", "handoff")

    def __init__(self) -> None:
        self.locked = False
        self.handoff = threading.Lock()


class ClhToken:
    __slots__ = ("node", "pred", "released")

    def __init__(self, node: _ClhNode, pred: _ClhNode) -> None:
        self.node = node
        self.pred = pred
        self.released = False


class ClhLock:
    """FIFO queue lock: each waiter waits on its predecessor's node.

    `locked` and `acquisitions` form the advisory state word used by the
    elision wrapper's lock test.
    """

    def __init__(self, backoff: str = "block") -> None:
        self._tail = _ClhNode()
        self._swap = threading.Lock()  # stands in for an atomic exchange on tail
        self._local = threading.local()
        self._block = backoff == "block"
        self._wait = _make_waiter(backoff)
        self.locked = False
        self.acquisitions = 0

    def acquire(self) -> ClhToken:
        local = self._local
        if getattr(local, "holding", False):
            raise LockUsageError("ClhLock is not re-entrant")
        node = getattr(local, "node", None)
        if node is None:
            node = _ClhNode()
        local.node = None
        node.locked = True
        node.handoff.acquire()
        with self._swap:
            pred = self._tail
            self._tail = node
        if self._block:
            if pred.locked:
                pred.handoff.acquire()  # sleeps until the predecessor releases
                pred.handoff.release()
        else:
            wait = self._wait
            while pred.locked:
                wait()
        local.holding = True
        self.locked = True
        self.acquisitions += 1
        return ClhToken(node, pred)

    def release(self, token: ClhToken) -> None:
        if token.released:
            raise LockUsageError("ClhLock token released twice")
        token.released = True
        self._local.holding = False
        self._local.node = token.pred  # adopt the predecessor's node
        self.locked = False
        token.node.handoff.release()
        token.node.locked = False


# ---------------------------------------------------------------------------
# Ticket lock


class TicketToken:
    __slots__ = ("ticket", "released")

    def __init__(self, ticket: int) -> None:
        self.ticket = ticket
        self.released = False


class TicketLock:
    """FIFO spinlock over a (next_ticket, now_serving) counter pair."""

    def __init__(self, backoff: str = "block") -> None:
        self._mx = threading.Lock()  # guards the counters and waiter table
        self._next_ticket = 0
        self._now_serving = 0
        self._waiters: dict[int, threading.Event] = {}
        self._local = threading.local()
        self._block = backoff == "block"
        self._wait = _make_waiter(backoff)
        self.locked = False
        self.acquisitions = 0

    @property
    def next_ticket(self) -> int:
        return self._next_ticket

    @property
    def now_serving(self) -> int:
        return self._now_serving

    def acquire(self) -> TicketToken:
        if self._block:
            event = getattr(self._local, "event", None)
            if event is None:
                event = self._local.event = threading.Event()
            must_wait = False
            with self._mx:
                ticket = self._next_ticket
                self._next_ticket += 1
                if self._now_serving != ticket:
                    event.clear()
                    self._waiters[ticket] = event
                    must_wait = True
            if must_wait:
                event.wait()
        else:
            with self._mx:
                ticket = self._next_ticket
                self._next_ticket += 1
            wait = self._wait
            while self._now_serving != ticket:
                wait()
        self.locked = True
        self.acquisitions += 1
        return TicketToken(ticket)

    def release(self, token: TicketToken) -> None:
        if token.released:
            raise LockUsageError("TicketLock token released twice")
        if token.ticket != self._now_serving:
            raise LockUsageError("release with a ticket that is not being served")
        token.released = True
        self.locked = False
        if self._block:
            with self._mx:
                self._now_serving = token.ticket + 1
                successor = self._waiters.pop(token.ticket + 1, None)
            if successor is not None:
                successor.set()
        else:
            self._now_serving = token.ticket + 1


# ---------------------------------------------------------------------------
# Big-reader lock


class _ReaderSlot:
    __slots__ = ("flag",)

    def __init__(self) -> None:
        self.flag = False


class BigReaderLock:
    """Reader-writer lock with one reader flag per registered thread.

    An uncontended read acquisition writes only to the caller's own slot
    (plus a read of the shared writer flag), so the read path stays
    core-local.  Writers serialize on a mutex, raise the writer flag,
    and wait for every reader flag to drop; readers that lose the race
    park until the writer is done.

    slot_factory exists so tests can substitute slots that log their
    writes; production code uses the plain default.
    """

    def __init__(self, slot_factory=_ReaderSlot, backoff: str = "block") -> None:
        _make_waiter(backoff)  # validate the policy name
        self._slots: list = []
        self._slot_factory = slot_factory
        self._register_mutex = threading.Lock()
        self._writer_mutex = threading.Lock()
        self._writer_active = False
        self._flags_cv = threading.Condition()  # writer waits for reader flags
        self._no_writer = threading.Event()
        self._no_writer.set()

    def register_reader(self) -> int:
        """Allocate a reader slot; returns the slot id to pass to read_lock."""
        with self._register_mutex:
            self._slots.append(self._slot_factory())
            return len(self._slots) - 1

    def _slot(self, slot_id: int):
        if not isinstance(slot_id, int) or isinstance(slot_id, bool):
            raise LockUsageError(f"slot id must be an integer, got {slot_id!r}")
        if not 0 <= slot_id < len(self._slots):
            raise LockUsageError(f"slot {slot_id} is not registered")
        return self._slots[slot_id]

    def read_lock(self, slot_id: int) -> None:
        slot = self._slot(slot_id)
        if slot.flag:
            raise LockUsageError("read_lock on a slot that already holds the read lock")
        while True:
            slot.flag = True
            if not self._writer_active:
                return
            # writer racing or active: retreat so it can proceed, then wait
            slot.flag = False
            with self._flags_cv:
                self._flags_cv.notify_all()
            self._no_writer.wait()

    def read_unlock(self, slot_id: int) -> None:
        slot = self._slot(slot_id)
        if not slot.flag:
            raise LockUsageError("read_unlock without a matching read_lock")
        slot.flag = False
        if self._writer_active:  # a writer may be waiting on our flag
            with self._flags_cv:
                self._flags_cv.notify_all()

    def write_lock(self) -> None:
        self._writer_mutex.acquire()
        self._writer_active = True
        self._no_writer.clear()
        for slot in list(self._slots):
            if slot.flag:
                with self._flags_cv:
                    while slot.flag:
                        self._flags_cv.wait()

    def write_unlock(self) -> None:
        if not self._writer_active:
            raise LockUsageError("write_unlock without write_lock")
        self._writer_active = False
        self._no_writer.set()
        self._writer_mutex.release()


# ---------------------------------------------------------------------------
# Ordered multi-lock acquisition


class OrderedLockSet:
    """Deadlock-free acquisition of several locks by ascending stable id.

    Ids play the role memory addresses play in kernel code: any two
    threads acquiring overlapping sets take the common locks in the same
    order, so no circular wait can form.
    """

    def __init__(self, members) -> None:
        members = list(members)
        ids = [m[0] for m in members]
        if len(set(ids)) != len(ids):
            raise LockUsageError("duplicate stable ids in OrderedLockSet")
        self._members = sorted(members, key=lambda m: m[0])

    def acquire_all(self) -> list:
        """Acquire every member in ascending id order; returns the multi-token."""
        held = []
        for _, lock in self._members:
            held.append((lock, lock.acquire()))
        return held

    def release_all(self, multi_token: list) -> None:
        for lock, token in reversed(multi_token):
            lock.release(token)


# ---------------------------------------------------------------------------
# Transactional lock elision


TXN_STARTED = "started"


class TransactionAborted(Exception):
    """Transaction rolled back; `code` distinguishes abort causes."""

    def __init__(self, code: str) -> None:
        super().__init__(f"transaction aborted ({code})")
        self.code = code


class TransactionBackend:
    """Behavioral interface for a transaction implementation.

    begin() returns TXN_STARTED or an abort code; end() commits;
    explicit_abort(code) raises TransactionAborted.  A backend may
    refuse (abort) any transaction: there is no progress guarantee.

    The simulated backends shipped here cannot roll back side effects,
    so they only ever abort at begin(); a backend with real rollback
    (the optional hardware slot) may also abort between begin and end.
    """

    #: operations a body must not perform inside this backend's
    #: transactions; empty for the simulated backends.
    forbidden_operations: frozenset = frozenset()

    def __init__(self) -> None:
        self._local = threading.local()

    def begin(self) -> str:
        raise NotImplementedError

    def end(self) -> None:
        if not self.in_transaction():
            raise LockUsageError("end() outside a transaction")
        self._local.active = False

    def explicit_abort(self, code: str) -> None:
        if not self.in_transaction():
            raise LockUsageError("explicit_abort() outside a transaction")
        self._local.active = False
        raise TransactionAborted(code)

    def in_transaction(self) -> bool:
        return getattr(self._local, "active", False)

    def _enter(self) -> None:
        self._local.active = True


class AlwaysSucceedBackend(TransactionBackend):
    def begin(self) -> str:
        self._enter()
        return TXN_STARTED


class AlwaysAbortBackend(TransactionBackend):
    def __init__(self, code: str = "C") -> None:
        super().__init__()
        self.code = code

    def begin(self) -> str:
        return self.code


class RandomizedAbortBackend(TransactionBackend):
    """Aborts each attempt at begin() with probability p."""

    def __init__(self, p: float, seed: int = 0, code: str = "C") -> None:
        super().__init__()
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"abort probability must be in [0, 1], got {p}")
        import random

        self.p = p
        self.code = code
        self._rng = random.Random(seed)

    def begin(self) -> str:
        if self.p > 0.0 and self._rng.random() < self.p:
            return self.code
        self._enter()
        return TXN_STARTED


class HardwareRtmBackend(TransactionBackend):
    """Slot for a real hardware transactional memory backend.

    Not available in this build; constructing it raises.  Kept so the
    backend surface is fixed for platforms that can provide one.
    """

    def __init__(self) -> None:
        raise RuntimeError("no hardware transactional memory support in this build")


@dataclass
class ElisionStats:
    started: int = 0
    committed: int = 0
    aborted: int = 0
    fallbacks: int = 0


class ElidableLock:
    """Lock elision with a retry threshold and a real-lock fallback.

    Protocol per section:

      1. begin a transaction; if it starts, test the fallback lock and
         abort with code 'L' if it is held (the lock word joins the
         transaction's read set);
      2. on abort, wait until the fallback lock is observed free, then
         retry, up to retry_threshold attempts;
      3. after retry_threshold failed attempts, acquire the fallback
         lock and run the body under it.

    Invariant: a body runs either inside a committed transaction begun
    with the fallback lock free, or while holding the fallback lock,
    never both and never neither.  With simulated backends the commit
    atomicity is provided by an in-flight transaction count that a
    fallback acquirer drains before entering its own section; waking
    order of spinning transactions after a fallback release is
    unordered.

    The fallback lock is managed by this wrapper; acquiring it directly
    while sections run voids the drain handshake.
    """

    def __init__(self, backend: TransactionBackend, fallback=None,
                 retry_threshold: int = 3, backoff: str = "block") -> None:
        if retry_threshold < 1:
            raise LockUsageError(f"retry_threshold must be >= 1, got {retry_threshold}")
        self.backend = backend
        self.fallback = fallback if fallback is not None else ClhLock(backoff=backoff)
        self.retry_threshold = retry_threshold
        self._guard = threading.Lock()
        self._cv = threading.Condition(self._guard)  # lock freed / txns drained
        self._active_txns = 0
        self._stats = ElisionStats()
        self._abort_codes: Counter = Counter()

    def _lock_test(self) -> bool:
        return self.fallback.locked

    def elided_section(self, body):
        """Run body() exactly once under the elision invariant."""
        guard = self._guard
        stats = self._stats
        attempts = 0
        while True:
            status = self.backend.begin()
            if status == TXN_STARTED:
                registered = False
                with guard:
                    stats.started += 1
                    if not self._lock_test():
                        self._active_txns += 1
                        registered = True
                if registered:
                    try:
                        result = body()
                    finally:
                        with guard:
                            self._active_txns -= 1
                            if self._active_txns == 0:
                                self._cv.notify_all()
                    self.backend.end()
                    with guard:
                        stats.committed += 1
                    return result
                # lock held: force the abort the read-set subscription
                # would have produced
                try:
                    self.backend.explicit_abort("L")
                except TransactionAborted:
                    pass
                status = "L"
            else:
                with guard:
                    stats.started += 1
            with guard:
                stats.aborted += 1
                self._abort_codes[status] += 1
            attempts += 1
            if attempts >= self.retry_threshold:
                break  # give up on elision
            with self._cv:
                while self._lock_test():
                    self._cv.wait()
        # fallback path
        token = self.fallback.acquire()
        try:
            with self._cv:
                while self._active_txns:
                    self._cv.wait()
            result = body()
            with guard:
                stats.fallbacks += 1
            return result
        finally:
            self.fallback.release(token)
            with self._cv:
                self._cv.notify_all()

    def snapshot_stats(self) -> dict:
        with self._guard:
            return {
                "started": self._stats.started,
                "committed": self._stats.committed,
                "aborted": self._stats.aborted,
                "fallbacks": self._stats.fallbacks,
                "abort_codes": dict(self._abort_codes),
            }
