"""Closed-form contention model for a single big lock.

Machine-repairman view of n cores sharing one lock:

  state k        = number of cores holding or waiting on the lock
  arrival rate   lambda_k = (n - k) / a   (cores not yet queued request
                                           the lock after a mean think
                                           time of a cycles)
  service rate   mu_k     = 1 / s         (lock held for a mean of s
                                           cycles, independent of queue
                                           depth)

Steady-state balance P_k * lambda_k = P_{k+1} * mu_k gives the state
probabilities, from which we report the expected queue length
sum(k * P_k) and the lock throughput (1 - P_0) / s in completions per
cycle.

Probabilities are evaluated with the balance recurrence

  w_0 = 1,  w_{k+1} = w_k * (n - k) * s / a,  P_k = w_k / sum(w)

with periodic rescaling of the running weights.  This is algebraically
identical to the closed factorial form but does not overflow doubles
for core counts into the thousands.

All times are abstract cycles; nothing here touches wall-clock units.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "MAX_CORES",
    "InvalidParameterError",
    "ModelParams",
    "StateDistribution",
    "CurvePoint",
    "state_probabilities",
    "expected_queue_length",
    "throughput",
    "throughput_at",
    "predict_curve",
]

# Hard cap on the customer population; the recurrence is stable well past
# this, but the model targets machines with at most a few thousand
# hardware contexts.
MAX_CORES = 4096

# Rescale running weights before they approach double overflow.
_RESCALE_LIMIT = 1e250


class InvalidParameterError(ValueError):
    """Raised for model parameters outside the valid domain."""


@dataclass(frozen=True)
class ModelParams:
    """Inputs to the contention model.

    n: core count, 1 <= n <= MAX_CORES
    s: mean lock service (holding) time in cycles, > 0
    a: mean per-core think time between lock requests in cycles, > 0
    """

    n: int
    s: float
    a: float

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or isinstance(self.n, bool):
            raise InvalidParameterError(f"core count must be an integer, got {self.n!r}")
        if self.n < 1:
            raise InvalidParameterError(f"core count must be >= 1, got {self.n}")
        if self.n > MAX_CORES:
            raise InvalidParameterError(
                f"core count {self.n} exceeds the supported maximum {MAX_CORES}"
            )
        if not (self.s > 0.0):
            raise InvalidParameterError(f"service time must be > 0, got {self.s}")
        if not (self.a > 0.0):
            raise InvalidParameterError(f"think time must be > 0, got {self.a}")


@dataclass(frozen=True)
class StateDistribution:
    """Steady-state probabilities P_0..P_n over queue depth."""

    probs: tuple[float, ...]

    @property
    def n(self) -> int:
        """Customer population (number of states minus one)."""
        return len(self.probs) - 1

    def __post_init__(self) -> None:
        if not self.probs:
            raise InvalidParameterError("distribution needs at least one state")
        if any(p < 0.0 for p in self.probs):
            raise InvalidParameterError("state probabilities must be non-negative")


@dataclass(frozen=True)
class CurvePoint:
    """One point of a throughput-vs-cores curve."""

    cores: int
    throughput: float
    queue_length: float


def state_probabilities(params: ModelParams) -> StateDistribution:
    """Steady-state distribution of the number of cores at the lock."""
    n, s, a = params.n, params.s, params.a
    ratio = s / a
    weights = [0.0] * (n + 1)
    weights[0] = 1.0
    w = 1.0
    total = 1.0
    for k in range(n):
        w *= (n - k) * ratio
        if w > _RESCALE_LIMIT:
            inv = 1.0 / w
            for i in range(k + 1):
                weights[i] *= inv
            total *= inv
            w = 1.0
        weights[k + 1] = w
        total += w
    inv_total = 1.0 / total
    return StateDistribution(tuple(x * inv_total for x in weights))


def expected_queue_length(dist: StateDistribution) -> float:
    """Expected number of cores holding or waiting on the lock."""
    return sum(k * p for k, p in enumerate(dist.probs))


def throughput(params: ModelParams, dist: StateDistribution | None = None) -> float:
    """Lock throughput (1 - P_0) / s in completions per cycle."""
    if dist is None:
        dist = state_probabilities(params)
    if dist.n != params.n:
        raise InvalidParameterError(
            f"distribution has {dist.n} customers, parameters have {params.n}"
        )
    return (1.0 - dist.probs[0]) / params.s


def throughput_at(n: int, s: float, a: float) -> float:
    """Convenience: throughput for (n, s, a) in one call."""
    params = ModelParams(n, s, a)
    return throughput(params, state_probabilities(params))


def predict_curve(s: float, a: float, n_max: int) -> list[CurvePoint]:
    """Model curve for core counts 1..n_max at fixed service/think times.

    Throughput is non-decreasing in the core count and bounded by 1/s.
    """
    if not isinstance(n_max, int) or isinstance(n_max, bool) or n_max < 1:
        raise InvalidParameterError(f"n_max must be a positive integer, got {n_max!r}")
    points = []
    for n in range(1, n_max + 1):
        params = ModelParams(n, s, a)
        dist = state_probabilities(params)
        points.append(
            CurvePoint(
                cores=n,
                throughput=throughput(params, dist),
                queue_length=expected_queue_length(dist),
            )
        )
    return points
