import heapq
import logging
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np


logger = logging.getLogger(__name__)

US_PER_SECOND = 1_000_000
HARNESS = "harness"

Target = Union[int, str]


def seconds(value: float) -> int:
    """Convert seconds to integer simulation microseconds."""
    return int(round(value * US_PER_SECOND))


class SchedulingError(RuntimeError):
    """Raised when the event queue is used against its contract."""


class SimulationFault(RuntimeError):
    """Raised when an event handler fails; carries the offending event."""

    def __init__(self, event: "Event", cause: BaseException):
        super().__init__(
            f"handler failed at t={event.fire_at}us seq={event.seq} "
            f"target={event.target} action={event.tag}: {cause!r}"
        )
        self.event = event


@dataclass(eq=False)
class Event:
    """A time-ordered simulation action.

    Attributes:
        fire_at (int): Firing time in microseconds.
        seq (int): Scheduling order, used to break ties at equal times.
        target (int | str): Node identifier or ``"harness"``.
        tag (str): Action tag (frame-delivery, timer-expiry, mobility-update, ...).
        action (Callable): Handler invoked when the event fires.
        args (tuple): Positional arguments for the handler.
    """

    fire_at: int
    seq: int
    target: Target
    tag: str
    action: Callable[..., Any] = field(repr=False)
    args: tuple = field(default=(), repr=False)
    cancelled: bool = False
    fired: bool = False


class RngStream:
    """Deterministic random stream identified by (run seed, purpose label, node).

    The generator is numpy's counter-based ``Philox`` seeded from
    ``SeedSequence([seed, crc32(purpose), node + 1])``. Identical stream ids
    and identical draw sequences give identical outputs on every platform.

    Args:
        seed (int): Run seed.
        purpose (str): Purpose label, e.g. ``"mobility"`` or ``"routing"``.
        node (int, optional): Node identifier, ``-1`` for run-wide streams.
    """

    def __init__(self, seed: int, purpose: str, node: int = -1):
        self.stream_id = (seed, purpose, node)
        label = zlib.crc32(purpose.encode("utf-8"))
        sequence = np.random.SeedSequence([seed, label, node + 1])
        self._generator = np.random.Generator(np.random.Philox(sequence))

    def uniform(self) -> float:
        """Draw a real number in [0, 1)."""
        return float(self._generator.random())

    def uniform_range(self, low: float, high: float) -> float:
        """Draw a real number in [low, high)."""
        return low + (high - low) * self.uniform()

    def uniform_int(self, low: int, high: int) -> int:
        """Draw an integer in [low, high] (both ends inclusive)."""
        if high < low:
            raise ValueError("uniform_int requires low <= high")
        return int(self._generator.integers(low, high, endpoint=True))

    def bernoulli(self, p: float) -> bool:
        """Draw a Bernoulli outcome with success probability ``p``.

        Raises:
            ValueError: If ``p`` is outside [0, 1].
        """
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli probability must lie in [0, 1], got {p}")
        if p == 0.0:
            return False
        if p == 1.0:
            return True
        return self.uniform() < p

    def choice_weighted(self, weights: Sequence[float]) -> int:
        """Sample an index with probability proportional to ``weights``."""
        cumulative = np.cumsum(np.asarray(weights, dtype=float))
        total = cumulative[-1]
        if total <= 0.0:
            raise ValueError("weights must have a positive sum")
        index = int(np.searchsorted(cumulative, self.uniform() * total, side="right"))
        return min(index, len(cumulative) - 1)


class Simulator:
    """Discrete-event core: virtual clock, event queue and seeded random streams.

    Time is kept in integer microseconds. Events fire in ``(fire_at, seq)``
    order, so two events scheduled for the same instant fire in the order they
    were scheduled.

    Args:
        seed (int): Run seed shared by every random stream of this run.
        keep_log (bool): Record ``(time, seq, target, tag)`` of every executed event.
    """

    def __init__(self, seed: int = 1, keep_log: bool = False):
        self.seed = seed
        self._now = 0
        self._seq = 0
        self._heap: list = []
        self._running = False
        self._streams: dict = {}
        self.keep_log = keep_log
        self.event_log: list = []

    def now(self) -> int:
        """Current virtual time in microseconds."""
        return self._now

    def schedule(self, action: Callable[..., Any], target: Target, at: int,
                 tag: str = "timer-expiry", *args: Any) -> Event:
        """Schedule ``action(*args)`` at absolute time ``at``.

        Returns:
            Event: Handle usable with :meth:`cancel`.

        Raises:
            SchedulingError: If ``at`` lies in the past.
        """
        if at < self._now:
            raise SchedulingError(f"cannot schedule {tag} at {at}us, clock is {self._now}us")
        event = Event(int(at), self._seq, target, tag, action, args)
        self._seq += 1
        heapq.heappush(self._heap, (event.fire_at, event.seq, event))
        return event

    def schedule_in(self, delay: int, action: Callable[..., Any], target: Target,
                    tag: str = "timer-expiry", *args: Any) -> Event:
        """Schedule ``action(*args)`` ``delay`` microseconds from now."""
        return self.schedule(action, target, self._now + delay, tag, *args)

    @staticmethod
    def cancel(handle: Optional[Event]) -> bool:
        """Cancel a pending event.

        Returns:
            bool: True iff the event existed and had neither fired nor been cancelled.
        """
        if handle is None or handle.fired or handle.cancelled:
            return False
        handle.cancelled = True
        return True

    def run_until(self, t_end: int) -> int:
        """Execute events in order while their time is at most ``t_end``.

        Returns:
            int: Number of events fired.

        Raises:
            SchedulingError: If a run is already in progress.
            SimulationFault: If a handler raises.
        """
        if self._running:
            raise SchedulingError("run_until is not re-entrant")
        self._running = True
        fired = 0
        try:
            while self._heap and self._heap[0][0] <= t_end:
                _, _, event = heapq.heappop(self._heap)
                if event.cancelled:
                    continue
                self._now = event.fire_at
                event.fired = True
                if self.keep_log:
                    self.event_log.append((event.fire_at, event.seq, event.target, event.tag))
                try:
                    event.action(*event.args)
                except SimulationFault:
                    raise
                except Exception as exc:
                    logger.error(f"Event handler failed: {event}")
                    raise SimulationFault(event, exc) from exc
                fired += 1
            self._now = max(self._now, t_end)
        finally:
            self._running = False
        return fired

    def pending(self) -> int:
        """Number of queued events that are not cancelled."""
        return sum(1 for _, _, event in self._heap if not event.cancelled)

    def rng(self, purpose: str, node: int = -1) -> RngStream:
        """Return the stream for ``(seed, purpose, node)``, creating it on first use."""
        key = (purpose, node)
        stream = self._streams.get(key)
        if stream is None:
            stream = self._streams[key] = RngStream(self.seed, purpose, node)
        return stream
