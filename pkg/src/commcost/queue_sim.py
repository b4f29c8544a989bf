"""Replay of the two-queue receive-matching discipline.

The matching engine keeps two receive-side queues. An arriving envelope scans
the posted-receive queue front to back for a tag match and is appended to the
unexpected-message queue if nothing matches; a newly posted receive scans the
unexpected queue and is appended to the posted queue if it finds nothing.
Every queue entry examined counts as one step, which is the quantity the
quadratic queue-search penalty prices.

Receiving messages in posting order costs one step per match; receiving them
in the opposite order walks the whole queue every time, n(n+1)/2 steps total.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .errors import TraceError

__all__ = [
    "POSTS_FIRST",
    "ALTERNATING",
    "QueueTrace",
    "QueueStats",
    "in_order_trace",
    "reversed_trace",
    "random_trace",
    "simulate_queue",
    "worst_case_steps",
]

POSTS_FIRST = "posts_first"
ALTERNATING = "alternating"


@dataclass(frozen=True)
class QueueTrace:
    """Post order and arrival order, both permutations of the same tag set."""

    post_order: tuple[int, ...]
    arrival_order: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "post_order", tuple(self.post_order))
        object.__setattr__(self, "arrival_order", tuple(self.arrival_order))
        if len(set(self.post_order)) != len(self.post_order):
            raise TraceError("post_order contains duplicate tags")
        if sorted(self.post_order) != sorted(self.arrival_order):
            raise TraceError("post and arrival orders must permute the same tags")

    @property
    def n(self) -> int:
        return len(self.post_order)


def in_order_trace(n: int) -> QueueTrace:
    tags = tuple(range(n))
    return QueueTrace(tags, tags)


def reversed_trace(n: int) -> QueueTrace:
    tags = tuple(range(n))
    return QueueTrace(tags, tags[::-1])


def random_trace(n: int, seed: int = 0) -> QueueTrace:
    arrivals = list(range(n))
    random.Random(seed).shuffle(arrivals)
    return QueueTrace(tuple(range(n)), tuple(arrivals))


@dataclass(frozen=True)
class QueueStats:
    total_steps: int
    max_posted_depth: int
    max_unexpected_depth: int


def _events(schedule: str | Sequence[bool], n: int) -> Sequence[bool]:
    """Expand a schedule into a post(True)/arrival(False) event sequence."""
    if schedule == POSTS_FIRST:
        return [True] * n + [False] * n
    if schedule == ALTERNATING:
        return [True, False] * n
    if isinstance(schedule, str):
        raise TraceError(f"unknown schedule {schedule!r}")
    events = [bool(e) for e in schedule]
    if sum(events) != n or len(events) != 2 * n:
        raise TraceError(
            f"schedule must interleave exactly {n} posts and {n} arrivals"
        )
    return events


def simulate_queue(
    trace: QueueTrace, schedule: str | Sequence[bool] = POSTS_FIRST
) -> QueueStats:
    """Replay ``trace`` under ``schedule``, counting every entry examined.

    A failed scan examines the whole queue; a successful scan examines the
    entries up to and including the match, which is then removed. Both queues
    drain completely because the two orders carry the same tags.
    """
    events = _events(schedule, trace.n)
    posts = iter(trace.post_order)
    arrivals = iter(trace.arrival_order)
    posted: list[int] = []
    unexpected: list[int] = []
    steps = 0
    max_posted = 0
    max_unexpected = 0
    for is_post in events:
        if is_post:
            tag = next(posts)
            try:
                i = unexpected.index(tag)
            except ValueError:
                steps += len(unexpected)
                posted.append(tag)
                if len(posted) > max_posted:
                    max_posted = len(posted)
            else:
                steps += i + 1
                unexpected.pop(i)
        else:
            tag = next(arrivals)
            try:
                i = posted.index(tag)
            except ValueError:
                steps += len(posted)
                unexpected.append(tag)
                if len(unexpected) > max_unexpected:
                    max_unexpected = len(unexpected)
            else:
                steps += i + 1
                posted.pop(i)
    assert not posted and not unexpected, "every message must match exactly once"
    return QueueStats(steps, max_posted, max_unexpected)


def worst_case_steps(n: int) -> int:
    """Steps for receives posted opposite to arrival order: n(n+1)/2."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return n * (n + 1) // 2
