"""The four competing policy families used for dominance comparisons.

All baselines consume observed new-confirmed counts, not latent states;
their per-region history lives in an explicit OccurrenceMemory value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .core import Dataset


@dataclass(frozen=True)
class OccurrenceMemory:
    """Recent daily new-confirmed counts plus the two day counters that the
    occurrence-based families key on."""

    recent_counts: tuple[int, ...] = ()
    days_since_first: int | None = None
    days_since_last: int | None = None
    max_lookback: int = 64

    def record(self, new_cases: int) -> "OccurrenceMemory":
        """Append one day's new-confirmed count (immutably)."""
        counts = (self.recent_counts + (new_cases,))[-self.max_lookback:]
        if new_cases > 0:
            since_first = 0 if self.days_since_first is None \
                else self.days_since_first + 1
            since_last = 0
        else:
            since_first = None if self.days_since_first is None \
                else self.days_since_first + 1
            since_last = None if self.days_since_last is None \
                else self.days_since_last + 1
        return OccurrenceMemory(recent_counts=counts,
                                days_since_first=since_first,
                                days_since_last=since_last,
                                max_lookback=self.max_lookback)

    def new_cases_in_window(self, m: int) -> bool:
        """Any new case over the strict past-m-days window (t-m, t]."""
        return any(c > 0 for c in self.recent_counts[-m:])

    def yesterday_count(self) -> int:
        return self.recent_counts[-1] if self.recent_counts else 0


def mitigation_policy(m: int) -> Callable[[OccurrenceMemory], int]:
    """Level 2 while any case was confirmed in the past m days, else level 1."""
    if m < 1:
        raise ValueError(f"lookback m must be >= 1, got {m}")

    def policy(memory: OccurrenceMemory) -> int:
        return 2 if memory.new_cases_in_window(m) else 1

    return policy


def suppression_policy(m: int) -> Callable[[OccurrenceMemory], int]:
    """Escalate to level 2 m days after the first case and to level 3 after
    m more; de-escalate one level after m case-free days and another after
    2m. A new case resets the case-free counter."""
    if m < 1:
        raise ValueError(f"stage length m must be >= 1, got {m}")

    def policy(memory: OccurrenceMemory) -> int:
        if memory.days_since_first is None:
            return 1
        dsf = memory.days_since_first
        escalation = 3 if dsf >= 2 * m else (2 if dsf >= m else 1)
        dsl = memory.days_since_last
        if dsl is None:
            dsl = 0
        de_escalation = 1 if dsl >= 2 * m else (2 if dsl >= m else 3)
        return min(escalation, de_escalation)

    return policy


def count_threshold_policy(m: int) -> Callable[[int], int]:
    """Level 3 when yesterday's new-case count strictly exceeds m, level 1
    when it is zero, level 2 otherwise."""
    if m < 1:
        raise ValueError(f"threshold m must be >= 1, got {m}")

    def policy(yesterday_new_cases: int) -> int:
        if yesterday_new_cases > m:
            return 3
        if yesterday_new_cases == 0:
            return 1
        return 2

    return policy


def behavior_policy(dataset: Dataset, region_id: str, day: int) -> int:
    """Replay the action recorded in the dataset."""
    _, series = dataset.region(region_id)
    if not 1 <= day <= len(series):
        raise IndexError(
            f"day {day} outside recorded series of length {len(series)} "
            f"for region {region_id}")
    return series.actions[day - 1]
