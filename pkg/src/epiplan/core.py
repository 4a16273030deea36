"""Shared domain types, dataset schema, and the deterministic RNG contract.

Time is a 1-based integer day index. Counts are integers, rates are floats.
All types are immutable values; random streams are derived per task from a
(master_seed, labels) key so that parallel work is reproducible regardless
of scheduling.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_NUM_LEVELS = 3


class DataError(ValueError):
    """Structured ingestion/validation failure naming the offending location."""

    def __init__(self, message: str, *, file: str | None = None,
                 row: int | None = None, column: str | None = None):
        self.file = file
        self.row = row
        self.column = column
        where = []
        if file is not None:
            where.append(file)
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


def validate_action_level(level: int, num_levels: int = DEFAULT_NUM_LEVELS) -> int:
    """Check an ordinal intervention level against 1..J and return it."""
    if not isinstance(level, (int, np.integer)):
        raise DataError(f"action level must be an integer, got {level!r}")
    if num_levels < 2:
        raise DataError(f"need at least 2 action levels, got J={num_levels}")
    if not 1 <= level <= num_levels:
        raise DataError(f"action out of range: {level} not in 1..{num_levels}")
    return int(level)


@dataclass(frozen=True)
class RegionState:
    """Compartment counts (S, I, R) of one region at one time."""

    susceptible: int
    infectious: int
    removed: int
    population: int

    def __post_init__(self):
        s, i, r, m = (self.susceptible, self.infectious,
                      self.removed, self.population)
        if min(s, i, r) < 0 or m <= 0:
            raise DataError(
                f"negative compartment or non-positive population: "
                f"S={s}, I={i}, R={r}, M={m}")
        if s + i + r != m:
            raise DataError(
                f"compartments do not sum to population: "
                f"{s}+{i}+{r} != {m}")


@dataclass(frozen=True)
class GsirParams:
    """Disease parameters: removal probability and per-level infection rates.

    betas[j-1] is the infection rate under action level j; stringency must
    not increase the rate, so the list is non-increasing.
    """

    gamma: float
    betas: tuple[float, ...]

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise DataError(f"gamma must be in [0,1], got {self.gamma}")
        if len(self.betas) < 2:
            raise DataError("need at least 2 action levels of betas")
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if any(b < 0 for b in self.betas):
            raise DataError(f"negative beta in {self.betas}")
        if any(a < b - 1e-12 for a, b in zip(self.betas, self.betas[1:])):
            raise DataError(
                f"betas must be non-increasing with level, got {self.betas}")

    @property
    def num_levels(self) -> int:
        return len(self.betas)

    def beta(self, action: int) -> float:
        return self.betas[action - 1]


@dataclass(frozen=True)
class RegionMeta:
    region_id: str
    population: int
    gdp_annual: float

    def __post_init__(self):
        if self.population <= 0:
            raise DataError(
                f"population must be positive for region {self.region_id}")
        if self.gdp_annual < 0:
            raise DataError(
                f"gdp_annual must be nonnegative for region {self.region_id}")


@dataclass(frozen=True)
class SurveillanceSeries:
    """Daily cumulative confirmed counts and recorded action levels."""

    region_id: str
    cumulative_confirmed: tuple[int, ...]
    actions: tuple[int, ...]

    def __post_init__(self):
        if len(self.cumulative_confirmed) != len(self.actions):
            raise DataError(
                f"series length mismatch for region {self.region_id}: "
                f"{len(self.cumulative_confirmed)} counts vs "
                f"{len(self.actions)} actions")
        counts = self.cumulative_confirmed
        for t in range(1, len(counts)):
            if counts[t] < counts[t - 1]:
                raise DataError(
                    f"cumulative count decreases at day {t + 1} "
                    f"for region {self.region_id}")
        if any(c < 0 for c in counts):
            raise DataError(f"negative count for region {self.region_id}")

    def __len__(self) -> int:
        return len(self.cumulative_confirmed)


@dataclass(frozen=True)
class Dataset:
    regions: tuple[tuple[RegionMeta, SurveillanceSeries], ...]
    horizon: int
    decision_interval: int
    num_levels: int = DEFAULT_NUM_LEVELS

    def __post_init__(self):
        if self.decision_interval < 1:
            raise DataError(
                f"decision_interval must be >= 1, got {self.decision_interval}")
        for meta, series in self.regions:
            if meta.region_id != series.region_id:
                raise DataError(
                    f"meta/series region mismatch: {meta.region_id} "
                    f"vs {series.region_id}")
            for t, a in enumerate(series.actions):
                try:
                    validate_action_level(a, self.num_levels)
                except DataError as exc:
                    raise DataError(
                        f"region {meta.region_id}, day {t + 1}: {exc}") from exc

    def region_ids(self) -> list[str]:
        return [meta.region_id for meta, _ in self.regions]

    def region(self, region_id: str) -> tuple[RegionMeta, SurveillanceSeries]:
        for meta, series in self.regions:
            if meta.region_id == region_id:
                return meta, series
        raise KeyError(f"unknown region {region_id!r}")


@dataclass(frozen=True)
class SeedSpec:
    """Root key for deriving reproducible random streams."""

    master_seed: int
    stream_id: int = 0


def derive_rng(seed: SeedSpec, labels: tuple[int, ...] = ()) -> np.random.Generator:
    """Derive a random stream as a pure function of (seed, labels).

    Distinct label paths give statistically independent Philox streams,
    so parallel rollouts keyed by (region, time, replication) reproduce
    regardless of scheduling.
    """
    ss = np.random.SeedSequence(
        entropy=int(seed.master_seed) & (2**64 - 1),
        spawn_key=(int(seed.stream_id), *[int(x) & (2**64 - 1) for x in labels]),
    )
    return np.random.Generator(np.random.Philox(ss))


def decision_points(horizon: int, interval: int, start: int) -> list[int]:
    """Days on which the action may change: {start, start+interval, ...} ∩ [1, horizon]."""
    if interval <= 0:
        raise ValueError(f"interval must be positive, got {interval}")
    if start < 1:
        raise ValueError(f"start must be >= 1, got {start}")
    return list(range(start, horizon + 1, interval))


def _repair_monotone(counts: list[int], region_id: str) -> list[int]:
    """Replace dips in a cumulative series by the average of their neighbors.

    A dip is an entry below its predecessor; interior dips become the
    (half-up rounded) mean of the two neighbors, a trailing dip is clamped
    to its predecessor.
    """
    out = list(counts)
    for t in range(1, len(out)):
        if out[t] < out[t - 1]:
            if t + 1 < len(out) and out[t + 1] >= out[t - 1]:
                out[t] = int(np.floor((out[t - 1] + out[t + 1]) / 2 + 0.5))
            else:
                out[t] = out[t - 1]
    return out


_REGIONS_HEADER = ["region_id", "population", "gdp_annual"]
_SERIES_HEADER = ["region_id", "day", "cumulative_confirmed", "action_level"]


def _parse_int(value: str, *, file: str, row: int, column: str,
               minimum: int | None = None) -> int:
    try:
        parsed = int(value)
    except ValueError:
        raise DataError(f"not an integer: {value!r}",
                        file=file, row=row, column=column) from None
    if minimum is not None and parsed < minimum:
        raise DataError(f"value {parsed} below minimum {minimum}",
                        file=file, row=row, column=column)
    return parsed


def load_dataset(path: str | Path, *, horizon: int | None = None,
                 decision_interval: int = 7,
                 num_levels: int = DEFAULT_NUM_LEVELS) -> Dataset:
    """Load a dataset directory holding ``regions.csv`` and ``series.csv``.

    Dips in cumulative counts are repaired by neighbor averaging; any other
    schema violation raises :class:`DataError` naming the file/row/column.
    """
    root = Path(path)
    regions_file = root / "regions.csv"
    series_file = root / "series.csv"
    for f in (regions_file, series_file):
        if not f.exists():
            raise DataError(f"missing file {f}")

    metas: dict[str, RegionMeta] = {}
    with regions_file.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _REGIONS_HEADER:
            raise DataError(
                f"bad header {reader.fieldnames}, expected {_REGIONS_HEADER}",
                file="regions.csv")
        for rownum, rec in enumerate(reader, start=2):
            rid = rec["region_id"]
            if rid in metas:
                raise DataError(f"duplicate region {rid!r}",
                                file="regions.csv", row=rownum)
            metas[rid] = RegionMeta(
                region_id=rid,
                population=_parse_int(rec["population"], file="regions.csv",
                                      row=rownum, column="population", minimum=1),
                gdp_annual=float(rec["gdp_annual"]),
            )

    rows: dict[str, dict[int, tuple[int, int]]] = {rid: {} for rid in metas}
    with series_file.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _SERIES_HEADER:
            raise DataError(
                f"bad header {reader.fieldnames}, expected {_SERIES_HEADER}",
                file="series.csv")
        for rownum, rec in enumerate(reader, start=2):
            rid = rec["region_id"]
            if rid not in rows:
                raise DataError(f"unknown region {rid!r}",
                                file="series.csv", row=rownum)
            day = _parse_int(rec["day"], file="series.csv", row=rownum,
                             column="day", minimum=1)
            count = _parse_int(rec["cumulative_confirmed"], file="series.csv",
                               row=rownum, column="cumulative_confirmed",
                               minimum=0)
            action = _parse_int(rec["action_level"], file="series.csv",
                                row=rownum, column="action_level")
            try:
                validate_action_level(action, num_levels)
            except DataError:
                raise DataError(f"action out of range: {action}",
                                file="series.csv", row=rownum,
                                column="action_level") from None
            if day in rows[rid]:
                raise DataError(f"duplicate day {day} for region {rid!r}",
                                file="series.csv", row=rownum)
            rows[rid][day] = (count, action)

    pairs = []
    for rid, meta in metas.items():
        days = sorted(rows[rid])
        if not days:
            raise DataError(f"no series rows for region {rid!r}",
                            file="series.csv")
        if days != list(range(1, len(days) + 1)):
            raise DataError(
                f"days for region {rid!r} are not contiguous from 1",
                file="series.csv")
        counts = _repair_monotone([rows[rid][d][0] for d in days], rid)
        actions = [rows[rid][d][1] for d in days]
        pairs.append((meta, SurveillanceSeries(
            region_id=rid,
            cumulative_confirmed=tuple(counts),
            actions=tuple(actions))))

    lengths = {len(series) for _, series in pairs}
    if len(lengths) > 1:
        raise DataError(f"inconsistent series lengths across regions: {sorted(lengths)}",
                        file="series.csv")
    series_len = lengths.pop()
    if horizon is None:
        horizon = series_len
    return Dataset(regions=tuple(pairs), horizon=horizon,
                   decision_interval=decision_interval, num_levels=num_levels)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in the canonical CSV form (sorted regions, LF endings)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    pairs = sorted(dataset.regions, key=lambda p: p[0].region_id)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_REGIONS_HEADER)
    for meta, _ in pairs:
        writer.writerow([meta.region_id, meta.population,
                         format(meta.gdp_annual, "g")])
    (root / "regions.csv").write_text(buf.getvalue())

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_SERIES_HEADER)
    for meta, series in pairs:
        for t in range(len(series)):
            writer.writerow([meta.region_id, t + 1,
                             series.cumulative_confirmed[t],
                             series.actions[t]])
    (root / "series.csv").write_text(buf.getvalue())
