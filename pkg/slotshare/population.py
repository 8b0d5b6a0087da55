"""Active-user populations: fixed, Poisson-dynamic and trace-driven."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import HorizonError, PopulationError, TraceError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["user_id", "t", "x", "y"]

Position = Tuple[float, float]


@dataclass(frozen=True)
class UserRecord:
    """Lifetime of one user, with an optional per-slot trajectory."""

    user_id: int
    t_arr: int
    t_dep: int
    trajectory: Optional[Tuple[Tuple[int, float, float], ...]] = None

    def __post_init__(self) -> None:
        if self.t_arr < 1:
            raise PopulationError(f"User {self.user_id}: t_arr must be >= 1, got {self.t_arr}")
        if self.t_dep < self.t_arr:
            raise PopulationError(
                f"User {self.user_id}: t_dep {self.t_dep} precedes t_arr {self.t_arr}"
            )
        if self.trajectory is not None and len(self.trajectory) != self.duration:
            raise PopulationError(
                f"User {self.user_id}: trajectory lists {len(self.trajectory)} slots, expected {self.duration}"
            )

    @property
    def duration(self) -> int:
        return self.t_dep - self.t_arr + 1

    def is_active(self, t: int) -> bool:
        return self.t_arr <= t <= self.t_dep

    def position(self, t: int) -> Optional[Position]:
        if self.trajectory is None or not self.is_active(t):
            return None
        slot, x, y = self.trajectory[t - self.t_arr]
        return (x, y)


@dataclass(frozen=True)
class FixedK:
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise PopulationError(f"FixedK requires k >= 1, got {self.k}")


@dataclass(frozen=True)
class PoissonDynamic:
    lam: float
    t_min: int
    t_max: int

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise PopulationError(f"Poisson arrival rate must be positive, got {self.lam}")
        if not 1 <= self.t_min <= self.t_max:
            raise PopulationError(
                f"Durations require 1 <= t_min <= t_max, got t_min={self.t_min} t_max={self.t_max}"
            )

    @property
    def mean_active(self) -> float:
        """Stationary mean of |K(t)| by Little's law: lambda * E[duration]."""
        return self.lam * (self.t_min + self.t_max) / 2


@dataclass(frozen=True)
class TraceDriven:
    records: Tuple[UserRecord, ...]


PopulationModel = Union[FixedK, PoissonDynamic, TraceDriven]


def sample_arrivals(
    model: PoissonDynamic, t: int, rng: np.random.Generator, *, first_id: int = 1
) -> List[UserRecord]:
    """Users arriving at the start of slot ``t``; ids are assigned from ``first_id`` upward."""

    count = int(rng.poisson(model.lam))
    records: List[UserRecord] = []
    for offset in range(count):
        duration = int(rng.integers(model.t_min, model.t_max + 1))
        records.append(UserRecord(user_id=first_id + offset, t_arr=t, t_dep=t + duration - 1))
    return records


class Population:
    """A population materialized up to a horizon, with vectorized membership queries."""

    def __init__(self, records: Sequence[UserRecord], horizon: int) -> None:
        self.records: Tuple[UserRecord, ...] = tuple(sorted(records, key=lambda r: (r.t_arr, r.user_id)))
        self.horizon = horizon
        self._by_id: Dict[int, UserRecord] = {r.user_id: r for r in self.records}
        if len(self._by_id) != len(self.records):
            raise PopulationError("User ids must be unique")
        self._ids = np.array([r.user_id for r in self.records], dtype=np.int64)
        self._arr = np.array([r.t_arr for r in self.records], dtype=np.int64)
        self._dep = np.array([r.t_dep for r in self.records], dtype=np.int64)

    @classmethod
    def materialize(
        cls, model: PopulationModel, horizon: int, rng: Optional[np.random.Generator] = None
    ) -> "Population":
        if horizon < 1:
            raise PopulationError(f"Horizon must be positive, got {horizon}")
        if isinstance(model, FixedK):
            records = [UserRecord(user_id=k, t_arr=1, t_dep=horizon) for k in range(1, model.k + 1)]
        elif isinstance(model, PoissonDynamic):
            if rng is None:
                raise PopulationError("Poisson populations require an rng")
            records = []
            for t in range(1, horizon + 1):
                records.extend(sample_arrivals(model, t, rng, first_id=len(records) + 1))
        elif isinstance(model, TraceDriven):
            records = [r for r in model.records if r.t_arr <= horizon]
        else:
            raise PopulationError(f"Unknown population model {model!r}")
        logger.debug("population materialized users=%d horizon=%d", len(records), horizon)
        return cls(records, horizon)

    def __len__(self) -> int:
        return len(self.records)

    def get(self, user_id: int) -> UserRecord:
        return self._by_id[user_id]

    def active_ids(self, t: int) -> np.ndarray:
        if t < 1 or t > self.horizon:
            raise HorizonError(f"Slot {t} outside materialized horizon [1:{self.horizon}]")
        mask = (self._arr <= t) & (self._dep >= t)
        return np.sort(self._ids[mask])

    def mean_active(self) -> float:
        """Time average of |K(t)| over the horizon."""
        dep = np.minimum(self._dep, self.horizon)
        return float(np.sum(dep - self._arr + 1)) / self.horizon


def active_set(population: Population, t: int) -> frozenset:
    """Ids of users with t_arr <= t <= t_dep."""
    return frozenset(int(u) for u in population.active_ids(t))


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_trace(path: str | Path, *, cell_radius: Optional[float] = None) -> List[UserRecord]:
    """Parse a ``user_id,t,x,y`` trace into records sorted by arrival.

    A header row is detected by a non-numeric first field. Every user must list
    every slot between its first and last row.
    """

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceError(f"Cannot read trace {path}: {exc}") from exc
    # physical line number of every non-blank line
    kept = [(n, line) for n, line in enumerate(text.splitlines(), start=1) if line.strip()]
    has_header = bool(kept) and not _is_number(kept[0][1].split(",")[0].strip())
    if has_header:
        kept = kept[1:]
    if not kept:
        raise TraceError(f"{path}: trace has no rows")
    line_numbers = [n for n, _ in kept]
    try:
        df = pd.read_csv(
            io.StringIO("\n".join(line for _, line in kept)),
            header=None,
            names=TRACE_COLUMNS,
            dtype=str,
            index_col=False,
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise TraceError(f"{path}: {exc}") from exc

    numeric = df.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1)
    ids_frac = numeric["user_id"] % 1 != 0
    t_frac = numeric["t"] % 1 != 0
    bad |= ids_frac.fillna(True) | t_frac.fillna(True)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise TraceError(
            f"{path}: malformed row at line {line_numbers[row]}: {','.join(map(str, df.iloc[row].tolist()))}"
        )
    if (numeric["t"] < 1).any():
        row = int(np.flatnonzero((numeric["t"] < 1).to_numpy())[0])
        raise TraceError(f"{path}: slot index must be >= 1 at line {line_numbers[row]}")

    numeric["user_id"] = numeric["user_id"].astype(np.int64)
    numeric["t"] = numeric["t"].astype(np.int64)
    records: List[UserRecord] = []
    for user_id, group in numeric.groupby("user_id", sort=True):
        group = group.sort_values("t")
        slots = group["t"].to_numpy()
        if len(np.unique(slots)) != len(slots):
            dup = int(slots[np.flatnonzero(np.diff(slots) == 0)[0]])
            raise TraceError(f"User {user_id} lists slot {dup} more than once")
        expected = np.arange(slots[0], slots[-1] + 1)
        if len(expected) != len(slots):
            missing = int(np.setdiff1d(expected, slots)[0])
            raise TraceError(f"User {user_id} trajectory has a gap at slot {missing}")
        xs = group["x"].to_numpy(dtype=float)
        ys = group["y"].to_numpy(dtype=float)
        if cell_radius is not None:
            dist = np.hypot(xs, ys)
            if (dist > cell_radius).any():
                slot = int(slots[np.flatnonzero(dist > cell_radius)[0]])
                raise TraceError(
                    f"User {user_id} at slot {slot} lies outside the cell radius {cell_radius}"
                )
        trajectory = tuple((int(s), float(x), float(y)) for s, x, y in zip(slots, xs, ys))
        records.append(
            UserRecord(user_id=int(user_id), t_arr=int(slots[0]), t_dep=int(slots[-1]), trajectory=trajectory)
        )
    records.sort(key=lambda r: (r.t_arr, r.user_id))
    logger.info("trace loaded path=%s users=%d", path, len(records))
    return records


def emit_trace(records: Iterable[UserRecord], path: str | Path) -> None:
    """Write records with trajectories back to the trace format, with a header row."""

    rows = []
    for record in records:
        if record.trajectory is None:
            raise TraceError(f"User {record.user_id} has no trajectory to emit")
        rows.extend((record.user_id, slot, x, y) for slot, x, y in record.trajectory)
    pd.DataFrame(rows, columns=TRACE_COLUMNS).to_csv(path, index=False)


def static_positions(
    records: Sequence[UserRecord], cell_radius: float, rng: np.random.Generator
) -> List[UserRecord]:
    """Attach a fixed position, uniform over the cell disc, to records without a trajectory."""

    placed: List[UserRecord] = []
    for record in records:
        if record.trajectory is not None:
            placed.append(record)
            continue
        radius = cell_radius * np.sqrt(rng.random())
        angle = 2 * np.pi * rng.random()
        x, y = float(radius * np.cos(angle)), float(radius * np.sin(angle))
        trajectory = tuple((t, x, y) for t in range(record.t_arr, record.t_dep + 1))
        placed.append(UserRecord(record.user_id, record.t_arr, record.t_dep, trajectory))
    return placed
