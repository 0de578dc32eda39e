"""Check-in log ingestion: Gowalla-format parsing, POI mapping, time slots
and joint (location type, time slot) pmf estimation.

Coordinates are handled as ``Decimal`` so that truncation to three decimals
and the fourth-decimal digit test behave exactly as on the printed values.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_DOWN, Decimal, InvalidOperation
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

N_CATEGORIES = 15
N_SLOTS = 4
N_CELLS = N_CATEGORIES * N_SLOTS

CATEGORY_NAMES = {
    1: "Accommodations", 2: "Governmental", 3: "Cemeteries", 4: "Educational",
    5: "Restaurants", 6: "Health centers", 7: "Parks", 8: "Banks",
    9: "Religious buildings", 10: "City buildings", 11: "Shops", 12: "Stadiums",
    13: "Recreational", 14: "Transportation stops", 15: "Dams and towers",
}

SLOT_NAMES = {
    1: "06:00-11:59", 2: "12:00-16:59", 3: "17:00-19:59", 4: "20:00-05:59",
}

_CELL = Decimal("0.001")


class FormatError(ValueError):
    """Input is too damaged to be trusted."""


class DegenerateInputError(ValueError):
    """Raised when a statistic is asked about an empty dataset."""


@dataclass(frozen=True)
class RawCheckin:
    user_id: str
    timestamp: datetime
    latitude: Decimal
    longitude: Decimal
    location_id: str


@dataclass(frozen=True)
class CheckinEntry:
    user_id: str
    timestamp: datetime
    latitude: float
    longitude: float
    category: int
    slot: int

    def __post_init__(self):
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise ValueError(f"coordinates out of range: {self.latitude}, {self.longitude}")
        if not 1 <= self.category <= N_CATEGORIES:
            raise ValueError(f"category {self.category} outside [1, {N_CATEGORIES}]")
        if not 1 <= self.slot <= N_SLOTS:
            raise ValueError(f"slot {self.slot} outside [1, {N_SLOTS}]")


@dataclass(frozen=True)
class PoiRecord:
    latitude: Decimal
    longitude: Decimal
    category: int

    def __post_init__(self):
        object.__setattr__(self, "latitude", _dec(self.latitude))
        object.__setattr__(self, "longitude", _dec(self.longitude))
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise ValueError(f"coordinates out of range: {self.latitude}, {self.longitude}")
        if not 1 <= self.category <= N_CATEGORIES:
            raise ValueError(f"category {self.category} outside [1, {N_CATEGORIES}]")


@dataclass
class ParseResult:
    entries: list[RawCheckin] = field(default_factory=list)
    skipped: int = 0
    bad_lines: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _dec(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        value = repr(value)
    return Decimal(str(value).strip())


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_checkins(lines: Iterable[str], max_bad_fraction: float = 0.5) -> ParseResult:
    """Parse tab-separated ``user, time, lat, lon, location-id`` lines.

    Malformed lines and out-of-range coordinates are skipped and counted.
    More than ``max_bad_fraction`` bad lines raises :class:`FormatError`.
    """
    result = ParseResult()
    seen = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        seen += 1
        parts = line.split("\t")
        try:
            if len(parts) != 5:
                raise ValueError("expected 5 fields")
            user, ts, lat, lon, loc = parts
            lat_d, lon_d = _dec(lat), _dec(lon)
            if not (lat_d.is_finite() and lon_d.is_finite()):
                raise ValueError("non-finite coordinate")
            if abs(lat_d) > 90 or abs(lon_d) > 180:
                raise ValueError("coordinate out of range")
            result.entries.append(RawCheckin(user.strip(), parse_timestamp(ts), lat_d, lon_d, loc.strip()))
        except (ValueError, InvalidOperation):
            result.skipped += 1
            result.bad_lines.append(lineno)
    if seen and result.skipped / seen > max_bad_fraction:
        raise FormatError(f"{result.skipped} of {seen} lines malformed "
                          f"(first bad line {result.bad_lines[0]})")
    return result


def read_pois(lines: Iterable[str]) -> list[PoiRecord]:
    """Read ``lat,lon,category_id`` rows; a header row is tolerated."""
    pois = []
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or not "".join(row).strip():
            continue
        if lineno == 1 and not _looks_numeric(row[0]):
            continue
        if len(row) != 3:
            raise FormatError(f"POI line {lineno}: expected 3 fields, got {len(row)}")
        try:
            pois.append(PoiRecord(_dec(row[0]), _dec(row[1]), int(row[2])))
        except (ValueError, InvalidOperation) as exc:
            raise FormatError(f"POI line {lineno}: {exc}") from exc
    return pois


def _looks_numeric(text: str) -> bool:
    try:
        Decimal(text.strip())
        return True
    except InvalidOperation:
        return False


def truncate3(value) -> Decimal:
    """Truncate toward zero to three decimals."""
    return _dec(value).quantize(_CELL, rounding=ROUND_DOWN)


def fourth_digit(value) -> int:
    return int(abs(_dec(value)) * 10000) % 10


def cell_key(lat, lon) -> tuple[Decimal, Decimal]:
    return truncate3(lat), truncate3(lon)


class PoiIndex:
    """POIs bucketed by their 3-decimal truncated coordinate cell."""

    def __init__(self, pois: Iterable[PoiRecord] = ()):
        self._cells: dict[tuple[Decimal, Decimal], list[PoiRecord]] = {}
        for poi in pois:
            self.add(poi)

    def add(self, poi: PoiRecord) -> None:
        self._cells.setdefault(cell_key(poi.latitude, poi.longitude), []).append(poi)

    def candidates(self, lat, lon) -> list[PoiRecord]:
        return self._cells.get(cell_key(lat, lon), [])

    def __len__(self):
        return sum(len(v) for v in self._cells.values())


def _poi_rank(poi: PoiRecord):
    digits = fourth_digit(poi.latitude) + fourth_digit(poi.longitude)
    return digits, poi.category, poi.latitude, poi.longitude


def map_poi(entry, pois: PoiIndex) -> int | None:
    """Category of the POI chosen for a check-in, or ``None`` if its cell is empty.

    Among POIs sharing the entry's truncated cell, the one with the smallest
    sum of fourth-decimal digits wins; ties go to the lowest
    ``(category, lat, lon)``.
    """
    cands = pois.candidates(entry.latitude, entry.longitude)
    if not cands:
        return None
    return min(cands, key=_poi_rank).category


def slot_of(ts: datetime) -> int:
    h = ts.hour
    if 6 <= h < 12:
        return 1
    if 12 <= h < 17:
        return 2
    if 17 <= h < 20:
        return 3
    return 4


@dataclass
class CheckinTable:
    """Column store for a mapped check-in dataset."""

    user_ids: list[str]
    epochs: np.ndarray
    categories: np.ndarray
    slots: np.ndarray

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, dtype=np.int64)
        self.categories = np.asarray(self.categories, dtype=np.int64)
        self.slots = np.asarray(self.slots, dtype=np.int64)
        n = len(self.user_ids)
        if not (self.epochs.size == self.categories.size == self.slots.size == n):
            raise ValueError("column lengths differ")
        if n and (self.categories.min() < 1 or self.categories.max() > N_CATEGORIES):
            raise ValueError("category out of range")
        if n and (self.slots.min() < 1 or self.slots.max() > N_SLOTS):
            raise ValueError("slot out of range")

    def __len__(self):
        return len(self.user_ids)

    @property
    def cells(self) -> np.ndarray:
        return (self.categories - 1) * N_SLOTS + (self.slots - 1)

    @classmethod
    def from_entries(cls, entries: Sequence[CheckinEntry]) -> "CheckinTable":
        return cls([e.user_id for e in entries],
                   [int(e.timestamp.timestamp()) for e in entries],
                   [e.category for e in entries], [e.slot for e in entries])

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "epoch_seconds", "category", "slot"])
        for row in zip(self.user_ids, self.epochs.tolist(), self.categories.tolist(), self.slots.tolist()):
            w.writerow(row)

    @classmethod
    def read_csv(cls, fh) -> "CheckinTable":
        users, epochs, cats, slots = [], [], [], []
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and row[0] == "user_id":
                continue
            if len(row) != 4:
                raise FormatError(f"mapped dataset line {lineno}: expected 4 fields")
            try:
                users.append(row[0])
                epochs.append(int(row[1]))
                cats.append(int(row[2]))
                slots.append(int(row[3]))
            except ValueError as exc:
                raise FormatError(f"mapped dataset line {lineno}: {exc}") from exc
        return cls(users, epochs, cats, slots)


def cells_of(entries) -> np.ndarray:
    """Flattened cell index ``(category-1)*4 + (slot-1)`` per record."""
    if isinstance(entries, CheckinTable):
        return entries.cells
    if isinstance(entries, np.ndarray):
        return entries.astype(np.int64)
    return np.array([(e.category - 1) * N_SLOTS + (e.slot - 1) for e in entries], dtype=np.int64)


@dataclass(frozen=True)
class JointPmf:
    """Joint pmf over (location type x, time slot y); ``probs[x-1, y-1]``."""

    probs: np.ndarray
    support_count: int

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (N_CATEGORIES, N_SLOTS):
            raise ValueError(f"pmf grid must be {N_CATEGORIES}x{N_SLOTS}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("pmf grid must be non-negative and sum to 1")
        if self.support_count < 1:
            raise ValueError("support_count must be >= 1")
        object.__setattr__(self, "probs", p)

    def prob(self, x: int, y: int) -> float:
        return float(self.probs[x - 1, y - 1])

    @property
    def p_x(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def p_y(self) -> np.ndarray:
        return self.probs.sum(axis=0)


def estimate_joint_pmf(entries, indices=None) -> JointPmf:
    """Maximum-likelihood joint pmf of the selected records."""
    cells = cells_of(entries)
    if indices is not None:
        cells = cells[np.asarray(indices, dtype=np.int64)]
    if cells.size == 0:
        raise DegenerateInputError("cannot estimate a pmf from an empty selection")
    counts = np.bincount(cells, minlength=N_CELLS).astype(np.float64)
    return JointPmf(counts.reshape(N_CATEGORIES, N_SLOTS) / cells.size, int(cells.size))


@dataclass
class IngestSummary:
    parsed: int
    skipped: int
    mapped: int
    dropped: int
    pois: int


def ingest(checkin_lines: Iterable[str], poi_lines: Iterable[str]) -> tuple[CheckinTable, IngestSummary]:
    """Parse, map and slot a check-in log. Unmappable entries are dropped."""
    parsed = parse_checkins(checkin_lines)
    index = PoiIndex(read_pois(poi_lines))
    if len(index) == 0:
        log.warning("POI list is empty; every check-in will be dropped")
    mapped: list[CheckinEntry] = []
    for raw in parsed.entries:
        cat = map_poi(raw, index)
        if cat is None:
            continue
        mapped.append(CheckinEntry(raw.user_id, raw.timestamp, float(raw.latitude),
                                   float(raw.longitude), cat, slot_of(raw.timestamp)))
    summary = IngestSummary(parsed=len(parsed.entries), skipped=parsed.skipped,
                            mapped=len(mapped), dropped=len(parsed.entries) - len(mapped),
                            pois=len(index))
    return CheckinTable.from_entries(mapped), summary


def read_mapped(path) -> CheckinTable:
    with open(path, newline="") as fh:
        return CheckinTable.read_csv(fh)


def write_mapped(table: CheckinTable, path) -> None:
    with open(path, "w", newline="") as fh:
        table.to_csv(fh)


def table_from_text(text: str) -> CheckinTable:
    return CheckinTable.read_csv(io.StringIO(text))
