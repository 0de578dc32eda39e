"""Seeded stand-in for a regional check-in corpus.

Real check-in logs and POI snapshots are not redistributable, so experiments
fall back to a synthetic corpus whose (location type, time slot) structure
resembles a mid-sized US region: restaurants and shops dominate, and each
location type has its own daily rhythm.
"""

from __future__ import annotations

from datetime import datetime, timezone
from decimal import Decimal

import numpy as np

from .checkins import N_CATEGORIES, N_SLOTS, CheckinTable, PoiRecord, truncate3

# rough share of check-ins per location type (types 1..15)
CATEGORY_WEIGHTS = np.array([0.06, 0.03, 0.005, 0.08, 0.22, 0.02, 0.08, 0.02,
                             0.03, 0.04, 0.20, 0.05, 0.09, 0.07, 0.005])
CATEGORY_WEIGHTS = CATEGORY_WEIGHTS / CATEGORY_WEIGHTS.sum()

_MORNING = [0.45, 0.30, 0.10, 0.15]
_DAYTIME = [0.30, 0.50, 0.12, 0.08]
_EVENING = [0.10, 0.25, 0.35, 0.30]
_NIGHT = [0.15, 0.15, 0.20, 0.50]

# per-type slot profiles; restaurants peak in the early evening slot
SLOT_PROFILES = np.array([
    _NIGHT, _DAYTIME, _MORNING, _MORNING, [0.20, 0.28, 0.36, 0.16],
    _DAYTIME, _DAYTIME, _DAYTIME, _MORNING, _DAYTIME, [0.20, 0.45, 0.25, 0.10],
    _EVENING, _EVENING, [0.35, 0.25, 0.25, 0.15], _DAYTIME,
])

# (start hour, hours in slot) for slots 1..4; slot 4 wraps past midnight
_SLOT_HOURS = [(6, 6), (12, 5), (17, 3), (20, 10)]

MIDWEST = (37.0, 47.0, -97.0, -82.0)
_EPOCH0 = datetime(2009, 2, 1, tzinfo=timezone.utc)
_DAYS = 600

assert CATEGORY_WEIGHTS.size == N_CATEGORIES and SLOT_PROFILES.shape == (N_CATEGORIES, N_SLOTS)


def joint_pmf() -> np.ndarray:
    """The generating (category, slot) distribution as a 15x4 grid."""
    return CATEGORY_WEIGHTS[:, None] * SLOT_PROFILES


def _draw_cells(rng, size):
    cats = rng.choice(N_CATEGORIES, size=size, p=CATEGORY_WEIGHTS)
    u = rng.random(size)
    cdf = np.cumsum(SLOT_PROFILES, axis=1)[cats]
    slots = np.minimum((u[:, None] > cdf).sum(axis=1), N_SLOTS - 1)
    return cats + 1, slots + 1


def _draw_epochs(rng, slots):
    start = np.array([h for h, _ in _SLOT_HOURS])[slots - 1]
    span = np.array([w for _, w in _SLOT_HOURS])[slots - 1]
    hour = (start + (rng.random(slots.size) * span).astype(np.int64)) % 24
    day = rng.integers(0, _DAYS, size=slots.size)
    sec = rng.integers(0, 3600, size=slots.size)
    return int(_EPOCH0.timestamp()) + day * 86400 + hour * 3600 + sec


def synthetic_table(size: int, rng: np.random.Generator, users: int = 5000) -> CheckinTable:
    """A mapped check-in table drawn straight from the generating pmf."""
    if size < 1:
        raise ValueError("corpus size must be positive")
    cats, slots = _draw_cells(rng, size)
    epochs = _draw_epochs(rng, slots)
    uid = rng.integers(0, users, size=size)
    return CheckinTable([str(u) for u in uid.tolist()], epochs, cats, slots)


def synthetic_pois(count: int, rng: np.random.Generator, box=MIDWEST) -> list[PoiRecord]:
    lat = np.round(rng.uniform(box[0], box[1], size=count), 4)
    lon = np.round(rng.uniform(box[2], box[3], size=count), 4)
    cat = rng.choice(N_CATEGORIES, size=count, p=CATEGORY_WEIGHTS) + 1
    return [PoiRecord(f"{a:.4f}", f"{b:.4f}", int(c)) for a, b, c in zip(lat, lon, cat)]


def poi_lines(pois) -> list[str]:
    return ["lat,lon,category"] + [f"{p.latitude},{p.longitude},{p.category}" for p in pois]


def checkin_lines(pois, count: int, rng: np.random.Generator,
                  unmappable: float = 0.05, users: int = 500) -> list[str]:
    """Check-in log lines near the given POIs.

    Each visit lands in its POI's 0.001-degree cell with a random fourth
    decimal digit; the time slot follows the POI type's daily profile. A
    fraction ``unmappable`` of visits is placed well away from every POI.
    """
    if not pois:
        raise ValueError("need at least one POI")
    idx = rng.integers(0, len(pois), size=count)
    cats = np.array([pois[i].category for i in idx.tolist()])
    u = rng.random(count)
    cdf = np.cumsum(SLOT_PROFILES, axis=1)[cats - 1]
    slots = np.minimum((u[:, None] > cdf).sum(axis=1), N_SLOTS - 1) + 1
    epochs = _draw_epochs(rng, slots)
    lost = rng.random(count) < unmappable
    out = []
    for k in range(count):
        p = pois[idx[k]]
        lat = p.latitude
        if lost[k]:
            # no POI lies south of the box
            lat = Decimal(f"{MIDWEST[0] - 1.0 - rng.random():.4f}")
        d0, d1 = rng.integers(0, 10, size=2)
        lat_s = f"{truncate3(lat):.3f}{d0}"
        lon_s = f"{truncate3(p.longitude):.3f}{d1}"
        ts = datetime.fromtimestamp(int(epochs[k]), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        loc = 10000 + int(idx[k])
        out.append(f"{int(rng.integers(0, users))}\t{ts}\t{lat_s}\t{lon_s}\t{loc}")
    return out

