"""Seeded synthetic alert/jam JSONL generator.

Reproduces the ingestion schema and the level <-> (speed, delay, length)
coupling so the leakage phenomenon is reproducible without any proprietary
data. Values are drawn from per-level bands (speed decreasing with level,
delay and length increasing), each perturbed by `coupling_noise`; with
coupling_noise = 0 the bands are disjoint, so the telemetry functionally
determines the level and a perfect classifier on the leaky feature set
exists. Band midpoints and every other distribution here are generator
parameters, not claims about any real-world feed.

Severity is additionally tilted toward higher levels during Pacific rush
hours, giving the honest (time/location) features a weak but real signal;
the default level weights put the positive fraction near 0.66.

All draws come from the documented counter-based streams in jamcast.rng,
indexed by absolute row number: output bytes depend only on the config,
never on chunking, and scale linearly in row count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from jamcast import rng
from jamcast.errors import ValidationError
from jamcast.events import EVENT_TYPES, decompose_epoch_ms

# Dec 31 2017 00:00 UTC .. Jan 9 2018 00:00 UTC: the nine-day default window
DEFAULT_WINDOW_MS = (1514678400000, 1515456000000)

DEFAULT_LEVEL_WEIGHTS = (0.16, 0.20, 0.265, 0.215, 0.16)

# per-level bands, levels 1..5; see module docstring
SPEED_MID = np.array([60.0, 45.0, 30.0, 15.0, 3.0])
SPEED_HALF = np.array([4.0, 4.0, 4.0, 4.0, 3.0])
DELAY_MID = np.array([30.0, 90.0, 240.0, 600.0, 1500.0])
DELAY_HALF = np.array([10.0, 30.0, 60.0, 150.0, 300.0])
LENGTH_MID = np.array([200.0, 600.0, 1500.0, 3000.0, 6000.0])
LENGTH_HALF = np.array([50.0, 150.0, 300.0, 500.0, 1000.0])

RUSH_HOURS = frozenset({7, 8, 9, 16, 17, 18})
_RUSH_TILT = 2.0  # weight multiplier slope toward level 5 during rush hours

STREETS = (
    "I-405 N", "I-405 S", "I-10 E", "I-10 W", "US-101 N", "US-101 S",
    "I-110 N", "I-110 S", "I-5 N", "I-5 S", "I-605 N", "I-605 S",
    "SR-134 E", "SR-134 W", "I-210 E", "I-210 W", "Sunset Blvd",
    "Wilshire Blvd", "Santa Monica Blvd", "Venice Blvd", "Olympic Blvd",
    "Sepulveda Blvd", "Ventura Blvd", "La Cienega Blvd", "Crenshaw Blvd",
    "Figueroa St", "Western Ave", "Vermont Ave", "Normandie Ave",
    "Pacific Coast Hwy", "Laurel Canyon Blvd", "Mulholland Dr",
)

CITIES = (
    "Los Angeles", "Santa Monica", "Long Beach", "Pasadena", "Glendale",
    "Burbank", "Torrance", "Inglewood", "Culver City", "El Segundo",
    "Beverly Hills", "Sherman Oaks",
)

ROAD_TYPES = (1, 2, 3, 4, 6, 7, 17, 20)

DESCRIPTIONS = (
    "heavy traffic on the ramp",
    "car stopped on the shoulder",
    "object on the road",
    "accident in the left lane",
    "road closed for construction",
    "flooding near the underpass",
    "pothole reported by driver",
    "stalled vehicle blocking lane",
    "police activity ahead",
    "traffic light out",
)

# stream channel ids (documented in docs/formats.md)
_CH_PUB = 1
_CH_LEVEL = 2
_CH_SPEED = 3
_CH_SPEED_N = 4
_CH_DELAY = 5
_CH_DELAY_N = 6
_CH_LENGTH = 7
_CH_LENGTH_N = 8
_CH_LON = 9
_CH_LAT = 10
_CH_STREET = 11
_CH_CITY = 12
_CH_ROAD = 13
_CH_TYPE = 14
_CH_DESC = 15

_TAG_JAMS = 0x4A414D53  # "JAMS"
_TAG_ALERTS = 0x414C5254  # "ALRT"

_CHUNK = 1 << 18


@dataclass(frozen=True)
class GenConfig:
    """Generator configuration; every stream derives from `seed`."""

    n_jams: int = 0
    n_alerts: int = 0
    seed: int = 0
    date_window: tuple[int, int] = DEFAULT_WINDOW_MS
    level_weights: tuple[float, float, float, float, float] = DEFAULT_LEVEL_WEIGHTS
    coupling_noise: float = 0.0

    def validate(self) -> None:
        if self.n_jams < 0 or self.n_alerts < 0:
            raise ValidationError("row counts must be >= 0")
        if len(self.level_weights) != 5 or any(w < 0 for w in self.level_weights):
            raise ValidationError("level_weights must be 5 non-negative reals")
        if sum(self.level_weights) <= 0:
            raise ValidationError("level_weights must sum to > 0")
        if self.coupling_noise < 0:
            raise ValidationError("coupling_noise must be >= 0")
        start, end = self.date_window
        if not 0 < start < end:
            raise ValidationError("date_window must satisfy 0 < start < end")


def _level_cdfs(weights: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(weights, dtype=np.float64)
    tilt = 1.0 + _RUSH_TILT * np.arange(5) / 4.0
    base = np.cumsum(w) / w.sum()
    rush = np.cumsum(w * tilt) / (w * tilt).sum()
    return base, rush


def _pub_dates(seed: int, start_row: int, n: int, window: tuple[int, int]) -> np.ndarray:
    lo, hi = window
    u = rng.uniforms(seed, _CH_PUB, start_row, n)
    return lo + (u * (hi - lo)).astype(np.int64)


def _pick(seed: int, channel: int, start_row: int, n: int, items: tuple) -> list:
    idx = rng.integers(seed, channel, start_row, n, len(items))
    return [items[i] for i in idx]


def _banded(
    seed: int,
    ch_u: int,
    ch_n: int,
    start_row: int,
    level0: np.ndarray,
    mid: np.ndarray,
    half: np.ndarray,
    noise: float,
) -> np.ndarray:
    n = level0.shape[0]
    u = rng.uniforms(seed, ch_u, start_row, n)
    value = mid[level0] + (2.0 * u - 1.0) * half[level0]
    if noise > 0:
        value = value + noise * rng.normals(seed, ch_n, start_row, n)
    return np.maximum(value, 0.0)


def _jam_chunk(config: GenConfig, seed: int, start_row: int, n: int) -> list[str]:
    pub = _pub_dates(seed, start_row, n, config.date_window)
    hour = decompose_epoch_ms(pub)["hour"]
    rush = np.isin(hour, list(RUSH_HOURS))
    cdf_base, cdf_rush = _level_cdfs(config.level_weights)
    u_level = rng.uniforms(seed, _CH_LEVEL, start_row, n)
    lvl_base = np.searchsorted(cdf_base, u_level, side="right")
    lvl_rush = np.searchsorted(cdf_rush, u_level, side="right")
    level0 = np.where(rush, lvl_rush, lvl_base)  # 0-based level index

    noise = config.coupling_noise
    speed = _banded(seed, _CH_SPEED, _CH_SPEED_N, start_row, level0, SPEED_MID, SPEED_HALF, noise)
    delay = _banded(seed, _CH_DELAY, _CH_DELAY_N, start_row, level0, DELAY_MID, DELAY_HALF, noise)
    length = _banded(
        seed, _CH_LENGTH, _CH_LENGTH_N, start_row, level0, LENGTH_MID, LENGTH_HALF, noise
    )
    lon = -118.7 + rng.uniforms(seed, _CH_LON, start_row, n)
    lat = 33.7 + 0.7 * rng.uniforms(seed, _CH_LAT, start_row, n)
    streets = _pick(seed, _CH_STREET, start_row, n, STREETS)
    cities = _pick(seed, _CH_CITY, start_row, n, CITIES)
    roads = _pick(seed, _CH_ROAD, start_row, n, ROAD_TYPES)

    rows = zip(
        lon.tolist(),
        lat.tolist(),
        streets,
        cities,
        roads,
        pub.tolist(),
        (level0 + 1).tolist(),
        speed.tolist(),
        length.tolist(),
        delay.tolist(),
    )
    return [
        f'{{"location_x":{x:.5f},"location_y":{y:.5f},"street":"{st}","city":"{ci}",'
        f'"country":"US","road_type":{rt},"pub_date":{p},"level":{lv},'
        f'"speed":{sp:.2f},"length":{ln:.1f},"delay":{dl:.1f}}}'
        for x, y, st, ci, rt, p, lv, sp, ln, dl in rows
    ]


def _alert_chunk(config: GenConfig, seed: int, start_row: int, n: int) -> list[str]:
    pub = _pub_dates(seed, start_row, n, config.date_window)
    lon = -118.7 + rng.uniforms(seed, _CH_LON, start_row, n)
    lat = 33.7 + 0.7 * rng.uniforms(seed, _CH_LAT, start_row, n)
    streets = _pick(seed, _CH_STREET, start_row, n, STREETS)
    cities = _pick(seed, _CH_CITY, start_row, n, CITIES)
    roads = _pick(seed, _CH_ROAD, start_row, n, ROAD_TYPES)
    types = _pick(seed, _CH_TYPE, start_row, n, EVENT_TYPES)
    descs = _pick(seed, _CH_DESC, start_row, n, DESCRIPTIONS)
    rows = zip(lon.tolist(), lat.tolist(), streets, cities, roads, descs, types, pub.tolist())
    return [
        f'{{"location_x":{x:.5f},"location_y":{y:.5f},"street":"{st}","city":"{ci}",'
        f'"country":"US","road_type":{rt},"report_description":"{de}",'
        f'"type":"{ty}","pub_date":{p}}}'
        for x, y, st, ci, rt, de, ty, p in rows
    ]


def _generate(config: GenConfig, sink: BinaryIO, n_rows: int, seed_tag: int, chunk_fn) -> int:
    config.validate()
    seed = rng.derive_seed(config.seed, seed_tag)
    written = 0
    while written < n_rows:
        n = min(_CHUNK, n_rows - written)
        lines = chunk_fn(config, seed, written, n)
        sink.write(("\n".join(lines) + "\n").encode())
        written += n
    return written


def generate_jams(config: GenConfig, sink: BinaryIO) -> int:
    """Write config.n_jams JSONL jam rows to a binary sink; returns row count."""
    return _generate(config, sink, config.n_jams, _TAG_JAMS, _jam_chunk)


def generate_alerts(config: GenConfig, sink: BinaryIO) -> int:
    """Write config.n_alerts JSONL alert rows to a binary sink; returns row count."""
    return _generate(config, sink, config.n_alerts, _TAG_ALERTS, _alert_chunk)
