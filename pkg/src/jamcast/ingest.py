"""Parse, validate, clean and encode alert/jam JSONL streams into feature matrices.

Parsing is line-tolerant: every non-empty line either yields a record or
increments a rejection reason, and rows_accepted + rows_rejected always
equals the number of non-empty lines seen. The parse/clean stages return
lazy generators paired with reports that are complete once the generator
is exhausted, so multi-million-row corpora stream through encode without
materializing record lists.

Two feature sets are first-class: `honest` uses only fields with no
functional tie to the jam level, `leaky` adds the level-coupled telemetry
(speed, length, delay) that makes near-perfect classifiers possible.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from jamcast.errors import SchemaError, ValidationError
from jamcast.events import (
    EVENT_TYPES,
    AlertRecord,
    JamRecord,
    decompose_epoch_ms,
)

MISSING = float("nan")

# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # "numeric" | "categorical"
    source: str


_HONEST_FEATURES = (
    FeatureSpec("location_x", "numeric", "location_x"),
    FeatureSpec("location_y", "numeric", "location_y"),
    FeatureSpec("road_type", "numeric", "road_type"),
    FeatureSpec("street", "categorical", "street"),
    FeatureSpec("city", "categorical", "city"),
    FeatureSpec("month", "numeric", "time.month"),
    FeatureSpec("day", "numeric", "time.day"),
    FeatureSpec("hour", "numeric", "time.hour"),
    FeatureSpec("min", "numeric", "time.min"),
    FeatureSpec("weekday", "numeric", "time.weekday"),
)

_LEAKY_EXTRA = (
    FeatureSpec("speed", "numeric", "speed"),
    FeatureSpec("length", "numeric", "length"),
    FeatureSpec("delay", "numeric", "delay"),
)

_NUMERIC_SOURCES = {
    "location_x",
    "location_y",
    "road_type",
    "speed",
    "length",
    "delay",
}
_CATEGORICAL_SOURCES = {"street", "city", "country"}
_TIME_SOURCES = {"time.month", "time.day", "time.hour", "time.min", "time.sec", "time.weekday"}


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list; the order is fixed and recorded in every artifact."""

    features: tuple[FeatureSpec, ...]
    feature_set: str

    def __post_init__(self) -> None:
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")

    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def fingerprint(self) -> str:
        doc = {
            "feature_set": self.feature_set,
            "features": [[f.name, f.kind, f.source] for f in self.features],
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


FEATURE_SETS = ("leaky", "honest")


def schema_for(feature_set: str) -> FeatureSchema:
    """The two named feature sets; `leaky` = `honest` + {speed, length, delay}."""
    if feature_set == "honest":
        return FeatureSchema(_HONEST_FEATURES, "honest")
    if feature_set == "leaky":
        return FeatureSchema(_HONEST_FEATURES + _LEAKY_EXTRA, "leaky")
    raise SchemaError(f"unknown feature set {feature_set!r}; expected one of {FEATURE_SETS}")


@dataclass
class EncodingMap:
    """Per categorical feature: text -> dense index >= 1; index 0 is unknown."""

    by_feature: dict[str, dict[str, int]] = field(default_factory=dict)

    def lookup(self, feature: str, category: str) -> int:
        return self.by_feature.get(feature, {}).get(category, 0)


@dataclass
class IngestReport:
    files_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    rejection_reasons: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rows_rejected += 1
        self.rejection_reasons[reason] = self.rejection_reasons.get(reason, 0) + 1

    def merge(self, other: "IngestReport") -> None:
        self.files_read += other.files_read
        self.rows_accepted += other.rows_accepted
        self.rows_rejected += other.rows_rejected
        for reason, count in other.rejection_reasons.items():
            self.rejection_reasons[reason] = self.rejection_reasons.get(reason, 0) + count

    def as_dict(self) -> dict:
        return {
            "files_read": self.files_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejection_reasons": dict(sorted(self.rejection_reasons.items())),
        }


@dataclass
class FeatureMatrix:
    """Encoded design matrix: row-major float64 values plus boolean labels."""

    values: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.values.shape[1])

    @property
    def schema_fingerprint(self) -> str:
        return self.schema.fingerprint()

    def take(self, rows: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(
            values=self.values[rows], labels=self.labels[rows], schema=self.schema
        )


# ---------------------------------------------------------------------------
# parsing

_JAM_STRINGS = ("street", "city", "country")
_JAM_NUMERICS = ("location_x", "location_y", "road_type", "speed", "length", "delay")
_ALERT_STRINGS = ("street", "city", "country", "report_description")
_ALERT_NUMERICS = ("location_x", "location_y", "road_type")


def _field_error(obj: dict, key: str) -> str | None:
    if key not in obj:
        return "missing_field"
    return None


def _as_float(value) -> tuple[float, str | None]:
    if value is None:
        return MISSING, None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return 0.0, "bad_field_type"
    return float(value), None


def _as_str(value) -> tuple[str, str | None]:
    if value is None:
        return "", None
    if not isinstance(value, str):
        return "", "bad_field_type"
    return value, None


def _parse_common(obj: dict, strings, numerics) -> tuple[dict, str | None]:
    out: dict = {}
    for key in strings + numerics + ("pub_date",):
        err = _field_error(obj, key)
        if err:
            return {}, err
    for key in strings:
        out[key], err = _as_str(obj[key])
        if err:
            return {}, err
    for key in numerics:
        out[key], err = _as_float(obj[key])
        if err:
            return {}, err
    pub = obj["pub_date"]
    if isinstance(pub, bool) or not isinstance(pub, int):
        return {}, "bad_field_type"
    if pub <= 0:
        return {}, "invalid_pub_date"
    out["pub_date_utc"] = pub
    return out, None


def _iter_nonempty(stream: BinaryIO | Iterable[bytes]) -> Iterator[bytes]:
    for raw in stream:
        line = raw.strip()
        if line:
            yield line


def parse_jams(stream: BinaryIO | Iterable[bytes]) -> tuple[Iterator[JamRecord], IngestReport]:
    """Lazily parse line-delimited jam JSON; bad lines are counted, never fatal.

    The report is complete once the returned iterator is exhausted.
    """
    report = IngestReport()

    def gen() -> Iterator[JamRecord]:
        for line in _iter_nonempty(stream):
            try:
                obj = json.loads(line)
            except (ValueError, UnicodeDecodeError):
                report.reject("malformed_json")
                continue
            if not isinstance(obj, dict):
                report.reject("malformed_json")
                continue
            if "level" not in obj:
                report.reject("missing_field")
                continue
            level = obj["level"]
            if isinstance(level, bool) or not isinstance(level, int):
                report.reject("bad_field_type")
                continue
            if not 1 <= level <= 5:
                report.reject("level_out_of_range")
                continue
            common, err = _parse_common(obj, _JAM_STRINGS, _JAM_NUMERICS)
            if err:
                report.reject(err)
                continue
            report.rows_accepted += 1
            yield JamRecord(level=level, **common)

    return gen(), report


def parse_alerts(
    stream: BinaryIO | Iterable[bytes],
) -> tuple[Iterator[AlertRecord], IngestReport]:
    """Lazily parse line-delimited alert JSON against the alert schema."""
    report = IngestReport()

    def gen() -> Iterator[AlertRecord]:
        for line in _iter_nonempty(stream):
            try:
                obj = json.loads(line)
            except (ValueError, UnicodeDecodeError):
                report.reject("malformed_json")
                continue
            if not isinstance(obj, dict):
                report.reject("malformed_json")
                continue
            if "type" not in obj:
                report.reject("missing_field")
                continue
            event_type = obj["type"]
            if not isinstance(event_type, str):
                report.reject("bad_field_type")
                continue
            if event_type not in EVENT_TYPES:
                report.reject("unknown_event_type")
                continue
            common, err = _parse_common(obj, _ALERT_STRINGS, _ALERT_NUMERICS)
            if err:
                report.reject(err)
                continue
            report.rows_accepted += 1
            yield AlertRecord(event_type=event_type, **common)

    return gen(), report


def clean(
    records: Iterable[JamRecord],
    window: tuple[int, int] | None = None,
) -> tuple[Iterator[JamRecord], IngestReport]:
    """Drop semantically invalid jams; the report accounts for every drop.

    Drops negative speed/length/delay, (0, 0) coordinates, and records
    outside the optional [start_ms, end_ms) publication window.
    """
    report = IngestReport()

    def gen() -> Iterator[JamRecord]:
        for rec in records:
            if rec.speed < 0:
                report.reject("negative_speed")
            elif rec.length < 0:
                report.reject("negative_length")
            elif rec.delay < 0:
                report.reject("negative_delay")
            elif rec.location_x == 0 and rec.location_y == 0:
                report.reject("null_island")
            elif window is not None and not window[0] <= rec.pub_date_utc < window[1]:
                report.reject("out_of_window")
            else:
                report.rows_accepted += 1
                yield rec

    return gen(), report


# ---------------------------------------------------------------------------
# encoding

_ENCODE_CHUNK = 262144


def _validate_schema_sources(schema: FeatureSchema) -> None:
    for spec in schema.features:
        if spec.kind == "categorical":
            if spec.source not in _CATEGORICAL_SOURCES:
                raise SchemaError(f"{spec.name}: no categorical source {spec.source!r}")
        elif spec.kind == "numeric":
            if spec.source not in _NUMERIC_SOURCES and spec.source not in _TIME_SOURCES:
                raise SchemaError(f"{spec.name}: no numeric source {spec.source!r}")
        else:
            raise SchemaError(f"{spec.name}: unknown feature kind {spec.kind!r}")


def encode(
    records: Iterable[JamRecord],
    schema: FeatureSchema,
    existing: EncodingMap | None = None,
) -> tuple[FeatureMatrix, EncodingMap]:
    """Encode cleaned jam records into a FeatureMatrix in schema order.

    Categorical indices are assigned 1..k in lexicographic order of the
    observed category text (deterministic, no hashing); index 0 is reserved
    for categories unseen by a frozen map. With `existing` the map is used
    read-only, as for test-set encoding. Labels come from the jam level and
    nothing else.
    """
    _validate_schema_sources(schema)
    specs = schema.features
    need_time = any(s.source in _TIME_SOURCES for s in specs)
    cat_feats = [s for s in specs if s.kind == "categorical"]
    frozen = existing is not None
    # first-seen provisional indices, remapped lexicographically at the end
    prov: dict[str, dict[str, int]] = {s.name: {} for s in cat_feats}

    chunks: list[np.ndarray] = []
    label_chunks: list[np.ndarray] = []
    cat_cols_need_remap = [i for i, s in enumerate(specs) if s.kind == "categorical"]

    def flush(buf: list[JamRecord]) -> None:
        n = len(buf)
        if n == 0:
            return
        time_fields = None
        if need_time:
            pub = np.fromiter((r.pub_date_utc for r in buf), dtype=np.int64, count=n)
            time_fields = decompose_epoch_ms(pub)
        block = np.empty((n, len(specs)), dtype=np.float64)
        for j, spec in enumerate(specs):
            if spec.kind == "categorical":
                col = np.empty(n, dtype=np.float64)
                if frozen:
                    mapping = existing.by_feature.get(spec.name, {})
                    for i, rec in enumerate(buf):
                        col[i] = mapping.get(getattr(rec, spec.source), 0)
                else:
                    mapping = prov[spec.name]
                    for i, rec in enumerate(buf):
                        cat = getattr(rec, spec.source)
                        idx = mapping.get(cat)
                        if idx is None:
                            idx = len(mapping)
                            mapping[cat] = idx
                        col[i] = idx
                block[:, j] = col
            elif spec.source in _TIME_SOURCES:
                block[:, j] = time_fields[spec.source.split(".", 1)[1]]
            else:
                block[:, j] = np.fromiter(
                    (getattr(r, spec.source) for r in buf), dtype=np.float64, count=n
                )
        levels = np.fromiter((r.level for r in buf), dtype=np.int64, count=n)
        if ((levels < 1) | (levels > 5)).any():
            raise ValidationError("jam level outside 1..5 reached encode")
        chunks.append(block)
        label_chunks.append(levels > 2)

    buf: list[JamRecord] = []
    for rec in records:
        buf.append(rec)
        if len(buf) >= _ENCODE_CHUNK:
            flush(buf)
            buf = []
    flush(buf)

    if chunks:
        values = np.vstack(chunks)
        labels = np.concatenate(label_chunks)
    else:
        values = np.empty((0, len(specs)), dtype=np.float64)
        labels = np.empty(0, dtype=bool)

    if frozen:
        out_map = existing
    else:
        final: dict[str, dict[str, int]] = {}
        for spec in cat_feats:
            mapping = prov[spec.name]
            final[spec.name] = {cat: i + 1 for i, cat in enumerate(sorted(mapping))}
        out_map = EncodingMap(by_feature=final)
        # remap provisional (first-seen) indices to lexicographic ones
        for j in cat_cols_need_remap:
            name = specs[j].name
            mapping = prov[name]
            if not mapping:
                continue
            lut = np.zeros(len(mapping), dtype=np.float64)
            for cat, p in mapping.items():
                lut[p] = final[name][cat]
            values[:, j] = lut[values[:, j].astype(np.int64)]

    matrix = FeatureMatrix(values=values, labels=labels, schema=schema)
    return matrix, out_map


# ---------------------------------------------------------------------------
# multi-file pipeline


@dataclass
class IngestSummary:
    files: list[str]
    parse: IngestReport
    clean: IngestReport
    n_rows: int

    def as_dict(self) -> dict:
        return {
            "files": self.files,
            "parse": self.parse.as_dict(),
            "clean": self.clean.as_dict(),
            "n_rows": self.n_rows,
        }


def ingest_files(
    paths: Iterable[str | Path],
    schema: FeatureSchema,
    existing: EncodingMap | None = None,
    window: tuple[int, int] | None = None,
) -> tuple[FeatureMatrix, EncodingMap, IngestSummary]:
    """Parse -> clean -> encode a set of jam JSONL files, streaming.

    Files are processed in sorted-name order so the output is independent
    of filesystem enumeration order.
    """
    ordered = sorted(str(p) for p in paths)
    parse_report = IngestReport()

    def all_records() -> Iterator[JamRecord]:
        for path in ordered:
            with open(path, "rb") as fh:
                gen, rep = parse_jams(fh)
                yield from gen
            rep.files_read = 1
            parse_report.merge(rep)

    cleaned, clean_report = clean(all_records(), window=window)
    matrix, enc = encode(cleaned, schema, existing=existing)
    summary = IngestSummary(
        files=ordered, parse=parse_report, clean=clean_report, n_rows=matrix.n_rows
    )
    return matrix, enc, summary


# ---------------------------------------------------------------------------
# matrix file format (versioned columnar binary with JSON header)

_TJM_MAGIC = b"TJMX"
TJM_VERSION = 1


def save_matrix(
    path: str | Path,
    matrix: FeatureMatrix,
    encoding: EncodingMap,
    run_id: str | None = None,
) -> None:
    """Write the versioned columnar binary matrix format (see docs/formats.md)."""
    header = {
        "format": "tjm",
        "version": TJM_VERSION,
        "n_rows": matrix.n_rows,
        "n_features": matrix.n_features,
        "feature_set": matrix.schema.feature_set,
        "features": [[f.name, f.kind, f.source] for f in matrix.schema.features],
        "encoding": {k: dict(sorted(v.items())) for k, v in encoding.by_feature.items()},
        "values_dtype": "<f8",
        "values_layout": "columnar",
        "labels_dtype": "u1",
        "run_id": run_id,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_TJM_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        # one contiguous float64 block per feature, in schema order
        fh.write(np.ascontiguousarray(matrix.values.T, dtype="<f8").tobytes())
        fh.write(matrix.labels.astype(np.uint8).tobytes())


def load_matrix(path: str | Path) -> tuple[FeatureMatrix, EncodingMap]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _TJM_MAGIC:
            raise ValidationError(f"{path}: not a tjm matrix file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        if header.get("version") != TJM_VERSION:
            raise ValidationError(f"{path}: unsupported tjm version {header.get('version')}")
        n, f = header["n_rows"], header["n_features"]
        columns = np.frombuffer(fh.read(n * f * 8), dtype="<f8").reshape(f, n)
        values = np.ascontiguousarray(columns.T)
        labels = np.frombuffer(fh.read(n), dtype=np.uint8).astype(bool)
    schema = FeatureSchema(
        features=tuple(FeatureSpec(*row) for row in header["features"]),
        feature_set=header["feature_set"],
    )
    encoding = EncodingMap(
        by_feature={k: {c: int(i) for c, i in v.items()} for k, v in header["encoding"].items()}
    )
    return FeatureMatrix(values=values, labels=labels, schema=schema), encoding
