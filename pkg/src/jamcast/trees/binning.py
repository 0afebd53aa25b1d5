"""Feature quantization: quantile-based bin edges and integer bin codes.

Bin semantics: a feature with thresholds t_0 < ... < t_{k-1} has k+1 real
bins, and bin(x) = #{i : t_i < x}, i.e. "go left at threshold b" means
x <= t_b exactly. Each feature additionally reserves one missing bin at
index n_real_bins (the NaN sentinel never mixes with real values), so a
feature occupies at most max_bins + 1 histogram slots.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from jamcast.errors import ConfigError, ValidationError


@dataclass
class BinnedMatrix:
    """Quantized feature matrix, stored feature-major for partition locality."""

    codes: np.ndarray  # (n_features, n_rows) unsigned integer bin indices
    edges: list[np.ndarray]  # per-feature ascending thresholds, float64
    n_real_bins: np.ndarray  # per-feature count of real (non-missing) bins
    missing_bin: np.ndarray  # per-feature reserved missing index (== n_real_bins)
    n_rows: int

    @property
    def n_features(self) -> int:
        return self.codes.shape[0]

    @property
    def hist_bins(self) -> int:
        """Histogram slots per feature: widest feature's real bins + missing slot."""
        return int(self.n_real_bins.max()) + 1


def _feature_thresholds(col: np.ndarray, max_bins: int) -> np.ndarray:
    """Pick ascending thresholds for one feature column (NaN excluded)."""
    finite = col[~np.isnan(col)]
    if finite.size == 0:
        return np.empty(0, dtype=np.float64)
    distinct = np.unique(finite)
    if distinct.size <= max_bins:
        # one bin per distinct value: exact splits are representable
        return distinct[:-1].astype(np.float64)
    v = np.sort(finite)
    k = np.arange(1, max_bins, dtype=np.int64)
    pos = k * finite.size // max_bins - 1
    return np.unique(v[pos]).astype(np.float64)


def quantize(values: np.ndarray, max_bins: int = 256, n_threads: int = 1) -> BinnedMatrix:
    """Quantize a row-major (n_rows, n_features) float matrix into bin codes.

    Per-feature quantile edges over at most max_bins real bins; constant
    features get a single bin; NaN maps to the feature's reserved missing
    bin. Binning preserves order: a <= b implies bin(a) <= bin(b).

    Features are independent, so n_threads > 1 only parallelizes the
    per-feature work (sorting dominates and releases the GIL); the output
    is identical for any thread count.
    """
    if max_bins < 2:
        raise ConfigError(f"max_bins must be >= 2, got {max_bins}")
    if max_bins > 65534:
        raise ConfigError(f"max_bins too large for uint16 codes: {max_bins}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValidationError(f"expected a non-empty 2-d matrix, got shape {values.shape}")
    n_rows, n_features = values.shape
    n_threads = max(1, min(n_threads, n_features, os.cpu_count() or 1))

    def _map(fn, items):
        if n_threads == 1 or n_rows * n_features < 1 << 20:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(n_threads) as pool:
            return list(pool.map(fn, items))

    edges: list[np.ndarray] = _map(
        lambda j: _feature_thresholds(values[:, j], max_bins), range(n_features)
    )
    n_real = np.array([e.size + 1 for e in edges], dtype=np.int64)

    dtype = np.uint8 if int(n_real.max()) + 1 <= 256 else np.uint16
    codes = np.empty((n_features, n_rows), dtype=dtype)

    def _bin_feature(j: int) -> None:
        col = values[:, j]
        miss = np.isnan(col)
        cj = np.searchsorted(edges[j], col, side="left")
        cj[miss] = n_real[j]
        codes[j] = cj.astype(dtype)

    _map(_bin_feature, range(n_features))

    return BinnedMatrix(
        codes=codes,
        edges=edges,
        n_real_bins=n_real,
        missing_bin=n_real.copy(),
        n_rows=n_rows,
    )
