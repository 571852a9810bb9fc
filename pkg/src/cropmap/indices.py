"""Per-step vegetation/water indices and the SAR backscatter ratio.

All formulas operate on surface reflectance in the fixed band order of
series.BAND_NAMES.  Degenerate denominators (|den| < 1e-9) yield 0 and are
counted, never raised, so isolated bad steps cannot abort a large run.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import MissingBand
from .reconstruct import RegularSeries

DENOM_EPS = 1e-9


class IndexKind(str, enum.Enum):
    NDVI = "NDVI"
    EVI = "EVI"
    GCVI = "GCVI"
    LSWI = "LSWI"
    NDWI = "NDWI"
    NDTI = "NDTI"
    MSI = "MSI"
    SAR_RATIO = "SARRatio"


# Channels each index reads, in formula order.
_REQUIRED = {
    IndexKind.NDVI: ("nir", "red"),
    IndexKind.EVI: ("nir", "red", "blue"),
    IndexKind.GCVI: ("nir", "green"),
    IndexKind.LSWI: ("nir", "swir1"),
    IndexKind.NDWI: ("red", "swir1"),
    IndexKind.NDTI: ("red", "green"),
    IndexKind.MSI: ("swir1", "nir"),
    IndexKind.SAR_RATIO: ("vv", "vh"),
}


def _guarded_ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    bad = np.abs(den) < DENOM_EPS
    value = np.where(bad, 0.0, num / np.where(bad, 1.0, den))
    return value, int(np.count_nonzero(bad))


def compute_index(kind: IndexKind, **bands):
    """Evaluate one index from named band arrays (or scalars).

    Returns (value, n_degenerate).  SAR inputs arrive in dB; the ratio is
    vh/vv in linear power, 10**((vh_dB - vv_dB)/10).
    """
    kind = IndexKind(kind)
    missing = [b for b in _REQUIRED[kind] if b not in bands or bands[b] is None]
    if missing:
        raise MissingBand(f"{kind.value} needs bands {missing}")
    get = lambda name: np.asarray(bands[name], dtype=np.float64)

    if kind is IndexKind.NDVI:
        nir, red = get("nir"), get("red")
        return _guarded_ratio(nir - red, nir + red)
    if kind is IndexKind.EVI:
        nir, red, blue = get("nir"), get("red"), get("blue")
        return _guarded_ratio(2.5 * (nir - red), nir + 6.0 * red - 7.5 * blue + 1.0)
    if kind is IndexKind.GCVI:
        nir, green = get("nir"), get("green")
        value, warn = _guarded_ratio(nir, green)
        return value - np.where(np.abs(green) < DENOM_EPS, 0.0, 1.0), warn
    if kind is IndexKind.LSWI:
        nir, swir1 = get("nir"), get("swir1")
        return _guarded_ratio(nir - swir1, nir + swir1)
    if kind is IndexKind.NDWI:
        red, swir1 = get("red"), get("swir1")
        return _guarded_ratio(red - swir1, red + swir1)
    if kind is IndexKind.NDTI:
        red, green = get("red"), get("green")
        return _guarded_ratio(red - green, red + green)
    if kind is IndexKind.MSI:
        swir1, nir = get("swir1"), get("nir")
        return _guarded_ratio(swir1, nir)
    if kind is IndexKind.SAR_RATIO:
        vv, vh = get("vv"), get("vh")
        return np.power(10.0, (vh - vv) / 10.0), 0
    raise MissingBand(f"unhandled index kind {kind}")


ALL_VIS = (IndexKind.NDVI, IndexKind.EVI, IndexKind.GCVI, IndexKind.LSWI, IndexKind.NDWI, IndexKind.NDTI)


def augment_channels(rs: RegularSeries, kinds) -> RegularSeries:
    """Append index channels in the requested order; original channels are
    passed through bit-exactly."""
    kinds = [IndexKind(k) for k in kinds]
    if not kinds:
        return rs
    available = {name: rs.channels[:, i] for i, name in enumerate(rs.channel_names)}
    new_cols = []
    warnings = rs.index_warnings
    for kind in kinds:
        needed = {b: available.get(b) for b in _REQUIRED[kind]}
        absent = [b for b, v in needed.items() if v is None]
        if absent:
            raise MissingBand(f"{kind.value} needs channels {absent}, series has {rs.channel_names}")
        value, warn = compute_index(kind, **needed)
        warnings += warn
        new_cols.append(np.asarray(value, dtype=np.float64))
    out = RegularSeries(
        pixel_id=rs.pixel_id,
        method=rs.method,
        doys=rs.doys,
        channels=np.column_stack([rs.channels] + new_cols),
        channel_names=rs.channel_names + tuple(k.value for k in kinds),
        grid=rs.grid,
    )
    out.index_warnings = warnings
    return out
