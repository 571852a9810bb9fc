"""Irregular pixel time series: domain types, QA masking, and the raw path.

Band order is fixed everywhere: [blue, green, red, nir, swir1, swir2].
Pixel CSV contract (one row per observation, header required):

    pixel_id,doy,blue,green,red,nir,swir1,swir2,qa_valid[,vv,vh]

qa_valid is written as 1/0 and parsed case-insensitively from {1,0,true,false}.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import AllMasked, DataError

BAND_NAMES = ("blue", "green", "red", "nir", "swir1", "swir2")
N_BANDS = len(BAND_NAMES)

# Level-2 reflectance occasionally leaves [0, 1]; clamp at a generous margin
# instead of rejecting the observation.
CLAMP_LO = -0.2
CLAMP_HI = 1.2


class ClassLabel(enum.IntEnum):
    """Closed three-class label set; integer order breaks prediction ties."""

    CORN = 0
    SOYBEAN = 1
    OTHER = 2

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise DataError(f"unknown class label: {name!r}") from None


@dataclass(frozen=True)
class SeasonWindow:
    """Inclusive day-of-year window, e.g. DOY 111-265 for April 21 - September 22."""

    start_doy: int
    end_doy: int

    def __post_init__(self):
        if not self.start_doy < self.end_doy:
            raise DataError(f"season window needs start < end, got {self.start_doy}..{self.end_doy}")

    def contains(self, doy: float) -> bool:
        return self.start_doy <= doy <= self.end_doy


GROWING_SEASON = SeasonWindow(111, 265)


@dataclass(frozen=True)
class SpectralObservation:
    """One clear-or-flagged acquisition: DOY plus six reflectance values."""

    doy: int
    bands: tuple
    qa_valid: bool = True

    def __post_init__(self):
        if len(self.bands) != N_BANDS:
            raise DataError(f"expected {N_BANDS} band values, got {len(self.bands)}")
        if not 1 <= self.doy <= 366:
            raise DataError(f"doy out of range: {self.doy}")
        for v in self.bands:
            if v != v or v in (float("inf"), float("-inf")):
                raise DataError(f"non-finite reflectance at doy {self.doy}")


@dataclass(frozen=True)
class SarObservation:
    """Sentinel-1 style backscatter sample in dB."""

    doy: int
    vv: float
    vh: float


@dataclass
class ObservationSeries:
    """One pixel's irregular multi-band series, strictly increasing in DOY.

    Construction dedups on DOY (an observation with qa_valid wins over a
    flagged one; first occurrence wins on ties), sorts, and clamps
    out-of-range reflectance to [CLAMP_LO, CLAMP_HI].  Values outside [0, 1]
    are counted in ``clamp_warnings`` rather than rejected.
    """

    pixel_id: str
    observations: list
    sar: list | None = None
    clamp_warnings: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.observations:
            raise DataError(f"pixel {self.pixel_id}: empty series")
        by_doy: dict[int, SpectralObservation] = {}
        for obs in self.observations:
            prev = by_doy.get(obs.doy)
            if prev is None or (obs.qa_valid and not prev.qa_valid):
                by_doy[obs.doy] = obs
        cleaned = []
        for doy in sorted(by_doy):
            obs = by_doy[doy]
            bands = []
            for v in obs.bands:
                if not 0.0 <= v <= 1.0:
                    self.clamp_warnings += 1
                    v = min(max(v, CLAMP_LO), CLAMP_HI)
                bands.append(float(v))
            cleaned.append(SpectralObservation(obs.doy, tuple(bands), obs.qa_valid))
        self.observations = cleaned
        if self.sar is not None:
            self.sar = sorted(self.sar, key=lambda s: s.doy)

    def doys(self) -> list:
        return [o.doy for o in self.observations]

    def band_values(self, band_index: int) -> list:
        return [o.bands[band_index] for o in self.observations]


def mask_noise(series: ObservationSeries) -> ObservationSeries:
    """Drop QA-flagged observations; SAR channel passes through untouched."""
    kept = [o for o in series.observations if o.qa_valid]
    if not kept:
        raise AllMasked(f"pixel {series.pixel_id}: no valid observations after QA masking")
    out = ObservationSeries(series.pixel_id, kept, sar=series.sar)
    out.clamp_warnings = series.clamp_warnings
    return out


def common_acquisition_grid(all_series: Iterable[ObservationSeries], window: SeasonWindow) -> list:
    """Dataset-level raw grid: DOYs with a valid observation in >= 50% of pixels."""
    counts: dict[int, int] = {}
    n = 0
    for series in all_series:
        n += 1
        for obs in series.observations:
            if obs.qa_valid and window.contains(obs.doy):
                counts[obs.doy] = counts.get(obs.doy, 0) + 1
    if n == 0:
        raise DataError("common_acquisition_grid: empty dataset")
    return sorted(d for d, c in counts.items() if 2 * c >= n)


def raw_window(series, window, target_len, grid=None):
    """Raw preprocessing path: in-window valid observations on a fixed-length grid.

    With ``grid`` (the dataset-wide common acquisition grid), each grid DOY
    takes the pixel's observation at that DOY when present, otherwise the most
    recent earlier one (hold-last; hold-first before any observation); extras
    off the grid are dropped.  Without a grid, the in-window observations are
    hold-last padded or truncated to ``target_len``.

    Returns a reconstruct.RegularSeries tagged method=Raw whose nominal dates
    are irregular.
    """
    from .reconstruct import Method, RegularSeries

    valid = [o for o in series.observations if o.qa_valid and window.contains(o.doy)]
    if not valid:
        raise AllMasked(f"pixel {series.pixel_id}: window {window.start_doy}..{window.end_doy} has no valid observations")

    if grid is not None:
        grid = sorted(grid)[:target_len]
        picked = []
        for doy in grid:
            at_or_before = [o for o in valid if o.doy <= doy]
            picked.append(at_or_before[-1] if at_or_before else valid[0])
        chosen = picked
        doys = list(grid)
    else:
        chosen = valid[:target_len]
        doys = [o.doy for o in chosen]

    while len(chosen) < target_len:
        chosen.append(chosen[-1])
        doys.append(doys[-1])

    channels = [[o.bands[b] for b in range(N_BANDS)] for o in chosen]
    return RegularSeries(
        pixel_id=series.pixel_id,
        method=Method.RAW,
        doys=tuple(doys),
        channels=channels,
        channel_names=BAND_NAMES,
    )


def _parse_qa(token: str) -> bool:
    t = token.strip().lower()
    if t in ("1", "true"):
        return True
    if t in ("0", "false"):
        return False
    raise DataError(f"bad qa_valid value: {token!r}")


def read_pixel_csv(path) -> list:
    """Parse the pixel CSV contract into ObservationSeries, one per pixel_id.

    Rows are grouped by pixel_id in first-appearance order.  The optional
    vv,vh columns attach a SAR series to the pixel.
    """
    groups: dict[str, list] = {}
    sar_groups: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        base = ["pixel_id", "doy"] + list(BAND_NAMES) + ["qa_valid"]
        if [h.strip() for h in header[: len(base)]] != base:
            raise DataError(f"{path}: unexpected header {header!r}")
        has_sar = len(header) >= len(base) + 2
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                pid = row[0]
                doy = int(row[1])
                bands = tuple(float(v) for v in row[2 : 2 + N_BANDS])
                qa = _parse_qa(row[2 + N_BANDS])
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{line_no}: bad row: {exc}") from None
            groups.setdefault(pid, []).append(SpectralObservation(doy, bands, qa))
            if has_sar and len(row) >= len(base) + 2 and row[len(base)] != "" and row[len(base) + 1] != "":
                sar_groups.setdefault(pid, []).append(
                    SarObservation(doy, float(row[len(base)]), float(row[len(base) + 1]))
                )
    return [
        ObservationSeries(pid, obs, sar=sar_groups.get(pid))
        for pid, obs in groups.items()
    ]


def write_pixel_csv(path, all_series: Sequence[ObservationSeries]) -> None:
    """Inverse of read_pixel_csv; emits SAR columns iff any series carries SAR."""
    has_sar = any(s.sar for s in all_series)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["pixel_id", "doy"] + list(BAND_NAMES) + ["qa_valid"]
        if has_sar:
            header += ["vv", "vh"]
        writer.writerow(header)
        for series in all_series:
            sar_by_doy = {s.doy: s for s in series.sar} if series.sar else {}
            for obs in series.observations:
                row = [series.pixel_id, obs.doy]
                row += [repr(float(v)) for v in obs.bands]
                row.append("1" if obs.qa_valid else "0")
                if has_sar:
                    s = sar_by_doy.get(obs.doy)
                    row += [repr(float(s.vv)), repr(float(s.vh))] if s else ["", ""]
                writer.writerow(row)
