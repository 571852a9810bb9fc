"""Time-series reconstruction onto fixed grids.

Five non-raw methods: weighted Whittaker-Eilers smoothing on native dates,
7-day and 30-day linear resampling over the growing season, resample-then-
smooth, and a per-pixel window centered on the NDVI peak.  All methods are
pure and bit-deterministic.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import DataError, SingularSystem, TooFewObservations
from .series import BAND_NAMES, N_BANDS, ObservationSeries, SeasonWindow

# Nominal Landsat revisit; gaps longer than this get down-weighted.
NOMINAL_REVISIT_DAYS = 16.0

SAR_CHANNEL_NAMES = ("vv", "vh")


class Method(str, enum.Enum):
    RAW = "raw"
    WEIGHTED_WE = "weighted_we"
    LN7 = "ln7"
    LN30 = "ln30"
    LN7_SMOOTHED = "ln7_smoothed"
    PHENO_PEAK = "pheno_peak"


class WeightMode(str, enum.Enum):
    UNIFORM = "uniform"
    INTERVAL_AWARE = "interval_aware"


@dataclass(frozen=True)
class RegularGrid:
    """Fixed-interval DOY grid; end date must stay within the year."""

    start_doy: int
    interval_days: int
    steps: int

    def __post_init__(self):
        if self.interval_days < 1 or self.steps < 2:
            raise DataError(f"degenerate grid: {self}")
        if self.end_doy > 366:
            raise DataError(f"grid runs past DOY 366: {self}")

    @property
    def end_doy(self) -> int:
        return self.start_doy + (self.steps - 1) * self.interval_days

    def doys(self) -> tuple:
        return tuple(self.start_doy + i * self.interval_days for i in range(self.steps))


# The two standard growing-season grids (April 21 - September 22) and the
# extended April 1 - October 1 search grid for the phenological peak method.
GRID_LN7 = RegularGrid(111, 7, 23)
GRID_LN30 = RegularGrid(111, 30, 6)
GRID_PHENO_EXTENDED = RegularGrid(91, 7, 27)
PHENO_HALF_WIDTH = 11


@dataclass(frozen=True)
class SmootherConfig:
    lam: float = 10.0
    diff_order: int = 2
    weight_mode: WeightMode = WeightMode.UNIFORM

    def __post_init__(self):
        if self.lam < 0:
            raise DataError("smoother lambda must be >= 0")
        if self.diff_order != 2:
            raise DataError("only second-order differences are supported")


@dataclass
class RegularSeries:
    """Fixed-length multi-channel series; ``doys`` are nominal dates per step.

    ``grid`` is set for the equidistant methods and None for Raw/WeightedWE,
    whose nominal dates are irregular.
    """

    pixel_id: str
    method: Method
    doys: tuple
    channels: np.ndarray
    channel_names: tuple
    grid: RegularGrid | None = None
    index_warnings: int = field(default=0, compare=False)

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float64)
        self.channel_names = tuple(self.channel_names)
        self.doys = tuple(self.doys)
        steps, n_ch = self.channels.shape
        if steps != len(self.doys):
            raise DataError(f"{steps} steps vs {len(self.doys)} nominal dates")
        if n_ch != len(self.channel_names):
            raise DataError(f"{n_ch} channels vs names {self.channel_names}")
        if not np.all(np.isfinite(self.channels)):
            raise DataError(f"pixel {self.pixel_id}: non-finite channel values")

    @property
    def steps(self) -> int:
        return self.channels.shape[0]

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[:, self.channel_names.index(name)]
        except ValueError:
            raise DataError(f"channel {name!r} not present in {self.channel_names}") from None


def interval_aware_weights(doys: np.ndarray, revisit: float = NOMINAL_REVISIT_DAYS) -> np.ndarray:
    """w_i = min(1, revisit / delta_i), delta_i = half the gap sum to both neighbours.

    Boundary observations use their single gap.  Isolated observations get
    down-weighted so the roughness penalty interpolates across the gap.
    """
    d = np.asarray(doys, dtype=np.float64)
    if d.size == 1:
        return np.ones(1)
    gaps = np.diff(d)
    delta = np.empty(d.size)
    delta[0] = gaps[0]
    delta[-1] = gaps[-1]
    if d.size > 2:
        delta[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
    return np.minimum(1.0, revisit / delta)


def whittaker_solve(y: np.ndarray, weights: np.ndarray, lam: float) -> np.ndarray:
    """Minimize sum w_i (y_i - z_i)^2 + lam * sum (second differences of z)^2.

    y may be (n,) or (n, k); columns are solved against the shared weights.
    """
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    n = y.shape[0]
    if n < 3:
        raise TooFewObservations(f"smoother needs >= 3 points, got {n}")
    if w.shape[0] != n:
        raise DataError("weights length mismatch")
    W = sparse.diags(w)
    D = sparse.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n), format="csc")
    A = (W + lam * (D.T @ D)).tocsc()
    z = spsolve(A, W @ y)
    if y.ndim > 1 and z.ndim == 1:
        z = z.reshape(n, -1)
    if not np.all(np.isfinite(z)):
        raise SingularSystem("smoother system produced non-finite values")
    return z


def whittaker_smooth(series: ObservationSeries, cfg: SmootherConfig = SmootherConfig()) -> RegularSeries:
    """Weighted WE smoothing of all six bands on the native observation dates."""
    valid = [o for o in series.observations if o.qa_valid]
    if len(valid) < 3:
        raise TooFewObservations(f"pixel {series.pixel_id}: {len(valid)} valid observations, need >= 3")
    doys = np.array([o.doy for o in valid], dtype=np.float64)
    y = np.array([o.bands for o in valid], dtype=np.float64)
    if cfg.weight_mode is WeightMode.INTERVAL_AWARE:
        w = interval_aware_weights(doys)
    else:
        w = np.ones(len(valid))
    z = whittaker_solve(y, w, cfg.lam)
    return RegularSeries(
        pixel_id=series.pixel_id,
        method=Method.WEIGHTED_WE,
        doys=tuple(int(d) for d in doys),
        channels=z,
        channel_names=BAND_NAMES,
    )


def _valid_arrays(series: ObservationSeries, minimum: int):
    valid = [o for o in series.observations if o.qa_valid]
    if len(valid) < minimum:
        raise TooFewObservations(
            f"pixel {series.pixel_id}: {len(valid)} valid observations, need >= {minimum}"
        )
    doys = np.array([o.doy for o in valid], dtype=np.float64)
    y = np.array([o.bands for o in valid], dtype=np.float64)
    return doys, y


def linear_resample(series: ObservationSeries, grid: RegularGrid) -> RegularSeries:
    """Linear interpolation of each band onto the grid; nearest-value hold
    outside the observed span."""
    doys, y = _valid_arrays(series, minimum=2)
    grid_doys = np.array(grid.doys(), dtype=np.float64)
    channels = np.column_stack([np.interp(grid_doys, doys, y[:, b]) for b in range(N_BANDS)])
    method = Method.LN7 if grid.interval_days == 7 else Method.LN30
    return RegularSeries(
        pixel_id=series.pixel_id,
        method=method,
        doys=grid.doys(),
        channels=channels,
        channel_names=BAND_NAMES,
        grid=grid,
    )


def resample_then_smooth(
    series: ObservationSeries, grid: RegularGrid, cfg: SmootherConfig = SmootherConfig()
) -> RegularSeries:
    """7-day linear resampling followed by uniform-weight WE smoothing."""
    rs = linear_resample(series, grid)
    z = whittaker_solve(rs.channels, np.ones(grid.steps), cfg.lam)
    return RegularSeries(
        pixel_id=series.pixel_id,
        method=Method.LN7_SMOOTHED,
        doys=rs.doys,
        channels=z,
        channel_names=BAND_NAMES,
        grid=grid,
    )


def pheno_peak_window(
    series: ObservationSeries,
    search: SeasonWindow = SeasonWindow(111, 265),
    half_width: int = PHENO_HALF_WIDTH,
) -> RegularSeries:
    """Per-pixel window of 2*half_width+1 steps centered on the NDVI peak.

    Resamples over the extended April 1 - October 1 grid, finds the in-search
    NDVI maximum (first occurrence on ties), and slides the window inward when
    the peak sits too close to an edge so every output step carries a real
    interpolated value.
    """
    extended = GRID_PHENO_EXTENDED
    out_steps = 2 * half_width + 1
    if out_steps > extended.steps:
        raise DataError("pheno window wider than the extended grid")
    rs = linear_resample(series, extended)
    nir = rs.channel("nir")
    red = rs.channel("red")
    den = nir + red
    degenerate = np.abs(den) < 1e-9
    ndvi = np.where(degenerate, 0.0, (nir - red) / np.where(degenerate, 1.0, den))
    doys = np.array(rs.doys)
    in_search = (doys >= search.start_doy) & (doys <= search.end_doy)
    if not np.any(in_search):
        raise DataError("search window does not intersect the extended grid")
    masked = np.where(in_search, ndvi, -np.inf)
    peak = int(np.argmax(masked))
    lo = min(max(peak - half_width, 0), extended.steps - out_steps)
    window_doys = rs.doys[lo : lo + out_steps]
    return RegularSeries(
        pixel_id=series.pixel_id,
        method=Method.PHENO_PEAK,
        doys=window_doys,
        channels=rs.channels[lo : lo + out_steps],
        channel_names=BAND_NAMES,
        grid=RegularGrid(window_doys[0], extended.interval_days, out_steps),
    )


def append_sar_channels(
    rs: RegularSeries, series: ObservationSeries, cfg: SmootherConfig | None = None
) -> RegularSeries:
    """Smooth SAR backscatter (dB) on its native dates, resample onto the
    optical grid, and append vv/vh channels."""
    if not series.sar:
        raise DataError(f"pixel {series.pixel_id}: no SAR observations")
    if len(series.sar) < 3:
        raise TooFewObservations(f"pixel {series.pixel_id}: {len(series.sar)} SAR observations, need >= 3")
    if cfg is None:
        cfg = SmootherConfig(weight_mode=WeightMode.INTERVAL_AWARE)
    doys = np.array([s.doy for s in series.sar], dtype=np.float64)
    y = np.array([[s.vv, s.vh] for s in series.sar], dtype=np.float64)
    if cfg.weight_mode is WeightMode.INTERVAL_AWARE:
        w = interval_aware_weights(doys)
    else:
        w = np.ones(doys.size)
    z = whittaker_solve(y, w, cfg.lam)
    grid_doys = np.array(rs.doys, dtype=np.float64)
    vv = np.interp(grid_doys, doys, z[:, 0])
    vh = np.interp(grid_doys, doys, z[:, 1])
    return RegularSeries(
        pixel_id=rs.pixel_id,
        method=rs.method,
        doys=rs.doys,
        channels=np.column_stack([rs.channels, vv, vh]),
        channel_names=rs.channel_names + SAR_CHANNEL_NAMES,
        grid=rs.grid,
    )


def reconstruct(
    series: ObservationSeries,
    method: Method,
    smoother: SmootherConfig | None = None,
    include_sar: bool = False,
    raw_grid=None,
    raw_target_len: int | None = None,
    season: SeasonWindow = SeasonWindow(111, 265),
) -> RegularSeries:
    """Dispatch a single pixel through the selected reconstruction method."""
    from .series import raw_window

    cfg = smoother or SmootherConfig()
    if method is Method.RAW:
        if raw_target_len is None:
            raise DataError("raw method needs a target length")
        rs = raw_window(series, season, raw_target_len, grid=raw_grid)
    elif method is Method.WEIGHTED_WE:
        rs = whittaker_smooth(series, SmootherConfig(cfg.lam, 2, WeightMode.INTERVAL_AWARE))
    elif method is Method.LN7:
        rs = linear_resample(series, GRID_LN7)
    elif method is Method.LN30:
        rs = linear_resample(series, GRID_LN30)
    elif method is Method.LN7_SMOOTHED:
        rs = resample_then_smooth(series, GRID_LN7, cfg)
    elif method is Method.PHENO_PEAK:
        rs = pheno_peak_window(series, search=season)
    else:
        raise DataError(f"unknown method: {method}")
    if include_sar:
        rs = append_sar_channels(rs, series)
    return rs


def write_regular_csv(path, all_series) -> None:
    """Serialize RegularSeries rows as pixel_id,step,doy,<channel...>."""
    if not all_series:
        raise DataError("nothing to write")
    names = all_series[0].channel_names
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pixel_id", "step", "doy"] + list(names))
        for rs in all_series:
            if rs.channel_names != names:
                raise DataError("mixed channel sets in one file")
            for step in range(rs.steps):
                writer.writerow(
                    [rs.pixel_id, step, rs.doys[step]] + [repr(float(v)) for v in rs.channels[step]]
                )


def read_regular_csv(path) -> list:
    """Parse the RegularSeries CSV back into value objects (method tag Raw is
    not recoverable from CSV; stored as the generic grid-less form)."""
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["pixel_id", "step", "doy"]:
            raise DataError(f"{path}: unexpected header {header!r}")
        names = tuple(header[3:])
        for row in reader:
            if not row:
                continue
            rows.setdefault(row[0], []).append((int(row[1]), int(row[2]), [float(v) for v in row[3:]]))
    out = []
    for pid, entries in rows.items():
        entries.sort()
        out.append(
            RegularSeries(
                pixel_id=pid,
                method=Method.RAW,
                doys=tuple(e[1] for e in entries),
                channels=np.array([e[2] for e in entries]),
                channel_names=names,
            )
        )
    return out
