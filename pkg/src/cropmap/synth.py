"""Synthetic phenology dataset generator with controllable domain shift.

Each pixel gets a latent seasonal greenness curve (double logistic) with
per-pixel parameter jitter, mapped linearly to six reflectance bands and an
optional SAR pair, then sampled on an irregular date schedule with cloud
corruption.  A ShiftSpec bends the whole process to fabricate a second domain:
shifted phenology, scaled amplitude, per-band sensor bias, altered class
balance, heavier noise.

Everything is deterministic per seed: pixels draw their own generators from a
spawned seed sequence, so generation order and worker count cannot change the
output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import InvalidSpec
from .labels import CORN_CODE, HISTORY_YEARS, SOY_CODE, CropHistory
from .series import BAND_NAMES, ClassLabel, ObservationSeries, SarObservation, SpectralObservation

HISTORY_CODES = ("C", "S", "W", "A", "G")
_NON_SOY = tuple(c for c in HISTORY_CODES if c != SOY_CODE)

HISTORY_FAMILIES = (
    "continuous_corn",
    "continuous_soy",
    "corn_soy_rotation",
    "x_soy_rotation",
    "random",
)


@dataclass(frozen=True)
class CurveSpec:
    """Double-logistic greenness parameters for one curve family."""

    name: str
    base: float
    amplitude: float
    greenup_doy: float
    greenup_rate: float
    senescence_doy: float
    senescence_rate: float
    weight: float = 1.0

    def __post_init__(self):
        if self.amplitude <= 0:
            raise InvalidSpec(f"{self.name}: amplitude must be positive")
        if self.greenup_doy >= self.senescence_doy:
            raise InvalidSpec(f"{self.name}: green-up must precede senescence")


@dataclass(frozen=True)
class BandMixing:
    """Linear map from latent greenness to the six bands: offset + slope * g."""

    offsets: tuple
    slopes: tuple

    def __post_init__(self):
        if len(self.offsets) != 6 or len(self.slopes) != 6:
            raise InvalidSpec("band mixing needs 6 offsets and 6 slopes")


@dataclass(frozen=True)
class SarResponse:
    offsets: tuple  # (vv, vh) dB at zero greenness
    slopes: tuple
    noise_db: float = 0.4


@dataclass(frozen=True)
class Jitter:
    doy_sd: float = 5.0
    amp_sd: float = 0.05
    base_sd: float = 0.01
    obs_noise_sd: float = 0.01


@dataclass(frozen=True)
class GeneratorProfiles:
    curves: dict  # ClassLabel -> list[CurveSpec]
    mixing: BandMixing
    sar: SarResponse
    jitter: Jitter


@dataclass(frozen=True)
class ShiftSpec:
    """Domain-shift dials; the identity spec reproduces the source domain."""

    phenology_shift_days: float = 0.0
    amplitude_scale: float = 1.0
    sensor_offset: tuple = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    class_balance: tuple = (1 / 3, 1 / 3, 1 / 3)
    cloud_prob: float = 0.1
    spike_magnitude: float = 0.4

    def __post_init__(self):
        if self.amplitude_scale <= 0:
            raise InvalidSpec("amplitude_scale must be positive")
        if len(self.sensor_offset) != 6:
            raise InvalidSpec("sensor_offset needs 6 entries")
        if len(self.class_balance) != 3 or abs(sum(self.class_balance) - 1.0) > 1e-9:
            raise InvalidSpec("class_balance must be 3 proportions summing to 1")
        if not 0.0 <= self.cloud_prob < 1.0:
            raise InvalidSpec("cloud_prob must be in [0, 1)")


IDENTITY_SHIFT = ShiftSpec()


@dataclass(frozen=True)
class ObservationSchedule:
    """Irregular sampling: a base interval with per-date jitter and dropouts."""

    start_doy: int = 95
    end_doy: int = 280
    base_interval: int = 8
    day_jitter: int = 2
    dropout_prob: float = 0.15

    def __post_init__(self):
        if self.start_doy >= self.end_doy or self.base_interval < 1:
            raise InvalidSpec("bad observation schedule")


def double_logistic(t, base, amplitude, g_doy, g_rate, s_doy, s_rate):
    t = np.asarray(t, dtype=np.float64)
    up = 1.0 / (1.0 + np.exp(-g_rate * (t - g_doy)))
    down = 1.0 / (1.0 + np.exp(-s_rate * (t - s_doy)))
    return base + amplitude * (up - down)


def _parse_profiles(raw: dict) -> GeneratorProfiles:
    name_to_label = {"corn": ClassLabel.CORN, "soybean": ClassLabel.SOYBEAN, "other": ClassLabel.OTHER}
    curves = {}
    for name, label in name_to_label.items():
        entries = raw["classes"].get(name)
        if not entries:
            raise InvalidSpec(f"profiles missing class {name!r}")
        curves[label] = [CurveSpec(**e) for e in entries]
    return GeneratorProfiles(
        curves=curves,
        mixing=BandMixing(offsets=tuple(raw["band_mixing"]["offsets"]), slopes=tuple(raw["band_mixing"]["slopes"])),
        sar=SarResponse(
            offsets=tuple(raw["sar"]["offsets"]),
            slopes=tuple(raw["sar"]["slopes"]),
            noise_db=float(raw["sar"].get("noise_db", 0.4)),
        ),
        jitter=Jitter(**raw.get("jitter", {})),
    )


def load_profiles(path) -> GeneratorProfiles:
    with open(path, encoding="utf-8") as fh:
        return _parse_profiles(json.load(fh))


def load_default_profiles() -> GeneratorProfiles:
    text = resources.files("cropmap.profiles").joinpath("default_profiles.json").read_text(encoding="utf-8")
    return _parse_profiles(json.loads(text))


def _largest_remainder(total: int, proportions) -> np.ndarray:
    raw = np.asarray(proportions, dtype=np.float64) * total
    counts = np.floor(raw).astype(np.int64)
    rem = total - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    for j in order[:rem]:
        counts[j] += 1
    return counts


def _pixel_series(
    pixel_id: str,
    label: ClassLabel,
    profiles: GeneratorProfiles,
    schedule: ObservationSchedule,
    shift: ShiftSpec,
    rng: np.random.Generator,
    include_sar: bool,
) -> ObservationSeries:
    options = profiles.curves[label]
    if len(options) == 1:
        curve = options[0]
    else:
        weights = np.array([c.weight for c in options], dtype=np.float64)
        curve = options[rng.choice(len(options), p=weights / weights.sum())]
    jit = profiles.jitter
    g_doy = curve.greenup_doy + rng.normal(0.0, jit.doy_sd) + shift.phenology_shift_days
    s_doy = curve.senescence_doy + rng.normal(0.0, jit.doy_sd) + shift.phenology_shift_days
    s_doy = max(s_doy, g_doy + 5.0)
    amp = max(curve.amplitude * (1.0 + rng.normal(0.0, jit.amp_sd)) * shift.amplitude_scale, 0.01)
    base = max(curve.base + rng.normal(0.0, jit.base_sd), 0.0)

    doys = np.arange(schedule.start_doy, schedule.end_doy + 1, schedule.base_interval)
    if schedule.day_jitter > 0:
        doys = doys + rng.integers(-schedule.day_jitter, schedule.day_jitter + 1, size=doys.size)
    doys = np.unique(np.clip(doys, 1, 366))
    if schedule.dropout_prob > 0:
        keep = rng.random(doys.size) >= schedule.dropout_prob
        if keep.sum() >= 4:
            doys = doys[keep]

    g = double_logistic(doys, base, amp, g_doy, curve.greenup_rate, s_doy, curve.senescence_rate)
    offsets = np.asarray(profiles.mixing.offsets)
    slopes = np.asarray(profiles.mixing.slopes)
    bands = offsets[None, :] + slopes[None, :] * g[:, None]
    bands = bands + np.asarray(shift.sensor_offset)[None, :]
    bands = bands + rng.normal(0.0, jit.obs_noise_sd, size=bands.shape)

    cloudy = rng.random(doys.size) < shift.cloud_prob
    spikes = shift.spike_magnitude * (0.5 + 0.5 * rng.random((doys.size, 6)))
    bands = np.where(cloudy[:, None], bands + spikes, bands)

    observations = tuple(
        SpectralObservation(doy=int(d), bands=tuple(row), qa_valid=not c)
        for d, row, c in zip(doys, bands, cloudy)
    )
    sar = ()
    if include_sar:
        vv = profiles.sar.offsets[0] + profiles.sar.slopes[0] * g + rng.normal(0.0, profiles.sar.noise_db, g.size)
        vh = profiles.sar.offsets[1] + profiles.sar.slopes[1] * g + rng.normal(0.0, profiles.sar.noise_db, g.size)
        sar = tuple(SarObservation(doy=int(d), vv=float(a), vh=float(b)) for d, a, b in zip(doys, vv, vh))
    return ObservationSeries(pixel_id=pixel_id, observations=observations, sar=sar)


def generate_series(
    profiles: GeneratorProfiles,
    n_per_class: int,
    schedule: ObservationSchedule = ObservationSchedule(),
    shift: ShiftSpec = IDENTITY_SHIFT,
    seed: int = 0,
    include_sar: bool = True,
    grid_cols: int | None = None,
):
    """Returns (list of ObservationSeries, labels array).

    Class counts follow shift.class_balance over a 3 * n_per_class total via
    largest-remainder rounding; the identity balance gives n_per_class each.
    With grid_cols set, pixel ids encode row/col positions (r0c0, r0c1, ...),
    which downstream tooling can rasterize.
    """
    if n_per_class < 1:
        raise InvalidSpec("n_per_class must be >= 1")
    counts = _largest_remainder(3 * n_per_class, shift.class_balance)
    labels = np.repeat(np.arange(3, dtype=np.int64), counts)
    children = np.random.SeedSequence(seed).spawn(labels.size)
    series = []
    for i, (label, child) in enumerate(zip(labels, children)):
        if grid_cols:
            pid = f"r{i // grid_cols}c{i % grid_cols}"
        else:
            pid = f"px{i:06d}"
        rng = np.random.default_rng(child)
        series.append(
            _pixel_series(pid, ClassLabel(int(label)), profiles, schedule, shift, rng, include_sar)
        )
    return series, labels


def write_truth_csv(path, series, labels):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("pixel_id,label\n")
        for s, y in zip(series, labels):
            fh.write(f"{s.pixel_id},{int(y)}\n")


def read_truth_csv(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "pixel_id,label":
            raise InvalidSpec(f"{path}: unexpected truth header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            pid, lab = line.split(",")
            out[pid] = int(lab)
    return out


def generate(
    profiles: GeneratorProfiles,
    n_per_class: int,
    pixel_csv_path,
    truth_csv_path,
    schedule: ObservationSchedule = ObservationSchedule(),
    shift: ShiftSpec = IDENTITY_SHIFT,
    seed: int = 0,
    include_sar: bool = True,
    grid_cols: int | None = None,
):
    """File-level entry point: writes the pixel CSV and the truth CSV."""
    from .series import write_pixel_csv

    series, labels = generate_series(
        profiles, n_per_class, schedule=schedule, shift=shift, seed=seed, include_sar=include_sar, grid_cols=grid_cols
    )
    write_pixel_csv(pixel_csv_path, series)
    write_truth_csv(truth_csv_path, series, labels)
    return series, labels


# -- crop histories ---------------------------------------------------------------


def _history_labels(family: str, rng: np.random.Generator) -> tuple:
    if family == "continuous_corn":
        return (CORN_CODE,) * HISTORY_YEARS
    if family == "continuous_soy":
        return (SOY_CODE,) * HISTORY_YEARS
    if family == "corn_soy_rotation":
        anchor = CORN_CODE if rng.random() < 0.5 else SOY_CODE
        other = SOY_CODE if anchor == CORN_CODE else CORN_CODE
        labels = [other, anchor] * (HISTORY_YEARS // 2)
        return tuple(labels)
    if family == "x_soy_rotation":
        labels = []
        for i in range(HISTORY_YEARS):
            if i % 2 == 1:
                labels.append(SOY_CODE)
            else:
                labels.append(_NON_SOY[rng.integers(0, len(_NON_SOY))])
        return tuple(labels)
    if family == "random":
        return tuple(HISTORY_CODES[j] for j in rng.integers(0, len(HISTORY_CODES), HISTORY_YEARS))
    raise InvalidSpec(f"unknown history family {family!r}")


def generate_histories(n: int, rotation_mix: dict, seed: int = 0) -> list:
    """Draws 8-year histories from the named pattern families.

    rotation_mix maps family name -> proportion; proportions must sum to 1.
    """
    unknown = set(rotation_mix) - set(HISTORY_FAMILIES)
    if unknown:
        raise InvalidSpec(f"unknown history families {sorted(unknown)}")
    props = [rotation_mix.get(f, 0.0) for f in HISTORY_FAMILIES]
    if abs(sum(props) - 1.0) > 1e-9:
        raise InvalidSpec(f"rotation_mix sums to {sum(props)}, expected 1")
    counts = _largest_remainder(n, props)
    rng = np.random.default_rng(seed)
    histories = []
    i = 0
    for family, count in zip(HISTORY_FAMILIES, counts):
        for _ in range(count):
            histories.append(CropHistory(pixel_id=f"h{i:06d}", labels=_history_labels(family, rng)))
            i += 1
    return histories


def write_history_csv(path, histories):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("pixel_id," + ",".join(f"y{i + 1}" for i in range(HISTORY_YEARS)) + "\n")
        for h in histories:
            fh.write(h.pixel_id + "," + ",".join(h.labels) + "\n")
