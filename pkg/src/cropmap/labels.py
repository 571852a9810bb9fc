"""Trusted-label generation from 8-year crop-history sequences.

A pixel's study-year corn/soy label is kept only when its history is either
an uninterrupted single crop or a strict every-other-year rotation ending in
the study-year crop.  The trusted ratio then downsamples the "other" class so
the final class mix tracks the raw label distribution.

History CSV contract: ``pixel_id,y1,...,y8`` (y8 = study year), codes are
free strings with "C" and "S" reserved for corn and soybean.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import DataError, MalformedHistory, ZeroDenominator
from .series import ClassLabel

HISTORY_YEARS = 8

CORN_CODE = "C"
SOY_CODE = "S"


class PatternMode(str, enum.Enum):
    # X in the rotation pattern X-S-X-S-... may be any code other than the
    # anchor crop (AnchorRelative, default: admits corn-soy rotations) or must
    # be a non-crop code entirely (StrictX).
    ANCHOR_RELATIVE = "anchor_relative"
    STRICT_X = "strict_x"


@dataclass(frozen=True)
class CropHistory:
    pixel_id: str
    labels: tuple

    def __post_init__(self):
        if len(self.labels) != HISTORY_YEARS:
            raise MalformedHistory(
                f"pixel {self.pixel_id}: {len(self.labels)} yearly codes, need {HISTORY_YEARS}"
            )

    @property
    def study_year(self) -> str:
        return self.labels[-1]


@dataclass(frozen=True)
class TrustedRatio:
    n_trusted_corn: int
    n_trusted_soy: int
    n_cdl_corn: int
    n_cdl_soy: int
    n_cdl_other: int

    @property
    def p_trusted(self) -> float:
        den = self.n_cdl_corn + self.n_cdl_soy
        if den <= 0:
            raise ZeroDenominator("no CDL corn or soy pixels")
        return (self.n_trusted_corn + self.n_trusted_soy) / den


_CROP_FOR_CODE = {CORN_CODE: ClassLabel.CORN, SOY_CODE: ClassLabel.SOYBEAN}


def classify_trusted(history: CropHistory, mode: PatternMode = PatternMode.ANCHOR_RELATIVE):
    """Return Corn/Soybean for a consistent history, None otherwise.

    Accepted patterns, anchored on the study-year (last) code:
      * all eight years the same crop;
      * X-c-X-c-X-c-X-c where c is the study-year crop and every X passes the
        mode's test (!= c, or not a crop code at all).
    """
    mode = PatternMode(mode)
    anchor = history.study_year
    crop = _CROP_FOR_CODE.get(anchor)
    if crop is None:
        return None
    labels = history.labels
    if all(code == anchor for code in labels):
        return crop
    anchors_ok = all(labels[i] == anchor for i in range(1, HISTORY_YEARS, 2))
    if not anchors_ok:
        return None
    xs = [labels[i] for i in range(0, HISTORY_YEARS, 2)]
    if mode is PatternMode.ANCHOR_RELATIVE:
        xs_ok = all(x != anchor for x in xs)
    else:
        xs_ok = all(x not in _CROP_FOR_CODE for x in xs)
    return crop if xs_ok else None


def compute_trusted_ratio(
    n_trusted_corn: int,
    n_trusted_soy: int,
    n_cdl_corn: int,
    n_cdl_soy: int,
    n_cdl_other: int,
) -> TrustedRatio:
    counts = (n_trusted_corn, n_trusted_soy, n_cdl_corn, n_cdl_soy, n_cdl_other)
    if any(c < 0 for c in counts):
        raise DataError("negative count")
    if n_cdl_corn + n_cdl_soy <= 0:
        raise ZeroDenominator("no CDL corn or soy pixels")
    return TrustedRatio(*counts)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def downsample_other(other_pixels: list, ratio: TrustedRatio, seed: int) -> list:
    """Uniform random subset of size round(p_trusted * n), without replacement."""
    n = len(other_pixels)
    if n == 0:
        return []
    k = round_half_up(ratio.p_trusted * n)
    k = min(k, n)
    rng = np.random.default_rng(seed)
    picked = rng.choice(n, size=k, replace=False)
    return [other_pixels[i] for i in picked]


def read_history_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["pixel_id"] + [f"y{i}" for i in range(1, HISTORY_YEARS + 1)]
        if header is None or [h.strip() for h in header] != expected:
            raise DataError(f"{path}: unexpected header {header!r}")
        out = []
        for row in reader:
            if not row:
                continue
            if len(row) != HISTORY_YEARS + 1:
                raise MalformedHistory(f"{path}: row for {row[0]!r} has {len(row) - 1} years")
            out.append(CropHistory(row[0], tuple(code.strip() for code in row[1:])))
    return out


def trusted_label_report(histories, mode: PatternMode = PatternMode.ANCHOR_RELATIVE, seed: int = 0):
    """Classify every history; compute the trusted ratio from study-year CDL
    counts; downsample the "other" pixels.

    Returns (labels, ratio) where labels is a list of (pixel_id, ClassLabel)
    covering trusted corn/soy plus the sampled "other" subset.
    """
    trusted: list = []
    cdl_corn = cdl_soy = 0
    t_corn = t_soy = 0
    others: list = []
    for h in histories:
        if h.study_year == CORN_CODE:
            cdl_corn += 1
        elif h.study_year == SOY_CODE:
            cdl_soy += 1
        else:
            others.append(h.pixel_id)
        label = classify_trusted(h, mode)
        if label is ClassLabel.CORN:
            t_corn += 1
            trusted.append((h.pixel_id, label))
        elif label is ClassLabel.SOYBEAN:
            t_soy += 1
            trusted.append((h.pixel_id, label))
    ratio = compute_trusted_ratio(t_corn, t_soy, cdl_corn, cdl_soy, len(others))
    sampled = downsample_other(others, ratio, seed)
    labels = trusted + [(pid, ClassLabel.OTHER) for pid in sorted(sampled)]
    return labels, ratio
