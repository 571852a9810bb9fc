"""Command-line pipelines: synth-gen, preprocess, labels, dtw-report, train,
transfer, predict, report.

Conventions shared by every command:
  * flags override config-file keys, which override built-in defaults;
  * the resolved config and seed are printed as one JSON line before work;
  * machine-readable outputs go only to the named output paths;
  * reruns with identical config+seed produce byte-identical outputs, with
    wall-clock timings segregated into a separate timings file;
  * exit codes: 0 ok, 2 config error, 3 data error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time

import numpy as np

from . import __version__
from .config import dump_resolved, load_json_config, resolve
from .dataset import Fingerprint, LabeledDataset, stratified_split
from .errors import ConfigError, CropmapError, DataError
from .evaluate import cross_validate, direct_eval, train_once
from .indices import ALL_VIS, IndexKind, augment_channels
from .labels import PatternMode, read_history_csv, trusted_label_report
from .models import ModelKind, desk_profile, load_artifact, paper_profile, predict_labels, save_artifact
from .reconstruct import (
    GRID_LN7,
    GRID_LN30,
    Method,
    RegularGrid,
    SmootherConfig,
    WeightMode,
    append_sar_channels,
    linear_resample,
    pheno_peak_window,
    read_regular_csv,
    resample_then_smooth,
    whittaker_smooth,
    write_regular_csv,
)
from .separability import DtwConfig, separability_report, write_report_csv
from .series import BAND_NAMES, ClassLabel, SeasonWindow, raw_window, read_pixel_csv, common_acquisition_grid
from .synth import (
    ObservationSchedule,
    ShiftSpec,
    generate,
    generate_histories,
    load_default_profiles,
    load_profiles,
    read_truth_csv,
    write_history_csv,
)
from .transfer import DannConfig, DomainPair, FinetuneStrategy, dann_train, direct_transfer_eval, fine_tune

_GRID_ID = re.compile(r"^r(\d+)c(\d+)$")


# -- small shared helpers --------------------------------------------------------


def _write_json(path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2))
        fh.write("\n")


def _floats(text: str, n: int, what: str) -> list:
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if len(parts) != n:
        raise ConfigError(f"{what}: expected {n} comma-separated values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _meta_path(csv_path: str) -> str:
    return csv_path + ".meta.json"


def _load_regular_with_meta(path: str):
    """Regular-series CSV plus its sidecar; restores the method tag the CSV
    cannot carry."""
    series = read_regular_csv(path)
    meta_file = _meta_path(path)
    if os.path.exists(meta_file):
        with open(meta_file, encoding="utf-8") as fh:
            meta = json.load(fh)
        method = Method(meta["fingerprint"]["method"])
        for rs in series:
            rs.method = method
    return series


def _load_dataset(data_csv: str, truth_csv: str) -> LabeledDataset:
    series = _load_regular_with_meta(data_csv)
    truth = read_truth_csv(truth_csv)
    missing = [rs.pixel_id for rs in series if rs.pixel_id not in truth]
    if missing:
        raise DataError(f"{truth_csv}: no label for pixels {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return LabeledDataset.from_series(series, [truth[rs.pixel_id] for rs in series])


def _model_config(resolved: dict) -> "ModelConfig":
    from dataclasses import replace

    kind = ModelKind.parse(resolved["model"])
    profile = resolved["profile"]
    if profile == "desk":
        cfg = desk_profile(kind)
    elif profile == "paper":
        cfg = paper_profile(kind)
    else:
        raise ConfigError(f"unknown profile {profile!r}; choose desk or paper")
    overrides = {}
    for key in ("epochs", "batch_size", "hidden_size", "d_model", "n_estimators", "max_features"):
        if resolved.get(key) is not None:
            overrides[key] = int(resolved[key])
    if resolved.get("lr") is not None:
        overrides["lr"] = float(resolved["lr"])
    overrides["seed"] = int(resolved["seed"])
    return replace(cfg, **overrides)


def _write_pgm(path: str, predictions: dict):
    """Plain (P2) grayscale class map for pixel ids of the form r<row>c<col>."""
    coords = {}
    for pid, label in predictions.items():
        m = _GRID_ID.match(pid)
        if not m:
            raise DataError(f"pixel id {pid!r} does not encode a grid position (r<row>c<col>)")
        coords[(int(m.group(1)), int(m.group(2)))] = int(label)
    height = max(r for r, _ in coords) + 1
    width = max(c for _, c in coords) + 1
    shade = {0: 50, 1: 150, 2: 250}
    lines = [
        "P2",
        f"# classes: corn=50 soybean=150 other=250 missing=0",
        f"{width} {height}",
        "255",
    ]
    for r in range(height):
        lines.append(" ".join(str(shade.get(coords.get((r, c)), 0)) for c in range(width)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _print_resolved(command: str, resolved: dict):
    print(dump_resolved(command, resolved))


def _outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


# -- synth-gen ---------------------------------------------------------------------

_SYNTH_DEFAULTS = {
    "out": None,
    "n_per_class": 300,
    "seed": 0,
    "profiles": "",
    "shift_days": 0.0,
    "amp_scale": 1.0,
    "sensor_offset": [0.0] * 6,
    "class_balance": [1 / 3, 1 / 3, 1 / 3],
    "cloud_prob": 0.1,
    "spike": 0.4,
    "start_doy": 95,
    "end_doy": 280,
    "interval": 8,
    "day_jitter": 2,
    "dropout_prob": 0.15,
    "sar": True,
    "grid_cols": 0,
    "histories": 0,
    "rotation_mix": "",
}

_DEFAULT_ROTATION_MIX = {
    "continuous_corn": 0.15,
    "continuous_soy": 0.15,
    "corn_soy_rotation": 0.30,
    "x_soy_rotation": 0.20,
    "random": 0.20,
}


def cmd_synth_gen(ns) -> int:
    resolved = _resolve_ns(ns, _SYNTH_DEFAULTS)
    if not resolved["out"]:
        raise ConfigError("synth-gen needs --out")
    _print_resolved("synth-gen", resolved)
    out = _outdir(resolved["out"])
    profiles = load_profiles(resolved["profiles"]) if resolved["profiles"] else load_default_profiles()
    sensor_offset = resolved["sensor_offset"]
    if isinstance(sensor_offset, str):
        sensor_offset = _floats(sensor_offset, 6, "--sensor-offset")
    balance = resolved["class_balance"]
    if isinstance(balance, str):
        balance = _floats(balance, 3, "--class-balance")
    shift = ShiftSpec(
        phenology_shift_days=float(resolved["shift_days"]),
        amplitude_scale=float(resolved["amp_scale"]),
        sensor_offset=tuple(sensor_offset),
        class_balance=tuple(balance),
        cloud_prob=float(resolved["cloud_prob"]),
        spike_magnitude=float(resolved["spike"]),
    )
    schedule = ObservationSchedule(
        start_doy=int(resolved["start_doy"]),
        end_doy=int(resolved["end_doy"]),
        base_interval=int(resolved["interval"]),
        day_jitter=int(resolved["day_jitter"]),
        dropout_prob=float(resolved["dropout_prob"]),
    )
    generate(
        profiles,
        int(resolved["n_per_class"]),
        os.path.join(out, "pixels.csv"),
        os.path.join(out, "truth.csv"),
        schedule=schedule,
        shift=shift,
        seed=int(resolved["seed"]),
        include_sar=bool(resolved["sar"]),
        grid_cols=int(resolved["grid_cols"]) or None,
    )
    if int(resolved["histories"]) > 0:
        mix = json.loads(resolved["rotation_mix"]) if resolved["rotation_mix"] else _DEFAULT_ROTATION_MIX
        hist = generate_histories(int(resolved["histories"]), mix, seed=int(resolved["seed"]))
        write_history_csv(os.path.join(out, "histories.csv"), hist)
    return 0


# -- preprocess ----------------------------------------------------------------------

_PRE_DEFAULTS = {
    "input": None,
    "out": None,
    "method": "ln7",
    "lam": 10.0,
    "weight_mode": "uniform",
    "sar": False,
    "indices": "",
    "raw_len": 23,
    "raw_common_grid": False,
    "season_start": 111,
    "season_end": 265,
    "jobs": 1,
}


def _parse_indices(text: str) -> list:
    if not text:
        return []
    if text.strip().lower() == "all":
        return list(ALL_VIS)
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(IndexKind(token))
        except ValueError:
            raise ConfigError(f"unknown index {token!r}; known: {[k.value for k in IndexKind]}") from None
    return out


def _preprocess_one(args):
    series, method_value, lam, weight_mode, include_sar, kind_values, raw_len, raw_grid, season = args
    method = Method(method_value)
    window = SeasonWindow(*season)
    cfg = SmootherConfig(lam=lam, weight_mode=WeightMode(weight_mode))
    if method is Method.RAW:
        rs = raw_window(series, window, raw_len, grid=raw_grid)
    elif method is Method.WEIGHTED_WE:
        rs = whittaker_smooth(series, SmootherConfig(lam=lam, weight_mode=WeightMode.INTERVAL_AWARE))
    elif method is Method.LN7:
        rs = linear_resample(series, GRID_LN7)
    elif method is Method.LN30:
        rs = linear_resample(series, GRID_LN30)
    elif method is Method.LN7_SMOOTHED:
        rs = resample_then_smooth(series, GRID_LN7, cfg)
    elif method is Method.PHENO_PEAK:
        rs = pheno_peak_window(series, search=window)
    else:
        raise ConfigError(f"unknown method {method_value!r}")
    if include_sar:
        rs = append_sar_channels(rs, series)
    return augment_channels(rs, [IndexKind(v) for v in kind_values])


def cmd_preprocess(ns) -> int:
    resolved = _resolve_ns(ns, _PRE_DEFAULTS)
    if not resolved["input"] or not resolved["out"]:
        raise ConfigError("preprocess needs --input and --out")
    _print_resolved("preprocess", resolved)
    kinds = _parse_indices(resolved["indices"])
    all_series = read_pixel_csv(resolved["input"])
    if not all_series:
        raise DataError(f"{resolved['input']}: no pixels")
    season = (int(resolved["season_start"]), int(resolved["season_end"]))
    raw_grid = None
    if resolved["method"] == "raw" and resolved["raw_common_grid"]:
        raw_grid = common_acquisition_grid(all_series, SeasonWindow(*season))
    work = [
        (
            s,
            resolved["method"],
            float(resolved["lam"]),
            resolved["weight_mode"],
            bool(resolved["sar"]),
            [k.value for k in kinds],
            int(resolved["raw_len"]),
            raw_grid,
            season,
        )
        for s in all_series
    ]
    jobs = int(resolved["jobs"])
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out_series = list(pool.map(_preprocess_one, work, chunksize=64))
    else:
        out_series = [_preprocess_one(w) for w in work]
    write_regular_csv(resolved["out"], out_series)
    fp = Fingerprint.of_series(out_series[0])
    _write_json(
        _meta_path(resolved["out"]),
        {
            "fingerprint": fp.to_dict(),
            "smoother_lambda": float(resolved["lam"]),
            "weight_mode": resolved["weight_mode"],
            "indices": [k.value for k in kinds],
            "sar": bool(resolved["sar"]),
            "season": list(season),
            "index_warnings": int(sum(rs.index_warnings for rs in out_series)),
        },
    )
    return 0


# -- labels -----------------------------------------------------------------------

_LABELS_DEFAULTS = {
    "histories": None,
    "out_labels": None,
    "out_ratio": "",
    "mode": "anchor_relative",
    "seed": 0,
}


def cmd_labels(ns) -> int:
    resolved = _resolve_ns(ns, _LABELS_DEFAULTS)
    if not resolved["histories"] or not resolved["out_labels"]:
        raise ConfigError("labels needs --histories and --out-labels")
    _print_resolved("labels", resolved)
    histories = read_history_csv(resolved["histories"])
    labels, ratio = trusted_label_report(histories, PatternMode(resolved["mode"]), seed=int(resolved["seed"]))
    with open(resolved["out_labels"], "w", encoding="utf-8", newline="") as fh:
        fh.write("pixel_id,label\n")
        for pid, label in labels:
            fh.write(f"{pid},{int(label)}\n")
    if resolved["out_ratio"]:
        _write_json(
            resolved["out_ratio"],
            {
                "n_trusted_corn": ratio.n_trusted_corn,
                "n_trusted_soy": ratio.n_trusted_soy,
                "n_cdl_corn": ratio.n_cdl_corn,
                "n_cdl_soy": ratio.n_cdl_soy,
                "n_cdl_other": ratio.n_cdl_other,
                "p_trusted": ratio.p_trusted,
            },
        )
    return 0


# -- dtw-report -------------------------------------------------------------------

_DTW_DEFAULTS = {
    "data": None,
    "truth": None,
    "out": None,
    "per_class": 100,
    "seed": 0,
    "bands": "",
}


def cmd_dtw_report(ns) -> int:
    resolved = _resolve_ns(ns, _DTW_DEFAULTS)
    if not (resolved["data"] and resolved["truth"] and resolved["out"]):
        raise ConfigError("dtw-report needs --data, --truth and --out")
    _print_resolved("dtw-report", resolved)
    series = _load_regular_with_meta(resolved["data"])
    truth = read_truth_csv(resolved["truth"])
    corn = [rs for rs in series if truth.get(rs.pixel_id) == int(ClassLabel.CORN)]
    soy = [rs for rs in series if truth.get(rs.pixel_id) == int(ClassLabel.SOYBEAN)]
    band_names = None
    if resolved["bands"]:
        band_names = tuple(b.strip() for b in resolved["bands"].split(",") if b.strip())
    n_samples = min(int(resolved["per_class"]), len(corn), len(soy))
    report = separability_report(
        corn, soy, DtwConfig(), seed=int(resolved["seed"]), n_samples=n_samples, band_names=band_names
    )
    write_report_csv(resolved["out"], [report])
    return 0


# -- train ------------------------------------------------------------------------

_TRAIN_DEFAULTS = {
    "data": None,
    "truth": None,
    "outdir": None,
    "model": "RF",
    "profile": "desk",
    "k": 10,
    "seed": 0,
    "jobs": 1,
    "epochs": None,
    "batch_size": None,
    "lr": None,
    "hidden_size": None,
    "d_model": None,
    "n_estimators": None,
    "max_features": None,
}


def cmd_train(ns) -> int:
    resolved = _resolve_ns(ns, _TRAIN_DEFAULTS)
    if not (resolved["data"] and resolved["truth"] and resolved["outdir"]):
        raise ConfigError("train needs --data, --truth and --outdir")
    _print_resolved("train", resolved)
    out = _outdir(resolved["outdir"])
    cfg = _model_config(resolved)
    data = _load_dataset(resolved["data"], resolved["truth"])
    t0 = time.perf_counter()
    report = cross_validate(data, cfg, k=int(resolved["k"]), seed=int(resolved["seed"]), jobs=int(resolved["jobs"]))
    # final artifact for transfer/predict: one stratified 90/10 train/val split
    tr, va = stratified_split(data, (0.9, 0.1), seed=int(resolved["seed"]))
    artifact = train_once(tr, va, cfg)
    total = time.perf_counter() - t0
    save_artifact(artifact, os.path.join(out, "model.bin"))
    _write_json(
        os.path.join(out, "report.json"),
        {
            "command": "train",
            "config": {k: v for k, v in resolved.items()},
            "model": cfg.to_dict(),
            "folds": [m.to_dict(include_timings=False) for m in report.folds],
            "trimmed_mean_oa": report.trimmed_mean_oa,
        },
    )
    _write_json(
        os.path.join(out, "timings.json"),
        {
            "folds": [
                {"train_seconds": m.train_seconds, "predict_seconds": m.predict_seconds} for m in report.folds
            ],
            "total_seconds": total,
        },
    )
    return 0


# -- transfer ----------------------------------------------------------------------

_TRANSFER_DEFAULTS = {
    "method": "direct",
    "source_artifact": "",
    "source_data": "",
    "source_truth": "",
    "target_data": None,
    "target_truth": None,
    "outdir": None,
    "seed": 0,
    "split": "0.375,0.125,0.5",
    "adapt_fraction": 0.5,
    "epochs": None,
    "batch_size": None,
    "lr": None,
    "model": "GRU",
    "profile": "desk",
    "hidden_size": None,
    "d_model": None,
    "n_estimators": None,
    "max_features": None,
    "lambda_scale": 1.0,
    "domain_hidden": 64,
}


def cmd_transfer(ns) -> int:
    resolved = _resolve_ns(ns, _TRANSFER_DEFAULTS)
    if not (resolved["target_data"] and resolved["target_truth"] and resolved["outdir"]):
        raise ConfigError("transfer needs --target-data, --target-truth and --outdir")
    _print_resolved("transfer", resolved)
    out = _outdir(resolved["outdir"])
    method = resolved["method"]
    seed = int(resolved["seed"])
    target = _load_dataset(resolved["target_data"], resolved["target_truth"])
    payload: dict = {"command": "transfer", "config": dict(resolved)}
    timings: dict = {}
    t0 = time.perf_counter()

    if method == "direct":
        artifact = _require_artifact(resolved)
        metrics = direct_transfer_eval(artifact, target)
        payload["metrics"] = metrics.to_dict(include_timings=False)
        timings["predict_seconds"] = metrics.predict_seconds
    elif method.startswith("finetune:"):
        artifact = _require_artifact(resolved)
        name = method.split(":", 1)[1]
        fracs = _floats(resolved["split"], 3, "--split")
        tr, va, te = stratified_split(target, fracs, seed=seed)
        kwargs = {}
        if resolved["epochs"] is not None:
            kwargs["epochs"] = int(resolved["epochs"])
        if resolved["lr"] is not None:
            kwargs["lr"] = float(resolved["lr"])
        if resolved["batch_size"] is not None:
            kwargs["batch_size"] = int(resolved["batch_size"])
        strategy = FinetuneStrategy(name=name, **kwargs)
        tuned = fine_tune(artifact, tr, va, strategy, seed=seed)
        metrics = direct_transfer_eval(tuned, te)
        save_artifact(tuned, os.path.join(out, "model.bin"))
        payload["metrics"] = metrics.to_dict(include_timings=False)
        payload["training_log"] = tuned.training_log
        timings["predict_seconds"] = metrics.predict_seconds
    elif method == "dann":
        if not (resolved["source_data"] and resolved["source_truth"]):
            raise ConfigError("transfer --method dann needs --source-data and --source-truth")
        source = _load_dataset(resolved["source_data"], resolved["source_truth"])
        adapt_frac = float(resolved["adapt_fraction"])
        adapt, test = stratified_split(target, (adapt_frac, 1.0 - adapt_frac), seed=seed)
        pair = DomainPair(source=source, target_adapt_X=adapt.X, target_test=test)
        mcfg = _model_config(resolved)
        dcfg = DannConfig(
            model=mcfg,
            epochs=int(resolved["epochs"]) if resolved["epochs"] is not None else 30,
            batch_size=int(resolved["batch_size"]) if resolved["batch_size"] is not None else 64,
            lr=float(resolved["lr"]) if resolved["lr"] is not None else 5e-4,
            lambda_scale=float(resolved["lambda_scale"]),
            domain_hidden=int(resolved["domain_hidden"]),
            seed=seed,
        )
        artifact = dann_train(pair.source, pair.target_adapt_X, dcfg)
        metrics = direct_transfer_eval(artifact, pair.target_test)
        save_artifact(artifact, os.path.join(out, "model.bin"))
        payload["metrics"] = metrics.to_dict(include_timings=False)
        payload["training_log"] = artifact.training_log
        timings["predict_seconds"] = metrics.predict_seconds
    else:
        raise ConfigError(f"unknown transfer method {method!r}; use direct, finetune:R1..R4, or dann")

    timings["total_seconds"] = time.perf_counter() - t0
    _write_json(os.path.join(out, "report.json"), payload)
    _write_json(os.path.join(out, "timings.json"), timings)
    return 0


def _require_artifact(resolved: dict):
    if not resolved["source_artifact"]:
        raise ConfigError(f"transfer --method {resolved['method']} needs --source-artifact")
    return load_artifact(resolved["source_artifact"])


# -- predict ----------------------------------------------------------------------

_PREDICT_DEFAULTS = {
    "artifact": None,
    "input": None,
    "out": None,
    "pgm": "",
    "lam": 10.0,
    "season_start": 111,
    "season_end": 265,
}


def _rebuild_series(series, fp: Fingerprint, lam: float, season: SeasonWindow):
    method = Method(fp.method)
    extras = [n for n in fp.channel_names if n not in BAND_NAMES]
    include_sar = "vv" in extras
    vi_kinds = [IndexKind(n) for n in extras if n not in ("vv", "vh")]
    if method in (Method.LN7, Method.LN30):
        grid = RegularGrid(fp.start_doy, fp.interval_days, fp.steps)
        rs = linear_resample(series, grid)
    elif method is Method.LN7_SMOOTHED:
        grid = RegularGrid(fp.start_doy, fp.interval_days, fp.steps)
        rs = resample_then_smooth(series, grid, SmootherConfig(lam=lam))
    elif method is Method.PHENO_PEAK:
        rs = pheno_peak_window(series, search=season, half_width=(fp.steps - 1) // 2)
    elif method is Method.RAW:
        rs = raw_window(series, season, fp.steps)
    elif method is Method.WEIGHTED_WE:
        rs = whittaker_smooth(series, SmootherConfig(lam=lam, weight_mode=WeightMode.INTERVAL_AWARE))
    else:
        raise DataError(f"cannot rebuild preprocessing for method {fp.method!r}")
    if include_sar:
        rs = append_sar_channels(rs, series)
    return augment_channels(rs, vi_kinds)


def cmd_predict(ns) -> int:
    resolved = _resolve_ns(ns, _PREDICT_DEFAULTS)
    if not (resolved["artifact"] and resolved["input"] and resolved["out"]):
        raise ConfigError("predict needs --artifact, --input and --out")
    _print_resolved("predict", resolved)
    artifact = load_artifact(resolved["artifact"])
    fp = artifact.fingerprint_obj
    season = SeasonWindow(int(resolved["season_start"]), int(resolved["season_end"]))
    pixels = read_pixel_csv(resolved["input"])
    rebuilt = [_rebuild_series(s, fp, float(resolved["lam"]), season) for s in pixels]
    data_fp = Fingerprint.of_series(rebuilt[0])
    fp.require_match(data_fp)
    X = np.stack([rs.channels for rs in rebuilt])
    labels, conf = predict_labels(artifact, X)
    with open(resolved["out"], "w", encoding="utf-8", newline="") as fh:
        fh.write("pixel_id,predicted_class,confidence\n")
        for rs, label, c in zip(rebuilt, labels, conf):
            fh.write(f"{rs.pixel_id},{int(label)},{repr(float(c))}\n")
    if resolved["pgm"]:
        _write_pgm(resolved["pgm"], {rs.pixel_id: int(label) for rs, label in zip(rebuilt, labels)})
    return 0


# -- report -----------------------------------------------------------------------

_REPORT_DEFAULTS = {
    "inputs": None,
    "out": None,
}


def cmd_report(ns) -> int:
    resolved = _resolve_ns(ns, _REPORT_DEFAULTS)
    if not resolved["inputs"] or not resolved["out"]:
        raise ConfigError("report needs --inputs and --out")
    _print_resolved("report", resolved)
    rows = []
    for path in resolved["inputs"]:
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
        name = os.path.basename(os.path.dirname(path)) or os.path.basename(path)
        timings = {}
        tfile = os.path.join(os.path.dirname(path), "timings.json")
        if os.path.exists(tfile):
            with open(tfile, encoding="utf-8") as fh:
                timings = json.load(fh)
        fold_times = timings.get("folds", [])
        if "folds" in rep:
            oas = []
            for i, fold in enumerate(rep["folds"]):
                t = fold_times[i] if i < len(fold_times) else {}
                rows.append(
                    [
                        name,
                        "fold",
                        i,
                        fold["oa"],
                        fold["per_class"][0],
                        fold["per_class"][1],
                        fold["per_class"][2],
                        t.get("train_seconds", ""),
                        t.get("predict_seconds", ""),
                    ]
                )
                oas.append(fold["oa"])
            rows.append([name, "trimmed_mean", "", rep.get("trimmed_mean_oa", ""), "", "", "", "", ""])
        elif "metrics" in rep:
            m = rep["metrics"]
            rows.append(
                [
                    name,
                    rep.get("config", {}).get("method", "eval"),
                    "",
                    m["oa"],
                    m["per_class"][0],
                    m["per_class"][1],
                    m["per_class"][2],
                    "",
                    timings.get("predict_seconds", ""),
                ]
            )
        else:
            raise DataError(f"{path}: not a recognized report file")
    with open(resolved["out"], "w", encoding="utf-8", newline="") as fh:
        fh.write("run,kind,fold,oa,corn_acc,soy_acc,other_acc,train_seconds,predict_seconds\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    return 0


# -- parser / entry ------------------------------------------------------------------


def _resolve_ns(ns, defaults: dict) -> dict:
    config = load_json_config(ns.config) if getattr(ns, "config", None) else None
    overrides = {key: getattr(ns, key, None) for key in defaults}
    return resolve(defaults, config, overrides)


def _add_common(sp):
    sp.add_argument("--config", help="JSON config file; flags override its keys")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cropmap",
        description="Crop-type classification workflows over satellite time series.",
        epilog="Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric divergence.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-gen", help="generate a synthetic labeled dataset")
    _add_common(p)
    p.add_argument("--out", help="output directory (pixels.csv, truth.csv)")
    p.add_argument("--n-per-class", dest="n_per_class", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--profiles", help="profile JSON (default: packaged profiles)")
    p.add_argument("--shift-days", dest="shift_days", type=float)
    p.add_argument("--amp-scale", dest="amp_scale", type=float)
    p.add_argument("--sensor-offset", dest="sensor_offset", help="6 comma-separated band offsets")
    p.add_argument("--class-balance", dest="class_balance", help="3 comma-separated proportions")
    p.add_argument("--cloud-prob", dest="cloud_prob", type=float)
    p.add_argument("--spike", type=float)
    p.add_argument("--start-doy", dest="start_doy", type=int)
    p.add_argument("--end-doy", dest="end_doy", type=int)
    p.add_argument("--interval", type=int)
    p.add_argument("--day-jitter", dest="day_jitter", type=int)
    p.add_argument("--dropout-prob", dest="dropout_prob", type=float)
    p.add_argument("--no-sar", dest="sar", action="store_false", default=None)
    p.add_argument("--grid-cols", dest="grid_cols", type=int)
    p.add_argument("--histories", type=int, help="also emit this many 8-year crop histories")
    p.add_argument("--rotation-mix", dest="rotation_mix", help="JSON family->proportion map")
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("preprocess", help="pixel CSV -> fixed-grid series CSV")
    _add_common(p)
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--method", choices=[m.value for m in Method])
    p.add_argument("--lam", type=float, help="smoother lambda")
    p.add_argument("--weight-mode", dest="weight_mode", choices=[w.value for w in WeightMode])
    p.add_argument("--sar", action="store_true", default=None, help="append smoothed SAR channels")
    p.add_argument("--indices", help="comma list of index names, or 'all' for the six VIs")
    p.add_argument("--raw-len", dest="raw_len", type=int)
    p.add_argument("--raw-common-grid", dest="raw_common_grid", action="store_true", default=None)
    p.add_argument("--season-start", dest="season_start", type=int)
    p.add_argument("--season-end", dest="season_end", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("labels", help="history CSV -> trusted labels + ratio report")
    _add_common(p)
    p.add_argument("--histories")
    p.add_argument("--out-labels", dest="out_labels")
    p.add_argument("--out-ratio", dest="out_ratio")
    p.add_argument("--mode", choices=[m.value for m in PatternMode])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("dtw-report", help="per-band DTW separability CSV")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--truth")
    p.add_argument("--out")
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--bands", help="comma list; default all channels")
    p.set_defaults(func=cmd_dtw_report)

    p = sub.add_parser("train", help="k-fold cross-validated training")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--truth")
    p.add_argument("--outdir")
    p.add_argument("--model", help="RF, RNN, LSTM, GRU, BiRNN, BiLSTM, BiGRU, AtBiRNN, AtBiLSTM, AtBiGRU, Transformer")
    p.add_argument("--profile", choices=["desk", "paper"])
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden-size", dest="hidden_size", type=int)
    p.add_argument("--d-model", dest="d_model", type=int)
    p.add_argument("--n-estimators", dest="n_estimators", type=int)
    p.add_argument("--max-features", dest="max_features", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="direct | finetune:R1..R4 | dann")
    _add_common(p)
    p.add_argument("--method")
    p.add_argument("--source-artifact", dest="source_artifact")
    p.add_argument("--source-data", dest="source_data")
    p.add_argument("--source-truth", dest="source_truth")
    p.add_argument("--target-data", dest="target_data")
    p.add_argument("--target-truth", dest="target_truth")
    p.add_argument("--outdir")
    p.add_argument("--seed", type=int)
    p.add_argument("--split", help="finetune train,val,test fractions")
    p.add_argument("--adapt-fraction", dest="adapt_fraction", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--model", help="backbone kind for dann")
    p.add_argument("--profile", choices=["desk", "paper"])
    p.add_argument("--hidden-size", dest="hidden_size", type=int)
    p.add_argument("--d-model", dest="d_model", type=int)
    p.add_argument("--lambda-scale", dest="lambda_scale", type=float)
    p.add_argument("--domain-hidden", dest="domain_hidden", type=int)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("predict", help="artifact + pixel CSV -> predictions CSV")
    _add_common(p)
    p.add_argument("--artifact")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--pgm", help="also write a PGM class map (needs r<row>c<col> pixel ids)")
    p.add_argument("--lam", type=float)
    p.add_argument("--season-start", dest="season_start", type=int)
    p.add_argument("--season-end", dest="season_end", type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="merge run reports into one CSV table")
    _add_common(p)
    p.add_argument("--inputs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return ns.func(ns) or 0
    except CropmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
