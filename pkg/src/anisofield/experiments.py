"""Experiment drivers: config validation, dispatch, and artifact emission.

Each experiment kind has a frozen params dataclass (unknown keys rejected),
a runner producing CSV rows plus a JSON report, and a manifest recording the
config echo, derived seed scheme and content digests of the data files.
Data files are byte-identical across reruns and worker counts; timestamps
live only in the manifest.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field as dc_field
from typing import Any, Callable

import numpy as np

from . import calibration as calib
from . import field as fieldmod
from . import hitting as hitmod
from . import metric as metmod
from .errors import Refusal

TOOL_VERSION = "0.1.0"
OUT_ROOT_ENV = "ANISOFIELD_OUT"


def _tupleize(v):
    if isinstance(v, (list, tuple)):
        return tuple(_tupleize(x) for x in v)
    return v


def _listify(v):
    if isinstance(v, tuple):
        return [_listify(x) for x in v]
    return v


def params_from_dict(cls, data: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"unknown config keys for {cls.__name__}: {unknown}")
    return cls(**{k: _tupleize(v) for k, v in data.items()})


@dataclass(frozen=True)
class MetricCheckParams:
    hurst: tuple = (0.75, 0.75)
    entropy_x: tuple = (0.01, 0.1, 0.5, 1.0)
    cover_radii: tuple = (0.5, 0.25, 0.125)
    test_grid_points: int = 10_000
    chaining_r: float = 1.0
    chaining_beta: float = 28.0
    chaining_n_max: int = 8
    series_d: int = 2
    series_c: float = 1.0
    series_L: float = 0.0
    series_k_max: int = 20


@dataclass(frozen=True)
class FieldSimParams:
    hurst: tuple = (0.5,)
    mixing: tuple = ((1.0, 0.0), (1.0, 1.0))
    box_lo: tuple = (0.0,)
    box_hi: tuple = (1.0,)
    n_grid: int = 10
    n_samples: int = 200


@dataclass(frozen=True)
class HittingScanParams:
    hurst: tuple = (0.75,)
    mixing: tuple = ((1.0, 0.0), (1.0, 1.0))
    box_lo: tuple = (0.0,)
    box_hi: tuple = (1.0,)
    t: tuple = (0.5,)
    radii: tuple = (0.2, 0.1, 0.05)
    n_mc: int = 400
    ball_points_per_axis: int = 16
    drift_kind: str = "zero"
    drift_L: float = 0.0


@dataclass(frozen=True)
class PolarityScanParams:
    hurst: tuple = (0.75,)
    mixing: tuple = ((1.0, 0.0), (1.0, 1.0))
    box_lo: tuple = (0.0,)
    box_hi: tuple = (1.0,)
    center: tuple = (0.0, 0.0)
    deltas: tuple = (0.2, 0.1, 0.05)
    n_mc: int = 400
    grid_step: float = 1.0 / 64.0
    drift_kind: str = "zero"
    drift_L: float = 0.5


@dataclass(frozen=True)
class ModulusScanParams:
    hurst: tuple = (0.5,)
    mixing: tuple = ((1.0, 0.0), (1.0, 1.0))
    box_lo: tuple = (0.0,)
    box_hi: tuple = (0.2,)
    n_points: int = 401
    eps: tuple = (0.2, 0.1)
    n_samples: int = 200


@dataclass(frozen=True)
class ChainingCheckParams:
    r: float = 1.0
    beta: float = 28.0
    n_max: int = 8
    series_d: int = 2
    series_c: float = 1.0
    series_L: float = 0.0
    series_Q: float = 4.0 / 3.0
    series_k_max: int = 20


@dataclass(frozen=True)
class CalibNoiselessParams:
    V: float = 10.0
    step: float = 0.01
    T: float = 1.0


@dataclass(frozen=True)
class CalibSimParams:
    noise_a: float = 1.5
    noise_p: float = 1.5
    V: float = 5.0
    step: float = 0.1
    T: float = 1.0
    noise_scales: tuple = (1e-3,)
    n_replicates: int = 20


PARAM_CLASSES: dict[str, type] = {
    "metric-check": MetricCheckParams,
    "field-sim": FieldSimParams,
    "hitting-scan": HittingScanParams,
    "polarity-scan": PolarityScanParams,
    "modulus-scan": ModulusScanParams,
    "chaining-check": ChainingCheckParams,
    "calib-noiseless": CalibNoiselessParams,
    "calib-sim": CalibSimParams,
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: Any
    seed: int = 0
    out_dir: str = ""
    workers: int = 1

    @classmethod
    def from_dict(cls, kind: str, data: dict) -> "ExperimentConfig":
        if kind not in PARAM_CLASSES:
            raise ValueError(f"unknown experiment kind {kind!r}")
        data = dict(data)
        seed = int(data.pop("seed", 0))
        out_dir = str(data.pop("out_dir", ""))
        workers = int(data.pop("workers", 1))
        if workers < 1:
            raise ValueError("workers must be >= 1")
        params = params_from_dict(PARAM_CLASSES[kind], data)
        return cls(kind=kind, params=params, seed=seed, out_dir=out_dir,
                   workers=workers)

    def echo(self) -> dict:
        doc = {k: _listify(v) for k, v in dataclasses.asdict(self.params).items()}
        doc["seed"] = self.seed
        doc["workers"] = self.workers
        doc["out_dir"] = self.out_dir
        return doc


@dataclass(frozen=True)
class RunManifest:
    kind: str
    config: dict
    version: str
    started: str
    finished: str
    seed_scheme: str
    outputs: dict


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _model(hurst, mixing) -> fieldmod.FieldModel:
    return fieldmod.FieldModel(H=metmod.HurstVector(H=tuple(hurst)),
                               mixing=tuple(mixing))


def _drift(kind: str, L: float, model: fieldmod.FieldModel) -> hitmod.LipschitzDrift:
    if kind == "zero":
        return hitmod.LipschitzDrift(kind="zero")
    if kind == "affine":
        direction = tuple([1.0] + [0.0] * (model.d - 1))
        return hitmod.LipschitzDrift(kind="affine", L=L,
                                     anchor=(0.0,) * model.H.N,
                                     direction=direction)
    if kind == "field":
        return hitmod.LipschitzDrift(kind="field", L=L, drift_model=model)
    raise ValueError(f"unknown drift kind {kind!r}")


def _estimate_rows(report: hitmod.ScalingReport) -> list[list]:
    return [[e.r, e.p_hat, e.ci_low, e.ci_high, e.n_mc] for e in report.estimates]


def _scaling_report_doc(report: hitmod.ScalingReport) -> dict:
    return {
        "radii": list(report.radii),
        "fitted_slope": report.fitted_slope,
        "slope_se": report.slope_se,
        "status": report.status,
        "p_hat": [e.p_hat for e in report.estimates],
    }


# ---------------------------------------------------------------------------
# runners: each returns (header, rows, report_doc)


def _run_metric_check(cfg: ExperimentConfig):
    p: MetricCheckParams = cfg.params
    H = metmod.HurstVector(H=tuple(p.hurst))
    I = metmod.IndexSet.unit_box(H.N)
    test_pts = I.test_grid(p.test_grid_points)
    rows = []
    from scipy import integrate
    for x in p.entropy_x:
        closed = metmod.entropy_integral_closed_form(x)
        quadval, _ = integrate.quad(lambda y: math.sqrt(-math.log(y)), 0.0, x,
                                    epsabs=1e-12, limit=200)
        rows.append(["entropy", x, closed, quadval, abs(closed - quadval) <= 1e-8])
    for r in p.cover_radii:
        gc = metmod.grid_cover(I, r, H)
        valid = gc.is_valid_on(test_pts)
        bound = gc.c8 * r ** (-H.Q)
        rows.append(["cover", r, gc.count, bound, valid and gc.count <= bound])
    sched = metmod.chaining_schedule(p.chaining_r, p.chaining_beta, p.chaining_n_max)
    rows.append(["chaining_c2", p.chaining_beta, sched.c2, "", True])
    partial, conv = metmod.chaining_series_bound(
        p.chaining_beta, p.series_L, p.series_c, p.series_d, H.Q, p.series_k_max)
    rows.append(["series", p.chaining_beta, partial, "", conv])
    report = {"Q": H.Q, "all_ok": all(bool(r[-1]) for r in rows if r[0] != "series")}
    return ["check", "param", "value", "bound", "ok"], rows, report


def _grid_from_box(lo, hi, n_per_axis) -> fieldmod.Grid:
    axes = [np.linspace(a, b, n_per_axis) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return fieldmod.Grid(points=np.stack([m.ravel() for m in mesh], axis=1))


def _run_field_sim(cfg: ExperimentConfig):
    p: FieldSimParams = cfg.params
    model = _model(p.hurst, p.mixing)
    grid = _grid_from_box(p.box_lo, p.box_hi, p.n_grid)
    lam = fieldmod.verify_condition2(model)
    max_ratio, c_analytic, ok1 = fieldmod.verify_condition1(model, grid)
    paths = fieldmod.sample_paths(model, grid, p.n_samples, cfg.seed,
                                  workers=cfg.workers)
    rows = []
    for rep in range(paths.n_samples):
        for q in range(grid.n):
            rows.append([rep, q] + list(grid.points[q]) + list(paths.values[rep, q]))
    header = (["replicate", "point"] + [f"s{j}" for j in range(grid.N)]
              + [f"x{a}" for a in range(model.d)])
    report = {
        "condition1": {"max_ratio": max_ratio, "c_analytic": c_analytic, "ok": ok1},
        "condition2": {"lambda_min": lam},
        "grid_hash": grid.digest(),
        "n_samples": p.n_samples,
    }
    return header, rows, report


def _run_hitting_scan(cfg: ExperimentConfig):
    p: HittingScanParams = cfg.params
    model = _model(p.hurst, p.mixing)
    I = metmod.IndexSet.box(p.box_lo, p.box_hi)
    drift = _drift(p.drift_kind, p.drift_L, model)
    ests = []
    for r in p.radii:
        widths = 2.0 * r ** (1.0 / model.H.as_array())
        step = float(widths.min()) / p.ball_points_per_axis
        ests.append(hitmod.hitting_probability(
            model, I, p.t, r, drift, p.n_mc, cfg.seed, step,
            workers=cfg.workers))
    report = hitmod.scaling_exponent(ests)
    return (["r", "p_hat", "ci_low", "ci_high", "n_mc"],
            _estimate_rows(report), _scaling_report_doc(report))


def _run_polarity_scan(cfg: ExperimentConfig):
    p: PolarityScanParams = cfg.params
    model = _model(p.hurst, p.mixing)
    I = metmod.IndexSet.box(p.box_lo, p.box_hi)
    drift = _drift(p.drift_kind, p.drift_L, model)
    report = hitmod.polarity_scan(model, I, drift, p.center, p.deltas,
                                  p.n_mc, cfg.seed, p.grid_step,
                                  workers=cfg.workers)
    doc = _scaling_report_doc(report)
    doc["target_exponent"] = model.d - model.H.Q
    return (["r", "p_hat", "ci_low", "ci_high", "n_mc"],
            _estimate_rows(report), doc)


def _run_modulus_scan(cfg: ExperimentConfig):
    p: ModulusScanParams = cfg.params
    model = _model(p.hurst, p.mixing)
    grid = _grid_from_box(p.box_lo, p.box_hi, p.n_points)
    paths = fieldmod.sample_paths(model, grid, p.n_samples, cfg.seed,
                                  workers=cfg.workers)
    rep = fieldmod.modulus_statistic(paths, model.H, list(p.eps))
    rows = []
    doc_eps = {}
    for col, e in enumerate(rep.eps):
        if rep.missing[col]:
            rows.append([e, "missing", "", ""])
            doc_eps[str(e)] = None
        else:
            col_vals = rep.M[:, col]
            q95 = float(np.quantile(col_vals, 0.95))
            rows.append([e, "ok", q95, float(col_vals.mean())])
            doc_eps[str(e)] = q95
    report = {"eps_p95": doc_eps, "n_samples": p.n_samples,
              "grid_points": grid.n}
    return ["eps", "status", "p95", "mean"], rows, report


def _run_chaining_check(cfg: ExperimentConfig):
    p: ChainingCheckParams = cfg.params
    sched = metmod.chaining_schedule(p.r, p.beta, p.n_max)
    rows = [[n + 1, e, rn] for n, (e, rn) in
            enumerate(zip(sched.epsilons, sched.radii))]
    partial, conv = metmod.chaining_series_bound(
        p.beta, p.series_L, p.series_c, p.series_d, p.series_Q, p.series_k_max)
    report = {"c2": sched.c2, "series_partial_sum": partial,
              "series_converges": conv}
    return ["n", "eps_n", "r_n"], rows, report


def _run_calib_noiseless(cfg: ExperimentConfig):
    p: CalibNoiselessParams = cfg.params
    grid = calib.FrequencyGrid.build(p.V, p.step)
    model = calib.OptionModel(kind="exp", T=p.T)
    est = calib.psi_estimator(model, None, grid, 0.0, cfg.seed)
    rows = [[v, psi.real, psi.imag, abs(a)] for v, psi, a in
            zip(grid.points, est.values, est.arg_values)]
    oracle = 2.0 * np.arctan(grid.points) / p.T
    max_err = float(np.max(np.abs(est.values - 1j * oracle)))
    report = {"well_defined": est.well_defined,
              "min_arg_modulus": est.min_arg_modulus,
              "max_phase_jump": est.max_phase_jump,
              "max_error_vs_closed_form": max_err}
    return ["v", "re_psi", "im_psi", "abs_arg"], rows, report


def _run_calib_sim(cfg: ExperimentConfig):
    p: CalibSimParams = cfg.params
    noise = calib.NoiseLevel(family="power-law", a=p.noise_a, p=p.noise_p)
    noise.certify_tail()
    grid = calib.FrequencyGrid.build(p.V, p.step)
    model = calib.OptionModel(kind="exp", T=p.T)
    samples = calib.simulate_spectral_noise(noise, grid, p.n_replicates,
                                            cfg.seed, workers=cfg.workers)
    rows = []
    n_ok = {s: 0 for s in p.noise_scales}
    for i in range(p.n_replicates):
        for scale in p.noise_scales:
            est = calib.psi_estimator(model, noise, grid, scale, cfg.seed,
                                      spectral_values=samples.values[i])
            if est.well_defined:
                n_ok[scale] += 1
            rows.append([i, scale, est.well_defined, est.min_arg_modulus,
                         "" if est.failure is None else est.failure])
    report = {"n_replicates": p.n_replicates,
              "well_defined_counts": {str(s): n_ok[s] for s in p.noise_scales}}
    return (["replicate", "noise_scale", "well_defined", "min_arg_modulus",
             "failure"], rows, report)


RUNNERS: dict[str, Callable] = {
    "metric-check": _run_metric_check,
    "field-sim": _run_field_sim,
    "hitting-scan": _run_hitting_scan,
    "polarity-scan": _run_polarity_scan,
    "modulus-scan": _run_modulus_scan,
    "chaining-check": _run_chaining_check,
    "calib-noiseless": _run_calib_noiseless,
    "calib-sim": _run_calib_sim,
}


def default_out_dir(kind: str) -> str:
    root = os.environ.get(OUT_ROOT_ENV, os.path.join(os.getcwd(), "runs"))
    return os.path.join(root, kind)


def run_experiment(config: ExperimentConfig) -> RunManifest:
    out_dir = config.out_dir or default_out_dir(config.kind)
    os.makedirs(out_dir, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    header, rows, report = RUNNERS[config.kind](config)
    results_path = os.path.join(out_dir, "results.csv")
    report_path = os.path.join(out_dir, "report.json")
    _write_csv(results_path, header, rows)
    _write_json(report_path, report)
    finished = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    manifest = RunManifest(
        kind=config.kind,
        config=config.echo(),
        version=TOOL_VERSION,
        started=started,
        finished=finished,
        seed_scheme="blake2b(master, replicate, stream) -> per-replicate Philox",
        outputs={"results.csv": _sha256(results_path),
                 "report.json": _sha256(report_path)},
    )
    _write_json(os.path.join(out_dir, "manifest.json"), dataclasses.asdict(manifest))
    return manifest
