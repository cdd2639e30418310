"""Experiment pipeline: build the field, run diagnostics, write artifacts."""

from __future__ import annotations

import json
import shutil
import time
from pathlib import Path

from .. import __version__
from ..analysis import (dichotomy_sequence, distance_bound_check, holder_seminorm,
                        improvement_of_flatness_run, nondegeneracy_scan)
from ..analysis.geometry import free_boundary_measure
from ..analysis.records import append_ledger, dumps, field_hash, make_record
from ..energy import UnderResolvedError, almost_min_defect, energy, weiss
from ..generators import boundary_field, coefficient_field
from ..grid import Ball, ScalarField, SlitMask
from ..solve import dump_field, generate_almost_minimizer, linearized_solve, minimize_energy
from . import svg
from .config import ExperimentConfig


class PipelineError(RuntimeError):
    """A diagnostic could not be evaluated on the computed field."""


def build_field(cfg: ExperimentConfig) -> ScalarField:
    g = cfg.grid
    data = boundary_field(g, cfg.boundary["generator"], cfg.boundary.get("params"))
    if cfg.field == "data":
        return data
    if cfg.field == "minimize":
        return minimize_energy(data, cfg.lam, cfg.solver)[0]
    if cfg.field == "linearized":
        return linearized_solve(data, settings=cfg.solver)
    c = cfg.coefficient
    coef = coefficient_field(g, c["name"], c["kappa"], c["beta"])
    return generate_almost_minimizer(coef, data, cfg.lam, cfg.solver)


def _region(cfg: ExperimentConfig, d: dict) -> Ball:
    r = d.get("radius", min(1.0, cfg.grid.halfwidth))
    c = d.get("center")
    return Ball(float(r), None if c is None else tuple(float(x) for x in c))


def _center(d: dict):
    c = d.get("center")
    return None if c is None else tuple(float(x) for x in c)


def _row(cfg, diag, key, value, bound="", passed="", record="record.json"):
    return {"config_hash": cfg.hash, "experiment": cfg.experiment, "diagnostic": diag,
            "key": key, "value": value, "bound": bound, "passed": passed, "record": record}


def run_diagnostic(cfg: ExperimentConfig, u: ScalarField, d: dict, prov: str) -> tuple:
    """(record, ledger rows, {file name: svg text}) for one diagnostic."""
    name = d["name"]
    rows, plots = [], {}
    inputs = {"field": u, **{k: v for k, v in d.items() if k != "name"}}
    lam = cfg.lam
    if name == "energy":
        rep = energy(u, _region(cfg, d), lam)
        out = rep.to_json()
        for k in ("dirichlet", "thin", "total"):
            rows.append(_row(cfg, name, k, out[k]))
    elif name == "weiss":
        radii = d.get("radii", [0.125, 0.25, 0.5])
        W = [weiss(u, r, lam, _center(d)) for r in radii]
        steps = [b - a for a, b in zip(W, W[1:])]
        mono = all(s >= -1e-3 for s in steps)
        out = {"radii": radii, "W": W, "nondecreasing_tol_1e-3": mono}
        rows += [_row(cfg, name, f"r={r!r}", w) for r, w in zip(radii, W)]
        rows.append(_row(cfg, name, "nondecreasing", mono, "step >= -1e-3", mono))
        plots["weiss.svg"] = svg.line_plot({"W(u, r)": (radii, W)}, "Weiss energy vs radius",
                                           "r", "W", prov)
    elif name == "dichotomy":
        tr = dichotomy_sequence(u, d.get("eta", 0.25), d.get("depth", 3), d.get("M_hat", 1.0),
                                center=_center(d))
        out = tr.to_json()
        for r, a in zip(tr.radii, tr.a):
            rows.append(_row(cfg, name, f"a(r={r!r})", a))
        rows.append(_row(cfg, name, "recursion", tr.ok, "a(eta r) <= C M + a(r)/2", tr.ok))
        plots["dichotomy.svg"] = svg.line_plot({"a(r)": (tr.radii, tr.a)},
                                               "Rescaled Dirichlet average", "r", "a", prov,
                                               logx=True, logy=True)
    elif name == "flatness":
        rep = improvement_of_flatness_run(u, d.get("eta", 0.25), d.get("depth", 3),
                                          center=_center(d))
        out = rep.to_json()
        for rec in rep.records:
            rows.append(_row(cfg, name, f"k={rec['k']}", rec["eps_over_r"]))
        rows.append(_row(cfg, name, "alpha_hat", rep.alpha_hat, "> 0",
                         rep.alpha_hat is not None and rep.alpha_hat > 0))
        rs = [rec["r"] for rec in rep.records]
        plots["flatness.svg"] = svg.line_plot(
            {"eps_k": (rs, [rec["eps"] for rec in rep.records])}, "Flatness vs scale",
            "r_k", "eps_k", prov, logx=True, logy=True)
    elif name == "nondegeneracy":
        radii = d.get("radii", [8 * cfg.grid.h * 2**k for k in range(3)])
        v = nondegeneracy_scan(u, SlitMask.from_field(u), radii, region=_region(cfg, d))
        out = {"radii": radii, "min_ratio": v}
        rows.append(_row(cfg, name, "min_ratio", v))
    elif name == "defect":
        v = almost_min_defect(u, _region(cfg, d), lam)
        out = {"defect": v}
        rows.append(_row(cfg, name, "defect", v))
    elif name == "holder":
        e = d.get("exponent", 0.5)
        v = holder_seminorm(u, e, _region(cfg, d))
        out = {"exponent": e, "seminorm": v}
        rows.append(_row(cfg, name, f"exponent={e!r}", v))
    elif name == "distance_bound":
        rep = distance_bound_check(u, SlitMask.from_field(u), _region(cfg, d))
        out = rep.to_json()
        rows.append(_row(cfg, name, "floor", rep.floor))
    elif name == "free_boundary":
        mask = SlitMask.from_field(u)
        m = free_boundary_measure(mask, _region(cfg, d))
        out = {"measure": m, "interfaces": int(mask.interface_count),
               "positive_cells": int(mask.positive.sum())}
        rows.append(_row(cfg, name, "measure", m))
        plots["free_boundary.svg"] = svg.mask_plot(mask.positive, cfg.grid.halfwidth,
                                                   "Free-boundary overlay", prov)
    else:  # guarded by the schema
        raise PipelineError(f"unknown diagnostic {name!r}")
    return make_record(name, inputs, out), rows, plots


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> dict:
    """Run one config; returns the record. Partial outputs are removed on failure."""
    base = Path(output_dir or cfg.output_dir)
    run_dir = base / cfg.experiment
    if run_dir.exists():
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True)
    prov = f"thinfb {__version__} config {cfg.hash}"
    timing = {}
    try:
        t0 = time.perf_counter()
        u = build_field(cfg)
        timing["field"] = time.perf_counter() - t0
        records, rows, files = [], [], []
        for i, d in enumerate(cfg.diagnostics):
            t0 = time.perf_counter()
            try:
                rec, r, plots = run_diagnostic(cfg, u, d, prov)
            except UnderResolvedError:
                raise
            except (ValueError, ArithmeticError) as exc:
                raise PipelineError(f"diagnostic {d['name']}: {exc}") from exc
            timing[f"{i}:{d['name']}"] = time.perf_counter() - t0
            records.append(rec)
            rows += r
            for fname, text in plots.items():
                (run_dir / fname).write_text(text, encoding="utf-8")
                files.append(fname)
        if cfg.save_field:
            j, c = dump_field(u, run_dir / "field", {"config_hash": cfg.hash})
            files += [j.name, c.name]
        record = {"tool": "thinfb", "version": __version__, "config_hash": cfg.hash,
                  "experiment": cfg.experiment, "config": cfg.raw, "seed": cfg.seed,
                  "field": {"source": cfg.field, "sha256": field_hash(u)},
                  "diagnostics": records, "files": sorted(files + ["record.json", "timing.json"])}
        (run_dir / "record.json").write_text(dumps(record), encoding="utf-8")
        (run_dir / "timing.json").write_text(
            json.dumps({"config_hash": cfg.hash, "version": __version__, "wall_clock_s": timing},
                       indent=2, sort_keys=True) + "\n", encoding="utf-8")
        rel = f"{cfg.experiment}/record.json"
        for r in rows:
            r["record"] = rel
        append_ledger(base / "ledger.csv", rows)
    except BaseException:
        shutil.rmtree(run_dir, ignore_errors=True)
        raise
    return record
