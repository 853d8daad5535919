"""Spec ingestion and the ladder → certificate → bound → cross-check pipeline."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .boxdim import embed_trajectory, minkowski_dim
from .dde import DelaySystem, integrate, rescale_time, restricted_norm_estimate
from .growth import (
    CompactnessLadder,
    SearchFailure,
    decay_envelope,
    envelope_log_constant,
    ladder_from_delay,
    minkowski_bound,
    rho_infinity,
    search_mp,
)

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class SpecError(ValueError):
    """Unreadable or invalid input; maps to exit code 1."""


def load_schema(name: str) -> dict:
    return json.loads(resources.files("nadim").joinpath("schemas", f"{name}.schema.json").read_text())


def validate(obj, schema_name: str, where: str = "$") -> None:
    import jsonschema

    v = jsonschema.Draft202012Validator(load_schema(schema_name))
    errs = sorted(v.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errs:
        lines = []
        for e in errs:
            path = where + e.json_path[1:] if e.json_path != "$" else where
            lines.append(f"{path}: {e.message}")
        raise SpecError("schema violation:\n  " + "\n  ".join(lines))


@dataclass(frozen=True)
class SimulationSpec:
    initial: float | list = 1.0
    horizon: float = 20.0
    step: float = 1 / 64
    samples: int = 100
    levels: tuple = (0, 1, 2, 3)
    embed_dim: int = 4
    eps_min: float = 1 / 64
    eps_max: float = 1 / 2


@dataclass(frozen=True)
class Tolerances:
    restricted_norm_allowance: float = 0.1
    dimension_slack: float = 0.1
    majorant: float = 1e-12


@dataclass(frozen=True)
class PipelineSpec:
    varpi: float
    ladder: dict | None = None
    delay_system: dict | None = None
    varrho: float = 1.0
    kappa: float = 1.0
    c: float = 1.0
    p_max: int = 8
    s_max: int = 12
    rungs: int | None = None
    include_top: bool = False
    prefer: str = "ratio"
    seed: int = 0
    envelope_steps: int = 10
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    tolerances: Tolerances = field(default_factory=Tolerances)
    outputs: dict = field(default_factory=lambda: {
        "certificate": "certificate.json", "bound_csv": "bound.csv", "report": "report.json"})

    @property
    def rung_count(self) -> int:
        return self.rungs if self.rungs is not None else self.s_max + 2

    def to_json(self) -> dict:
        d = asdict(self)
        d["simulation"]["levels"] = list(d["simulation"]["levels"])
        return d


def _read_json(path: Path) -> dict:
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise SpecError(f"file not found: {path}") from None
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None


def parse_spec(source, base_dir: Path | None = None) -> PipelineSpec:
    """Validate a pipeline spec (path or dict), resolve referenced files and fill defaults."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        obj = _read_json(path)
        base_dir = path.parent
    else:
        obj = dict(source)
        base_dir = Path(".") if base_dir is None else base_dir
    validate(obj, "pipeline")

    def resolve(key, schema):
        val = obj.get(key)
        if val is None:
            return None
        if isinstance(val, str):
            val = _read_json(base_dir / val)
        validate(val, schema, f"$.{key}")
        return val

    ladder = resolve("ladder", "ladder")
    system = resolve("delay_system", "delay_system")
    sim = SimulationSpec(**{k: tuple(v) if k == "levels" else v for k, v in obj.get("simulation", {}).items()})
    if not sim.eps_min < sim.eps_max:
        raise SpecError("$.simulation: eps_min must be below eps_max")
    tol = Tolerances(**obj.get("tolerances", {}))
    outputs = {"certificate": "certificate.json", "bound_csv": "bound.csv", "report": "report.json"}
    outputs.update(obj.get("outputs", {}))
    keys = ("varpi", "varrho", "kappa", "c", "p_max", "s_max", "rungs", "include_top", "prefer", "seed",
            "envelope_steps")
    spec = PipelineSpec(ladder=ladder, delay_system=system, simulation=sim, tolerances=tol, outputs=outputs,
                        **{k: obj[k] for k in keys if k in obj})
    if spec.rungs is not None and spec.rungs < spec.s_max + 1:
        raise SpecError("$.rungs: need at least s_max + 1 rungs")
    return spec


# ---------------------------------------------------------------- running


def _clean(x):
    """JSON-safe floats (inf/nan as strings) and numpy scalars as Python ones."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def bound_table(rinf, grid, cert, bound) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "p", "s", "m", "value"])
    for s, v in rinf.profile:
        w.writerow(["profile", "", s, "", repr(float(v))])
    for p, s, m, ratio in grid:
        w.writerow(["xi_ratio", p, s, m, repr(float(ratio))])
    if cert is not None:
        w.writerow(["certificate_ratio", cert.p, cert.s, cert.m, repr(cert.ratio)])
        w.writerow(["chi_star", cert.p, cert.s, cert.m, repr(cert.chi_star)])
        w.writerow(["minkowski_bound", cert.p, cert.s, cert.m, repr(bound)])
    return buf.getvalue()


@dataclass
class PipelineResult:
    exit_code: int
    report: dict
    artifacts: dict  # name -> text


def _system_for_ladder(system: DelaySystem, tol: float):
    """The system the ladder applies to: itself when the majorant is already
    ≤ 1, otherwise its time-rescaled version."""
    if system.majorant is not None:
        vals = [float(v) for v in system.majorant.values]
        probe = sorted(set([0.0, *system.majorant.breaks, *(b + 1e-9 for b in system.majorant.breaks)]))
        if max(vals) <= 1 + tol and system.check_majorant(probe) <= 1 + tol:
            return system, None
    resc = rescale_time(system)
    return resc.system, resc


def run_pipeline(spec: PipelineSpec) -> PipelineResult:
    report: dict = {"tool": "nadim", "version": __version__, "spec": spec.to_json()}
    violations: list[str] = []
    system = None
    if spec.ladder is not None:
        ladder = CompactnessLadder.from_json({"rungs": spec.rung_count, **spec.ladder})
        report["source"] = "ladder"
    else:
        system = DelaySystem.from_json(spec.delay_system)
        if not system.linear:
            raise SpecError("$.delay_system: the pipeline needs a linear system")
        lsys, resc = _system_for_ladder(system, spec.tolerances.majorant)
        report["source"] = "delay_system"
        report["rescaling"] = None if resc is None else {
            "applied": True, "r": resc.r, "majorant_max": resc.majorant_max,
            "formula": "s = f(t) = int_0^t n; A_j(g(s))/n(g(s)); r = sup_t int_t^{t+tau} n"}
        if resc is not None and resc.majorant_max > 1 + spec.tolerances.majorant:
            violations.append(f"rescaled majorant {resc.majorant_max} exceeds 1")
        ladder = ladder_from_delay(lsys.tau, lsys.d, spec.rung_count)
        system = lsys
    report["ladder"] = ladder.to_json()

    rinf = rho_infinity(ladder, spec.s_max)
    report["rho_infinity"] = {
        "value": rinf.value, "running_min": rinf.running_min, "tail_window": list(rinf.tail_window),
        "profile": [{"s": s, "value": v} for s, v in rinf.profile],
        "formula": "[prod_{i=1}^{s-1} rho_i^(k_{i+1}-k_i)]^(1/k_s)"}

    try:
        res = search_mp(ladder, spec.varpi, spec.p_max, spec.s_max, spec.varrho, spec.kappa, spec.c,
                        spec.include_top, spec.prefer)
    except SearchFailure as exc:
        report["search"] = {"status": "failed", "diagnostic": str(exc),
                            "best": None if exc.best is None else list(exc.best)}
        report["exit_code"] = EXIT_VIOLATION
        artifacts = {
            spec.outputs["report"]: dumps(report),
            spec.outputs["bound_csv"]: bound_table(rinf, exc.grid, None, None),
        }
        return PipelineResult(EXIT_VIOLATION, report, artifacts)

    cert = res.certificate
    bound = minkowski_bound(cert)
    report["search"] = {"status": "ok", "grid_cells": len(res.grid)}
    report["certificate"] = cert.to_json()
    report["bound"] = {"value": bound, "m": cert.m, "chi_star": cert.chi_star, "varrho": cert.varrho,
                       "formula": "(m-1) ln chi* / (ln chi* - ln varrho)"}
    report["envelope"] = {
        "log_K": envelope_log_constant(cert),
        "formula": "K chi*^N, K = [Upsilon m^m c^-m G(m)]^(1/m)",
        "values": [{"N": n, "value": decay_envelope(cert, n)} for n in range(spec.envelope_steps + 1)]}
    if not (cert.chi_star < 1 and cert.chi_star < cert.varrho <= 1):
        violations.append("certificate invariants chi* < 1 and chi* < varrho <= 1 fail")

    if system is not None:
        report["simulation"] = _cross_check(system, spec, bound, violations)

    report["invariants"] = {"violations": violations, "ok": not violations}
    code = EXIT_VIOLATION if violations else EXIT_OK
    report["exit_code"] = code
    artifacts = {
        spec.outputs["certificate"]: dumps(cert.to_json()),
        spec.outputs["bound_csv"]: bound_table(rinf, res.grid, cert, bound),
        spec.outputs["report"]: dumps(report),
    }
    return PipelineResult(code, report, artifacts)


def _cross_check(system: DelaySystem, spec: PipelineSpec, bound: float, violations: list) -> dict:
    sim = spec.simulation
    init = np.full(system.d, float(sim.initial)) if np.isscalar(sim.initial) else np.asarray(sim.initial, float)
    traj = integrate(system, init, 0.0, sim.horizon, sim.step)
    out = {"horizon": sim.horizon, "step": sim.step, "final_state": traj.x[-1].tolist(),
           "sup_norm": traj.sup_norm()}

    rn = []
    for i, level in enumerate(sim.levels):
        est = restricted_norm_estimate(system, level, sim.samples, sim.step, seed=spec.seed + i,
                                       allowance=spec.tolerances.restricted_norm_allowance)
        rn.append({"level": level, "estimate": est.estimate, "sampled": est.sampled, "lp": est.lp,
                   "rho": est.rho, "constraint_rank": est.codim, "within": est.within})
        if not est.within:
            violations.append(f"restricted norm at level {level} is {est.estimate}, above rho = {est.rho}")
    out["restricted_norms"] = rn

    cloud = embed_trajectory(traj, system.tau, sim.embed_dim)
    try:
        fit = minkowski_dim(cloud, sim.eps_min, sim.eps_max)
        out["box_dimension"] = {**fit.to_json(), "bound": bound}
        if fit.estimate > bound + spec.tolerances.dimension_slack:
            violations.append(f"box-counting estimate {fit.estimate} exceeds the bound {bound}")
    except ValueError as exc:
        out["box_dimension"] = {"error": str(exc)}
    return out


def write_artifacts(result: PipelineResult, output_dir: Path) -> list[Path]:
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in sorted(result.artifacts.items()):
        p = output_dir / name
        p.write_text(text)
        paths.append(p)
    return paths
