"""Running scenarios and rendering their records as JSON lines or text tables."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .checks import Check
from .fields import jet_at
from .invariants import (
    char_poly,
    extract_quintuple,
    one_jet_equivalent,
    two_jet_equivalent,
)
from .pseudo_euclidean import is_null
from .scenario import Scenario, load_scenario
from .sigma import kernel_dim_locally_constant, xi_at
from .theorems import TheoremResult, verify_theorem
from .zeros import (
    classify_zero,
    component_scan,
    find_zeros,
    kobayashi_model,
    local_model,
)

log = logging.getLogger(__name__)


def jsonable(obj: Any) -> Any:
    """Plain Python values for numpy scalars/arrays; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    return obj


@dataclass
class Report:
    records: list[dict[str, Any]] = field(default_factory=list)
    failed_checks: int = 0
    passed_checks: int = 0
    inapplicable_checks: int = 0
    errors: int = 0
    gate_failed: bool = False  # a verify-theorem check failed or errored

    def add(self, record: dict[str, Any]) -> None:
        self.records.append(jsonable(record))

    def count(self, checks: list[Check], gate: bool) -> None:
        for c in checks:
            if c.passed is None:
                self.inapplicable_checks += 1
            elif c.passed:
                self.passed_checks += 1
            else:
                self.failed_checks += 1
                self.gate_failed |= gate

    def summary(self) -> dict[str, Any]:
        return {
            "record": "summary",
            "tasks": sum(1 for r in self.records if r.get("record") == "task"),
            "theorems": sum(1 for r in self.records if r.get("record") == "theorem"),
            "comparisons": sum(1 for r in self.records if r.get("record") == "comparison"),
            "checks_passed": self.passed_checks,
            "checks_failed": self.failed_checks,
            "checks_inapplicable": self.inapplicable_checks,
            "task_errors": self.errors,
            "exit_status": self.exit_status,
        }

    @property
    def exit_status(self) -> int:
        return 1 if self.gate_failed else 0

    def machine(self) -> str:
        lines = [json.dumps(r, sort_keys=True) for r in self.records + [self.summary()]]
        return "\n".join(lines) + "\n"

    def human(self) -> str:
        out = []
        for r in self.records + [self.summary()]:
            out.extend(_human_record(r))
        return "\n".join(out) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list) and v and all(isinstance(x, (int, float)) for x in v):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else str(v)


def _check_rows(checks: list[dict]) -> list[str]:
    if not checks:
        return []
    width = max(len(c["check"]) for c in checks)
    rows = []
    for c in checks:
        measured = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(c.get("measured", {}).items()))
        note = f"  ({c['note']})" if c.get("note") else ""
        rows.append(f"    {c['check']:<{width}}  {c['status']:<12}  {measured}{note}")
    return rows


def _human_record(r: dict) -> list[str]:
    kind = r.get("record")
    if kind == "scenario":
        env = r["environment"]
        sp = r["scenario"]["space"]
        return [
            f"conformal_zeros {env['version']}  seed={env['seed']}  tol={env['tol']}",
            f"space: n={sp['n']} signature=({sp['p']}, {sp['q']})",
            "",
        ]
    if kind == "verify":
        env = r["environment"]
        return [f"conformal_zeros {env['version']}  seed={env['seed']}  tol={env['tol']}", ""]
    if kind == "summary":
        units = ", ".join(f"{r[k]} {label}" for k, label in (("tasks", "task(s)"), ("theorems", "theorem suite(s)"), ("comparisons", "comparison(s)")) if r[k]) or "nothing run"
        return [
            (
                f"summary: {units}, checks passed={r['checks_passed']} failed={r['checks_failed']} "
                f"inapplicable={r['checks_inapplicable']}, task errors={r['task_errors']}, exit status {r['exit_status']}"
            )
        ]
    if kind == "theorem":
        lines = [f"[{r['theorem']}] {r['status'].upper()}"]
        lines += _check_rows(r["checks"])
        for k, v in sorted(r.get("data", {}).items()):
            lines.append(f"    {k}: {_fmt(v)}")
        return lines + [""]
    if kind == "comparison":
        lines = [f"comparison ({r['jets']}-jets): {r['verdict']['status']}"]
        for k in ("obstruction", "objective", "residual"):
            if r["verdict"].get(k) is not None:
                lines.append(f"    {k}: {_fmt(r['verdict'][k])}")
        lines += _check_rows(r["verdict"].get("battery", []))
        if "witness" in r["verdict"]:
            lines.append(f"    witness s: {_fmt(r['verdict']['witness']['s'])}")
        return lines + [""]
    label = f" ({r['label']})" if r.get("label") else ""
    lines = [f"task {r['index']}: {r['kind']}{label}  [{r['status']}]"]
    if r["status"] == "error":
        lines.append(f"    error: {r['error']}")
        return lines + [""]
    for k, v in sorted(r.get("result", {}).items()):
        if k in ("theorems", "components"):
            continue
        lines.append(f"    {k}: {_fmt(v)}")
    for comp in r.get("result", {}).get("components", []):
        lines.append(f"    component {comp['index']}: {comp['kind']}, {comp['size']} sample(s), dims {_fmt(comp['dims'])}")
        lines += ["  " + row for row in _check_rows(comp["checks"])]
        lines += [f"      warning: {w}" for w in comp["warnings"]]
    for th in r.get("result", {}).get("theorems", []):
        lines += ["    " + s for s in _human_record({"record": "theorem", **th})]
    if not ({"theorems", "components"} & set(r.get("result", {}))):
        lines += _check_rows(r.get("checks", []))
    return lines + [""]


def _points(task) -> list[np.ndarray]:
    arr = np.asarray(task["at"], dtype=float)
    return [arr] if arr.ndim == 1 else list(arr)


def _classification_record(jet, space, tol) -> dict:
    cls = classify_zero(jet, space, tol)
    return {
        "x": jet.x,
        "kind": cls.kind,
        "case": cls.case,
        "singular": cls.singular,
        "phi": cls.phi,
        "range_residual": cls.range_residual,
        "H_dim": cls.H_dim,
        "H_signature": list(cls.H_signature),
    }


def _run_task(s: Scenario, task: dict) -> tuple[dict, list[Check], bool]:
    f, space = s.field, s.space
    kind = task["kind"]
    tol = task.get("tol", s.defaults["tol"])
    checks: list[Check] = []
    if kind == "find-zeros":
        pts = find_zeros(f, task["box"], task["grid"], tol)
        return {"count": len(pts), "zeros": pts}, checks, False
    if kind == "classify":
        return {"points": [_classification_record(jet_at(f, x), space, tol) for x in _points(task)]}, checks, False
    if kind == "local-model":
        models = []
        for x in _points(task):
            jet = jet_at(f, x)
            essential = classify_zero(jet, space, tol).essential
            model = local_model(jet, space, tol) if essential else kobayashi_model(jet, space, tol)
            sing_in = all(model.H.contains(b) and model.H_perp.contains(b) for b in model.sing.basis.T)
            null = all(is_null(b, space, tol) for b in model.sing.basis.T)
            checks += [
                Check("sing-in-H-and-H-perp", sing_in, {"x": list(map(float, x))}),
                Check("sing-basis-null", null, {"x": list(map(float, x))}),
            ]
            models.append(
                {
                    "x": x,
                    "model": model.kind,
                    "dim_H": model.H.dim,
                    "dim_H_perp": model.H_perp.dim,
                    "dim_sing": model.sing.dim,
                    "phi": model.phi_x,
                    "H_basis": np.round(model.H.basis.T, 12),
                }
            )
        return {"models": models}, checks, False
    if kind == "component-scan":
        rep = component_scan(f, task["box"], task["grid"], tol, seed=task["seed"])
        comps = []
        for k, comp in enumerate(rep.components):
            checks += comp.checks
            comps.append(
                {
                    "index": k,
                    "kind": comp.kind,
                    "size": len(comp.indices),
                    "essential_samples": len(comp.sigma) if comp.rest else len(comp.indices),
                    "dims": comp.dims,
                    "phi": float(rep.zeros[comp.indices[0]][1].phi),
                    "checks": [c.to_record() for c in comp.checks],
                    "warnings": comp.warnings,
                }
            )
        return {"zeros": len(rep.zeros), "grid_spacing": rep.spacing, "components": comps}, checks, False
    if kind == "char-poly":
        return {"points": [{"x": x, "coeffs": char_poly(jet_at(f, x).J).coeffs} for x in _points(task)]}, checks, False
    if kind == "quintuple":
        out = []
        for x in _points(task):
            q = extract_quintuple(jet_at(f, x), space, tol)
            out.append(
                {"x": x, "B": np.round(q.B, 12), "lambda": q.lam, "kernel_dim": q.delta_basis.dim, "delta": q.delta, "signature": list(q.signature)}
            )
        return {"quintuples": out}, checks, False
    if kind == "xi":
        out = []
        for x in _points(task):
            sample = xi_at(jet_at(f, x), space, tol=tol)
            # u is solved pointwise, so xi is only trusted where dim Ker J does not jump
            stable, dims = kernel_dim_locally_constant(f, x, sample.tangent_basis, tol=tol)
            note = {None: "no essential zero near x to compare with", False: "xi sampled where dim Ker J jumps"}.get(stable, "")
            checks.append(Check("ker-J-locally-constant", stable, {"x": list(map(float, x)), "dim_ker_J": dims}, note))
            out.append(
                {
                    "x": x,
                    "rule": sample.defined_by,
                    "tangent_dim": sample.tangent_basis.dim,
                    "xi": sample.xi,
                    "choice_gap": sample.choice_gap,
                    "stratum_stable": stable,
                }
            )
        return {"samples": out}, checks, False
    if kind == "equivalence":
        other = load_scenario(s.base_dir / task["other"])
        rec = compare_jets(
            f, space, np.asarray(task["at"], dtype=float), other.field, other.space,
            np.asarray(task["other_at"], dtype=float), task["jets"], task["budget"], task["seed"], tol,
        )
        return rec, checks, False
    if kind == "verify-theorem":
        results = verify_theorem(task["name"], space, f, task["seed"], tol)
        for r in results:
            checks += r.checks
        return {"theorems": [r.to_record() for r in results]}, checks, True
    raise ValueError(f"unhandled task kind {kind}")


def compare_jets(f1, sp1, x1, f2, sp2, x2, jets: int, budget: int, seed: int, tol: float) -> dict:
    j1, j2 = jet_at(f1, x1), jet_at(f2, x2)
    if jets == 1:
        verdict = one_jet_equivalent(j1, j2, sp1, sp2, budget, seed, tol)
        return {"jets": 1, "verdict": verdict.to_record()}
    verdict, witness = two_jet_equivalent(j1, j2, sp1, sp2, budget, seed, tol)
    rec = {"jets": 2, "verdict": verdict.to_record()}
    if witness is not None:
        rec["witness_2jet"] = {"tau": witness.tau, "sigma": witness.sigma, "sign": witness.sign}
    return rec


def run(s: Scenario) -> Report:
    """Execute tasks in order; a failing task is recorded and the run continues."""
    report = Report()
    report.add(
        {
            "record": "scenario",
            "scenario": s.logical(),
            "environment": {"package": "conformal_zeros", "version": __version__, "seed": s.defaults["seed"], "tol": s.defaults["tol"]},
        }
    )
    for i, task in enumerate(s.tasks):
        rec: dict[str, Any] = {"record": "task", "index": i, "kind": task["kind"]}
        if "label" in task:
            rec["label"] = task["label"]
        try:
            result, checks, gate = _run_task(s, task)
            report.count(checks, gate)
            failed = any(c.passed is False for c in checks)
            # component checks are already listed per component inside the result
            listed = [] if task["kind"] in ("component-scan", "verify-theorem") else [c.to_record() for c in checks]
            rec.update(status="fail" if failed else "ok", result=result, checks=listed)
        except (ValueError, ArithmeticError, KeyError, OSError) as exc:
            log.warning("task %d (%s) failed: %s", i, task["kind"], exc)
            report.errors += 1
            report.gate_failed |= task["kind"] == "verify-theorem"
            rec.update(status="error", error=str(exc))
        report.add(rec)
    return report


def theorem_report(results: list[TheoremResult], seed: int, tol: float) -> Report:
    report = Report()
    report.add({"record": "verify", "environment": {"package": "conformal_zeros", "version": __version__, "seed": seed, "tol": tol}})
    for r in results:
        report.count(r.checks, gate=True)
        report.add({"record": "theorem", **r.to_record()})
    return report


def write(report: Report, fmt: str, path: str | Path | None) -> str:
    text = report.machine() if fmt == "machine" else report.human()
    if path:
        Path(path).write_text(text)
    return text
