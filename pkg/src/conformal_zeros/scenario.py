"""Scenario files: YAML documents describing a metric, a field and a list of tasks.

Parsing keeps the source position of every node so that schema errors point
at the offending line. See README.md for the grammar.
"""

from __future__ import annotations

import inspect
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .fields import FlatConformalField
from .fixtures import CONSTRUCTORS
from .pseudo_euclidean import DEFAULT_TOL, MetricSpace
from .theorems import SUITES

DEFAULTS = {"tol": DEFAULT_TOL, "grid": 7, "budget": 5000, "seed": 42}

# per task kind: required keys, optional keys with their defaults (None = inherit from DEFAULTS)
TASK_KEYS: dict[str, tuple[set[str], dict[str, Any]]] = {
    "find-zeros": (set(), {"box": 1.0, "grid": None, "tol": None}),
    "classify": ({"at"}, {"tol": None}),
    "local-model": ({"at"}, {"tol": None}),
    "component-scan": (set(), {"box": 1.0, "grid": None, "tol": None, "seed": None}),
    "char-poly": ({"at"}, {}),
    "quintuple": ({"at"}, {"tol": None}),
    "equivalence": ({"at", "other", "other_at"}, {"jets": 2, "budget": None, "seed": None, "tol": None}),
    "xi": ({"at"}, {"tol": None}),
    "verify-theorem": ({"name"}, {"seed": None, "tol": None}),
}
COMMON_KEYS = {"kind", "label"}


class ScenarioError(ValueError):
    """Parse or schema error, with the source position when known."""

    def __init__(self, message: str, path: str = "", line: int | None = None, column: int | None = None, source: str = ""):
        self.path, self.line, self.column, self.source = path, line, column, source
        where = source or "<scenario>"
        if line is not None:
            where += f":{line}:{column}"
        if path:
            where += f" [{path}]"
        super().__init__(f"{where}: {message}")


@dataclass
class Scenario:
    space: MetricSpace
    field: FlatConformalField
    tasks: list[dict[str, Any]]
    defaults: dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))
    output: dict[str, Any] = field(default_factory=lambda: {"path": None, "format": "human"})
    field_spec: Any = None
    base_dir: Path = field(default_factory=Path.cwd)

    def logical(self) -> dict[str, Any]:
        """Fully resolved content; two scenarios are the same iff these agree."""
        return {
            "space": {"n": self.space.n, "p": self.space.p, "q": self.space.q, "g": self.space.g.tolist()},
            "field": {
                "w": self.field.w.tolist(),
                "B": self.field.B.tolist(),
                "c": self.field.c,
                "u": self.field.u.tolist(),
            },
            "defaults": dict(self.defaults),
            "tasks": [dict(t) for t in self.tasks],
            "output": dict(self.output),
        }


class _Located:
    """Maps key paths to (line, column) of the YAML nodes that produced them."""

    def __init__(self, source: str):
        self.source = source
        self.marks: dict[str, tuple[int, int]] = {}

    def walk(self, node, path: str = "") -> None:
        self.marks[path] = (node.start_mark.line + 1, node.start_mark.column + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.walk(v, f"{path}.{k.value}" if path else str(k.value))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self.walk(v, f"{path}[{i}]")

    def error(self, message: str, path: str) -> ScenarioError:
        probe = path
        while probe and probe not in self.marks:
            probe = re.sub(r"(\.[^.\[]+|\[\d+\])$", "", probe)
        line, col = self.marks.get(probe, (None, None))
        return ScenarioError(message, path, line, col, self.source)


_CALL = re.compile(r"^\s*([a-z][a-z0-9-]*)\s*(?:\((.*)\))?\s*$", re.S)


def parse_constructor(text: str) -> tuple[str, dict[str, Any]]:
    """'name(k=v, ...)' -> (name, kwargs); values are read as YAML scalars or flow lists."""
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot read constructor call {text!r}")
    name, args = m.group(1), m.group(2)
    if name not in CONSTRUCTORS:
        raise ValueError(f"unknown constructor {name!r}; known: {', '.join(sorted(CONSTRUCTORS))}")
    kwargs: dict[str, Any] = {}
    if args and args.strip():
        loaded = yaml.safe_load("{" + args.replace("=", ": ") + "}")
        if not isinstance(loaded, dict):
            raise ValueError(f"cannot read arguments of {text!r}")
        kwargs = {str(k).replace("-", "_"): v for k, v in loaded.items()}
    params = inspect.signature(CONSTRUCTORS[name]).parameters
    unknown = set(kwargs) - set(params)
    if unknown:
        raise ValueError(f"{name} does not accept {', '.join(sorted(unknown))}")
    return name, kwargs


def build_constructor(text: str, space: MetricSpace | None):
    name, kwargs = parse_constructor(text)
    params = inspect.signature(CONSTRUCTORS[name]).parameters
    if space is not None:
        if "n" in params:
            kwargs.setdefault("n", space.n)
        if "p" in params:
            kwargs.setdefault("p", space.p)
    if "u" in kwargs and kwargs["u"] is not None:
        kwargs["u"] = np.asarray(kwargs["u"], dtype=float)
    built_space, f = CONSTRUCTORS[name](**kwargs)
    if space is not None and not space.same_as(built_space):
        raise ValueError(
            f"{name} lives on signature ({built_space.p}, {built_space.q}) with its own metric, "
            f"which differs from the declared space ({space.p}, {space.q})"
        )
    return built_space, f


def _vector(loc: _Located, value, n: int, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise loc.error("expected a list of numbers", path) from None
    if arr.shape != (n,):
        raise loc.error(f"dimension mismatch: expected {n} entries, got shape {arr.shape}", path)
    return arr


def _number(loc: _Located, value, path: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise loc.error(f"expected a number, got {value!r}", path)
    if kind is int:
        if float(value) != int(value):
            raise loc.error(f"expected an integer, got {value!r}", path)
        return int(value)
    return float(value)


def _space(loc: _Located, data) -> MetricSpace | None:
    if data is None:
        return None
    if not isinstance(data, dict):
        raise loc.error("space must be a mapping with n, p, q and optional g", "space")
    unknown = set(data) - {"n", "p", "q", "g"}
    if unknown:
        raise loc.error(f"unknown field {sorted(unknown)[0]!r}", f"space.{sorted(unknown)[0]}")
    for k in ("n", "p", "q"):
        if k not in data:
            raise loc.error(f"missing required field {k!r}", "space")
    n, p, q = (_number(loc, data[k], f"space.{k}", int) for k in ("n", "p", "q"))
    if p + q != n:
        raise loc.error(f"p + q = {p + q} does not equal n = {n}", "space")
    g = None
    if data.get("g") is not None:
        g = np.asarray(data["g"], dtype=float)
        if g.shape != (n, n):
            raise loc.error(f"dimension mismatch: g must be {n}x{n}, got shape {g.shape}", "space.g")
    try:
        return MetricSpace(n, p, q, g)
    except ValueError as exc:
        raise loc.error(str(exc), "space") from None


def _field(loc: _Located, data, space: MetricSpace | None):
    if isinstance(data, str):
        try:
            return build_constructor(data, space)
        except (ValueError, TypeError) as exc:
            raise loc.error(str(exc), "field") from None
    if not isinstance(data, dict):
        raise loc.error("field must be a constructor call or a mapping with w, B, c, u", "field")
    if space is None:
        raise loc.error("a field given by components needs a space block", "field")
    unknown = set(data) - {"w", "B", "c", "u"}
    if unknown:
        raise loc.error(f"unknown field {sorted(unknown)[0]!r}", f"field.{sorted(unknown)[0]}")
    n = space.n
    w = _vector(loc, data.get("w", [0.0] * n), n, "field.w")
    u = _vector(loc, data.get("u", [0.0] * n), n, "field.u")
    c = _number(loc, data.get("c", 0.0), "field.c")
    B_spec = data.get("B", np.zeros((n, n)).tolist())
    if isinstance(B_spec, str):
        try:
            B = build_constructor(B_spec, space)[1].B
        except (ValueError, TypeError) as exc:
            raise loc.error(str(exc), "field.B") from None
    else:
        B = np.asarray(B_spec, dtype=float)
        if B.shape != (n, n):
            raise loc.error(f"dimension mismatch: B must be {n}x{n}, got shape {B.shape}", "field.B")
    try:
        return space, FlatConformalField(space, w, B, c, u)
    except ValueError as exc:
        raise loc.error(str(exc), "field.B") from None


def _task(loc: _Located, data, k: int, defaults: dict[str, Any], n: int) -> dict[str, Any]:
    path = f"tasks[{k}]"
    if not isinstance(data, dict):
        raise loc.error("each task must be a mapping with a kind", path)
    kind = data.get("kind")
    if kind not in TASK_KEYS:
        raise loc.error(f"unknown task kind {kind!r}; expected one of {', '.join(TASK_KEYS)}", f"{path}.kind")
    required, optional = TASK_KEYS[kind]
    for key in sorted(set(data) - required - set(optional) - COMMON_KEYS):
        raise loc.error(f"unknown field {key!r} for task kind {kind}", f"{path}.{key}")
    for key in sorted(required - set(data)):
        raise loc.error(f"missing required field {key!r} for task kind {kind}", path)
    task: dict[str, Any] = {"kind": kind}
    if "label" in data:
        task["label"] = str(data["label"])
    for key, default in optional.items():
        value = data.get(key, defaults[key] if default is None else default)
        task[key] = value
    for key in required:
        task[key] = data[key]
    if "at" in task:
        pts = np.asarray(task["at"], dtype=float) if _is_numeric(task["at"]) else None
        if pts is None or pts.shape[-1:] != (n,) or pts.ndim > 2:
            raise loc.error(f"dimension mismatch: 'at' must be a point (or list of points) with {n} coordinates", f"{path}.at")
        task["at"] = pts.tolist()
    if kind in ("find-zeros", "component-scan"):
        box = task["box"]
        if isinstance(box, (int, float)) and not isinstance(box, bool):
            if box <= 0:
                raise loc.error("box half-width must be positive", f"{path}.box")
            task["box"] = float(box)
        else:
            b = np.asarray(box, dtype=float) if _is_numeric(box) else None
            if b is None or b.shape != (n, 2) or np.any(b[:, 1] <= b[:, 0]):
                raise loc.error(f"box must be a half-width or {n} [low, high] pairs", f"{path}.box")
            task["box"] = b.tolist()
        task["grid"] = _number(loc, task["grid"], f"{path}.grid", int)
        if task["grid"] < 2:
            raise loc.error("grid must be >= 2", f"{path}.grid")
    if kind == "verify-theorem" and task["name"] not in (*SUITES, "all"):
        raise loc.error(f"unknown theorem {task['name']!r}; expected one of {', '.join(SUITES)} or all", f"{path}.name")
    if kind == "equivalence":
        if task["jets"] not in (1, 2):
            raise loc.error("jets must be 1 or 2", f"{path}.jets")
        if not isinstance(task["other"], str):
            raise loc.error("other must be the path of a second scenario file", f"{path}.other")
        if not _is_numeric(task["other_at"]):
            raise loc.error("other_at must be a point", f"{path}.other_at")
        task["other_at"] = np.asarray(task["other_at"], dtype=float).tolist()
    for key in ("tol",):
        if key in task:
            task[key] = _number(loc, task[key], f"{path}.{key}")
    for key in ("seed", "budget"):
        if key in task:
            task[key] = _number(loc, task[key], f"{path}.{key}", int)
    return task


def _is_numeric(value) -> bool:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        return False
    return arr.size > 0 and np.all(np.isfinite(arr))


def parse_scenario(text: str, source: str = "", base_dir: Path | None = None, overrides: dict | None = None) -> Scenario:
    """Validate a scenario document; ``overrides`` replaces entries of the defaults block (CLI flags)."""
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            if node is None:
                raise ScenarioError("empty document", source=source)
            data = loader.construct_document(node)
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line, col = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise ScenarioError(f"parse error: {exc.problem or exc.context}", "", line, col, source) from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"parse error: {exc}", source=source) from None
    loc = _Located(source)
    loc.walk(node)
    if not isinstance(data, dict):
        raise loc.error("top level must be a mapping", "")
    unknown = set(data) - {"space", "field", "defaults", "tasks", "output"}
    if unknown:
        key = sorted(unknown)[0]
        raise loc.error(f"unknown top-level field {key!r}", key)
    if "field" not in data:
        raise loc.error("missing required field 'field'", "")
    defaults = dict(DEFAULTS)
    for key, value in (data.get("defaults") or {}).items():
        if key not in DEFAULTS:
            raise loc.error(f"unknown default {key!r}", f"defaults.{key}")
        defaults[key] = _number(loc, value, f"defaults.{key}", float if key == "tol" else int)
    defaults.update({k: v for k, v in (overrides or {}).items() if v is not None})
    space = _space(loc, data.get("space"))
    space, f = _field(loc, data["field"], space)
    tasks_data = data.get("tasks") or []
    if not isinstance(tasks_data, list):
        raise loc.error("tasks must be a list", "tasks")
    tasks = [_task(loc, t, k, defaults, space.n) for k, t in enumerate(tasks_data)]
    output = {"path": None, "format": "human"}
    for key, value in (data.get("output") or {}).items():
        if key not in output:
            raise loc.error(f"unknown output field {key!r}", f"output.{key}")
        output[key] = value
    if output["format"] not in ("human", "machine"):
        raise loc.error("format must be human or machine", "output.format")
    return Scenario(space, f, tasks, defaults, output, data["field"], base_dir or Path.cwd())


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", source=str(path)) from None
    return parse_scenario(text, str(path), path.parent, overrides)


def serialize_scenario(s: Scenario) -> str:
    """YAML text with every default spelled out and the field in component form."""
    doc = s.logical()
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
