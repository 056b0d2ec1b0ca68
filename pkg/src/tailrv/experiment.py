"""Experiment specs: JSON loading with line-anchored validation, component
wiring and task execution."""
from __future__ import annotations

import bisect
import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from json.decoder import scanstring
from pathlib import Path

import numpy as np
import jsonschema

from . import __version__
from . import functionals as fl
from .empirics import (anticoncentration_diagnostic, conditional_exceedance, hill_estimator,
                       ph_ratio, tightness_diagnostic)
from .grid import CadlagPath, GridSpec, read_paths_csv, write_paths_csv
from .identities import SuiteConfig, identity_suite, reports_table
from .processes import (BrownResnickSpec, DeHaanConfig, GaussianSpec, brown_resnick_representer,
                        brown_resnick_tail_family, sample_dehaan_maxstable, sample_gaussian,
                        sample_scaled_pareto)
from .rng import threads
from .skorohod import d_D_upper_bound, skorohod_distance_1d
from .tail import (compact_boundedness_check, constant_representer, family_from_representer,
                   measure_functional_local, representer_functional, site_norms)

TASK_TYPES = ("simulate", "estimate", "identities", "diagnostics", "metric")
_WS = re.compile(r"[ \t\n\r]*")


class ConfigError(Exception):
    """Spec problem; ``line`` points into the spec file when known."""

    def __init__(self, message: str, line: int | None = None, source: str = "<spec>"):
        self.line, self.source = line, source
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


class TaskError(Exception):
    def __init__(self, index: int, kind: str, cause: BaseException):
        super().__init__(f"task {index} ({kind}) failed: {type(cause).__name__}: {cause}")
        self.index = index


def json_lines(text: str) -> dict:
    """Map each JSON path (tuple of keys / indices) to the line it starts on."""
    breaks = [m.start() for m in re.finditer("\n", text)]
    dec = json.JSONDecoder()
    out: dict = {}

    def line(pos):
        return bisect.bisect_left(breaks, pos) + 1

    def value(pos, path):
        pos = _WS.match(text, pos).end()
        out.setdefault(path, line(pos))
        ch = text[pos]
        if ch not in "{[":
            return dec.raw_decode(text, pos)[1]
        close = "}" if ch == "{" else "]"
        pos = _WS.match(text, pos + 1).end()
        if text[pos] == close:
            return pos + 1
        i = 0
        while True:
            pos = _WS.match(text, pos).end()
            if ch == "{":
                key_line = line(pos)
                key, pos = scanstring(text, pos + 1)
                pos = _WS.match(text, pos).end() + 1
                out[path + (key,)] = key_line
                pos = value(pos, path + (key,))
            else:
                pos = value(pos, path + (i,))
            i += 1
            pos = _WS.match(text, pos).end()
            if text[pos] == ",":
                pos += 1
                continue
            return pos + 1

    value(0, ())
    return out


def load_schema() -> dict:
    return json.loads(resources.files("tailrv").joinpath("schema/experiment.schema.json").read_text())


def _anchor(lines: dict, path) -> int | None:
    path = tuple(path)
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path)


def parse_spec(text: str, source: str = "<spec>"):
    """Parse and schema-validate; returns ``(spec, lines)`` or raises :class:`ConfigError`."""
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", e.lineno, source) from None
    lines = json_lines(text)
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(spec), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        where = "/".join(map(str, e.absolute_path)) or "(root)"
        raise ConfigError(f"{where}: {e.message}", _anchor(lines, e.absolute_path), source)
    return spec, lines


def spec_hash(spec: dict) -> str:
    """SHA-256 of the canonical spec; the output location is not part of it."""
    spec = {k: v for k, v in spec.items() if k != "output_dir"}
    canon = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _grid(d: dict) -> GridSpec:
    lower = np.atleast_1d(np.asarray(d["lower"], dtype=float))
    upper = np.atleast_1d(np.asarray(d["upper"], dtype=float))
    res = np.atleast_1d(np.asarray(d["resolution"], dtype=int))
    dim_t = int(d.get("dim_t", max(lower.size, upper.size, res.size)))
    return GridSpec(dim_t, int(d.get("dim_x", 1)), tuple(lower.tolist()), tuple(upper.tolist()),
                    tuple(res.tolist()))


def _point(grid: GridSpec, p):
    if p is None:
        return None
    if isinstance(p, int):
        return grid.site(p)
    return grid.site(np.atleast_1d(np.asarray(p, dtype=float)))


def _window(K):
    if K is None:
        return None
    return tuple(np.atleast_1d(np.asarray(k, dtype=float)) for k in K)


@dataclass
class Process:
    """Wired components for one process entry."""

    kind: str
    grid: GridSpec
    alpha: float
    norm: str
    representer: object = None
    gaussian: object = None
    dehaan: object = None
    br: object = None
    _family: object = field(default=None, repr=False)

    def family(self, seed: int):
        if self._family is None:
            if self.br is not None:
                self._family = brown_resnick_tail_family(self.br, norm=self.norm)
            elif self.representer is not None:
                self._family = family_from_representer(self.representer, seed=seed)
            else:
                raise ValueError(f"process {self.kind!r} has no tail measure")
        return self._family

    def simulate(self, n: int, seed: int, workers: int):
        extra = {}
        if self.kind == "gaussian":
            X = sample_gaussian(self.gaussian, n, seed=seed, workers=workers)
        elif self.kind == "scaled_pareto":
            X = sample_scaled_pareto(self.representer, n, seed=seed, workers=workers)
        elif self.kind == "dehaan":
            res = sample_dehaan_maxstable(self.dehaan, n, seed=seed, workers=workers)
            X = res.paths
            extra = {"terms_mean": float(res.terms.mean()), "terms_max": int(res.terms.max()),
                     "truncated": int(res.truncated.sum())}
        else:
            X = self.representer.draw(n, seed, workers, tag="simulate")
        return X, extra


@dataclass
class Experiment:
    spec: dict
    lines: dict
    source: str
    grid: GridSpec
    alpha: float
    norm: str
    seed: int
    workers: int
    output_dir: Path
    processes: dict

    @property
    def meta(self) -> dict:
        return {"spec_hash": spec_hash(self.spec), "seed": self.seed, "workers": self.workers,
                "version": __version__}


def _build_process(d: dict, exp_grid, exp_alpha, exp_norm, registry: dict, path) -> Process:
    grid = _grid(d["grid"]) if "grid" in d else exp_grid
    alpha = float(d.get("alpha", exp_alpha))
    norm = d.get("norm", exp_norm)
    kind = d["type"]
    proc = Process(kind, grid, alpha, norm)
    if kind == "constant":
        proc.representer = constant_representer(grid, d.get("value", 1.0), alpha, norm)
    elif kind in ("brown_resnick", "gaussian"):
        g = GaussianSpec(grid, d.get("kernel", "brownian"), dict(d.get("params", {})), d.get("cross"))
        proc.gaussian = g
        if kind == "brown_resnick":
            proc.br = BrownResnickSpec(g, alpha)
            proc.representer = brown_resnick_representer(proc.br, norm)
    elif kind in ("scaled_pareto", "dehaan"):
        ref = d.get("representer")
        if ref is None:
            raise ValueError(f"{kind} needs a 'representer'")
        if isinstance(ref, str):
            if ref not in registry:
                raise KeyError(ref)
            base = registry[ref]
        else:
            base = _build_process(ref, grid, alpha, norm, registry, path + ("representer",))
        if base.representer is None:
            raise ValueError(f"representer {ref!r} has no representer sampler")
        proc.representer, proc.br = base.representer, base.br
        if kind == "dehaan":
            proc.dehaan = DeHaanConfig(base.representer, float(d.get("truncation_tol", 1.0)),
                                       int(d.get("max_terms", 10_000)))
    return proc


def build_experiment(spec: dict, lines: dict, source: str = "<spec>", *, seed=None,
                     workers=None, out=None, base_dir: Path | None = None) -> Experiment:
    """Wire processes and check task references; problems raise :class:`ConfigError`."""
    spec = dict(spec)
    if seed is not None:
        spec["seed"] = int(seed)
    if workers is not None:
        spec["workers"] = int(workers)
    if out is not None:
        spec["output_dir"] = str(out)
    try:
        grid = _grid(spec["grid"])
    except (ValueError, TypeError) as e:
        raise ConfigError(f"grid: {e}", _anchor(lines, ("grid",)), source) from None
    alpha, norm = float(spec["alpha"]), spec.get("norm", "sup")
    entries = dict(spec.get("processes", {}))
    if "process" in spec:
        entries.setdefault("default", spec["process"])
    registry: dict = {}
    # plain processes first so that named references resolve
    order = sorted(entries, key=lambda k: entries[k]["type"] in ("scaled_pareto", "dehaan"))
    for name in order:
        path = ("process",) if name == "default" and "process" in spec else ("processes", name)
        try:
            registry[name] = _build_process(entries[name], grid, alpha, norm, registry, path)
        except KeyError as e:
            raise ConfigError(f"process {name!r} references undefined process {e}",
                              _anchor(lines, path), source) from None
        except (ValueError, TypeError) as e:
            raise ConfigError(f"process {name!r}: {e}", _anchor(lines, path), source) from None
    for i, task in enumerate(spec["tasks"]):
        if task["type"] == "metric":
            continue
        ref = task.get("process", "default")
        if ref not in registry:
            raise ConfigError(f"task {i} references undefined process {ref!r}",
                              _anchor(lines, ("tasks", i, "process") if "process" in task
                                      else ("tasks", i)), source)
    out_dir = Path(spec.get("output_dir", "tailrv_out"))
    if base_dir is not None and not out_dir.is_absolute() and out is None:
        out_dir = base_dir / out_dir
    return Experiment(spec, lines, source, grid, alpha, norm, int(spec.get("seed", 0)),
                      int(spec.get("workers", 1)), out_dir, registry)


def _functional(grid: GridSpec, d: dict, norm: str):
    kind = d["kind"]
    if kind == "constant":
        return fl.constant(float(d.get("c", 1.0)))
    if kind == "sup_exceedance":
        return fl.sup_exceedance(grid, _window(d.get("K")), float(d.get("level", 1.0)), norm)
    if kind == "coordinate_indicator":
        return fl.coordinate_indicator(grid, _point(grid, d["t"]), float(d.get("a", 1.0)), norm)
    if kind == "clipped_lipschitz":
        return fl.clipped_lipschitz(grid, _point(grid, d["t"]), _point(grid, d["s"]),
                                    float(d.get("a", 1.0)), norm)
    return fl.ratio(grid, _point(grid, d["t"]), _point(grid, d["h"]), float(d.get("cap", 5.0)), norm)


def _quantile_grid(values, task, key_grid="z_grid", key_q="z_quantiles", default=(0.9, 0.99, 0.999)):
    if key_grid in task:
        return [float(z) for z in task[key_grid]]
    return [float(np.quantile(values, q)) for q in task.get(key_q, default)]


@dataclass
class TaskOutput:
    suffix: str  # "json" or "csv"
    payload: object  # dict for JSON, callable(stream) for CSV
    failed_reports: int = 0
    stdout: str = ""


def run_task(exp: Experiment, index: int, task: dict) -> TaskOutput:
    kind = task["type"]
    seed, workers, grid, norm = exp.seed, exp.workers, exp.grid, exp.norm
    n = int(task.get("n", 10_000))
    if kind == "metric":
        return _metric(exp, task)
    proc: Process = exp.processes[task.get("process", "default")]
    grid, norm = proc.grid, proc.norm

    if kind == "simulate":
        X, extra = proc.simulate(n, seed, workers)
        meta = {**exp.meta, "task": index, "type": kind, **extra}
        return TaskOutput("csv", lambda s: write_paths_csv(s, grid, X, sample_ids=True, meta=meta))

    if kind == "estimate":
        H = _functional(grid, task.get("functional", {"kind": "constant"}), norm)
        route = task.get("route", "representer")
        eps = float(task.get("eps", 1.0))
        K = _window(task.get("K"))
        result = {}
        if route in ("representer", "both"):
            result["representer"] = representer_functional(
                proc.representer, H, _point(grid, task.get("h")), eps, n, K=K, seed=seed,
                workers=workers).to_dict()
        if route in ("local", "both"):
            result["local"] = measure_functional_local(
                proc.family(seed), H, K, eps, n, measure=task.get("measure", "counting"),
                seed=seed, workers=workers).to_dict()
        return TaskOutput("json", {"functional": H.name, "route": route, **result})

    if kind == "identities":
        fam = proc.family(seed)
        if "corrupt" in task:
            fam = fam.with_p(_point(grid, task["corrupt"]["site"]), float(task["corrupt"]["factor"]))
        mid = grid.n_points // 2
        cfg = SuiteConfig(h=_point(grid, task.get("h", mid - 1)), t=_point(grid, task.get("t", mid + 1)),
                          xs=tuple(task.get("xs", (0.5, 1.0, 2.0))), n=n,
                          eps=float(task.get("eps", 1.0)), threshold=float(task.get("threshold", 3.0)),
                          seed=seed, workers=workers, shift=task.get("shift"))
        reports = identity_suite(proc.representer, fam, cfg)
        failed = sum(not r.passed for r in reports)
        return TaskOutput("json", {"reports": [r.to_dict() for r in reports], "failed": failed},
                          failed, reports_table(reports))

    if kind == "diagnostics":
        return _diagnostics(exp, proc, task, n)
    raise ValueError(f"unknown task type {kind!r}")


def _diagnostics(exp: Experiment, proc: Process, task: dict, n: int) -> TaskOutput:
    seed, workers, grid, norm = exp.seed, exp.workers, proc.grid, proc.norm
    dk = task.get("kind", "tightness")
    if dk == "compact_boundedness":
        K = _window(task.get("K"))
        target = proc.family(seed) if task.get("route") == "local" else proc.representer
        return TaskOutput("json", compact_boundedness_check(target, K, n, seed=seed,
                                                            workers=workers).to_dict())
    X, _ = proc.simulate(n, seed, workers)
    mid = grid.n_points // 2
    t0 = _point(grid, task.get("t0", mid))
    if dk == "hill":
        h = _point(grid, task.get("h", mid))
        k = int(task.get("k", max(1, n // 100)))
        a, ci = hill_estimator(site_norms(grid, X, h, norm=norm), k)
        return TaskOutput("json", {"alpha_hat": a, "ci": list(ci), "k": k, "site": h})
    if dk == "conditional_exceedance":
        h = _point(grid, task.get("h", mid))
        Y, u = conditional_exceedance(X, grid, h, quantile=float(task.get("quantile", 0.99)), norm=norm)
        meta = {**exp.meta, "u": repr(u), "site": h}
        return TaskOutput("csv", lambda s: write_paths_csv(s, grid, Y, sample_ids=True, meta=meta))
    zs = _quantile_grid(site_norms(grid, X, t0, norm=norm), task)
    if dk == "ph_ratio":
        table = ph_ratio(X, grid, _point(grid, task.get("h", mid)), t0, zs, norm)
    elif dk == "tightness":
        table = tightness_diagnostic(X, grid, _window(task.get("K")), float(task.get("eps", 1.0)),
                                     t0, task.get("eta_grid", [0.05, 0.1, 0.2]), zs,
                                     modulus=task.get("modulus", "w_prime"), norm=norm)
    else:
        table = anticoncentration_diagnostic(X, grid, _window(task.get("K")),
                                             float(task.get("eps", 1.0)), float(task.get("c", 2.0)),
                                             t0, task.get("eta_grid", [0.5, 1.0, 2.0]), zs,
                                             norm=norm)
    meta = {**exp.meta, "kind": dk}
    return TaskOutput("csv", lambda s: table.to_csv(s, meta))


def _read_single(path: Path) -> CadlagPath:
    with open(path, encoding="utf-8") as fh:
        grid, batch, _ = read_paths_csv(fh)
    return CadlagPath(grid, batch[0])


def _metric(exp: Experiment, task: dict) -> TaskOutput:
    base = Path(exp.source).parent if exp.source not in ("<spec>", "<cli>") else Path(".")
    f = _read_single(base / task["f"])
    g = _read_single(base / task["g"])
    m = int(task.get("windows", 8))
    res = {"skorohod_distance_1d": skorohod_distance_1d(f, g, m, exp.norm),
           "d_D_upper_bound": d_D_upper_bound(f, g, None, m, exp.norm)}
    text = "\n".join(f"{k} {v!r}" for k, v in res.items())
    return TaskOutput("json", res, stdout=text)


def run_experiment(exp: Experiment, only: str | None = None, n_threads: int = 1, echo=print) -> int:
    """Execute tasks in order and write one artifact per task.

    Returns the number of failed identity reports; task errors raise :class:`TaskError`.
    """
    exp.output_dir.mkdir(parents=True, exist_ok=True)
    failed = 0
    with threads(n_threads):
        for i, task in enumerate(exp.spec["tasks"]):
            if only is not None and task["type"] != only:
                continue
            try:
                out = run_task(exp, i, task)
            except Exception as e:  # surfaced as a runtime error with the task index
                raise TaskError(i, task["type"], e) from e
            name = task.get("name", f"{i:02d}_{task['type']}")
            path = exp.output_dir / f"{name}.{out.suffix}"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                if out.suffix == "json":
                    json.dump({"meta": {**exp.meta, "task": i, "type": task["type"]},
                               "result": out.payload}, fh, indent=2, allow_nan=True)
                    fh.write("\n")
                else:
                    out.payload(fh)
            if out.stdout:
                echo(out.stdout)
            echo(f"wrote {path}")
            failed += out.failed_reports
    return failed
