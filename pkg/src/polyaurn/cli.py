"""Command-line entry point.

    polyaurn --cmd classify   --graph G.txt
    polyaurn --cmd equilibria --graph G.txt [--format json|csv]
    polyaurn --cmd flow       --graph G.txt [--t 20 --dt 0.01 --v0 ...]
    polyaurn --cmd simulate   --graph G.txt --trials 100 --steps 100000 --out DIR
    polyaurn --cmd verify     [--steps N] [--graph FIXTURE_DIR]

Exit codes: 0 success, 1 failed check, 2 usage or parse error.  The output
directory may also be set with POLYAURN_OUT.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import verify
from .dynamics import DomainError, DomainParams, trajectory, write_trajectory_csv
from .equilibria import EquilibriumError, enumerate_equilibria, predict_limit, tangent_spectrum
from .graph import GraphError, classify_bipartiteness, read_graph
from .urn import TrialConfig, monte_carlo

COMMANDS = ("classify", "equilibria", "flow", "simulate", "verify")
OUT_ENV = "POLYAURN_OUT"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    graph: str | None = None
    seed: int = 0
    trials: int = 100
    steps: int = 100_000
    dt: float = 0.01
    c: float | None = None
    alpha: float = 1.0
    out: str | None = None
    format: str = "json"
    t: float = 20.0
    v0: list[float] | None = None
    stride: int = 100
    workers: int = 1

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.command != "verify" and not self.graph:
            raise UsageError(f"--graph is required for {self.command}")
        if self.trials < 1 or self.steps < 1 or self.stride < 1 or self.workers < 1:
            raise UsageError("--trials, --steps, --stride and --workers must be >= 1")
        if not self.dt > 0 or self.t < 0:
            raise UsageError("--dt must be positive and --t nonnegative")
        if not self.alpha > 0:
            raise UsageError("--alpha must be positive")
        if self.alpha != 1.0 and self.command in ("equilibria", "flow", "verify"):
            raise UsageError("equilibrium analysis is only defined for alpha = 1")
        if self.format not in ("json", "csv"):
            raise UsageError("--format must be json or csv")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyaurn", description="Graph-based Polya urns: analysis and simulation.")
    p.add_argument("--cmd", dest="command", required=True, choices=COMMANDS)
    p.add_argument("--graph", help="edge-list file (verify: directory of fixture files)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--c", type=float, default=None, help="edge-sum floor, default 1/(100N)")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--out", default=None, help=f"output directory (or ${OUT_ENV})")
    p.add_argument("--format", default="json", choices=("json", "csv"))
    p.add_argument("--t", type=float, default=20.0, help="flow: integration time")
    p.add_argument("--v0", type=float, nargs="+", default=None, help="flow: initial point, default uniform")
    p.add_argument("--stride", type=int, default=100, help="simulate: record every k-th step")
    p.add_argument("--workers", type=int, default=1, help="simulate: concurrent trials")
    return p


def load_schema(name: str) -> dict:
    return json.loads((resources.files("polyaurn") / "schemas" / f"{name}.schema.json").read_text())


def dump_json(obj, schema: str | None = None) -> str:
    if schema is not None:
        jsonschema.validate(obj, load_schema(schema))
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _c(cfg, g):
    if cfg.c is None:
        return DomainParams.default(g).c
    params = DomainParams(cfg.c)
    try:
        params.validate(g)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return params.c


def _out_dir(cfg, required=False) -> Path | None:
    out = cfg.out or os.environ.get(OUT_ENV)
    if out is None:
        if required:
            raise UsageError(f"--out (or ${OUT_ENV}) is required")
        return None
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise UsageError(f"output directory {path} is not writable")
    return path


def _emit(text: str, cfg, filename: str, stdout) -> None:
    stdout.write(text)
    out = _out_dir(cfg)
    if out is not None:
        (out / filename).write_text(text)


def cmd_classify(cfg: RunConfig, stdout=sys.stdout) -> int:
    g = read_graph(cfg.graph)
    bc = classify_bipartiteness(g)
    if cfg.format == "json":
        rep = {"class": bc.kind.value, "A": sorted(bc.A), "B": sorted(bc.B), "m": g.m, "N": g.N}
        _emit(dump_json(rep, "classify"), cfg, "classify.json", stdout)
    else:
        _emit(f"{bc}\nm={g.m} N={g.N}\n", cfg, "classify.txt", stdout)
    return EXIT_OK


def equilibria_report(g, c) -> dict:
    eqs = enumerate_equilibria(g, c)
    limit = predict_limit(g, c, equilibria=eqs)
    records = []
    for e in eqs:
        rec = e.to_dict()
        rec["eigenvalues"] = tangent_spectrum(g, e.point).to_dict()["eigenvalues"]
        rec["limit_set"] = None if e.interval is None else e.interval.to_dict()
        del rec["interval"]
        records.append(rec)
    return {
        "graph": {"m": g.m, "N": g.N, "edges": [list(e) for e in g.edges], "class": str(classify_bipartiteness(g))},
        "c": c,
        "equilibria": records,
        "limit_set": limit.to_dict(),
    }


def cmd_equilibria(cfg: RunConfig, stdout=sys.stdout) -> int:
    g = read_graph(cfg.graph)
    rep = equilibria_report(g, _c(cfg, g))
    if cfg.format == "json":
        _emit(dump_json(rep, "equilibria"), cfg, "equilibria.json", stdout)
        return EXIT_OK
    buf = io.StringIO()
    w = csv.writer(buf)
    m = g.m
    w.writerow(["stability", "support"] + [f"v_{i}" for i in range(1, m + 1)] + [f"dL_{i}" for i in range(1, m + 1)])
    for e in rep["equilibria"]:
        w.writerow([e["stability"], " ".join(map(str, e["support"]))] + [repr(x) for x in e["point"]]
                   + [repr(x) for x in e["gradient"]])
    _emit(buf.getvalue(), cfg, "equilibria.csv", stdout)
    return EXIT_OK


def cmd_flow(cfg: RunConfig, stdout=sys.stdout) -> int:
    g = read_graph(cfg.graph)
    v0 = np.full(g.m, 1.0 / g.m) if cfg.v0 is None else np.asarray(cfg.v0, dtype=float)
    if v0.size != g.m:
        raise UsageError(f"--v0 needs {g.m} coordinates")
    times, states = trajectory(g, v0, cfg.t, cfg.dt, _c(cfg, g))
    buf = io.StringIO()
    write_trajectory_csv(g, times, states, buf)
    _emit(buf.getvalue(), cfg, "flow.csv", stdout)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, stdout=sys.stdout) -> int:
    g = read_graph(cfg.graph)
    out = _out_dir(cfg, required=True)
    c = _c(cfg, g)
    tcfg = TrialConfig(cfg.steps, cfg.seed, cfg.alpha, cfg.stride)
    mc = monte_carlo(g, np.ones(g.m, dtype=np.int64), cfg.trials, tcfg, workers=cfg.workers, keep_results=True, c=c)
    width = max(4, len(str(cfg.trials - 1)))
    for k, res in enumerate(mc.results):
        with open(out / f"trial_{k:0{width}d}.csv", "w", newline="") as fh:
            res.write_csv(fh)
    summary = mc.to_dict()
    summary["config"] = {
        "graph": Path(cfg.graph).name,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "steps": cfg.steps,
        "alpha": cfg.alpha,
        "sample_stride": cfg.stride,
        "b0": [1] * g.m,
    }
    text = dump_json(summary, "summary")
    (out / "summary.json").write_text(text)
    line = f"wrote {cfg.trials} trials to {out}"
    if "distance_stats" in summary:
        line += f"; mean distance to limit set {summary['distance_stats']['mean']:.4g}"
    stdout.write(line + "\n")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, stdout=sys.stdout) -> int:
    try:
        verify.tolerances_for(cfg.steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    fixtures = verify.load_fixtures(cfg.graph)
    results = verify.run_all(fixtures, steps=cfg.steps, seed=cfg.seed, workers=cfg.workers)
    for r in results:
        sys.stderr.write(r.line() + "\n")
    rep = verify.report(results, cfg.steps, cfg.seed)
    _emit(dump_json(rep, "verify"), cfg, "verify.json", stdout)
    return EXIT_OK if rep["passed"] else EXIT_FAIL


HANDLERS = {
    "classify": cmd_classify,
    "equilibria": cmd_equilibria,
    "flow": cmd_flow,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(ns))
    try:
        cfg.validate()
        return HANDLERS[cfg.command](cfg, stdout)
    except (UsageError, GraphError, OSError) as exc:
        sys.stderr.write(f"polyaurn: error: {exc}\n")
        return EXIT_USAGE
    except (DomainError, EquilibriumError) as exc:
        sys.stderr.write(f"polyaurn: error: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
