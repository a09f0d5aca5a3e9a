"""Command-line front end: list the zoo, run censuses, sweep, and dump plot-ready data."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .census import census, check_bound, default_settings
from .errors import CensusUnreliableError, ConfigError, ParameterError
from .integrate import integrate, write_trajectory_csv
from .ulam import invariant_densities, ulam_build, write_density_csv
from .zoo import build_entry, load_config

EXIT_OK, EXIT_MISMATCH, EXIT_UNRELIABLE, EXIT_CONFIG = 0, 1, 2, 64
SWEEP_HEADER = ["label", "s_L", "s_measured", "s_expected", "verdict", "runtime_s"]
DEFAULT_SEED = 20240601

log = logging.getLogger("singflow")


@dataclass
class ExperimentConfig:
    model: str
    horizon: float | None = None
    burn_in: float | None = None
    grid: int | None = None
    gap_tol: float = 0.01
    cluster_tol: float = 0.05
    radius_tol: float | None = None
    out: str | None = None
    workers: int = 1
    seed: int = DEFAULT_SEED

    def validate(self):
        for k in ("gap_tol", "cluster_tol", "radius_tol", "horizon"):
            v = getattr(self, k)
            if v is not None and not v > 0:
                raise ConfigError(f"{k} must be positive")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError("burn_in must be nonnegative")
        if self.horizon is not None and self.burn_in is not None and not self.horizon > self.burn_in:
            raise ConfigError("horizon must exceed burn_in")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.grid is not None and self.grid < 1:
            raise ConfigError("grid must be at least 1")
        return self


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _common(p):
    p.add_argument("--config", help="INI file with per-model sections and an [experiment] section")
    p.add_argument("--horizon", type=float)
    p.add_argument("--burn-in", dest="burn_in", type=float)
    p.add_argument("--grid", type=int, help="seeds per axis (ODE) or per section (section graphs)")
    p.add_argument("--gap-tol", dest="gap_tol", type=float)
    p.add_argument("--cluster-tol", dest="cluster_tol", type=float)
    p.add_argument("--radius-tol", dest="radius_tol", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser():
    ap = _Parser(prog="singflow", description="Census of physical measures for singular-hyperbolic example flows.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sub.add_parser("list", help="show the zoo with expected counts")
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--config")
    p = sub.add_parser("analyze", help="run a census and check the bound")
    p.add_argument("--model", required=True)
    _common(p)
    p = sub.add_parser("sweep", help="census over several models, aggregated as CSV")
    p.add_argument("labels", nargs="*")
    p.add_argument("--model", action="append", default=[], help="may be repeated")
    _common(p)
    p = sub.add_parser("dump", help="write plot-ready CSV data")
    p.add_argument("--model", required=True)
    p.add_argument("--what", choices=("trajectory", "return_map", "density"), required=True)
    p.add_argument("--node", help="section node for return maps and densities (default: every piece)")
    p.add_argument("--points", type=int, default=10_000)
    p.add_argument("--bins", type=int, default=4096)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.add_argument("--config")
    return ap


def _experiment(args, label, cfg) -> ExperimentConfig:
    exp = {k.replace("-", "_"): v for k, v in cfg.get("experiment", {}).items()}
    e = ExperimentConfig(model=label)
    conv = {"horizon": float, "burn_in": float, "grid": int, "gap_tol": float, "cluster_tol": float,
            "radius_tol": float, "workers": int, "seed": int, "out": str}
    for k, f in conv.items():
        if k in exp:
            try:
                setattr(e, k, f(exp[k]))
            except ValueError as exc:
                raise ConfigError(f"[experiment] {k} = {exp[k]!r}: {exc}") from exc
    if "SINGFLOW_WORKERS" in os.environ and "workers" not in exp:
        try:
            e.workers = int(os.environ["SINGFLOW_WORKERS"])
        except ValueError as exc:
            raise ConfigError("SINGFLOW_WORKERS must be an integer") from exc
    for k in conv:
        v = getattr(args, k, None)
        if v is not None:
            setattr(e, k, v)
    return e.validate()


def _run_census(exp: ExperimentConfig, cfg):
    entry = build_entry(exp.model, cfg)
    try:
        st = default_settings(entry, horizon=exp.horizon, burn_in=exp.burn_in, radius_tol=exp.radius_tol,
                              gap_tol=exp.gap_tol, cluster_tol=exp.cluster_tol, seed=exp.seed,
                              workers=exp.workers, grid=exp.grid)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    t0 = time.time()
    c = census(entry, st)
    return entry, c, time.time() - t0


def cmd_list(args, cfg, out):
    from .zoo import zoo
    entries = zoo(cfg)
    rows = [{"label": e.label, "kind": e.kind, "s_expected": e.s_expected, "s_L_expected": e.s_L_expected}
            for e in entries]
    if args.format == "json":
        out.write(json.dumps({"schema": 1, "entries": rows}, sort_keys=True, indent=1) + "\n")
    elif args.format == "csv":
        w = csv.DictWriter(out, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    else:
        out.write(f"{'label':<22}{'kind':<15}{'s':>4}{'s_L':>5}\n")
        for r in rows:
            out.write(f"{r['label']:<22}{r['kind']:<15}{r['s_expected']:>4}{r['s_L_expected']:>5}\n")
    return EXIT_OK


def cmd_analyze(args, cfg, out):
    exp = _experiment(args, args.model, cfg)
    try:
        entry, c, dt = _run_census(exp, cfg)
    except CensusUnreliableError as exc:
        sys.stderr.write(f"unreliable census: {exc} (discard fraction {exc.discard_fraction:.3f})\n")
        return EXIT_UNRELIABLE
    v = check_bound(c, c.s_L)
    rep = c.to_dict()
    log.info("%s census took %.1f s", entry.label, dt)
    rep["expectation_met"] = c.s == entry.s_expected
    text = json.dumps(rep, sort_keys=True, indent=1)
    if exp.out:
        os.makedirs(exp.out, exist_ok=True)
        with open(os.path.join(exp.out, f"{entry.label}_census.json"), "w") as fh:
            fh.write(text + "\n")
        c.write_vectors_csv(os.path.join(exp.out, f"{entry.label}_birkhoff.csv"))
    if args.format == "csv":
        w = csv.writer(out)
        w.writerow(SWEEP_HEADER)
        w.writerow([entry.label, c.s_L, c.s, entry.s_expected, v.label, round(dt, 3)])
    else:
        out.write(text + "\n")
    return EXIT_OK if (v.ok and c.s == entry.s_expected) else EXIT_MISMATCH


def cmd_sweep(args, cfg, out):
    labels = list(args.labels) + [m for ms in args.model for m in ms.split(",") if m]
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(SWEEP_HEADER)
    code = EXIT_OK
    for lbl in labels:
        exp = _experiment(args, lbl, cfg)
        try:
            entry, c, dt = _run_census(exp, cfg)
        except CensusUnreliableError as exc:
            w.writerow([lbl, "", "", "", "unreliable", ""])
            log.warning("%s: %s", lbl, exc)
            code = max(code, EXIT_UNRELIABLE)
            continue
        v = check_bound(c, c.s_L)
        w.writerow([lbl, c.s_L, c.s, entry.s_expected, v.label, round(dt, 3)])
        if not (v.ok and c.s == entry.s_expected) and code == EXIT_OK:
            code = EXIT_MISMATCH
    text = buf.getvalue()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
            fh.write(text)
    out.write(text)
    return code


def cmd_dump(args, cfg, out):
    entry = build_entry(args.model, cfg)
    os.makedirs(args.out, exist_ok=True)
    written = []
    if args.what == "trajectory":
        path = os.path.join(args.out, f"{entry.label}_trajectory.csv")
        if entry.kind == "ode":
            rng = np.random.default_rng(DEFAULT_SEED if args.seed is None else args.seed)
            lo, hi = entry.trapping_region.bounding_box()
            while True:
                x0 = lo + (hi - lo) * rng.random(3)
                if entry.trapping_region.contains(x0)[0] and entry.model.contains(x0[None])[0]:
                    break
            tr = integrate(entry.model, x0, args.horizon, tol=1e-8, max_step=entry.max_step)
            write_trajectory_csv(tr, path)
        else:
            m = entry.model
            k = m.node_index[m.pieces[0].return_node]
            P = m.nodes[k].seeds(1, np.random.default_rng(DEFAULT_SEED if args.seed is None else args.seed))
            cur, t = np.array([k]), 0.0
            with open(path, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["t", "x", "y", "z"])
                for _ in range(int(args.points)):
                    g = m.nodes[cur[0]].to_global(P)[0]
                    wr.writerow([repr(t)] + [repr(float(v)) for v in g])
                    h = m.advance(cur, P)
                    if h.status[0] != 0:
                        break
                    t += float(h.dt[0])
                    cur, P = h.node, h.P
        written.append(path)
    else:
        if entry.kind != "section_graph":
            raise ConfigError(f"{args.what} dumps need a section-graph model")
        m = entry.model
        nodes = [args.node] if args.node else [p.return_node for p in m.pieces]
        for nid in nodes:
            if nid not in m.node_index:
                raise ConfigError(f"unknown node {nid!r}")
            q = m.return_quotient(nid)
            tag = nid.replace(":", "_").replace("+", "p").replace("-", "m")
            if args.what == "return_map":
                lo, hi = q.domain
                x = lo + (hi - lo) * (np.arange(args.points) + 0.5) / args.points
                y = q(x)
                path = os.path.join(args.out, f"{entry.label}_{tag}_return_map.csv")
                with open(path, "w", newline="") as fh:
                    wr = csv.writer(fh)
                    wr.writerow(["x_in", "x_out"])
                    for a, b in zip(x, y):
                        wr.writerow([repr(float(a)), "" if not np.isfinite(b) else repr(float(b))])
                written.append(path)
            else:
                res = invariant_densities(ulam_build(q, args.bins))
                written += write_density_csv(res, os.path.join(args.out, f"{entry.label}_{tag}_density"))
    for p in written:
        out.write(p + "\n")
    return EXIT_OK


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else {}
        handler = {"list": cmd_list, "analyze": cmd_analyze, "sweep": cmd_sweep, "dump": cmd_dump}[args.cmd]
        return handler(args, cfg, out)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
