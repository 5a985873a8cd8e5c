"""Command line front end.

    cauchyrect generate   --fixture segment --len 100 --mesh 0.01
    cauchyrect analyze    --fixture circle --n 10000
    cauchyrect cauchy     --fixture segment --z0 0,2
    cauchyrect riesz      --fixture segment --P 3,0,0 --depth 4
    cauchyrect curve      --fixture cantor --n 6 --tau 0.03125 --l0 0.015625
    cauchyrect badsquares --fixture cantor --n 4 --tau 0.03125 --depth 4

Reports go to --out (default $CAUCHYRECT_OUT, else the working directory)
as JSON with sorted keys; bulk data goes to CSV.  Exit codes: 0 ok,
2 bad configuration, 3 numerical instability.
"""
import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import _kernels
from . import badsquares as bs
from . import cauchy, curve, measure, riesz
from .dyadic import Square, locate
from .spatial import Disc

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE = 0, 2, 3
SUBCOMMANDS = ("generate", "analyze", "cauchy", "riesz", "curve", "badsquares")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    fixture: str = "segment"
    density: float = 1.0
    len: float = None
    mesh: float = None
    n: int = None
    gap: float = None
    shift: str = None
    input: str = None
    tau: float = 1 / 32
    l0: float = None
    P: str = None
    depth: int = 4
    A: float = 2.0
    A_prime: float = 4.0
    delta: float = None
    gamma: float = 0.1
    z0: str = "0,2"
    window: str = "0,0,0.5"
    opnorm: bool = False
    seed: int = 0
    out: str = None
    emit_plot_data: bool = False
    threads: int = None

    def out_dir(self):
        return self.out or os.environ.get("CAUCHYRECT_OUT") or "."


def _pair(text, name):
    try:
        v = [float(t) for t in str(text).split(",")]
    except ValueError:
        raise ConfigError(f"--{name} expects comma separated numbers, got {text!r}") from None
    return v


def load_measure(cfg):
    if cfg.input:
        return measure.load_csv(cfg.input)
    kw = {k: getattr(cfg, k) for k in ("len", "mesh", "n", "gap") if getattr(cfg, k) is not None}
    kw["density"] = cfg.density
    try:
        mu = measure.make_fixture(cfg.fixture, **kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if cfg.shift:
        s = _pair(cfg.shift, "shift")
        if len(s) != 2:
            raise ConfigError("--shift expects x,y")
        mu = measure.PointCloudMeasure(mu.points + np.array(s), mu.weights, mu.mesh, mu.label)
    return mu


def default_P(mu, floor, depth):
    """Smallest dyadic square holding the support whose depth-th generation
    stays above `floor`."""
    lo = mu.points.min(axis=0)
    hi = mu.points.max(axis=0)
    j = math.ceil(math.log2(max(floor, 1e-300) * 2 ** depth)) if floor > 0 else -60
    for j in range(j, j + 64):
        P = locate(lo, j)
        if P.contains(hi):
            return P
    raise ConfigError("no dyadic square holds the support (it straddles an axis); pass --P or --shift")


def resolve_P(cfg, mu, floor):
    if cfg.P:
        v = _pair(cfg.P, "P")
        if len(v) != 3 or any(x != int(x) for x in v):
            raise ConfigError("--P expects integers j,kx,ky")
        return Square.dyadic(*(int(x) for x in v))
    return default_P(mu, floor, cfg.depth)


def _plain(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, default=_plain)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(x)) if not isinstance(x, str) else x for x in r) + "\n")


# ------------------------------------------------------------------ commands

def cmd_generate(cfg, mu, out):
    path = os.path.join(out, f"{cfg.fixture}.csv")
    measure.save_csv(mu, path)
    return {"n": mu.n, "mesh": mu.mesh, "mass": mu.mass, "label": mu.label, "csv": os.path.basename(path)}


def cmd_analyze(cfg, mu, out):
    reg = measure.regularity(mu)
    rows = measure.tail_grid(mu, reg.niceness, seed=cfg.seed)
    ratios = [s / b for *_, s, b in rows]
    rep = {"regularity": reg.to_json(), "tail_worst_ratio": max(ratios),
           "tail_violations": sum(r > 1 for r in ratios), "tail_checks": len(rows)}
    if cfg.emit_plot_data:
        _write_csv(os.path.join(out, "tail.csv"), ["x", "y", "r", "eps", "tail", "bound"], rows)
    return rep


def cmd_cauchy(cfg, mu, out):
    z0 = _pair(cfg.z0, "z0")
    w = _pair(cfg.window, "window")
    if len(z0) != 2 or len(w) != 3:
        raise ConfigError("--z0 expects x,y and --window expects x,y,r")
    window = Disc((w[0], w[1]), w[2])
    try:
        kap = cauchy.kappa_estimate(mu, z0, window)
        fns = riesz.make_phi_family(mu, cfg.A, 4, center=(w[0], w[1]))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    defect = cauchy.reflectionless_defect(mu, fns, z0)
    rng = np.random.default_rng(cfg.seed)
    probes = []
    while len(probes) < 20:
        z = np.array(window.center) + rng.uniform(-6 * w[2], 6 * w[2], size=2)
        if mu.index.nearest(z)[1] >= 0.5 * w[2]:
            probes.append(z)
    probes = np.array(probes)
    res = cauchy.resolvent_residuals(mu, probes, kap.value, z0)
    scale = abs(2 * kap.value) ** 2
    rep = {"kappa": kap.to_json(), "defect": defect, "z0": z0,
           "resolvent": {"probes": probes.tolist(), "residuals": res.tolist(),
                         "max_relative": float(res.max() / scale) if scale else math.inf}}
    if cfg.opnorm:
        delta = cfg.delta if cfg.delta is not None else 4 * mu.mesh
        rep["operator_norm"] = {"delta": delta, "value": cauchy.operator_norm(mu, delta)}
    if cfg.emit_plot_data:
        g = np.linspace(-4 * w[2], 4 * w[2], 41)
        pts = np.stack(np.meshgrid(g + w[0], g + w[1], indexing="ij"), -1).reshape(-1, 2)
        pts = pts[mu.index.distances(pts) >= 2 * mu.mesh]
        vals = cauchy.tilde_cauchy_one_many(mu, pts, z0)
        cauchy.FieldSample(pts, vals).to_csv(os.path.join(out, "tilde_field.csv"))
    rep["_unstable"] = kap.unstable
    return rep


def cmd_riesz(cfg, mu, out):
    P = resolve_P(cfg, mu, 8 * mu.mesh)
    try:
        lat = riesz.lattice(mu, P, cfg.depth, cfg.A)
        reports = riesz.theta_field(mu, P, cfg.depth, cfg.A, cfg.A_prime)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    G = riesz.gram(mu, [fn for _, fn in lat])
    rep = {"P": P.to_json(), "depth": cfg.depth, "lattice_size": len(lat), "gram_norm": riesz.gram_norm(G),
           "gamma": cfg.gamma,
           "theta_carleson": riesz.theta_carleson(mu, P, cfg.gamma, cfg.depth, reports=reports),
           "theta": [r.to_json() for r in reports]}
    if cfg.emit_plot_data:
        _write_csv(os.path.join(out, "theta.csv"), ["cx", "cy", "side", "theta"],
                   [(r.Q.cx, r.Q.cy, r.Q.side, r.theta_upper) for r in reports])
    return rep


def cmd_curve(cfg, mu, out):
    P = resolve_P(cfg, mu, 0.0)
    l0 = cfg.l0 if cfg.l0 is not None else P.side / 2 ** cfg.depth
    try:
        g, led = curve.build_graph(mu, P, cfg.tau, l0, check_separation=True)
        walk = curve.euler_walk(g, P)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    _write_json(os.path.join(out, "graph.json"), g.to_json())
    _write_csv(os.path.join(out, "curve.csv"), ["t", "x", "y"], walk.to_csv_rows())
    return {"P": P.to_json(), "tau": cfg.tau, "l0": l0, "net_size": len(g.net), "edges": len(g.edges),
            "ledger": led.to_json(), "walk_length": walk.total, "lip_constant": walk.lip_constant,
            "walk_vertices": len(walk.vertex_walk)}


def cmd_badsquares(cfg, mu, out):
    floor = bs.resolution_floor(mu, cfg.tau)
    P = resolve_P(cfg, mu, floor)
    try:
        fam = bs.bad_family(mu, P, cfg.tau, cfg.depth)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    with open(os.path.join(out, "badsquares.jsonl"), "w") as fh:
        for w in fam:
            fh.write(json.dumps(w.to_json(), sort_keys=True, default=_plain) + "\n")
    rep = {"P": P.to_json(), "tau": cfg.tau, "depth": cfg.depth, "resolution_floor": floor,
           "bad_count": len(fam), "carleson_norm": bs.carleson_norm(fam, P),
           "by_depth": [bs.carleson_norm([w for w in fam if w.Q.side >= P.side / 2 ** d], P)
                        for d in range(cfg.depth + 1)]}
    if cfg.l0 is not None:
        try:
            _, led = curve.build_graph(mu, P, cfg.tau, cfg.l0)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        rep["inductive_implies_bad"] = bs.inductive_implies_bad(mu, led, cfg.tau).to_json()
    return rep


COMMANDS = {"generate": cmd_generate, "analyze": cmd_analyze, "cauchy": cmd_cauchy, "riesz": cmd_riesz,
            "curve": cmd_curve, "badsquares": cmd_badsquares}


def run(cfg):
    """Execute one configuration; returns (exit status, report dict)."""
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    if cfg.threads is not None:
        _kernels.set_threads(cfg.threads)
    out = cfg.out_dir()
    os.makedirs(out, exist_ok=True)
    mu = load_measure(cfg)
    try:
        rep = COMMANDS[cfg.command](cfg, mu, out)
    except cauchy.ConvergenceError as e:
        rep = {"error": str(e), "estimate": e.estimate, "iterations": e.iterations}
        _write_json(os.path.join(out, f"{cfg.command}.json"), rep)
        return EXIT_UNSTABLE, rep
    unstable = rep.pop("_unstable", False)
    rep["command"] = cfg.command
    rep["config"] = {k: v for k, v in asdict(cfg).items() if k not in ("out", "threads")}
    _write_json(os.path.join(out, f"{cfg.command}.json"), rep)
    return (EXIT_UNSTABLE if unstable else EXIT_OK), rep


def build_parser():
    ap = argparse.ArgumentParser(prog="cauchyrect", description="Cauchy transform and rectifiability numerics")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with default values for any flag")
        p.add_argument("--fixture", choices=measure.FIXTURES)
        p.add_argument("--input", help="CSV written by `generate` instead of a fixture")
        p.add_argument("--density", type=float)
        p.add_argument("--len", type=float)
        p.add_argument("--mesh", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--gap", type=float)
        p.add_argument("--shift", help="translate the fixture by x,y")
        p.add_argument("--tau", type=float)
        p.add_argument("--l0", type=float)
        p.add_argument("--P", help="dyadic square j,kx,ky")
        p.add_argument("--depth", type=int)
        p.add_argument("--A", type=float)
        p.add_argument("--A-prime", dest="A_prime", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--z0")
        p.add_argument("--window", help="x,y,r")
        p.add_argument("--opnorm", action="store_true", default=None)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--emit-plot-data", dest="emit_plot_data", action="store_true", default=None)
        p.add_argument("--threads", type=int)
    return ap


def config_from_args(argv):
    args = vars(build_parser().parse_args(argv))
    merged = {}
    if args.get("config"):
        try:
            with open(args["config"]) as fh:
                merged.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from None
    merged.update({k: v for k, v in args.items() if v is not None and k != "config"})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**merged)


def main(argv=None):
    try:
        cfg = config_from_args(argv)
        status, _ = run(cfg)
    except ValueError as e:
        print(json.dumps({"error": str(e), "kind": "config"}, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    return status


if __name__ == "__main__":
    sys.exit(main())
