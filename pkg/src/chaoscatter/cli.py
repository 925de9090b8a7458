"""Reports for the chaotic scattering models, written as CSV, JSON and PNG.

    chaoscatter poincare   invariant manifolds of the map at A = 0
    chaoscatter scatterfn  scattering functions (1D chi scan or torus scan)
    chaoscatter crosssec   Monte-Carlo cross section and ridge cells
    chaoscatter normalform Dis6 curves, caustics and preimage counts

Each command writes CSV files with a '#' header, a JSON sidecar with the
full configuration and, unless --no-plot is given, a PNG figure.
Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .core import TWO_PI

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
ARC_BUDGET = 24.0  # compactified arclength per branch in poincare

DEFAULTS = {
    "model": "map",
    "A": 0.0,
    "L_in": None,
    "L_max": 6.23,
    "energy": 2.0,
    "p_in": None,
    "grid": None,
    "samples": 100_000,
    "seed": None,
    "depth": 3,
    "window": None,
    "out": "chaoscatter_out",
    "workers": None,
    "L": None,
    "budget": 10_000,
    "bins": 200,
    "a": 1.0,
    "b": 0.1,
    "c": 0.1,
    "p0": 1.0,
    "no_plot": False,
    "overlay_normalform": False,
}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: str
    A: float
    L_in: float
    L_max: float
    energy: float
    p_in: float
    grid: tuple | None
    samples: int
    seed: int | None
    depth: int
    window: tuple | None
    out: str
    workers: int
    L: list | None
    budget: int
    bins: int
    a: float
    b: float
    c: float
    p0: float
    no_plot: bool
    overlay_normalform: bool

    def as_dict(self):
        d = dict(self.__dict__)
        d["grid"] = list(self.grid) if self.grid else None
        d["window"] = list(self.window) if self.window else None
        return d


def _grid(s):
    try:
        a, b = s.lower().split("x")
        g = (int(a), int(b))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like 256x128")
    if min(g) < 1:
        raise argparse.ArgumentTypeError("grid sizes must be positive")
    return g


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="JSON file supplying any option")
    common.add_argument("--model", choices=["map", "channel", "billiard"], default=S)
    common.add_argument("--A", type=float, default=S, help="symmetry breaking parameter")
    common.add_argument("--L-in", dest="L_in", type=float, default=S)
    common.add_argument("--L-max", dest="L_max", type=float, default=S)
    common.add_argument("--energy", type=float, default=S, help="channel energy E")
    common.add_argument("--p-in", dest="p_in", type=float, default=S)
    common.add_argument("--grid", type=_grid, default=S, help="NCHIxNPSI, e.g. 256x128")
    common.add_argument("--samples", type=int, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--depth", type=int, default=S)
    common.add_argument("--window", type=float, nargs=2, default=S, metavar=("LO", "HI"),
                        help="chi window")
    common.add_argument("--out", default=S, help="output directory")
    common.add_argument("--workers", type=int, default=S)
    common.add_argument("--budget", type=int, default=S, help="map step budget")
    common.add_argument("--bins", type=int, default=S)
    common.add_argument("--no-plot", dest="no_plot", action="store_true", default=S)

    p = argparse.ArgumentParser(prog="chaoscatter", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("poincare", parents=[common], help="manifold tangles")
    sp.add_argument("--L", type=float, nargs="+", default=S, help="L values")
    sub.add_parser("scatterfn", parents=[common], help="scattering functions")
    sc = sub.add_parser("crosssec", parents=[common], help="cross section and ridges")
    sc.add_argument("--overlay-normalform", dest="overlay_normalform", action="store_true",
                    default=S)
    for k in ("a", "b", "c", "p0"):
        sc.add_argument(f"--{k}", type=float, default=S)
    sn = sub.add_parser("normalform", parents=[common], help="normal-form caustics")
    for k in ("a", "b", "c", "p0"):
        sn.add_argument(f"--{k}", type=float, default=S)
    return p


def resolve_config(ns) -> RunConfig:
    vals = dict(DEFAULTS)
    given = vars(ns)
    if given.get("config"):
        try:
            with open(given["config"]) as fh:
                filecfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config: {e}")
        for k, v in filecfg.items():
            k = k.replace("-", "_")
            if k not in vals:
                raise UsageError(f"unknown config key {k!r}")
            vals[k] = v
    for k, v in given.items():
        if k in vals:
            vals[k] = v
    cmd = ns.command
    if vals["grid"] is not None:
        vals["grid"] = tuple(int(x) for x in vals["grid"])
    if vals["window"] is not None:
        vals["window"] = tuple(float(x) for x in vals["window"])
        if not vals["window"][1] > vals["window"][0]:
            raise UsageError("window needs HI > LO")
    if vals["workers"] is None:
        vals["workers"] = os.cpu_count() or 1
    if vals["L_in"] is None:
        vals["L_in"] = 0.0 if vals["model"] == "map" else 0.2
    if vals["p_in"] is None:
        vals["p_in"] = {"map": 0.05, "channel": 1.0, "billiard": 0.5}[vals["model"]]
    if vals["model"] not in ("map", "channel", "billiard"):
        raise UsageError(f"unknown model {vals['model']!r}")
    if vals["A"] < 0:
        raise UsageError("A must be >= 0")
    if vals["L_max"] <= 0:
        raise UsageError("L_max must be positive")
    if vals["samples"] < 1 or vals["depth"] < 0 or vals["bins"] < 1 or vals["budget"] < 1:
        raise UsageError("samples, bins and budget must be >= 1, depth >= 0")
    if cmd == "crosssec" and vals["seed"] is None:
        raise UsageError("crosssec is stochastic: --seed is required")
    if cmd == "poincare":
        if vals["model"] != "map":
            raise UsageError("poincare needs --model map")
        if vals["A"] != 0.0:
            raise UsageError("poincare needs A = 0")
        Ls = vals["L"] if vals["L"] is not None else [0.0, 2.6, 5.71]
        for L in Ls:
            if not (0.0 <= L < vals["L_max"]):
                raise UsageError(f"L = {L} outside [0, L_max)")
        vals["L"] = [float(L) for L in Ls]
    return RunConfig(command=cmd, **{k: vals[k] for k in DEFAULTS})


# ---------------------------------------------------------------- output

def _header(cfg: RunConfig, columns, extra=None):
    lines = [f"# chaoscatter {__version__} {cfg.command}",
             "# config " + json.dumps(cfg.as_dict(), sort_keys=True)]
    if extra:
        for k, v in extra.items():
            lines.append(f"# {k} {json.dumps(v, sort_keys=True)}")
    lines.append("# columns " + ",".join(columns))
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, cfg, columns, rows, extra=None):
    buf = io.StringIO()
    buf.write(_header(cfg, columns, extra))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
    return path


def write_json(path, cfg, payload):
    doc = {"program": "chaoscatter", "version": __version__, "config": cfg.as_dict()}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(type(o).__name__)


def _path(cfg, name):
    return os.path.join(cfg.out, name)


# ---------------------------------------------------------------- models

def _map_params(cfg):
    from .map_model import MapParams

    return MapParams(cfg.A, cfg.L_max)


class ChannelFunction:
    """(chi, psi) -> (p_out, dL) by integrating the channel flow."""

    def __init__(self, cfg):
        from .channel_model import ChannelParams

        self.params = ChannelParams(cfg.A, cfg.energy)
        self.E, self.p_in, self.L_in = cfg.energy, cfg.p_in, cfg.L_in

    def __call__(self, chi, psi):
        from .channel_model import scatter_channel
        from .core import AsymptoticLabel

        chi = np.atleast_1d(chi)
        psi = np.atleast_1d(psi)
        p = np.empty(chi.size)
        dL = np.empty(chi.size)
        for i, (c, s) in enumerate(zip(chi, psi)):
            r = scatter_channel(AsymptoticLabel(self.E, self.p_in, self.L_in, c, s),
                                self.params).record
            p[i], dL[i] = r.p_out, r.delta_L
        return p, dL


class BilliardFunction:
    def __init__(self, cfg):
        from .billiard_model import BottleParams

        self.params = BottleParams(A=cfg.A)
        self.p_in, self.L_in = cfg.p_in, cfg.L_in

    def __call__(self, chi, psi):
        from .billiard_model import GrazingCollision, scatter_billiard

        chi = np.atleast_1d(chi)
        psi = np.atleast_1d(psi)
        p = np.full(chi.size, np.nan)
        dL = np.full(chi.size, np.nan)
        for i, (c, s) in enumerate(zip(chi, psi)):
            try:
                r = scatter_billiard(float(c), float(s), self.p_in, self.L_in, self.params)
            except (GrazingCollision, ValueError):
                continue
            p[i], dL[i] = r.p_out, r.delta_L
        return p, dL


class WindowFunction:
    """Maps uniform chi in [0, 2pi) onto a chi window before calling fn."""

    def __init__(self, fn, window):
        self.fn, self.lo, self.hi = fn, window[0], window[1]

    def __call__(self, chi, psi):
        return self.fn(self.lo + (self.hi - self.lo) * np.asarray(chi) / TWO_PI, psi)


def _model_function(cfg):
    if cfg.model == "map":
        from .cross_section import map_scattering_function

        fn = map_scattering_function(_map_params(cfg), cfg.L_in, cfg.p_in, cfg.budget)
    elif cfg.model == "channel":
        fn = ChannelFunction(cfg)
    else:
        fn = BilliardFunction(cfg)
    if cfg.window is not None:
        fn = WindowFunction(fn, cfg.window)
    return fn


# ---------------------------------------------------------------- commands

def cmd_poincare(cfg: RunConfig):
    from .manifolds import STABLE, UNSTABLE, manifold, line_c_offset

    params = _map_params(cfg)
    rows, panels, linec, meta = [], {}, {}, {}
    for L in cfg.L:
        curves = []
        for kind in (UNSTABLE, STABLE):
            for side in (-1, 1):
                curves.append(manifold(side, kind, L, params, budget=ARC_BUDGET))
        panels[L] = curves
        for c in curves:
            za = np.arctan(c.q) * 2.0 / math.pi
            for i in range(c.q.size):
                rows.append((L, c.kind, c.side, int(c.n[i]), c.s[i], c.q[i], c.p[i],
                             c.z[i], za[i]))
        meta[str(L)] = {f"{c.kind}{c.side:+d}": {"points": int(c.q.size),
                                                  "arclength": c.arclength(),
                                                  "truncated": bool(c.truncated)}
                        for c in curves}
        if L == 0.0:
            lc = line_c_offset(L, params)
            linec[L] = (lc.points[:, 0], lc.points[:, 1])
    cols = ["L", "kind", "side", "n", "s", "q", "p", "z_tanh", "z_arctan"]
    files = [write_csv(_path(cfg, "poincare_manifolds.csv"), cfg, cols, rows,
                       {"note": "z_arctan = 2 arctan(q) / pi"})]
    if linec:
        lrows = [(L, q, p, math.tanh(q)) for L, (qs, ps) in linec.items()
                 for q, p in zip(qs, ps)]
        files.append(write_csv(_path(cfg, "poincare_linec.csv"), cfg,
                               ["L", "q", "p", "z_tanh"], lrows))
    if not cfg.no_plot:
        from .plotting import plot_tangles

        files.append(plot_tangles(panels, _path(cfg, "poincare.png"), linec))
    write_json(_path(cfg, "poincare.json"), cfg, {"curves": meta, "files": files})
    return files


def cmd_scatterfn(cfg: RunConfig):
    files = []
    fn = None
    if cfg.model == "map" and cfg.A == 0.0 and cfg.grid is None:
        from .scattering import find_singularities_1d, scatter_phases

        lo, hi = cfg.window or (0.0, TWO_PI)
        n = 4096
        chi = np.linspace(lo, hi, n, endpoint=cfg.window is not None)
        p, dL, steps, oc = scatter_phases(chi, np.zeros(n), cfg.p_in, cfg.L_in,
                                          _map_params(cfg), cfg.budget)
        tree = find_singularities_1d(cfg.L_in, _map_params(cfg), cfg.depth,
                                     window=(lo, hi), p_in=cfg.p_in, budget=cfg.budget)
        rows = zip(chi, np.zeros(n), p, dL, oc, steps)
        files.append(write_csv(_path(cfg, "scatterfn_1d.csv"), cfg,
                               ["chi_in", "psi_in", "p_out", "delta_L", "outcome", "steps"], rows))
        nodes = [{"depth": nd.depth, "lo": nd.lo, "hi": nd.hi,
                  "continuity": nd.continuity, "singular_points": nd.singular_points,
                  "children": len(nd.children)} for nd in tree.walk()]
        if not cfg.no_plot:
            from .plotting import plot_scatter_1d

            files.append(plot_scatter_1d(chi, p, _path(cfg, "scatterfn_1d.png"), tree=tree))
        write_json(_path(cfg, "scatterfn.json"), cfg,
                   {"tree": nodes, "partial": tree.partial, "files": files})
        return files
    grid = cfg.grid or (256, 128)
    if cfg.model == "map":
        from .scattering import TorusGrid, continuity_strips, scan_torus

        if cfg.window is not None:
            raise UsageError("--window applies to the 1D scan (A = 0, no --grid)")
        g = TorusGrid(grid[0], grid[1], cfg.p_in, cfg.L_in)
        fld = scan_torus(g, _map_params(cfg), cfg.budget, cfg.workers)
        chi, psi = g.chi, g.psi
        P, D, O, N = fld.p_out, fld.delta_L, fld.outcome, fld.steps
        strips = continuity_strips(fld)
        extra = {"components": strips.n_components, "strips": strips.n_strips,
                 "rings": strips.n_rings}
    else:
        fn = _model_function(cfg)
        lo, hi = cfg.window or (0.0, TWO_PI)
        chi = lo + (hi - lo) * np.arange(grid[0]) / grid[0]
        psi = TWO_PI * np.arange(grid[1]) / grid[1]
        C, S = np.meshgrid(chi, psi, indexing="ij")
        P, D = fn(C.ravel(), S.ravel())
        P, D = P.reshape(C.shape), D.reshape(C.shape)
        O = np.where(np.isfinite(P), np.sign(P), 0).astype(int)
        N = np.zeros(C.shape, int)
        extra = {}
    rows = ((chi[i], psi[j], P[i, j], D[i, j], int(O[i, j]), int(N[i, j]))
            for i in range(len(chi)) for j in range(len(psi)))
    files.append(write_csv(_path(cfg, "scatterfn_torus.csv"), cfg,
                           ["chi_in", "psi_in", "p_out", "delta_L", "outcome", "steps"], rows))
    if not cfg.no_plot:
        from .plotting import plot_torus

        files.append(plot_torus(chi, psi, P, D, _path(cfg, "scatterfn_torus.png")))
    write_json(_path(cfg, "scatterfn.json"), cfg, {"summary": extra, "files": files})
    return files


def cmd_crosssec(cfg: RunConfig):
    from .cross_section import detect_ridges, sample_cross_section

    fn = _model_function(cfg)
    h = sample_cross_section(cfg.samples, fn, cfg.seed, n_bins=cfg.bins,
                             workers=cfg.workers if cfg.model == "map" else 1)
    r = detect_ridges(h, link=3)
    pc, Lc = h.p_axis.centers, h.L_axis.centers
    rows = ((pc[i], Lc[j], int(h.counts[i, j]))
            for i in range(h.p_axis.n) for j in range(h.L_axis.n))
    files = [write_csv(_path(cfg, "crosssec_hist.csv"), cfg, ["p_out", "delta_L", "count"], rows,
                       {"n_total": h.n_total, "n_trapped": h.n_trapped,
                        "n_out_of_range": h.n_out_of_range})]
    rrows = []
    for k, comp in enumerate(r.components, start=1):
        for i, j in comp:
            rrows.append((pc[i], Lc[j], k, bool(r.closed[k - 1])))
    files.append(write_csv(_path(cfg, "crosssec_ridges.csv"), cfg,
                           ["p_out", "delta_L", "component", "closed"], rrows))
    curves = None
    if cfg.overlay_normalform:
        from .rainbow import NormalFormParams, dis6_curves

        curves = dis6_curves(NormalFormParams(cfg.p0, math.pi, cfg.a, cfg.b, cfg.c))
        crow = [(k, int(c.closed), x, y) for k, c in enumerate(curves) for x, y in c.points]
        files.append(write_csv(_path(cfg, "crosssec_dis6.csv"), cfg,
                               ["curve", "closed", "p_out", "delta_L"], crow))
    if not cfg.no_plot:
        from .plotting import plot_histogram

        files.append(plot_histogram(h, _path(cfg, "crosssec.png"), r, curves))
    write_json(_path(cfg, "crosssec.json"), cfg, {
        "histogram": {"p_axis": [h.p_axis.lo, h.p_axis.hi, h.p_axis.n],
                      "L_axis": [h.L_axis.lo, h.L_axis.hi, h.L_axis.n],
                      "n_total": h.n_total, "n_trapped": h.n_trapped,
                      "n_out_of_range": h.n_out_of_range},
        "ridges": {"components": r.n_ridges, "closed": r.n_closed,
                   "hierarchy_levels": r.hierarchy_levels()},
        "files": files})
    return files


def cmd_normalform(cfg: RunConfig):
    from .rainbow import (NormalFormParams, caustic_closed_forms, count_region_map,
                          dis6_curves)

    n0, n1 = cfg.grid or (101, 101)
    combos = [(0.0, 0.0), (cfg.b, 0.0), (0.0, cfg.c), (cfg.b, cfg.c)]
    P = np.linspace(-0.2 * cfg.p0, cfg.p0 + 0.2 * max(cfg.p0, cfg.b), n0)
    Lg = np.linspace(-1.3 * cfg.a, 1.3 * cfg.a, n1)
    crow, krow, rrow, panels, summary = [], [], [], [], {}
    for b, c in combos:
        nf = NormalFormParams(cfg.p0, math.pi, cfg.a, b, c)
        tag = f"b={b:g},c={c:g}"
        curves = dis6_curves(nf, (P[0], P[-1]), (Lg[0], Lg[-1]), n=400)
        for k, cv in enumerate(curves):
            crow.extend((b, c, k, int(cv.closed), x, y) for x, y in cv.points)
        caus = caustic_closed_forms(nf)
        for name, xy in caus.items():
            krow.extend((b, c, name, x, y) for x, y in xy)
        counts = count_region_map(nf, P, Lg, n_psi=1024)
        rrow.extend((b, c, P[j], Lg[i], int(counts[i, j]))
                    for i in range(Lg.size) for j in range(P.size))
        panels.append((tag, curves, caus, P, Lg, counts))
        summary[tag] = {"curves": len(curves), "closed": sum(cv.closed for cv in curves),
                        "counts": sorted(int(v) for v in np.unique(counts))}
    files = [
        write_csv(_path(cfg, "normalform_dis6.csv"), cfg,
                  ["b", "c", "curve", "closed", "p_out", "delta_L"], crow),
        write_csv(_path(cfg, "normalform_caustics.csv"), cfg,
                  ["b", "c", "curve", "p_out", "delta_L"], krow),
        write_csv(_path(cfg, "normalform_regions.csv"), cfg,
                  ["b", "c", "p_out", "delta_L", "preimages"], rrow),
    ]
    if not cfg.no_plot:
        from .plotting import plot_normalform

        files.append(plot_normalform(panels, _path(cfg, "normalform.png")))
    write_json(_path(cfg, "normalform.json"), cfg, {"panels": summary, "files": files})
    return files


COMMANDS = {"poincare": cmd_poincare, "scatterfn": cmd_scatterfn,
            "crosssec": cmd_crosssec, "normalform": cmd_normalform}


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        cfg = resolve_config(ns)
        os.makedirs(cfg.out, exist_ok=True)
        files = COMMANDS[cfg.command](cfg)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"chaoscatter: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, ValueError) as e:
        print(f"chaoscatter: numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
