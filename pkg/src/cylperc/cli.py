"""Command-line entry point: ``cylperc <subcommand> [flags]``.

Settings come from built-in defaults, then an optional TOML file given with
``--config``, then command-line flags. Each subcommand writes a JSON report
that embeds the effective configuration, so running the same configuration
again reproduces the report byte for byte.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

SCHEMA_VERSION = 1

DEFAULTS = {
    "d": 3,
    "seed": None,
    "replicas": 1000,
    "out": ".",
    "format": "json",
    "sample": {"u": 0.07, "R": 24.0},
    "render": {"input": "sample.csv", "z": 0.0, "rho": 1.0, "u": None, "extent": None, "pixels": 240, "sides": 12},
    "decouple": {"check": "all", "L": 6.0, "alpha": 0.5, "eps": 0.5, "rho": 1.5, "u": None, "delta": None},
    "renorm": {"what": "all", "L0": 17, "gamma": 0.2, "alpha": 0.96, "beta": 0.02, "k_max": 2, "trials": 200},
    "flow": {"k_max": 0, "J": 0.5, "instance": "clean", "u": 1e-6, "rho": 1.5},
    "walk": {"u": None, "rho": 1.0, "R": 12, "walks": 10000, "radii": [4, 8, 12]},
}

COMMANDS = ("sample", "render", "decouple", "renorm", "flow", "walk", "selftest")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"{where}: unknown setting")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected a table")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _need(cond: bool, where: str, msg: str):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


def validate(cfg: dict, command: str) -> None:
    _need(cfg["seed"] is not None, "seed", "a master seed is required (--seed or the config file)")
    _need(_is_int(cfg["seed"]) and cfg["seed"] >= 0, "seed", f"expected a non-negative integer, got {cfg['seed']!r}")
    _need(_is_int(cfg["d"]) and cfg["d"] >= 2, "d", f"expected an integer >= 2, got {cfg['d']!r}")
    _need(_is_int(cfg["replicas"]) and cfg["replicas"] > 0, "replicas", "expected a positive integer")
    _need(cfg["format"] in ("json", "csv"), "format", "expected 'json' or 'csv'")
    s = cfg["sample"]
    _need(_is_num(s["u"]) and s["u"] >= 0, "sample.u", "expected a non-negative number")
    _need(_is_num(s["R"]) and s["R"] > 0, "sample.R", "expected a positive number")
    r = cfg["render"]
    _need(_is_num(r["rho"]) and r["rho"] > 0, "render.rho", "expected a positive number")
    _need(_is_int(r["pixels"]) and 8 <= r["pixels"] <= 4000, "render.pixels", "expected an integer in [8, 4000]")
    _need(_is_int(r["sides"]) and r["sides"] >= 3, "render.sides", "expected an integer >= 3")
    dc = cfg["decouple"]
    _need(dc["check"] in ("all", "cap", "balance", "wiggle", "decoupling"), "decouple.check", "unknown check")
    for key in ("L", "eps", "rho"):
        _need(_is_num(dc[key]) and dc[key] > 0, f"decouple.{key}", "expected a positive number")
    _need(_is_num(dc["alpha"]) and 0 < dc["alpha"] < 1, "decouple.alpha", "expected a number in (0, 1)")
    rn = cfg["renorm"]
    _need(rn["what"] in ("all", "ladder", "p0", "covering"), "renorm.what", "unknown item")
    _need(_is_int(rn["L0"]) and rn["L0"] > 0 and rn["L0"] % 17 == 0, "renorm.L0", "expected a positive multiple of 17")
    _need(_is_int(rn["k_max"]) and 0 <= rn["k_max"] <= 4, "renorm.k_max", "expected an integer in [0, 4]")
    _need(_is_int(rn["trials"]) and rn["trials"] > 0, "renorm.trials", "expected a positive integer")
    fl = cfg["flow"]
    _need(_is_int(fl["k_max"]) and fl["k_max"] in (0, 1), "flow.k_max", "expected 0 or 1")
    _need(_is_num(fl["J"]) and 0 < fl["J"] < 1, "flow.J", "expected a number in (0, 1)")
    _need(fl["instance"] in ("clean", "sample"), "flow.instance", "expected 'clean' or 'sample'")
    _need(_is_num(fl["u"]) and fl["u"] > 0, "flow.u", "expected a positive number")
    _need(_is_num(fl["rho"]) and fl["rho"] >= 1, "flow.rho", "expected a number >= 1")
    w = cfg["walk"]
    _need(w["u"] is None or (_is_num(w["u"]) and w["u"] >= 0), "walk.u", "expected a non-negative number")
    _need(_is_num(w["rho"]) and w["rho"] > 0, "walk.rho", "expected a positive number")
    _need(_is_int(w["R"]) and 1 <= w["R"] <= 40, "walk.R", "expected an integer in [1, 40]")
    _need(_is_int(w["walks"]) and w["walks"] > 0, "walk.walks", "expected a positive integer")
    _need(
        isinstance(w["radii"], list) and all(_is_int(t) and 1 <= t <= w["R"] for t in w["radii"]),
        "walk.radii",
        "expected a list of integers in [1, walk.R]",
    )
    if command in ("flow", "renorm") and cfg["d"] != 3:
        raise ConfigError("d: the flow and renorm presets are three-dimensional")


# ------------------------------------------------------------------ output


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def git_describe() -> str:
    here = Path(__file__).resolve().parent
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here,
            capture_output=True,
            text=True,
            timeout=10,
        )
        return res.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_report(cfg: dict, command: str, results: dict, ok: bool = True) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    rep = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "git_describe": git_describe(),
        "seed": cfg["seed"],
        "ok": ok,
        "config": cfg,
        "results": results,
    }
    path = out / f"{command}.json"
    path.write_text(json.dumps(_clean(rep), indent=2, sort_keys=True) + "\n")
    return path


# --------------------------------------------------------------- commands


def cmd_sample(cfg: dict) -> tuple[dict, bool]:
    from .lineproc import sample_hitting_ball, write_csv

    s = cfg["sample"]
    d = cfg["d"]
    smp = sample_hitting_ball(float(s["u"]), np.zeros(d), float(s["R"]), cfg["seed"])
    path = Path(cfg["out"]) / "sample.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(smp, path)
    return {"lines": len(smp), "window": smp.window.describe(), "u_max": smp.u_max, "file": path.name}, True


def _slice_svg(view, z: float, extent: float, pixels: int) -> str:
    d = view.sample.d
    h = 2 * extent / pixels
    c = -extent + h * (np.arange(pixels) + 0.5)
    X, Y = np.meshgrid(c, c[::-1], indexing="xy")
    pts = np.zeros((pixels * pixels, d))
    pts[:, 0] = X.ravel()
    pts[:, 1] = Y.ravel()
    if d > 2:
        pts[:, 2] = z
    occ = view.covered(pts, strict=False).reshape(pixels, pixels)
    inside = (X**2 + Y**2 + (z * z if d > 2 else 0.0)) <= extent**2
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{pixels}" height="{pixels}" viewBox="0 0 {pixels} {pixels}">',
        f'<rect width="{pixels}" height="{pixels}" fill="#ffffff"/>',
    ]
    for name, mask, colour in (("vacant", inside & ~occ, "#dfe8f5"), ("occupied", inside & occ, "#1f3a5f")):
        lines.append(f'<g id="{name}" fill="{colour}">')
        for i in range(pixels):
            row = mask[i]
            j = 0
            while j < pixels:
                if row[j]:
                    k = j
                    while k < pixels and row[k]:
                        k += 1
                    lines.append(f'<rect x="{j}" y="{i}" width="{k - j}" height="1"/>')
                    j = k
                else:
                    j += 1
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _chords(view, extent: float):
    """Segment of each active axis inside the ball of radius ``extent`` about the origin."""
    a, v = view.active()
    t0 = -np.sum(a * v, axis=1)
    foot = a + t0[:, None] * v
    r2 = extent**2 - np.sum(foot * foot, axis=1)
    keep = r2 > 0
    half = np.sqrt(np.where(keep, r2, 0.0))
    return foot[keep] - half[keep, None] * v[keep], foot[keep] + half[keep, None] * v[keep], v[keep]


def _obj_mesh(p, q, v, rho: float, sides: int) -> str:
    out = ["# cylinder tubes clipped to the render ball"]
    n_v = 0
    ang = 2 * np.pi * np.arange(sides) / sides
    for a, b, w in zip(p, q, v):
        helper = np.eye(3)[int(np.argmin(np.abs(w)))]
        e1 = np.cross(w, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(w, e1)
        ring = rho * (np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2)
        for base in (a, b):
            for r in ring:
                x = base + r
                out.append(f"v {x[0]:.6f} {x[1]:.6f} {x[2]:.6f}")
        for i in range(sides):
            j = (i + 1) % sides
            out.append(f"f {n_v + i + 1} {n_v + j + 1} {n_v + sides + j + 1} {n_v + sides + i + 1}")
        n_v += 2 * sides
    return "\n".join(out) + "\n"


def cmd_render(cfg: dict) -> tuple[dict, bool]:
    from .lineproc import read_csv

    r = cfg["render"]
    src = Path(r["input"])
    if not src.is_absolute() and not src.exists():
        src = Path(cfg["out"]) / src
    smp = read_csv(src)
    u = smp.u_max if r["u"] is None else float(r["u"])
    extent = float(r["extent"]) if r["extent"] is not None else float(getattr(smp.window, "R", 24.0))
    view = smp.view(u, float(r["rho"]))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "slice.svg").write_text(_slice_svg(view, float(r["z"]), extent, int(r["pixels"])))
    p, q, v = _chords(view, extent)
    d = smp.d
    rows = [",".join([f"p{i}" for i in range(d)] + [f"q{i}" for i in range(d)] + ["rho"])]
    for a, b in zip(p, q):
        rows.append(",".join(repr(float(t)) for t in list(a) + list(b)) + f",{float(r['rho'])!r}")
    (out / "cylinders.csv").write_text("\n".join(rows) + "\n")
    files = ["slice.svg", "cylinders.csv"]
    if d == 3:
        (out / "mesh.obj").write_text(_obj_mesh(p, q, v, float(r["rho"]), int(r["sides"])))
        files.append("mesh.obj")
    return {"cylinders_in_view": int(len(p)), "u": u, "z": float(r["z"]), "extent": extent, "files": files}, True


def cmd_decouple(cfg: dict) -> tuple[dict, bool]:
    from . import decouple as dc
    from .renorm import desk_ladder

    p = cfg["decouple"]
    d, seed, n = cfg["d"], cfg["seed"], cfg["replicas"]
    geom = dc.build_two_box(p["L"], p["alpha"], p["eps"], p["rho"], d)
    u = desk_ladder().u_tilde if p["u"] is None else float(p["u"])
    delta = u / 2 if p["delta"] is None else float(p["delta"])
    out, ok = {"u": u, "delta": delta}, True
    which = p["check"]
    if which in ("all", "cap"):
        out["cap"] = {"closed_form": dc.cap_mass(p["eps"], p["L"], d), "quadrature": dc.cap_mass_quadrature(p["eps"], p["L"], d)}
    if which in ("all", "wiggle"):
        w = dc.wiggle_check(100.0, 0.5, n, seed, d)
        out["wiggle"] = {"max_displacement": w.max_displacement, "bound": w.bound, "exceptions": w.exceptions}
        ok &= w.ok
    if which in ("all", "balance"):
        b = dc.detailed_balance_test(geom, 50.0, n, seed)
        out["balance"] = {"within_3sigma": b.all_within_3sigma, "statistics": b.statistics}
        ok &= b.all_within_3sigma
    if which in ("all", "decoupling"):
        f1, f2 = dc.default_observables(geom)
        rep = dc.estimate_decoupling(geom, u, delta, f1, f2, n, seed)
        out["decoupling"] = rep.to_dict()
        ok &= rep.verdict_fkg != "fail" and rep.verdict_decoupling_no_error != "fail"
    return out, bool(ok)


def cmd_renorm(cfg: dict) -> tuple[dict, bool]:
    import warnings

    from . import renorm as rn

    p = cfg["renorm"]
    seed = cfg["seed"]
    out, ok = {}, True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", rn.PreconditionWarning)
        lad = rn.ladder(p["L0"], p["gamma"], p["alpha"], p["beta"], 3, p["k_max"])
    out["warnings"] = [str(w.message) for w in caught]
    if p["what"] in ("all", "ladder"):
        out["ladder"] = {
            "L": [int(x) for x in lad.L],
            "u_tilde": lad.u_tilde,
            "table": [{"k": t["k"], "u": t["u"], "rho": t["rho"]} for t in lad.table()],
            "invariant_failures": lad.invariant_failures(),
        }
        ok &= not lad.invariant_failures()
    if p["what"] in ("all", "p0"):
        est = rn.estimate_p0(lad, cfg["replicas"], seed)
        out["p0"] = est.to_dict()
        ok &= est.agrees
    if p["what"] in ("all", "covering") and lad.k_max >= 2:
        m = rn.BoxId((0, 0, 0), 2)
        trial = rn.covering_trial(lad, m, p["trials"], seed)
        out["covering"] = {k: v for k, v in trial.items() if k != "examples"}
        ok &= trial["counterexamples"] == 0
    return out, bool(ok)


def cmd_flow(cfg: dict) -> tuple[dict, bool]:
    from .carpet import CleanEnvironment, SampleEnvironment, assemble_flow
    from .lineproc import sample_hitting_ball
    from .renorm import desk_compact_ladder

    p = cfg["flow"]
    lad = desk_compact_ladder()
    if p["instance"] == "clean":
        env = CleanEnvironment(lad)
    else:
        L = lad.L[p["k_max"] + 1]
        R = 2 * L + L * math.sqrt(3) + 10.0
        env = SampleEnvironment(sample_hitting_ball(p["u"], np.zeros(3), R, cfg["seed"]), lad, p["u"], p["rho"])
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "flow.csv" if cfg["format"] == "csv" else None
    rep, _ = assemble_flow(env, p["k_max"], p["J"], csv_path=csv_path)
    res = rep.to_dict()
    res["ladder"] = list(lad.L)
    if csv_path is not None:
        res["flow_file"] = csv_path.name
    return res, rep.divergence_error < 1e-12


def cmd_walk(cfg: dict) -> tuple[dict, bool]:
    from . import vacantwalk as vw
    from .lineproc import sample_hitting_ball
    from .renorm import desk_ladder

    p = cfg["walk"]
    d, R = cfg["d"], int(p["R"])
    u = desk_ladder().u_tilde / 4 if p["u"] is None else float(p["u"])
    smp = sample_hitting_ball(u, np.zeros(d), R * math.sqrt(d) + p["rho"] + 1.0, cfg["seed"])
    g = vw.build_vacant_graph(smp, u, p["rho"], R)
    zero = (0,) * d
    res = {"u": u, "lines": len(smp), "vertices": g.n, "edges": int(len(g.edges))}
    try:
        g.index(zero)
        res["degree_origin"] = int(g.degree[g.index(zero)])
        esc = vw.escape_probability(g, zero, R, int(p["walks"]), cfg["seed"])
        res["escape"] = esc.to_dict()
        res["resistance_curve"] = vw.resistance_curve(g, zero, p["radii"])
        try:
            res["identity"] = vw.escape_identity(g, zero, R)
        except vw.NoConnection:
            res["identity"] = 0.0
    except vw.StartCovered:
        res["start_covered"] = True
    if cfg["format"] == "csv" and "resistance_curve" in res:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        rows = ["R,resistance"] + [f"{r['R']},{r['resistance']!r}" for r in res["resistance_curve"]]
        (out / "resistance.csv").write_text("\n".join(rows) + "\n")
        res["curve_file"] = "resistance.csv"
    return res, True


def selftest_checks() -> list[tuple[str, bool]]:
    """Fast checks with answers known in closed form."""
    from .carpet import CleanEnvironment, LatticeFlow, flow_box
    from .geometry import BoxInf, Line, dist_set_line
    from .renorm import ceil_power, desk_compact_ladder
    from .vacantwalk import Network, effective_resistance, full_lattice_graph

    out = []
    out.append(("line-box distance", abs(dist_set_line(BoxInf((10.0, 0.0, 0.0), 1.0), Line.through((0, 0, 0), (0, 0, 1))) - 9.0) < 1e-12))
    out.append(("exact ceiling", ceil_power(17, 1.0) == 17 and ceil_power(4, 0.5) == 2))
    path = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]])
    f = LatticeFlow.from_path(path)
    out.append(("path flow energy", f.energy() == 3.0))
    single = Network(np.array([[0, 0, 0], [1, 0, 0]]), np.array([[0, 1]]))
    out.append(("single edge resistance", abs(effective_resistance(single, (0, 0, 0), [1]).resistance - 1.0) < 1e-9))
    g = full_lattice_graph(2, 3)
    out.append(("lattice edge count", len(g.edges) == 3 * 5 * 5 * 4))
    lad = desk_compact_ladder()
    fb = flow_box(CleanEnvironment(lad), (0, 0, 0), 0, (1, 0, 0), (-1, 0, 0))
    _, div = fb.divergence()
    out.append(("box flow divergence", abs(np.abs(div).sum() - 2.0) < 1e-12))
    return out


def cmd_selftest(cfg: dict) -> tuple[dict, bool]:
    checks = selftest_checks()
    return {"checks": {name: ok for name, ok in checks}}, all(ok for _, ok in checks)


HANDLERS = {
    "sample": cmd_sample,
    "render": cmd_render,
    "decouple": cmd_decouple,
    "renorm": cmd_renorm,
    "flow": cmd_flow,
    "walk": cmd_walk,
    "selftest": cmd_selftest,
}


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML settings file, or a JSON report to rerun (flags win)")
    common.add_argument("--seed", type=int, help="master seed (required, no clock default)")
    common.add_argument("--replicas", type=int, help=f"Monte Carlo replicas (default {DEFAULTS['replicas']})")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--format", choices=["json", "csv"], help="extra data export format (default json)")
    common.add_argument("--d", type=int, help="dimension (default 3)")

    p = argparse.ArgumentParser(prog="cylperc", description="Poisson cylinder percolation toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], help="draw lines hitting a ball and save them as CSV")
    s.add_argument("--u", type=float, help="intensity (default 0.07)")
    s.add_argument("--R", type=float, help="radius of the ball window (default 24)")

    r = sub.add_parser("render", parents=[common], help="SVG slice, cylinder CSV and OBJ mesh of a sample")
    r.add_argument("--input", help="sample CSV (default sample.csv in --out)")
    r.add_argument("--z", type=float, help="height of the planar slice (default 0)")
    r.add_argument("--rho", type=float, help="cylinder radius (default 1)")
    r.add_argument("--u", type=float, help="level to show (default: the sample's u_max)")
    r.add_argument("--extent", type=float, help="radius of the rendered ball (default: the window radius)")
    r.add_argument("--pixels", type=int, help="image side in pixels (default 240)")

    dcp = sub.add_parser("decouple", parents=[common], help="cap mass, wiggle, detailed balance and decoupling checks")
    dcp.add_argument("--check", choices=["all", "cap", "balance", "wiggle", "decoupling"])
    for name in ("L", "alpha", "eps", "rho", "u", "delta"):
        dcp.add_argument(f"--{name}", type=float)

    rn = sub.add_parser("renorm", parents=[common], help="scale ladder, p0 tail and covering-line trial")
    rn.add_argument("--what", choices=["all", "ladder", "p0", "covering"])
    rn.add_argument("--L0", type=int)
    rn.add_argument("--gamma", type=float)
    rn.add_argument("--alpha", type=float)
    rn.add_argument("--beta", type=float)
    rn.add_argument("--k-max", dest="k_max", type=int)
    rn.add_argument("--trials", type=int)

    fl = sub.add_parser("flow", parents=[common], help="assemble the multiscale flow and its energy ledger")
    fl.add_argument("--k-max", dest="k_max", type=int, help="largest scale (0 or 1, default 0)")
    fl.add_argument("--J", type=float, help="energy exponent (default 0.5)")
    fl.add_argument("--instance", choices=["clean", "sample"], help="empty configuration or a sparse sample")
    fl.add_argument("--u", type=float, help="intensity of the sparse sample (default 1e-6)")
    fl.add_argument("--rho", type=float, help="cylinder radius of the sparse sample (default 1.5)")

    w = sub.add_parser("walk", parents=[common], help="vacant graph, escape probability and resistance curve")
    w.add_argument("--u", type=float, help="intensity (default u_tilde/4 of the desk ladder)")
    w.add_argument("--rho", type=float, help="cylinder radius (default 1)")
    w.add_argument("--R", type=int, help="half side of the lattice box (default 12)")
    w.add_argument("--walks", type=int, help="number of walks (default 10000)")
    w.add_argument("--radii", type=int, nargs="+", help="radii of the resistance curve")

    sub.add_parser("selftest", parents=[common], help="run the closed-form checks")
    return p


SECTION_FLAGS = {
    "sample": ("u", "R"),
    "render": ("input", "z", "rho", "u", "extent", "pixels"),
    "decouple": ("check", "L", "alpha", "eps", "rho", "u", "delta"),
    "renorm": ("what", "L0", "gamma", "alpha", "beta", "k_max", "trials"),
    "flow": ("k_max", "J", "instance", "u", "rho"),
    "walk": ("u", "rho", "R", "walks", "radii"),
    "selftest": (),
}


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                if str(args.config).endswith(".json"):  # a previous report: rerun its embedded config
                    data = json.load(fh)
                    data = data.get("config", data)
                else:
                    data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot parse {args.config}: {exc}") from exc
        cfg = _merge(cfg, data)
    for key in ("seed", "replicas", "out", "format", "d"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key in SECTION_FLAGS[args.command]:
        val = getattr(args, key, None)
        if val is not None:
            cfg[args.command][key] = val
    if args.command == "selftest" and cfg["seed"] is None:
        cfg["seed"] = 0
    validate(cfg, args.command)
    return cfg


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        results, ok = HANDLERS[args.command](cfg)
    except Exception as exc:  # structured failure: report it and exit non-zero
        results, ok = {"error": type(exc).__name__, "message": str(exc)}, False
    path = write_report(cfg, args.command, results, ok)
    print(os.fspath(path))
    return 0 if ok else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
