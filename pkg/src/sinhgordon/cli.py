"""Command line front end.

Every command reads a RunConfig (defaults, then an optional TOML file, then
``--set key=value`` overrides, then dedicated flags), writes its results into
the output directory together with ``manifest.json`` and prints a one-line
JSON summary.  Exit codes: 0 pass, 1 numeric failure, 2 malformed input.
"""

import argparse
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import MalformedInputError, SinhGordonError

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

COMMANDS = ("monodromy", "expand", "ps-iterate", "flow-x", "flow-y", "curve", "closing",
            "whitham", "gradients", "involution", "pairing", "surface")

# key: (type, default, validator or None)
KNOBS = {
    "N": (int, 256, lambda v: 16 <= v <= 4096 and v & (v - 1) == 0),
    "p": (float, 2 * np.pi, lambda v: v > 0),
    "jet_order": (int, 12, lambda v: 2 <= v <= 12),
    "tol": (float, 1e-10, lambda v: 1e-14 <= v <= 1e-4),
    "order": (int, 5, lambda v: 1 <= v <= 11),
    "g": (int, 1, lambda v: 0 <= v <= 4),
    "seed": (int, 0, None),
    "amp": (float, 0.2, lambda v: 0 <= v <= 0.5),
    "n_modes": (int, 2, lambda v: 0 <= v <= 32),
    "vacuum": (bool, False, None),
    "input": (str, "", None),
    "lambda": (str, "0.09", None),
    "n": (int, 1, lambda v: 0 <= v <= 12),
    "dirs": (int, 5, lambda v: 1 <= v <= 100),
    "n_max": (int, 4, lambda v: 1 <= v <= 12),
    "r": (float, 1.3, lambda v: v > 0),
    "alpha": (float, 0.4, None),
    "beta_re": (float, 0.5, None),
    "beta_im": (float, -0.1, None),
    "x_len": (float, 0.0, lambda v: v >= 0),
    "y_len": (float, 0.5, lambda v: v >= 0),
    "n_out": (int, 64, lambda v: 2 <= v <= 100000),
    "t": (float, 0.5, None),
    "c": (str, "1", None),
    "cocycle": (str, "1", None),
    "nx": (int, 21, lambda v: 2 <= v <= 2000),
    "ny": (int, 21, lambda v: 2 <= v <= 2000),
    "t0": (float, 0.0, None),
    "t1": (float, 1.0, None),
    "workers": (int, 1, lambda v: v >= 1),
    "out": (str, "runs", None),
}


def _coerce(key, value):
    if key not in KNOBS:
        raise MalformedInputError("unknown config key %r" % key)
    typ, _, check = KNOBS[key]
    try:
        if typ is bool and isinstance(value, str):
            v = value.strip().lower() in ("1", "true", "yes", "on")
        elif typ is int and isinstance(value, float) and not value.is_integer():
            raise ValueError
        else:
            v = typ(value)
    except (TypeError, ValueError):
        raise MalformedInputError("bad value %r for %s" % (value, key))
    if check is not None and not check(v):
        raise MalformedInputError("value %r out of range for %s" % (v, key))
    return v


def build_config(command, config_path=None, sets=(), flags=None):
    cfg = {k: spec[1] for k, spec in KNOBS.items()}
    if config_path:
        try:
            with open(config_path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise MalformedInputError("cannot read config: %s" % exc)
        for k, v in data.items():
            cfg[k] = _coerce(k, v)
    for item in sets:
        if "=" not in item:
            raise MalformedInputError("--set expects key=value, got %r" % item)
        k, v = item.split("=", 1)
        cfg[k.strip()] = _coerce(k.strip(), v.strip())
    for k, v in (flags or {}).items():
        if v is not None:
            cfg[k] = _coerce(k, v)
    cfg["command"] = command
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


# --- inputs ---------------------------------------------------------------------------

def _parse_complex_list(s):
    try:
        return [complex(x.strip().replace(" ", "")) for x in str(s).split(",") if x.strip()]
    except ValueError:
        raise MalformedInputError("cannot parse complex list %r" % s)


def cauchy_from_config(cfg):
    from .jets import CauchyData
    if cfg["input"]:
        return CauchyData.from_csv(cfg["input"], cfg["p"])
    if cfg["vacuum"]:
        return CauchyData.vacuum(cfg["N"], cfg["p"])
    rng = np.random.default_rng(cfg["seed"])
    return CauchyData.random(rng, cfg["N"], cfg["p"], n_modes=cfg["n_modes"], amp=cfg["amp"])


def xi_from_config(cfg):
    from .laxflow import seed_loop
    g = cfg["g"]
    rng = np.random.default_rng(cfg["seed"]) if g >= 3 else None
    return seed_loop(g, cfg["r"], cfg["alpha"],
                     complex(cfg["beta_re"], cfg["beta_im"]), rng=rng)


# --- writers ---------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def write_jsonl(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(_jsonable(row), sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % float(v) for v in row) + "\n")


# --- commands ---------------------------------------------------------------------------

def cmd_monodromy(cfg, out):
    from .laxflow import monodromy
    cd = cauchy_from_config(cfg)
    lams = _parse_complex_list(cfg["lambda"])
    res = monodromy(cd, lams, tol=cfg["tol"])
    rows, worst = [], 0.0
    for m in res:
        row = {"lambda": m.lam, "lnmu": m.lnmu, "mu": m.mu, "det": complex(np.linalg.det(m.M))}
        if cfg["vacuum"] and not cfg["input"]:
            s = np.sqrt(m.lam)
            exact = 0.5j * cd.period_p * (1 / s + s)
            row["closed_form"] = exact
            row["error"] = abs(m.lnmu - exact)
            worst = max(worst, row["error"])
        rows.append(row)
    write_jsonl(out / "monodromy.jsonl", rows)
    return {"count": len(rows), "max_error": worst if cfg["vacuum"] else None}, worst < 1e-8


def cmd_expand(cfg, out):
    from .laxflow import lnmu_expansion
    cd = cauchy_from_config(cfg)
    coeffs = lnmu_expansion(cd, cfg["order"])
    rows = [{"power": m, "coefficient": c} for m, c in sorted(coeffs.items())]
    write_jsonl(out / "expand.jsonl", rows)
    return {"coefficients": [complex(round(c.real, 12), round(c.imag, 12)) for _, c in sorted(coeffs.items())]}, True


def cmd_ps_iterate(cfg, out):
    from .diffpoly import jacobi_operator, pinkall_sterling, pretty, rational_audit
    levels = pinkall_sterling(cfg["n"])
    rows, ok = [], True
    for lv in levels:
        zero = jacobi_operator(lv.omega).is_zero()
        ok = ok and zero
        rows.append({"n": lv.n, "omega": pretty(lv.omega), "omega_json": lv.omega.to_json(),
                     "jacobi_zero": zero, "rational_audit": rational_audit(lv.omega)})
    write_jsonl(out / "ps_iterate.jsonl", rows)
    return {"levels": len(rows), "jacobi_all_zero": ok}, ok


def cmd_flow_x(cfg, out):
    from .laxflow import killing_flow
    xi = xi_from_config(cfg)
    length = cfg["x_len"] or cfg["p"]
    tr = killing_flow(xi, cfg["g"], (0.0, length), cfg["n_out"], tol=min(cfg["tol"], 1e-12))
    write_csv(out / "flow_x.csv", ["x", "u", "uy", "ux"], zip(tr.s, tr.u, tr.uy, tr.ux))
    drift = tr.a_drift()
    return {"a_drift": drift}, drift < 1e-8


def cmd_flow_y(cfg, out):
    from .laxflow import y_flow
    xi = xi_from_config(cfg)
    tr = y_flow(xi, cfg["g"], (0.0, cfg["y_len"]), cfg["n_out"], tol=min(cfg["tol"], 1e-12))
    write_csv(out / "flow_y.csv", ["y", "u", "uy", "ux"], zip(tr.s, tr.u, tr.uy, tr.ux))
    drift = tr.a_drift()
    return {"a_drift": drift}, drift < 1e-8


def _curve(cfg):
    from .laxflow import killing_flow
    from .spectral import curve_from_xi
    xi = xi_from_config(cfg)
    g, p = cfg["g"], cfg["p"]
    tr = killing_flow(xi, g, (0.0, p), 64)
    return xi, tr, curve_from_xi(xi, g, p, tr.cauchy_data(p))


def cmd_curve(cfg, out):
    from .spectral import period_residual
    _, _, sp = _curve(cfg)
    rec = sp.to_json()
    rec.update({"fit_residual": sp.fit_residual, "period_residual": period_residual(sp),
                "resultant_proxy": sp.resultant_proxy(), "in_moduli": sp.in_moduli()})
    write_jsonl(out / "curve.jsonl", [rec])
    return {"fit_residual": sp.fit_residual, "in_moduli": rec["in_moduli"]}, rec["in_moduli"]


def cmd_closing(cfg, out):
    from .spectral import closing_conditions
    _, _, sp = _curve(cfg)
    rep = closing_conditions(sp, tol=1e-5)
    write_jsonl(out / "closing.jsonl", [rep])
    return {"pass": rep["pass"]}, rep["pass"]


def _params(text, n, key):
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise MalformedInputError("cannot parse %s=%r" % (key, text))
    return (vals + [0.0] * n)[:n]


def _direction(cfg):
    """Whitham direction from real coordinates in the admissible c-basis."""
    from .whitham import WhithamDirection
    return WhithamDirection.from_params(_params(cfg["c"], cfg["g"], "c"), cfg["g"])


def cmd_whitham(cfg, out):
    from .errors import BoundaryError
    from .whitham import whitham_flow
    _, _, sp = _curve(cfg)
    direction = _direction(cfg)
    try:
        traj = whitham_flow(sp, direction, (0.0, cfg["t"]), n_out=cfg["n_out"] if cfg["n_out"] < 200 else 21)
        status = True
    except BoundaryError as exc:
        traj, status = exc.trajectory, False
    rows = list(traj.rows())
    write_jsonl(out / "whitham.jsonl", rows)
    header = ["t", "period", "root_distance", "lattice_max", "a_cycle_max"]
    write_csv(out / "whitham.csv", header, ([r[k] for k in header] for r in rows))
    drift = {k: traj.drift(k) for k in ("period_invariant", "lattice_residuals", "a_cycles")}
    return {"drift": drift, "truncated": traj.truncated}, status


def cmd_gradients(cfg, out):
    from .symplectic import Tangent, directional_derivative, gradient, omega_form
    cd = cauchy_from_config(cfg)
    rng = np.random.default_rng(cfg["seed"] + 1)
    dirs = [Tangent.random(rng, cd.N, cd.period_p) for _ in range(cfg["dirs"])]
    n = max(cfg["n"], 1)
    G = gradient(cd, n)
    rows, worst = [], 0.0
    for k, t in enumerate(dirs):
        dH = directional_derivative(cd, n, t)
        om = omega_form(G, t)
        res = abs(dH - om) / (1 + abs(dH))
        worst = max(worst, res)
        rows.append((n, k, dH, om, res))
    write_csv(out / "gradients.csv", ["n", "direction", "dH", "omega", "residual"], rows)
    return {"n": n, "max_residual": worst}, worst < 1e-7


def cmd_involution(cfg, out):
    from .symplectic import involution_matrix
    cd = cauchy_from_config(cfg)
    P = involution_matrix(cd, cfg["n_max"])
    write_csv(out / "involution.csv", ["m"] + ["H%d" % (j + 1) for j in range(P.shape[1])],
              ([i + 1] + list(P[i]) for i in range(P.shape[0])))
    worst = float(np.abs(P).max())
    return {"max_bracket": worst}, worst < 1e-6


def cmd_pairing(cfg, out):
    from .symplectic import Cocycle, serre_pairing_check
    g = cfg["g"]
    xi = xi_from_config(cfg)
    f = Cocycle.from_params(_params(cfg["cocycle"], g, "cocycle"), g)
    rep = serre_pairing_check(xi, f, _direction(cfg), cfg["p"], N=32)
    write_jsonl(out / "pairing.jsonl", [rep])
    if rep["skipped"]:
        return rep, abs(rep["isotropy"]) < 1e-6
    return rep, rep["residual"] < 1e-4 * (1 + abs(rep["rhs"]))


def cmd_surface(cfg, out):
    from .laxflow import sym_bobenko_export
    xi = xi_from_config(cfg)
    x_len = cfg["x_len"] or cfg["p"]
    verts, faces, _ = sym_bobenko_export(xi, cfg["g"], cfg["nx"], cfg["ny"], x_len, cfg["y_len"],
                                         cfg["t0"], cfg["t1"], path=str(out / "surface.obj"))
    return {"vertices": len(verts), "faces": len(faces)}, True


HANDLERS = {
    "monodromy": cmd_monodromy, "expand": cmd_expand, "ps-iterate": cmd_ps_iterate,
    "flow-x": cmd_flow_x, "flow-y": cmd_flow_y, "curve": cmd_curve, "closing": cmd_closing,
    "whitham": cmd_whitham, "gradients": cmd_gradients, "involution": cmd_involution,
    "pairing": cmd_pairing, "surface": cmd_surface,
}


def make_parser():
    ap = argparse.ArgumentParser(prog="sinhgordon", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML file with knob values")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", help="output directory (default runs/<command>)")
    ap.add_argument("--vacuum", action="store_const", const=True, default=None)
    ap.add_argument("--input", help="CSV with columns x,u,uy")
    ap.add_argument("--lambda", dest="lam", help="comma separated complex values")
    ap.add_argument("--order", type=int)
    ap.add_argument("--n", type=int)
    ap.add_argument("--dirs", type=int)
    ap.add_argument("--n-max", dest="n_max", type=int)
    ap.add_argument("--g", type=int)
    ap.add_argument("--N", type=int)
    ap.add_argument("--p", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--t", type=float)
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    t_start = time.perf_counter()
    flags = {"vacuum": args.vacuum, "input": args.input, "lambda": args.lam, "order": args.order,
             "n": args.n, "dirs": args.dirs, "n_max": args.n_max, "g": args.g, "N": args.N,
             "p": args.p, "seed": args.seed, "tol": args.tol, "t": args.t}
    out = Path(args.out) if args.out else None
    cfg = None
    try:
        cfg = build_config(args.command, args.config, args.set, flags)
        out = out or Path(cfg["out"]) / args.command
        out.mkdir(parents=True, exist_ok=True)
        summary, ok = HANDLERS[args.command](cfg, out)
        code = 0 if ok else 1
        record = {"command": args.command, "pass": bool(ok), "summary": summary}
    except SinhGordonError as exc:
        code = exc.exit_code
        record = {"command": args.command, "pass": False,
                  "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.json").write_text(json.dumps(_jsonable(record), sort_keys=True, indent=1) + "\n")
        manifest = {
            "command": args.command,
            "config": cfg,
            "config_hash": config_hash(cfg) if cfg else None,
            "versions": {"sinhgordon": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "wall_time_s": time.perf_counter() - t_start,
            "exit_code": code,
        }
        (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), sort_keys=True, indent=1) + "\n")
    stream = sys.stdout if code == 0 else sys.stderr
    stream.write(json.dumps(_jsonable(record), sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
