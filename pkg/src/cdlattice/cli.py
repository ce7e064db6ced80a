"""Command line runner: single evaluations, sweeps, scaling fits, extremal ladders and canned runs.

Exit codes: 0 on success, 2 on precondition or usage errors, 3 on numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .enclosure import Enclosure
from .errors import NumericError, PreconditionError
from .extremal import best_dimension_bound, explicit_dimension_bound, extremal_report
from .kernels import (SparseWeight, check_S2, check_S3, check_thin_support, kernel_from_config,
                      make_finite, make_fractional, make_log_corrected, make_power, make_sparse,
                      tail_mass)
from .operators import (SWEEP_RADIUS, DEFAULT_RADIUS, apply_L, cd_quotients, gamma1, gamma2,
                        ly_identity_residual, LatticeFunction)
from .witnesses import (linear_cutoff_witness, power_witness, sharpness_witness, sparse_witness,
                        square_witness, truncated_witness, witness_from_config)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA = "# cdlat-schema v1"
COLUMNS = ["parameter", "L_lo", "L_hi", "Gamma_lo", "Gamma_hi", "Gamma2_lo", "Gamma2_hi",
           "rho_dim_lo", "rho_dim_hi", "rho_curv_lo", "rho_curv_hi", "rigorous", "status"]
REPRODUCE_IDS = ("thm2.2", "ex2.3", "rem2.8", "prop2.5", "thm3.1", "thm3.5", "cor3.4",
                 "thm4.1", "cor4.6", "thm5.1", "thm5.2", "thm5.4", "thm6.1")


# --- config parsing --------------------------------------------------------------------

def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_table(spec: str, section: str) -> dict:
    """A TOML file (its ``[section]`` table) or an inline ``key=value,key=value`` list."""
    if os.path.isfile(spec):
        with open(spec, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise PreconditionError(f"{spec}: {exc}") from None
        return dict(data.get(section, data))
    out = {}
    for item in _split_top(spec):
        if "=" not in item:
            raise PreconditionError(f"cannot parse {item!r}; expected key=value")
        key, raw = (s.strip() for s in item.split("=", 1))
        try:
            out[key] = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            out[key] = raw
    return out


def _parse_grid(text: str) -> list:
    vals = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        f = float(item)
        vals.append(int(f) if f.is_integer() and "." not in item and "e" not in item.lower() else f)
    return vals


# --- rows ---------------------------------------------------------------------------------

@dataclass
class Row:
    """One evaluated grid point."""

    parameter: object
    L: Enclosure | None = None
    Gamma: Enclosure | None = None
    Gamma2: Enclosure | None = None
    rho_dim: Enclosure | None = None
    rho_curv: Enclosure | None = None
    status: str = "ok"

    @property
    def rigorous(self) -> bool:
        encs = [e for e in (self.L, self.Gamma, self.Gamma2) if e is not None]
        return bool(encs) and all(e.rigorous for e in encs)

    def as_dict(self) -> dict:
        out = {"parameter": self.parameter, "status": self.status, "rigorous": self.rigorous}
        for name in ("L", "Gamma", "Gamma2", "rho_dim", "rho_curv"):
            e = getattr(self, name)
            out[name] = None if e is None else {"lo": e.lo, "hi": e.hi, "rigorous": e.rigorous}
        return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def _cells(e: Enclosure | None) -> list[str]:
    if e is None:
        return ["", ""]
    mark = "" if e.rigorous else "~"
    return [_fmt(e.lo) + mark, _fmt(e.hi) + mark]


def rows_to_csv(rows: Sequence[Row]) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        cells = [_fmt(r.parameter)]
        for e in (r.L, r.Gamma, r.Gamma2, r.rho_dim, r.rho_curv):
            cells += _cells(e)
        cells += ["true" if r.rigorous else "false", r.status]
        w.writerow(cells)
    return buf.getvalue()


def rows_from_csv(text: str) -> list[Row]:
    """Read a table written by :func:`rows_to_csv`."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    rows = []
    for rec in reader:
        def enc(name):
            lo, hi = rec[f"{name}_lo"], rec[f"{name}_hi"]
            if lo == "" or hi == "":
                return None
            rig = not (lo.endswith("~") or hi.endswith("~"))
            return Enclosure(float(lo.rstrip("~")), float(hi.rstrip("~")), rig)
        try:
            param = float(rec["parameter"])
        except ValueError:
            param = rec["parameter"]
        rows.append(Row(param, enc("L"), enc("Gamma"), enc("Gamma2"), enc("rho_dim"),
                        enc("rho_curv"), rec.get("status", "ok")))
    return rows


def evaluate_row(kernel, u: LatticeFunction, parameter, x: int = 0, R: int = DEFAULT_RADIUS) -> Row:
    """L, Gamma, Gamma_2 and both quotients at ``x``; errors become the row status."""
    row = Row(parameter)
    try:
        row.L = apply_L(kernel, u, x, R)
        row.Gamma = gamma1(kernel, u, x, R)
        row.Gamma2 = gamma2(kernel, u, x, R)
        row.rho_dim, row.rho_curv = cd_quotients(row.L, row.Gamma, row.Gamma2)
    except (PreconditionError, NumericError) as exc:
        row.status = f"{type(exc).__name__}: {exc}"
    return row


# --- sweeps -------------------------------------------------------------------------------

@dataclass
class SweepConfig:
    kernel: dict | None
    witness: dict
    parameter: str
    grid: list
    target: str = "witness"
    radius: int = SWEEP_RADIUS
    x: int = 0


def sweep_config_from_toml(path: str) -> SweepConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise PreconditionError(f"{path}: {exc}") from None
    if "witness" not in data or "sweep" not in data:
        raise PreconditionError(f"{path}: needs [witness] and [sweep] tables")
    sw = data["sweep"]
    if "parameter" not in sw:
        raise PreconditionError(f"{path}: [sweep] needs a 'parameter' key")
    return SweepConfig(data.get("kernel"), dict(data["witness"]), sw["parameter"],
                       list(sw.get("grid", [])), sw.get("target", "witness"),
                       int(sw.get("radius", SWEEP_RADIUS)), int(sw.get("x", 0)))


def _sweep_task(args) -> Row:
    kernel_table, witness_table, value, x, R = args
    try:
        kernel = kernel_from_config(kernel_table) if kernel_table is not None else None
        spec = witness_from_config(witness_table, kernel)
        kernel = spec.kernel or kernel
        if kernel is None:
            raise PreconditionError("no kernel given and the witness does not bring one")
    except (PreconditionError, NumericError) as exc:
        return Row(value, status=f"{type(exc).__name__}: {exc}")
    return evaluate_row(kernel, spec.function, value, x, R)


def run_sweep(config: SweepConfig, workers: int = 1) -> list[Row]:
    """Evaluate every grid point; rows come back in grid order."""
    tasks = []
    for v in config.grid:
        kt = dict(config.kernel) if config.kernel is not None else None
        wt = dict(config.witness)
        if config.target == "kernel":
            if kt is None:
                raise PreconditionError("a kernel sweep needs a [kernel] table")
            kt[config.parameter] = v
        else:
            wt[config.parameter] = v
        tasks.append((kt, wt, v, config.x, config.radius))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_task, tasks))
    return [_sweep_task(t) for t in tasks]


# --- scaling fits -------------------------------------------------------------------------

@dataclass
class ScalingFit:
    """Least-squares slope of ``log y`` against ``log x`` and its range over the enclosure box."""

    points: list
    slope: float
    slope_band: tuple[float, float]
    residual: float
    intercept: float = 0.0
    rigorous: bool = True

    def as_dict(self) -> dict:
        return {"points": [[x, e.lo, e.hi, e.rigorous] for x, e in self.points],
                "slope": self.slope, "slope_band": list(self.slope_band),
                "residual": self.residual, "intercept": self.intercept, "rigorous": self.rigorous}


def fit_scaling(points: Sequence[tuple[float, Enclosure]], allow_heuristic: bool = False) -> ScalingFit:
    """Fit ``y ~ C x**slope`` through enclosure midpoints.

    ``slope_band`` is the exact range of the least-squares slope when every
    ``y`` varies inside its enclosure: the slope is linear in ``log y``, so the
    extremes pick the lower or upper end point by the sign of its weight.
    """
    pts = [(float(x), Enclosure.coerce(e)) for x, e in points]
    if len(pts) < 3:
        raise PreconditionError(f"a fit needs at least 3 points, got {len(pts)}")
    if not allow_heuristic and not all(e.rigorous for _, e in pts):
        raise PreconditionError("non-rigorous enclosures in the fit window (use --allow-heuristic)")
    xs = np.array([x for x, _ in pts])
    if np.any(xs <= 0) or any(e.lo <= 0 or not math.isfinite(e.hi) for _, e in pts):
        raise PreconditionError("log-log fits need positive x and positive finite enclosures")
    lx = np.log(xs)
    if np.ptp(lx) == 0.0:
        raise PreconditionError("degenerate fit: all x values coincide")
    wts = (lx - lx.mean()) / np.sum((lx - lx.mean()) ** 2)
    ly = np.log([e.mid for _, e in pts])
    slope = float(np.dot(wts, ly))
    intercept = float(ly.mean() - slope * lx.mean())
    resid = float(np.sqrt(np.mean((ly - intercept - slope * lx) ** 2)))
    lo_y = np.log([e.lo for _, e in pts])
    hi_y = np.log([e.hi for _, e in pts])
    s_hi = float(np.dot(wts, np.where(wts > 0, hi_y, lo_y)))
    s_lo = float(np.dot(wts, np.where(wts > 0, lo_y, hi_y)))
    return ScalingFit(pts, slope, (min(s_lo, slope), max(s_hi, slope)), resid, intercept,
                      all(e.rigorous for _, e in pts))


def fit_rows(rows: Sequence[Row], y_column: str, allow_heuristic: bool = False) -> ScalingFit:
    pts = []
    for r in rows:
        e = getattr(r, y_column)
        if e is None:
            raise PreconditionError(f"row {r.parameter}: no value in column {y_column!r}")
        pts.append((float(r.parameter), e))
    return fit_scaling(pts, allow_heuristic)


# --- canned runs --------------------------------------------------------------------------

def _finite_zoo() -> dict:
    return {
        "laplacian": make_finite({1: 1.0}),
        "odd_1_3": make_finite({1: 1.0, 3: 1.0}),
        "two_step": make_finite({1: 1.0, 2: 0.5}),
        "gap": make_finite({2: 1.0, 5: 0.25}),
        "decreasing_4": make_finite({1: 1.0, 2: 0.5, 3: 0.25, 4: 0.125}),
    }


def _random_finite(rng: np.random.Generator):
    size = int(rng.integers(1, 9))
    offs = rng.choice(np.arange(1, 9), size=size, replace=False)
    return make_finite({int(j): float(rng.uniform(1e-3, 1.0)) for j in offs})


def _random_explicit(rng: np.random.Generator, A: int = 8) -> LatticeFunction:
    return LatticeFunction.explicit(start=-A, array=rng.normal(size=2 * A + 1))


def _rep_support_bound(args) -> dict:
    out = []
    for name, k in _finite_zoo().items():
        R = k.max_offset
        rep = extremal_report(k, R)
        out.append({"kernel": name, "radius": R, "d_star": rep.d_star,
                    "two_N_supp": 2 * rep.support_count,
                    "holds": rep.d_star <= 2 * rep.support_count + 1e-8})
    return {"id": "thm2.2", "rows": out}


def _rep_sharpness(args) -> dict:
    Ns = [args.n] if args.n else [1, 2, 5, 10]
    rows = []
    for N in Ns:
        k, u = sharpness_witness(N)
        rows.append(evaluate_row(k, u, N))
    return {"id": "ex2.3", "table": rows}


def _rep_square_identity(args) -> dict:
    out = []
    sq = square_witness()
    for name, k in _finite_zoo().items():
        L = apply_L(k, sq)
        G2 = gamma2(k, sq)
        out.append({"kernel": name, "Gamma2": [G2.lo, G2.hi], "L_squared": [L.square().lo, L.square().hi],
                    "relative_gap": abs(G2.mid - L.mid ** 2) / L.mid ** 2})
    return {"id": "rem2.8", "rows": out}


def _rep_squares_identity(args) -> dict:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    count = args.n or 100
    for _ in range(count):
        k = _random_finite(rng)
        u = _random_explicit(rng)
        scale = max(1.0, float(np.max(np.abs(u.data))) ** 2 * k.mass.hi ** 2)
        worst = max(worst, ly_identity_residual(k, u) / scale)
    return {"id": "prop2.5", "trials": count, "max_scaled_residual": worst, "holds": worst < 1e-10}


def _rep_power_scaling(args) -> dict:
    beta = args.beta or 1.5
    R = args.radius or DEFAULT_RADIUS
    k = make_power(1.0, beta)
    rows = [evaluate_row(k, power_witness(beta, e), e, 0, R) for e in (0.4, 0.2, 0.1, 0.05)]
    fit = fit_rows(rows, "L", args.allow_heuristic)
    return {"id": "thm3.1", "beta": beta, "table": rows, "fit_L": fit.as_dict()}


def _rep_truncated_power(args) -> dict:
    beta, eps = 1.5, 0.1
    R = args.radius or DEFAULT_RADIUS
    k = make_power(1.0, beta)
    ref = apply_L(k, power_witness(beta, eps), 0, R)
    rows = [evaluate_row(k, truncated_witness(beta, eps, N), N, 0, R) for N in (10, 20, 40, 80)]
    gaps = [abs(r.L.mid - ref.mid) for r in rows]
    return {"id": "thm3.5", "reference_L": [ref.lo, ref.hi], "table": rows, "L_gap": gaps}


def _rep_fractional(args) -> dict:
    out = []
    js = np.arange(1, 10_001)
    for beta in (0.5, 1.0, 1.5):
        k = make_fractional(beta)
        scaled = k.eval(js) * js.astype(float) ** (1.0 + beta)
        out.append({"beta": beta, "k(1)": float(k.eval(1)), "band_ratio": float(scaled.max() / scaled.min()),
                    "symmetric": bool(np.allclose(k.eval(-js), k.eval(js), rtol=0, atol=0)),
                    "positive": bool(np.all(k.eval(js) > 0))})
    return {"id": "cor3.4", "rows": out}


def _ladder(k, radii) -> list[dict]:
    out = []
    for R in radii:
        rep = extremal_report(k, R)
        out.append({"radius": R, "d_star": rep.d_star, "kappa_star": rep.kappa_star,
                    "kappa_deflated": rep.kappa_deflated, "bound_checks": rep.bound_checks})
    return out


def _rep_dimension_bound(args) -> dict:
    lap = explicit_dimension_bound(make_finite({1: 1.0}), 0.5)
    k = make_power(1.0, 3.0)
    d, delta, j0 = best_dimension_bound(k)
    return {"id": "thm4.1", "laplacian_bound_delta_0.5": lap,
            "power_beta_3": {"bound": d, "delta": delta, "j0": j0, "ladder": _ladder(k, args.radii)}}


def _rep_log_corrected(args) -> dict:
    k = make_log_corrected(1.0, 0.5)
    d, delta, j0 = best_dimension_bound(k)
    return {"id": "cor4.6", "kernel": k.describe(), "bound": d, "delta": delta, "j0": j0,
            "ladder": _ladder(k, args.radii)}


def _ratio_json(rc) -> dict:
    return {"total": [rc.total.lo, rc.total.hi], "finite": math.isfinite(rc.total.hi),
            "rigorous": rc.total.rigorous, "terms": rc.terms, "sup_ratio": rc.sup_ratio}


def _rep_doubling_ratio(args) -> dict:
    exp2 = make_sparse("pow2", SparseWeight("exp", delta=1.0))
    pow2 = make_sparse("pow2", SparseWeight("power", beta=1.0))
    return {"id": "thm5.1", "exp_weights_pow2": _ratio_json(check_S2(exp2)),
            "power_weights_pow2": _ratio_json(check_S2(pow2))}


def _rep_tripling_ratio(args) -> dict:
    exp3 = make_sparse("pow3", SparseWeight("exp", delta=1.0))
    return {"id": "thm5.2", "exp_weights_pow3": _ratio_json(check_S3(exp3))}


def _rep_thin_support(args) -> dict:
    k = make_sparse("pow3_plus_l", SparseWeight("geometric", c=1.0, q=0.5))
    probe = args.probe
    rep = check_thin_support(k, probe)
    if not rep.passed:
        raise PreconditionError(f"thin-support conditions fail on the probe window: {rep.violations[:3]}")
    rows = []
    ns = [args.n] if args.n else [30, 85, 248, 735, 2194]
    for n in ns:
        sw = sparse_witness(k, n, rep.N_witness, probe)
        r = evaluate_row(k, sw.function, n)
        ratio = 4.0 * r.Gamma2.mid / r.L.mid ** 2
        rows.append({"n": n, "xi": sw.xi, "M": sw.M, "L": [r.L.lo, r.L.hi],
                     "Gamma2": [r.Gamma2.lo, r.Gamma2.hi], "ratio": ratio,
                     "bound": (8 * sw.xi + sw.M) / (4 * sw.xi ** 2), "rigorous": r.rigorous})
    return {"id": "thm5.4", "N_witness": rep.N_witness, "probe": probe, "rows": rows}


def _rep_linear_cutoff(args) -> dict:
    R = args.radius or DEFAULT_RADIUS
    k = make_power(1.0, 1.5)
    Ns = [args.n] if args.n else [8, 16, 32, 64]
    rows = [evaluate_row(k, linear_cutoff_witness(N), N, 0, R) for N in Ns]
    return {"id": "thm6.1", "table": rows, "ladder": _ladder(k, args.radii)}


_REPRODUCE = {
    "thm2.2": _rep_support_bound, "ex2.3": _rep_sharpness, "rem2.8": _rep_square_identity,
    "prop2.5": _rep_squares_identity, "thm3.1": _rep_power_scaling, "thm3.5": _rep_truncated_power,
    "cor3.4": _rep_fractional, "thm4.1": _rep_dimension_bound, "cor4.6": _rep_log_corrected,
    "thm5.1": _rep_doubling_ratio, "thm5.2": _rep_tripling_ratio, "thm5.4": _rep_thin_support,
    "thm6.1": _rep_linear_cutoff,
}


def reproduce(run_id: str, args) -> dict:
    if run_id not in _REPRODUCE:
        raise PreconditionError(f"unknown run {run_id!r}; choose from {', '.join(REPRODUCE_IDS)}")
    return _REPRODUCE[run_id](args)


# --- output -------------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, Row):
        return _jsonable(obj.as_dict())
    if isinstance(obj, Enclosure):
        return _jsonable({"lo": obj.lo, "hi": obj.hi, "rigorous": obj.rigorous})
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def _emit_result(result: dict, fmt: str) -> str:
    if fmt == "json":
        return _dump_json(result) + "\n"
    parts = []
    rest = {k: v for k, v in result.items() if k != "table"}
    for line in _dump_json(rest).splitlines():
        parts.append("# " + line)
    text = "\n".join(parts) + "\n"
    if "table" in result:
        text += rows_to_csv(result["table"])
    return text


# --- argument handling ------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdlat", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--kernel", help="TOML file with a [kernel] table, or inline key=value,...")
    common.add_argument("--witness", help="TOML file with a [witness] table, or inline key=value,...")
    common.add_argument("--radius", type=int, default=None, help="summation cutoff R")
    common.add_argument("--grid", default=None, help="comma separated parameter values")
    common.add_argument("--out", choices=("csv", "json"), default=None)
    common.add_argument("--allow-heuristic", action="store_true",
                        help="accept non-rigorous enclosures in fits")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--n", type=int, default=None, help="size parameter for canned runs")
    sub = p.add_subparsers(dest="command", required=True)

    kp = sub.add_parser("kernel", parents=[common], help="kernel utilities")
    kp.add_argument("action", choices=("info",))
    kp.add_argument("--tail-radius", type=int, default=10)

    ep = sub.add_parser("evaluate", parents=[common], help="L, Gamma, Gamma_2 at one vertex")
    ep.add_argument("--x", type=int, default=0)

    xp = sub.add_parser("extremal", parents=[common], help="d* and kappa* over a radius ladder")
    xp.add_argument("--radii", type=_int_list, default=[8, 16, 32, 64])
    xp.add_argument("--minimizers", action="store_true")

    sp = sub.add_parser("sweep", parents=[common], help="evaluate over a parameter grid")
    sp.add_argument("--config", help="TOML file with [kernel], [witness] and [sweep] tables")
    sp.add_argument("--param", help="witness parameter to vary (with --grid)")
    sp.add_argument("--target", choices=("witness", "kernel"), default="witness")
    sp.add_argument("--x", type=int, default=0)

    fp = sub.add_parser("fit", parents=[common], help="log-log scaling fit of a sweep table")
    fp.add_argument("--input", required=True, help="CSV written by 'cdlat sweep'")
    fp.add_argument("--y", default="L", choices=("L", "Gamma", "Gamma2", "rho_dim", "rho_curv"))

    cp = sub.add_parser("check-conditions", parents=[common], help="sparse-support conditions")
    cp.add_argument("--probe", type=int, default=10 ** 6)

    rp = sub.add_parser("reproduce", parents=[common], help="canned runs")
    rp.add_argument("run_id", choices=REPRODUCE_IDS)
    rp.add_argument("--radii", type=_int_list, default=[8, 16, 32, 64])
    rp.add_argument("--beta", type=float, default=None)
    rp.add_argument("--probe", type=int, default=10 ** 6)
    rp.add_argument("--seed", type=int, default=0)
    return p


def _kernel_arg(args):
    if not args.kernel:
        return None
    return kernel_from_config(parse_table(args.kernel, "kernel"))


def _witness_arg(args, kernel):
    if not args.witness:
        raise PreconditionError("--witness is required")
    return witness_from_config(parse_table(args.witness, "witness"), kernel)


def _run(args) -> str:
    cmd = args.command
    if cmd == "kernel":
        k = _kernel_arg(args)
        if k is None:
            raise PreconditionError("--kernel is required")
        info = k.describe()
        t = tail_mass(k, args.tail_radius)
        info["tail_mass"] = {"radius": args.tail_radius, "lo": t.lo, "hi": t.hi, "rigorous": t.rigorous}
        return _dump_json(info) + "\n"
    if cmd == "evaluate":
        k = _kernel_arg(args)
        spec = _witness_arg(args, k)
        k = spec.kernel or k
        if k is None:
            raise PreconditionError("--kernel is required for this witness")
        row = evaluate_row(k, spec.function, spec.name, args.x, args.radius or DEFAULT_RADIUS)
        if row.status != "ok":
            raise _status_error(row.status)
        return rows_to_csv([row]) if (args.out or "csv") == "csv" else _dump_json(row) + "\n"
    if cmd == "extremal":
        k = _kernel_arg(args)
        if k is None:
            raise PreconditionError("--kernel is required")
        reps = [extremal_report(k, R) for R in args.radii]
        if (args.out or "json") == "json":
            return _dump_json([r.to_json(args.minimizers) for r in reps]) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "d_star", "kappa_star", "kappa_deflated", "support_count", "checks_pass"])
        for r in reps:
            w.writerow([r.radius, _fmt(r.d_star), _fmt(r.kappa_star), _fmt(r.kappa_deflated),
                        r.support_count, "true" if all(r.bound_checks.values()) else "false"])
        return buf.getvalue()
    if cmd == "sweep":
        if args.config:
            cfg = sweep_config_from_toml(args.config)
            if args.grid is not None:
                cfg.grid = _parse_grid(args.grid)
            if args.radius:
                cfg.radius = args.radius
        else:
            if not (args.witness and args.param):
                raise PreconditionError("sweep needs --config, or --witness with --param and --grid")
            kt = parse_table(args.kernel, "kernel") if args.kernel else None
            cfg = SweepConfig(kt, parse_table(args.witness, "witness"), args.param,
                              _parse_grid(args.grid or ""), args.target,
                              args.radius or SWEEP_RADIUS, args.x)
        rows = run_sweep(cfg, args.workers)
        return rows_to_csv(rows) if (args.out or "csv") == "csv" else _dump_json(rows) + "\n"
    if cmd == "fit":
        with open(args.input) as fh:
            rows = rows_from_csv(fh.read())
        fit = fit_rows(rows, args.y, args.allow_heuristic)
        return _dump_json(fit.as_dict()) + "\n"
    if cmd == "check-conditions":
        k = _kernel_arg(args)
        if k is None:
            raise PreconditionError("--kernel is required")
        out = {"kernel": k.describe()}
        for name, fn in (("S2", check_S2), ("S3", check_S3)):
            try:
                out[name] = _ratio_json(fn(k))
            except PreconditionError as exc:
                out[name] = {"error": str(exc)}
        try:
            rep = check_thin_support(k, args.probe)
            out["thin_support"] = {"passed": rep.passed, "N_witness": rep.N_witness,
                                   "gap_condition": rep.gap_condition,
                                   "violations": [str(v) for v in rep.violations[:10]],
                                   "probed_points": len(rep.probed)}
        except PreconditionError as exc:
            out["thin_support"] = {"error": str(exc)}
        return _dump_json(out) + "\n"
    if cmd == "reproduce":
        result = reproduce(args.run_id, args)
        return _emit_result(result, args.out or ("csv" if "table" in result else "json"))
    raise PreconditionError(f"unknown command {cmd!r}")


def _status_error(status: str) -> Exception:
    if status.startswith("NumericError"):
        return NumericError(status)
    return PreconditionError(status)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = _run(args)
    except NumericError as exc:
        print(f"cdlat: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (PreconditionError, OSError) as exc:
        print(f"cdlat: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
