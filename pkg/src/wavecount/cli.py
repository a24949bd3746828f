"""Command line runner: ``wavecount <subcommand> [options]``.

Every subcommand builds a config dict, validates it, runs, and emits a report
(JSON, stable key order). With ``--out x.csv`` the records go to ``x.csv`` and
the report to ``x.json``; any other ``--out`` receives the report; without
``--out`` the report is printed. Wall-clock timing goes to stderr only, so the
files are byte-identical across runs of the same config.

Exit codes: 0 success, 1 invalid config or runtime error, 2 a checked
invariant failed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np

from . import __version__


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# serialization


def _plain(x):
    """Turn numbers, arrays and fractions into JSON-safe values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (complex, np.complexfloating)):
        z = complex(x)
        return [_plain(z.real), _plain(z.imag)]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def config_hash(config: dict) -> str:
    canon = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def to_csv(records: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for rec in records:
        w.writerow(["" if rec[c] is None else repr(rec[c]) if isinstance(rec[c], float) else rec[c]
                    for c in columns])
    return buf.getvalue()


def make_report(cmd: str, config: dict, records, fitted: dict, invariants: dict, columns=None) -> dict:
    rep = {
        "subcommand": cmd,
        "config": config,
        "provenance": {"config_hash": config_hash(config), "version": __version__},
        "records": records,
        "fitted": fitted,
        "invariants": invariants,
    }
    if columns:
        rep["columns"] = columns
    return _plain(rep)


# ---------------------------------------------------------------------------
# validation helpers


def _positive(cfg, key):
    v = cfg[key]
    if not isinstance(v, (int, float)) or not v > 0:
        raise ConfigError(key, f"must be positive, got {v!r}")


def _int_at_least(cfg, key, low):
    v = cfg[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < low:
        raise ConfigError(key, f"must be an integer >= {low}, got {v!r}")


def _grid(cfg):
    _positive(cfg, "r_min")
    _positive(cfg, "r_max")
    _int_at_least(cfg, "r_steps", 1)
    if cfg["r_max"] < cfg["r_min"]:
        raise ConfigError("r_max", "must be >= r_min")
    n = cfg["r_steps"]
    if n == 1:
        return [float(cfg["r_min"])]
    return [float(x) for x in np.linspace(cfg["r_min"], cfg["r_max"], n)]


# ---------------------------------------------------------------------------
# subcommands


def run_euclid(cfg: dict) -> dict:
    from . import euclid_count as ec

    _int_at_least(cfg, "n", 2)
    radii = _grid(cfg)
    eps = cfg["epsilon"]
    if eps != "auto":
        try:
            eps = float(eps)
        except (TypeError, ValueError):
            raise ConfigError("epsilon", f"must be 'auto' or a positive number, got {eps!r}") from None
        if not eps > 0:
            raise ConfigError("epsilon", "must be positive")
    lat = ec.IntegerLattice.standard(cfg["n"])
    recs = ec.run_experiment(lat, radii, eps, smoothed=cfg["smoothed"])
    cols = ["R", "exact_count", "smoothed_count", "ball_volume", "error", "epsilon"]
    rows = [{c: getattr(r, c) for c in cols} for r in recs]
    fitted, inv = {}, {"counts_nondecreasing": all(a.exact_count <= b.exact_count for a, b in zip(recs, recs[1:]))}
    if len(recs) >= 10:
        alpha = ec.error_exponent_fit(recs)
        fitted["alpha"] = alpha
        # the lattice-point error is trivially O(R^{n-1}) = O(|B_R|^{(n-1)/n})
        inv["alpha_below_trivial"] = alpha <= (cfg["n"] - 1) / cfg["n"]
    fitted["bookkeeping_exponent"] = ec.error_exponent(cfg["n"])
    return make_report("euclid", cfg, rows, fitted, inv, cols)


def run_hyperbolic(cfg: dict) -> dict:
    from . import hyperbolic_count as hc

    radii = _grid(cfg)
    recs = hc.hyperbolic_records(radii)
    cols = ["R", "count", "main_term", "relative_error"]
    rows = [{c: getattr(r, c) for c in cols} for r in recs]
    a, b = hc.selberg_cross_check(max(radii)) if max(radii) >= 2 else (float("nan"), float("nan"))
    fitted = {"selberg_ratio": a / b}
    inv = {"counts_nondecreasing": all(x.count <= y.count for x, y in zip(recs, recs[1:]))}
    return make_report("hyperbolic", cfg, rows, fitted, inv, cols)


def run_triple(cfg: dict) -> dict:
    from . import arithmetic_lattice as al

    _int_at_least(cfg, "height", 1)
    _int_at_least(cfg, "precision", 64)
    prec = cfg["precision"]
    digits = int(prec * math.log10(2))
    elems = al.enumerate_gamma0(cfg["height"])
    rows = []
    for g in elems:
        pt = al.triple_embed(g, prec)
        emb = []
        cur = [[al.CubicFieldElement.of(x) for x in row] for row in g]
        for _ in range(3):
            emb.append([[mpmath.nstr(al.real_embeddings(x, prec)[0], digits) for x in row] for row in cur])
            cur = [[al.galois_sigma(x) for x in row] for row in cur]
        rows.append({"matrix": [list(r) for r in g], "embeddings": emb, "precision_bits": prec,
                     "component_norms": [float(np.linalg.norm(c)) for c in pt.components]})
    inv = {"sigma_order_three": al.verify_sigma(), "form_preserved": all(al.is_in_group(g) for g in elems)}
    fitted = {"count": len(elems), "precision_bits": prec}
    return make_report("triple", cfg, rows, fitted, inv)


def _load_json(cfg, key):
    path = cfg.get(key)
    if not path:
        raise ConfigError(key, "an input file is required")
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(key, f"cannot read {path}: {exc.strerror}") from None


def _root_data_from_doc(doc):
    from . import spherical_structure as ss

    if "symmetric" in doc:
        sym = doc["symmetric"]
        rd, sigma = ss.symmetric_example(sym["kind"], sym["types"])
        return rd, ss.symmetric_pair_flags(rd, sigma)
    for key in ("dim_a", "positive_roots", "flags"):
        if key not in doc:
            raise ConfigError(f"input.{key}", "missing")
    rd = ss.RootSystemData.from_positive(doc["dim_a"], [[Fraction(x) for x in r] for r in doc["positive_roots"]],
                                         [[Fraction(x) for x in v] for v in doc.get("a_H", [])])
    pairs = [([Fraction(x) for x in a], None if b is None else [Fraction(x) for x in b]) for a, b in doc["flags"]]
    return rd, ss.TFlagData(rd, pairs)


def run_cone(cfg: dict) -> dict:
    import warnings

    from . import spherical_structure as ss

    try:
        delta = Fraction(str(cfg["delta"]))
    except (ValueError, ZeroDivisionError):
        raise ConfigError("delta", f"not a rational number: {cfg['delta']!r}") from None
    if delta <= 0:
        raise ConfigError("delta", "must be positive")
    _int_at_least(cfg, "samples", 0)
    try:
        doc = json.loads(_load_json(cfg, "input"))
    except json.JSONDecodeError as exc:
        raise ConfigError("input", f"invalid JSON: {exc.msg}") from None
    rd, flags = _root_data_from_doc(doc)
    cone = ss.structure_from_flags(flags)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        wf = ss.is_wavefront(rd, cone)
    lines, rays = cone.generators()
    in_semigroup = all(
        (co := ss.decompose(m, cone.S)) is not None and all(c.denominator == 1 and c >= 0 for c in co)
        for m in cone.M)
    fitted = {"M": cone.M, "S": cone.S, "cone_lines": lines, "cone_rays": rays,
              "is_wavefront": wf, "warnings": sorted(str(w.message) for w in caught)}
    inv = {"M_in_N0_S": in_semigroup}
    if cone.S and len(cone.S) == len(rd.a_Z):
        fd = ss.face_decomposition(cone, delta, cfg["samples"], cfg["seed"])
        rng = np.random.default_rng(cfg["seed"])
        pts = [fd.point([Fraction(int(v)) for v in rng.integers(0, 1000, len(cone.S))]) for _ in range(cfg["samples"])]
        inv["faces_cover_samples"] = all(fd.covers(p) for p in pts)
        fitted["face_regions"] = {",".join(map(str, sorted(I))) or "-": {"lo": lo, "hi": hi}
                                  for I, (lo, hi) in sorted(fd.compact_sets.items(), key=lambda kv: sorted(kv[0]))}
        fitted["face_sets_canonical"] = fd.canonical
    return make_report("cone", cfg, [], fitted, inv)


def _ct_one(cfg: dict) -> tuple[dict, dict]:
    from . import constant_term as ct_mod

    for key in ("r", "c0", "tmax", "step"):
        _positive(cfg, key)
    if not isinstance(cfg["c"], (int, float)):
        raise ConfigError("c", "must be a real number")
    if cfg["remainder"] not in ("exp", "none"):
        raise ConfigError("remainder", "must be 'exp' or 'none'")
    c, r, c0 = float(cfg["c"]), float(cfg["r"]), float(cfg["c0"])
    amp = 1.0 if cfg["remainder"] == "exp" else 0.0
    system, phi0, _, _ = ct_mod.certified_rank_one(c, r, c0, amplitude=amp)
    if amp == 0.0:
        system = ct_mod.build_rank_one_system(c, lambda t: 0.0, r, c0, 0.0)
    split = ct_mod.slow_split(system)
    ct = ct_mod.constant_term(system, phi0, split)
    ts = np.arange(0.0, cfg["tmax"] + cfg["step"] / 2, cfg["step"])
    f, _, _, _ = ct_mod.stable_trajectory(system, phi0, ts, split)
    traj = ct_mod.Trajectory(ts, np.column_stack([f, np.zeros_like(f)]))
    decay = ct_mod.decay_verify(traj, ct, r, c0)
    viol = ct_mod.vanishing_violations(ct, r)
    rep = {
        "c": c, "r": r, "c0": c0,
        "eigenvalues": list(system.eigenvalues),
        "u": list(ct.u),
        "exponents": list(ct.exponents),
        "coefficients": [list(cf) for cf in ct.coeffs],
        "fitted_decay": decay,
        "delta": split.delta,
    }
    inv = {"slow_coefficients_vanish": not viol, "decay_gain": decay >= r + c0 / 2 - 0.05}
    p, pp = cfg["p"], cfg["p_prime"]
    if pp is not None:
        hb = ct_mod.hypothesis_b_pipeline(system, phi0, p, pp, cfg["k"], abs(c) / 2)
        rep["hypothesis_b_ratio"] = hb.ratio
        rep["hypothesis_b_l"] = hb.l
        rep["R_pi"] = hb.R
        inv["e1_split_bound"] = hb.e1_holds
    return rep, inv


_CT_KEYS = ("c", "r", "c0", "remainder", "tmax", "step", "p", "p_prime", "k")


def run_ct(cfg: dict) -> dict:
    if cfg.get("batch"):
        try:
            doc = json.loads(_load_json(cfg, "batch"))
        except json.JSONDecodeError as exc:
            raise ConfigError("batch", f"invalid JSON: {exc.msg}") from None
        items = doc["systems"] if isinstance(doc, dict) else doc
        if not isinstance(items, list):
            raise ConfigError("batch", "expected a list of systems")
        rows, inv = [], {}
        for i, item in enumerate(items):
            sub = {k: cfg[k] for k in _CT_KEYS}
            sub.update(item)
            try:
                rep, one = _ct_one(sub)
            except ConfigError as exc:
                raise ConfigError(f"batch[{i}].{exc.field}", str(exc).split(": ", 1)[1]) from None
            rows.append(rep)
            for k, v in one.items():
                inv[k] = inv.get(k, True) and v
        ratios = [r["hypothesis_b_ratio"] for r in rows if "hypothesis_b_ratio" in r]
        fitted = {"min_decay_margin": min((r["fitted_decay"] - r["r"] - r["c0"] / 2 for r in rows), default=None)}
        if ratios:
            fitted["max_hypothesis_b_ratio"] = max(ratios)
        return make_report("ct", cfg, rows, fitted, inv)
    rep, inv = _ct_one(cfg)
    return make_report("ct", cfg, [rep], {"fitted_decay": rep["fitted_decay"]}, inv)


def run_mostow(cfg: dict) -> dict:
    from . import mostow_nilpotent as mn

    _int_at_least(cfg, "samples", 0)
    text = _load_json(cfg, "input")
    try:
        doc = json.loads(text)
        u = mn.NilpotentLieAlgebra.from_json(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("input", f"invalid JSON: {exc.msg}") from None
    u_H = [[Fraction(x) for x in v] for v in doc.get("u_H", [])]
    chain, n = mn.lower_central_series(u)
    filt = mn.build_filtration(u, u_H)
    ok = mn.exp_decomposition_check(u, u_H, cfg["samples"], cfg["seed"], filt)
    fitted = {"nilpotency_degree": n, "central_series_dims": [len(c) for c in chain],
              "w_dims": [len(w) for w in filt.w], "V": filt.V}
    return make_report("mostow", cfg, [], fitted, {"decomposition_exact": ok})


# ---------------------------------------------------------------------------
# rendering


def report_render(report: dict) -> str:
    """Markdown summary; records become a table with the report's columns."""
    lines = [f"# wavecount {report.get('subcommand', 'report')}", ""]
    recs = report.get("records") or []
    if not recs:
        return "\n".join(lines)
    prov = report.get("provenance", {})
    lines += [f"version {prov.get('version')}, config {str(prov.get('config_hash'))[:12]}", ""]
    cols = report.get("columns") or sorted(recs[0])
    trend = "relative_error" in cols
    head = cols + (["trend"] if trend else [])
    lines.append("| " + " | ".join(head) + " |")
    lines.append("|" + "---|" * len(head))
    prev = None
    for rec in recs:
        cells = [_cell(rec.get(c)) for c in cols]
        if trend:
            cur = rec.get("relative_error")
            cells.append("" if prev is None or cur is None else ("down" if abs(cur) < abs(prev) else "up"))
            prev = cur
        lines.append("| " + " | ".join(cells) + " |")
    fitted = report.get("fitted") or {}
    if "alpha" in fitted:
        lines += ["", f"fitted alpha = {fitted['alpha']:.4f}"]
    inv = report.get("invariants") or {}
    if inv:
        lines += ["", "| invariant | holds |", "|---|---|"]
        lines += [f"| {k} | {'yes' if v else 'NO'} |" for k, v in sorted(inv.items())]
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return json.dumps(v)
    return str(v)


def run_report(cfg: dict) -> dict:
    text = _load_json(cfg, "input")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("input", f"invalid JSON: {exc.msg}") from None


# ---------------------------------------------------------------------------
# argument parsing


RUNNERS = {"euclid": run_euclid, "hyperbolic": run_hyperbolic, "triple": run_triple, "cone": run_cone,
           "ct": run_ct, "mostow": run_mostow}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavecount", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output path (.csv writes records plus a sibling .json report)")
        p.add_argument("--config", help="JSON file whose keys override the flags")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = common(sub.add_parser("euclid", help="lattice points of Z^n in balls"))
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--r-min", type=float, default=50.0)
    p.add_argument("--r-max", type=float, default=3000.0)
    p.add_argument("--r-steps", type=int, default=60)
    p.add_argument("--epsilon", default="auto")
    p.add_argument("--smoothed", action=argparse.BooleanOptionalAction, default=False,
                   help="also compute the mollified count (slow for large R)")

    p = common(sub.add_parser("hyperbolic", help="PSL(2,Z) orbit points in hyperbolic balls"))
    p.add_argument("--r-min", type=float, default=4.0)
    p.add_argument("--r-max", type=float, default=10.0)
    p.add_argument("--r-steps", type=int, default=13)

    p = common(sub.add_parser("triple", help="integral points of the form group and their conjugates"))
    p.add_argument("--height", type=int, default=1)
    p.add_argument("--precision", type=int, default=128)

    p = common(sub.add_parser("cone", help="spherical roots, compression cone, wavefront test"))
    p.add_argument("--input")
    p.add_argument("--delta", default="1/10")
    p.add_argument("--samples", type=int, default=2000)

    p = common(sub.add_parser("ct", help="constant term of a rank-one model system"))
    p.add_argument("--c", type=float, default=3.0)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--c0", type=float, default=2.0)
    p.add_argument("--remainder", default="exp")
    p.add_argument("--tmax", type=float, default=20.0)
    p.add_argument("--step", type=float, default=0.02)
    p.add_argument("--p", type=float, default=2.5)
    p.add_argument("--p-prime", type=float, default=None, help="enables the Hypothesis-B pipeline")
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--batch")

    p = common(sub.add_parser("mostow", help="nilpotent filtration and exp decomposition check"))
    p.add_argument("--input")
    p.add_argument("--samples", type=int, default=100)

    p = common(sub.add_parser("report", help="render a JSON report as Markdown"))
    p.add_argument("--input")
    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("config", "out", "command")}
    if args.config:
        try:
            override = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc.msg}") from None
        if not isinstance(override, dict):
            raise ConfigError("config", "must be a JSON object")
        unknown = sorted(set(override) - set(cfg))
        if unknown:
            raise ConfigError(unknown[0].replace("-", "_"), "unknown option for this subcommand")
        cfg.update(override)
    return cfg


def _emit(report: dict, out: str | None, markdown: bool = False) -> None:
    if markdown:
        text = report_render(report)
        if out:
            Path(out).write_text(text)
        else:
            sys.stdout.write(text)
        return
    if out and out.endswith(".csv"):
        cols = report.get("columns")
        if cols:
            Path(out).write_text(to_csv(report["records"], cols), newline="")
        Path(out).with_suffix(".json").write_text(dumps(report))
    elif out:
        Path(out).write_text(dumps(report))
    else:
        sys.stdout.write(dumps(report))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = resolve_config(args)
        if args.command == "report":
            _emit(run_report(cfg), args.out, markdown=True)
            return 0
        report = RUNNERS[args.command](cfg)
    except ConfigError as exc:
        print(f"wavecount: invalid config field '{exc.field}': {str(exc).split(': ', 1)[1]}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"wavecount: error: {exc}", file=sys.stderr)
        return 1
    _emit(report, args.out)
    print(f"wavecount {args.command}: {time.perf_counter() - start:.2f}s", file=sys.stderr)
    failed = sorted(k for k, v in report["invariants"].items() if not v)
    if failed:
        print("wavecount: invariant failed: " + ", ".join(failed), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
