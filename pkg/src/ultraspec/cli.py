"""``ultraspec`` command line: configs in, JSON reports and CSV grids out.

Every document written carries ``"schema": "ultraspec/1"`` and a header with
the tool version and the parameters of the run. Exit codes: 0 success,
2 invalid input, 3 failed numerical consistency check, 1 anything else.
Failures print a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConsistencyError, DivergenceError, EigenvalueHitError,
                     PoleProximityError, UltraspecError, ValidationError)
from .model_core import (BallRef, HierModel, Kind, PAdicPoint, model_from_dict,
                         model_from_json, point_from_json, spectral_dimension,
                         spectrum_laplacian)

SCHEMA = "ultraspec/1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors become validation errors
        raise ValidationError(message)


# ---------------------------------------------------------------------------
# input helpers


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, PAdicPoint):
        return x.to_dict()
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path} must hold a JSON object")
    if data.get("schema", SCHEMA) != SCHEMA:
        raise ValidationError(f"unsupported schema {data['schema']!r}")
    return data


def _reject_unknown(d: dict, allowed: set, what: str) -> None:
    extra = set(d) - allowed - {"schema"}
    if extra:
        raise ValidationError(f"unknown {what} keys: {sorted(extra)}")


def parse_grid(text: str) -> np.ndarray:
    """``log:a:b:n``, ``lin:a:b:n`` or a comma separated list of numbers."""
    try:
        if text.startswith(("log:", "lin:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise ValueError
                return np.geomspace(a, b, n)
            return np.linspace(a, b, n)
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise ValidationError(f"bad grid {text!r}") from None


def parse_point(model: HierModel, text):
    """Integer, or ``v:digits`` (valuation and low-to-high digits) on the field."""
    if isinstance(text, (int, dict)):
        return point_from_json(model, text)
    text = str(text).strip()
    try:
        if ":" in text:
            v, digits = text.split(":", 1)
            return point_from_json(model, {"valuation": int(v),
                                           "digits": [int(c) for c in digits]})
        return point_from_json(model, int(text))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad point {text!r}") from None


def _point_text(x) -> str:
    if isinstance(x, PAdicPoint):
        return f"{x.valuation}:{''.join(map(str, x.digits))}"
    return str(x)


def read_pairs(model: HierModel, path: str) -> list:
    try:
        rows = list(csv.reader(Path(path).read_text().splitlines()))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if rows and rows[0][0].strip().lower() == "x":
        rows = rows[1:]
    pairs = []
    for r in rows:
        if len(r) != 2:
            raise ValidationError(f"pair rows need two columns: {r}")
        pairs.append((parse_point(model, r[0]), parse_point(model, r[1])))
    if not pairs:
        raise ValidationError("no point pairs given")
    return pairs


def parse_ball(model: HierModel, text: str) -> BallRef:
    """``rank=r,anchor=x``."""
    fields = {}
    for part in text.split(","):
        if "=" not in part:
            raise ValidationError(f"bad ball spec {text!r}")
        k, v = part.split("=", 1)
        fields[k.strip()] = v.strip()
    _reject_unknown(fields, {"rank", "anchor"}, "ball")
    try:
        rank = int(fields.get("rank", 0))
    except ValueError:
        raise ValidationError(f"bad ball rank in {text!r}") from None
    return BallRef(model, parse_point(model, fields.get("anchor", "0")), rank)


def sites_from_dict(model: HierModel, d: dict):
    from .resolvent import SiteConfig

    sites = d.get("sites")
    if not isinstance(sites, list):
        raise ValidationError("'sites' must be a list")
    out = []
    for s in sites:
        if not isinstance(s, dict):
            raise ValidationError("each site is an object {point, sigma}")
        _reject_unknown(s, {"point", "sigma"}, "site")
        out.append((parse_point(model, s.get("point", 0)), float(s["sigma"])))
    return SiteConfig(tuple(out), model)


def potential_from_dict(model: HierModel, d: dict):
    """{"type": "sites" | "balls" | "dyson", ...} with the fields of each type."""
    from .dyson import DysonPotential
    from .neg_counter import BallPotential

    kind = d.get("type")
    if kind == "sites":
        _reject_unknown(d, {"type", "sites", "model"}, "potential")
        return sites_from_dict(model, d)
    if kind == "balls":
        _reject_unknown(d, {"type", "balls", "model"}, "potential")
        balls = []
        for b in d.get("balls", []):
            _reject_unknown(b, {"rank", "anchor", "sigma"}, "ball")
            balls.append((BallRef(model, parse_point(model, b.get("anchor", 0)),
                                  int(b.get("rank", 0))), float(b["sigma"])))
        if not balls:
            raise ValidationError("ball potential is empty")
        return BallPotential(tuple(balls))
    if kind == "dyson":
        _reject_unknown(d, {"type", "prefix", "rule", "value", "interval", "model"},
                        "potential")
        if model.kind is not Kind.DYSON_DYADIC:
            raise ValidationError("a dyson potential needs the dyson_dyadic model")
        return DysonPotential(model.kappa, tuple(d.get("prefix", ())), d.get("rule", "constant"),
                              float(d.get("value", 0.0)),
                              tuple(d["interval"]) if "interval" in d else None)
    raise ValidationError("potential 'type' must be 'sites', 'balls' or 'dyson'")


def parse_sigmas(kappa: float, text: str, prefix: str | None):
    """``dense:a:b`` or ``const:v``, preceded by an optional comma separated prefix."""
    from .dyson import DysonPotential

    head = tuple(float(v) for v in prefix.split(",")) if prefix else ()
    try:
        kind, *rest = text.split(":")
        if kind == "dense" and len(rest) == 2:
            return DysonPotential(kappa, head, "dense", interval=(float(rest[0]), float(rest[1])))
        if kind == "const" and len(rest) == 1:
            return DysonPotential(kappa, head, "constant", float(rest[0]),
                                  require_distinct=bool(head))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
    raise ValidationError(f"bad sigma rule {text!r}")


# ---------------------------------------------------------------------------
# output helpers


def header(args, model: HierModel | None, **params) -> dict:
    h = {"schema": SCHEMA, "tool": "ultraspec", "version": __version__,
         "command": args.command, "threads": args.threads}
    if model is not None:
        h["model"] = model.to_dict()
    h["params"] = _jsonable(params)
    return h


def emit_json(doc: dict, path: str | None) -> None:
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def emit_csv(head: dict, columns: list[str], rows: list, path: str | None) -> None:
    buf = io.StringIO()
    buf.write(f"# {json.dumps(_jsonable(head), sort_keys=False)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating))
                                          else v) for v in r])
    if path:
        Path(path).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _model(args) -> HierModel:
    path = getattr(args, "model", None) or getattr(args, "file", None)
    if not path:
        raise ValidationError("a model file is required (--model)")
    return model_from_json(Path(path))


# ---------------------------------------------------------------------------
# subcommands


def cmd_model(args) -> dict:
    model = _model(args)
    lo, hi = _rank_range(args.ranks)
    rows = [{"rank": k, "lambda": model.lam(k), "measure": model.measure(k),
             "C": model.coef(k)} for k in range(lo, hi + 1)]
    from .kernels import is_transient
    return {**header(args, model, ranks=[lo, hi]), "kappa": model.kappa,
            "s_h": spectral_dimension(model), "transient": is_transient(model),
            "table": rows}


def _rank_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise ValidationError(f"bad rank range {text!r}") from None
    if lo > hi:
        raise ValidationError("empty rank range")
    return lo, hi


def cmd_spectrum(args) -> dict:
    model = _model(args)
    lo, hi = _rank_range(args.ranks)
    rep = spectrum_laplacian(model, (lo, hi))
    return {**header(args, model, ranks=[lo, hi]), **rep.to_dict()}


def cmd_heat(args):
    from .kernels import heat_band, heat_kernel

    model = _model(args)
    ts = parse_grid(args.t_grid)
    if np.any(ts <= 0):
        raise ValidationError("heat kernel times must be positive")
    pairs = read_pairs(model, args.pairs)
    with_band = model.kind is Kind.PADIC_FIELD
    rows = []
    for t in ts:
        for x, y in pairs:
            val = heat_kernel(model, float(t), x, y)
            lo, hi = heat_band(model, float(t), x, y) if with_band else (None, None)
            rows.append((float(t), _point_text(x), _point_text(y), val, lo, hi))
    head = header(args, model, t_grid=args.t_grid, pairs=len(pairs), band=with_band)
    emit_csv(head, ["t", "x", "y", "p", "band_lo", "band_hi"], rows, args.csv)
    return None


def cmd_green(args) -> dict:
    from .kernels import green_closed_form, green_function, is_transient

    model = _model(args)
    if args.pairs:
        pairs = read_pairs(model, args.pairs)
    else:
        if args.x is None or args.y is None:
            raise ValidationError("give --pairs or both --x and --y")
        pairs = [(parse_point(model, args.x), parse_point(model, args.y))]
    if not is_transient(model):
        raise DivergenceError("divergent Green function: the model is recurrent")
    out = []
    for x, y in pairs:
        row = {"x": _point_text(x), "y": _point_text(y), "green": green_function(model, x, y)}
        if model.kind is not Kind.DYSON_DYADIC:
            row["closed_form"] = green_closed_form(model, x, y)
        out.append(row)
    return {**header(args, model, pairs=len(pairs)), "values": out}


def cmd_rank_one(args) -> dict:
    from .resolvent import rank_one_spectrum

    model = _model(args)
    site = parse_point(model, args.site)
    rep = rank_one_spectrum(model, args.sigma, site, args.gaps)
    roots = {q.gap: q.value for q in rep.points if q.origin == "gap-root"}
    return {**header(args, model, sigma=args.sigma, site=_point_text(site), gaps=args.gaps),
            "gap_k": sorted(k for k in roots if k >= 1),
            "roots": [roots[k] for k in sorted(k for k in roots if k >= 1)],
            "negative": [q.value for q in rep.points if q.origin == "Xi-"],
            "spectrum": rep.to_dict()}


def cmd_finite_rank(args) -> dict:
    from .resolvent import (finite_rank_gap_eigenvalues, finite_rank_negative_eigenvalues,
                            gershgorin_separation)

    data = _load_json(args.sites)
    _reject_unknown(data, {"type", "sites", "model"}, "sites")
    if args.model:
        model = model_from_json(Path(args.model))
    elif "model" in data:
        model = model_from_dict(data["model"])
    else:
        raise ValidationError("no model: pass --model or embed 'model' in the sites file")
    cfg = sites_from_dict(model, data)
    gaps = list(range(1, args.gaps + 1))
    roots = [finite_rank_gap_eigenvalues(model, cfg, k, method=args.method) for k in gaps]
    gsh = {str(k): gershgorin_separation(model, cfg, k).to_dict() for k in gaps}
    return {**header(args, model, gaps=args.gaps, method=args.method,
                     sites=[[_point_text(a), s] for a, s in cfg.sites]),
            "gap_k": gaps, "roots": roots,
            "negative": finite_rank_negative_eigenvalues(model, cfg),
            "gershgorin": gsh}


def cmd_neg_count(args) -> dict:
    from .kernels import is_transient
    from .neg_counter import (BallPotential, k_star, neg_bounds_general,
                              neg_count_Lminus_exact, omega_region)

    model = _model(args)
    ball = parse_ball(model, args.ball)
    if not args.sigma > 0:
        raise ValidationError("sigma must be positive")
    pot = BallPotential(((ball, args.sigma),))
    bounds = neg_bounds_general(model, pot, sigma_param=args.sigma_param)
    doc = header(args, model, ball={"rank": ball.rank, "anchor": _point_text(ball.anchor)},
                 sigma=args.sigma, sigma_param=args.sigma_param)
    if model.kind is Kind.PADIC_FIELD:
        # dilating the ball onto Z_p multiplies the depth by p^(alpha rank)
        eff = args.sigma * model.p ** (model.alpha * ball.rank)
        reg = omega_region(model.p, model.alpha, eff)
        doc["region"] = reg["region"]
        doc["omega"] = reg
    else:
        doc["region"] = None
    doc.update(k_star=k_star(model, args.sigma, ball.rank),
               exact_Lminus=neg_count_Lminus_exact(model, ball, args.sigma),
               bounds={"lower": bounds["lower"], "upper": bounds["upper"]},
               clr_bound=bounds["clr"] if is_transient(model) else None)
    if args.oracle_K is not None:
        from .oracle import TruncationSpec, count_negative, oracle_spectrum, padic_resolution_for

        res = padic_resolution_for(model, args.sigma, ball.rank) \
            if model.kind is Kind.PADIC_FIELD else 0
        spec = TruncationSpec(args.oracle_K, "compression", res)
        eigs = oracle_spectrum(model, spec, pot).eigenvalues
        doc["oracle_count"] = count_negative(eigs, 1e-10)
    return doc


def cmd_dyson(args):
    from .dyson import minimal_solution_classify

    pot = parse_sigmas(args.kappa, args.sigmas, args.prefix)
    grid = parse_grid(args.lambda_grid)
    lo, hi = args.fit_window
    rows = []
    for lam in grid:
        lam = float(lam)
        if pot.distance_to_closure(lam) < 1e-9:
            rows.append((lam, None, "closure"))
            continue
        try:
            r = minimal_solution_classify(lam, pot, args.depth, (lo, hi))
        except ValidationError:
            rows.append((lam, None, "pole"))
            continue
        rows.append((lam, r["decay_exponent"],
                     "resolvent" if r["is_candidate_resolvent_set"] else "spectrum"))
    head = header(args, HierModel.dyson(args.kappa), sigmas=pot.to_dict(),
                  lambda_grid=args.lambda_grid, depth=args.depth, fit_window=[lo, hi])
    emit_csv(head, ["lambda", "exponent", "class"], rows, args.csv)
    return None


def cmd_oracle(args) -> dict:
    from .oracle import (TruncationSpec, compare_spectra, count_negative, gap_intervals,
                         multiplicity_match, analytic_multiset, oracle_spectrum,
                         padic_resolution_for)
    from .neg_counter import BallPotential, neg_bounds_general, neg_count_Lminus_exact
    from .resolvent import (SiteConfig, finite_rank_gap_eigenvalues,
                            finite_rank_negative_eigenvalues)

    model = _model(args)
    params = dict(K=args.K, tol=args.tol, tail_mode=args.tail_mode)
    if not args.potential:
        spec = TruncationSpec(args.K, args.tail_mode)
        spec.check(model)
        res = oracle_spectrum(model, spec)
        match = multiplicity_match(res.eigenvalues, analytic_multiset(model, spec))
        ok = all(f == e for f, e in match.values())
        return {**header(args, model, **params), "passed": ok,
                "multiplicities": [{"value": v, "found": f, "expected": e}
                                   for v, (f, e) in match.items()]}
    pot = potential_from_dict(model, _load_json(args.potential))
    if isinstance(pot, SiteConfig):
        spec = TruncationSpec(args.K, args.tail_mode)
        spec.check(model)
        gaps = list(range(1, (args.gaps or max(args.K - 4, 1)) + 1))
        analytic = [r for k in gaps for r in finite_rank_gap_eigenvalues(model, pot, k)]
        analytic += finite_rank_negative_eigenvalues(model, pot)
        eigs = oracle_spectrum(model, spec, pot).eigenvalues
        rep = compare_spectra(analytic, eigs, gap_intervals(model, gaps), tol=args.tol,
                              neg_threshold=args.neg_threshold)
        return {**header(args, model, gaps=gaps, **params), **rep.to_dict()}
    if isinstance(pot, BallPotential):
        rank = max(b.rank for b, _ in pot.balls)
        depth = max(s for _, s in pot.balls)
        res = padic_resolution_for(model, depth, min(b.rank for b, _ in pot.balls)) \
            if model.kind is Kind.PADIC_FIELD else 0
        spec = TruncationSpec(max(args.K + res, rank + 1), args.tail_mode, res)
        spec.check(model)
        eigs = oracle_spectrum(model, spec, pot).eigenvalues
        n_or = count_negative(eigs, args.neg_threshold)
        b = neg_bounds_general(model, pot)
        exact = sum(neg_count_Lminus_exact(model, bb, s) for bb, s in pot.balls)
        ok = b["lower"] <= n_or <= b["upper"] and exact <= n_or <= exact + len(pot.balls)
        return {**header(args, model, cell_rank=res, **params), "passed": bool(ok),
                "oracle_count": n_or, "exact_Lminus": exact,
                "bounds": {"lower": b["lower"], "upper": b["upper"]}, "clr_bound": b["clr"]}
    raise ValidationError("oracle compare handles site and ball potentials")


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ultraspec", description="Spectra of hierarchical Schroedinger operators.")
    ap.add_argument("--version", action="version", version=f"ultraspec {__version__}")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: $ULTRASPEC_THREADS or 1)")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def out_json(p):
        p.add_argument("--json", default=None, help="write the JSON report here (default stdout)")

    p = sub.add_parser("model", help="eigenvalue table and spectral dimension")
    p.add_argument("--file", "--model", dest="model", required=True)
    p.add_argument("--ranks", default="1:10", help="rank range lo:hi (default 1:10)")
    out_json(p)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("spectrum", help="spectrum of L over a rank window")
    p.add_argument("--model", required=True)
    p.add_argument("--ranks", default="1:10", help="rank window lo:hi (default 1:10)")
    out_json(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("heat", help="heat kernel on a time grid (CSV)")
    p.add_argument("--model", required=True)
    p.add_argument("--t-grid", default="log:1e-4:1e4:50",
                   help="log:a:b:n, lin:a:b:n or a list (default log:1e-4:1e4:50)")
    p.add_argument("--pairs", required=True, help="CSV of point pairs x,y")
    p.add_argument("--csv", default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_heat)

    p = sub.add_parser("green", help="Green function R(0, x, y)")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs", default=None)
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    out_json(p)
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("rank-one", help="spectrum of L - sigma delta_a")
    p.add_argument("--model", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--site", default="0")
    p.add_argument("--gaps", type=int, default=6, help="number of gaps (default 6)")
    out_json(p)
    p.set_defaults(func=cmd_rank_one)

    p = sub.add_parser("finite-rank", help="eigenvalues of L - sum sigma_i delta_{a_i}")
    p.add_argument("--sites", required=True, help="JSON {sites: [{point, sigma}], model?}")
    p.add_argument("--model", default=None)
    p.add_argument("--gaps", type=int, default=4, help="number of gaps (default 4)")
    p.add_argument("--method", choices=("inertia", "scan"), default="inertia")
    out_json(p)
    p.set_defaults(func=cmd_finite_rank)

    p = sub.add_parser("neg-count", help="negative eigenvalues of L - sigma 1_B")
    p.add_argument("--model", required=True)
    p.add_argument("--ball", default="rank=0,anchor=0")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--sigma-param", type=float, default=2.0,
                   help="time split of the CLR integral (default 2.0)")
    p.add_argument("--oracle-K", type=int, default=None,
                   help="also count with a truncation of this outer rank")
    p.add_argument("--report", choices=("json",), default="json")
    out_json(p)
    p.set_defaults(func=cmd_neg_count)

    p = sub.add_parser("dyson", help="minimal-solution decay on a lambda grid (CSV)")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--sigmas", required=True, help="dense:a:b or const:v")
    p.add_argument("--prefix", default=None, help="explicit leading depths, comma separated")
    p.add_argument("--lambda-grid", default="lin:-2:2:400")
    p.add_argument("--depth", type=int, default=400, help="recurrence depth (default 400)")
    p.add_argument("--fit-window", type=int, nargs=2, default=(5, 45), metavar=("LO", "HI"))
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_dyson)

    p = sub.add_parser("oracle", help="brute-force truncation checks")
    osub = p.add_subparsers(dest="action", parser_class=_Parser)
    q = osub.add_parser("compare", help="analytic spectrum against the truncated matrix")
    q.add_argument("--model", required=True)
    q.add_argument("--potential", default=None,
                   help="JSON potential; omit to check the multiplicities of L")
    q.add_argument("--K", type=int, default=10, help="outer rank (default 10)")
    q.add_argument("--tol", type=float, default=1e-6)
    q.add_argument("--gaps", type=int, default=None, help="gaps compared (default K-4)")
    q.add_argument("--tail-mode", choices=("compression", "exact_tail"), default="compression")
    q.add_argument("--neg-threshold", type=float, default=1e-10)
    out_json(q)
    q.set_defaults(func=cmd_oracle)
    return ap


def _threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get("ULTRASPEC_THREADS")
        try:
            value = int(env) if env else 1
        except ValueError:
            raise ValidationError("ULTRASPEC_THREADS must be an integer") from None
    if value < 1:
        raise ValidationError("thread count must be >= 1")
    # every kernel runs on the serial reference path; the count is recorded
    # in the header so that reports state the setting they were made with
    return value


def _error(exc: BaseException, code: int) -> int:
    kind = getattr(exc, "kind", "internal")
    doc = {"schema": SCHEMA, "version": __version__,
           "error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)},
           "exit_code": code}
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ValidationError("a subcommand is required")
        if args.command == "oracle" and getattr(args, "action", None) is None:
            raise ValidationError("oracle needs an action (compare)")
        args.threads = _threads(args.threads)
        doc = args.func(args)
        if doc is not None:
            emit_json(doc, getattr(args, "json", None))
        return 0
    except (ValidationError, DivergenceError, PoleProximityError, EigenvalueHitError) as exc:
        return _error(exc, 2)
    except ConsistencyError as exc:
        return _error(exc, 3)
    except UltraspecError as exc:
        return _error(exc, 1)
    except (KeyError, TypeError, ValueError) as exc:  # malformed config values
        return _error(ValidationError(f"invalid configuration: {exc}"), 2)
    except Exception as exc:  # noqa: BLE001 - every failure yields an error object
        return _error(exc, 1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
