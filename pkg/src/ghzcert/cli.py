"""Command-line front end: rate curves, protocol simulation, operator verification, tradeoff tables, entropies.

Exit codes: 0 success, 2 invalid configuration, 3 verification failure,
4 numerical non-convergence. Artifacts go to --out-dir, which defaults to
$GHZCERT_OUTPUT_DIR or the current directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certify import (
    CertificationParams,
    asymptotic_distill_rate,
    certified_rate,
    leading_order_rate,
    leading_order_zero_crossing,
    one_shot_distill_bound,
)
from .ghz import GhzDiagonalSpec, SourceModel, ghz_diagonal_state
from .mabk import (
    mabk_operator,
    p_bounds,
    random_equatorial_parties,
    unroll_coefficients,
    verify_bipartition_factorization,
)
from .protocol import DeviceModel, certificate_for, estimate_abort_probability, run_protocol, run_protocol_with_projection
from .qmath import ConvergenceError, DensityMatrix, coherent_information, conditional_entropy, max_entropy_conditional, von_neumann_entropy
from .tradeoff import f_max_linearized, f_piecewise, tangent_coeffs

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_NUMERIC = 0, 2, 3, 4
OUTPUT_ENV = "GHZCERT_OUTPUT_DIR"
RESIDUAL_TOL = 1e-10


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.12g}" if isinstance(v, float) else str(v)


def _write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())
    return path


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


# ---------------------------------------------------------------------------
# rate-curve


def cmd_rate_curve(args) -> int:
    M, gamma = args.m, args.gamma
    _require(M >= 2, "--m must be >= 2")
    _require(0 < gamma < 1, "--gamma must lie in (0, 1)")
    _require(args.points >= 2, "--points must be >= 2 (empty grid)")
    lo, hi = p_bounds(M)
    w_lo = lo if args.omega_min is None else args.omega_min
    w_hi = hi if args.omega_max is None else args.omega_max
    _require(lo - 1e-12 <= w_lo < w_hi <= hi + 1e-12, f"omega grid must be a nonempty subrange of [{lo}, {hi}]")
    omegas = np.linspace(w_lo, w_hi, args.points)

    rows = []
    for w in omegas:
        w = float(w)
        lead = leading_order_rate(w, gamma, M, args.delta_est)
        per_round, pt = float("nan"), float("nan")
        if args.n:
            params = CertificationParams(
                n=args.n, gamma=gamma, omega_exp=w, delta_est=args.delta_est,
                eps_smo=args.eps_smo, eps_snd=args.eps_snd, M=M,
            )
            cert = certified_rate(params, grid_points=args.pt_grid)
            per_round, pt = cert.rate_per_round, cert.pt_star
        rows.append((w, lead, per_round, pt))

    out = _out_dir(args)
    stem = f"rate_curve_M{M}"
    csv_path = _write_csv(out / f"{stem}.csv", ["omega_exp", "leading_order_rate", "rate_per_round", "pt_star"], rows)
    lead = np.array([r[1] for r in rows])
    try:
        zero = leading_order_zero_crossing(gamma, M, args.delta_est)
    except ValueError:
        zero = None  # no sign change on [p_min, p_max]
    summary = {
        "M": M,
        "gamma": gamma,
        "n": args.n,
        "delta_est": args.delta_est,
        "points": args.points,
        "right_endpoint_leading_order": float(lead[-1]),
        "zero_crossing": zero,
        "monotone_increasing": bool(np.all(np.diff(lead) >= -1e-12)),
        "csv": str(csv_path),
    }
    if not args.no_svg:
        from .plotting import rate_curve_figure

        per = np.array([r[2] for r in rows])
        summary["svg"] = str(rate_curve_figure(omegas, lead, per if args.n else None, zero, M, gamma, out / f"{stem}.svg"))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    M = args.m
    _require(M >= 2, "--m must be >= 2")
    _require(args.n >= 1, "--n must be >= 1")
    _require(0 <= args.visibility <= 1, "--visibility must lie in [0, 1]")
    _require(args.trials == 0 or args.trials >= 100, "--trials must be 0 or >= 100")
    omega_exp = p_bounds(M)[1] if args.omega_exp is None else args.omega_exp
    params = CertificationParams(
        n=args.n, gamma=args.gamma, omega_exp=omega_exp, delta_est=args.delta_est,
        eps_smo=args.eps_smo, eps_snd=args.eps_snd, M=M,
    )
    source = SourceModel("honest-werner", M, visibility=args.visibility)
    device = DeviceModel(args.device, M)
    run = run_protocol_with_projection if args.protocol == 2 else run_protocol
    tr = run(source, device, params, args.seed)

    out = _out_dir(args)
    stem = f"simulate_M{M}_p{args.protocol}_s{args.seed}"
    report = tr.summary()
    report["device"] = args.device
    report["visibility"] = args.visibility
    report["certificate"] = None
    if not tr.aborted:
        try:
            cert = certificate_for(tr)
            report["certificate"] = {k: float(v) for k, v in vars(cert).items()}
        except ValueError as exc:
            report["certificate_error"] = str(exc)
    if args.trials:
        est = estimate_abort_probability(source, device, params, args.trials, args.seed, args.protocol)
        report["abort_estimate"] = {
            "rate": est.rate,
            "wilson_95": list(est.interval),
            "aborts": est.aborts,
            "trials": est.trials,
            "completeness_bound": math.exp(-2 * args.n * args.delta_est**2),
        }
    if args.transcript:
        p = out / f"{stem}.jsonl"
        p.write_text(tr.to_jsonl())
        report["transcript"] = str(p)
    if not args.no_svg:
        from .plotting import win_trace_figure

        report["svg"] = str(win_trace_figure(tr.W, params.p1_threshold, out / f"{stem}.svg"))
    report["json"] = str(out / f"{stem}.json")
    _write_json(out / f"{stem}.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    M = args.m
    _require(2 <= M <= 8, "--m must lie in [2, 8]")
    _require(args.trials >= 1, "--trials must be >= 1")
    table = unroll_coefficients(M)
    if args.flip_coefficient is not None:
        _require(args.flip_coefficient in table.support, f"{args.flip_coefficient!r} is not a supported input string")
        table = table.with_flipped(args.flip_coefficient)
    rng = np.random.default_rng(args.seed)
    cap = 2 ** ((M - 1) / 2)
    cuts = list(range(1, M - 1))  # the head keeps at least two parties
    recursion, factorization, cap_excess = [], {m: [] for m in cuts}, []
    for _ in range(args.trials):
        parties = random_equatorial_parties(M, rng)
        K = mabk_operator(parties)
        recursion.append(float(np.linalg.norm(K - table.assemble(parties))))
        for m in cuts:
            factorization[m].append(verify_bipartition_factorization(M, m, parties))
        cap_excess.append(float(np.max(np.abs(np.linalg.eigvalsh(K))) - cap))
    worst = max([max(recursion)] + [max(v) for v in factorization.values()] + [max(cap_excess)])
    report = {
        "M": M,
        "trials": args.trials,
        "seed": args.seed,
        "flipped": args.flip_coefficient,
        "recursion_vs_table_max": max(recursion),
        "factorization_max": {str(m): max(v) for m, v in factorization.items()},
        "tsirelson_cap": cap,
        "tsirelson_excess_max": max(cap_excess),
        "tolerance": RESIDUAL_TOL,
        "passed": worst <= RESIDUAL_TOL,
    }
    out = _out_dir(args)
    _write_json(out / f"verify_M{M}.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------------------
# tradeoff


def cmd_tradeoff(args) -> int:
    M, gamma = args.m, args.gamma
    _require(M >= 2, "--m must be >= 2")
    _require(0 < gamma < 1, "--gamma must lie in (0, 1)")
    _require(args.points >= 2, "--points must be >= 2")
    lo, hi = p_bounds(M)
    pt1 = gamma * (lo + hi) / 2 if args.pt1 is None else args.pt1
    t = tangent_coeffs(pt1, gamma, M)
    p1 = np.linspace(0.0, gamma, args.points)
    f = f_piecewise(p1, gamma, M)
    fm = f_max_linearized(p1, pt1, gamma, M)
    rows = [(float(x), float(a), float(b), t.a, t.b) for x, a, b in zip(p1, f, fm)]
    out = _out_dir(args)
    stem = f"tradeoff_M{M}"
    path = _write_csv(out / f"{stem}.csv", ["p1", "f", "f_max", "a", "b"], rows)
    summary = {"M": M, "gamma": gamma, "pt1": pt1, "a": t.a, "b": t.b, "csv": str(path),
               "dominates": bool(np.all(fm >= f - 1e-12))}
    if not args.no_svg:
        from .plotting import tradeoff_figure

        summary["svg"] = str(tradeoff_figure(p1, f, fm, pt1, M, gamma, out / f"{stem}.svg"))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entropy


def _load_spec(path: str) -> GhzDiagonalSpec:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return GhzDiagonalSpec.from_json(text)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad state spec: {exc}") from exc


def cmd_entropy(args) -> int:
    spec = _load_spec(args.spec)
    M = spec.M
    _require(M <= 6, "entropy tables are limited to M <= 6")
    rho: DensityMatrix = ghz_diagonal_state(spec)
    do_hmax = M <= 4 and not args.no_hmax
    rows = []
    for r in range(1, M):
        for K in itertools.combinations(range(M), r):
            rest = [i for i in range(M) if i not in K]
            hmax = max_entropy_conditional(rho, K) if do_hmax else float("nan")
            rows.append(("".join(map(str, K)), conditional_entropy(rho, K, rest), coherent_information(rho, K), hmax))
    out = _out_dir(args)
    stem = f"entropy_M{M}"
    path = _write_csv(out / f"{stem}.csv", ["K", "H_cond", "coherent_info", "H_max_cond"], rows)
    summary = {
        "M": M,
        "entropy": von_neumann_entropy(rho),
        "asymptotic_rate": asymptotic_distill_rate(rho, M),
        "one_shot_bound": one_shot_distill_bound(rho, M, args.eps_prime) if do_hmax else None,
        "eps_prime": args.eps_prime,
        "csv": str(path),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="ghzcert", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, svg=True):
        p.add_argument("--out-dir", default=None, help=f"artifact directory (${OUTPUT_ENV} or . if omitted)")
        if svg:
            p.add_argument("--no-svg", action="store_true", help="skip the SVG figure")

    p = sub.add_parser("rate-curve", help="certified rate against omega_exp", formatter_class=fmt)
    p.add_argument("--m", type=int, default=4, help="number of parties M")
    p.add_argument("--gamma", type=float, default=0.5, help="test probability per round")
    p.add_argument("--n", type=int, default=10**10, help="rounds for the finite-n column (0 disables it)")
    p.add_argument("--delta-est", type=float, default=0.0, help="confidence width (probability per round)")
    p.add_argument("--eps-smo", type=float, default=1e-5, help="smoothing parameter (dimensionless)")
    p.add_argument("--eps-snd", type=float, default=1e-2, help="soundness parameter (dimensionless)")
    p.add_argument("--points", type=int, default=101, help="omega_exp grid size")
    p.add_argument("--omega-min", type=float, default=None, help="grid start (p_min for the parity of M if omitted)")
    p.add_argument("--omega-max", type=float, default=None, help="grid end (p_max for the parity of M if omitted)")
    p.add_argument("--pt-grid", type=int, default=512, help="tangent-point scan size before golden-section refinement")
    common(p)
    p.set_defaults(func=cmd_rate_curve)

    p = sub.add_parser("simulate", help="Monte Carlo run of the test protocol", formatter_class=fmt)
    p.add_argument("--m", type=int, default=4, help="number of parties M")
    p.add_argument("--n", type=int, default=10_000, help="rounds")
    p.add_argument("--gamma", type=float, default=0.5, help="test probability per round")
    p.add_argument("--visibility", type=float, default=1.0, help="GHZ visibility v of the Werner source")
    p.add_argument("--delta-est", type=float, default=0.02, help="confidence width (probability per round)")
    p.add_argument("--omega-exp", type=float, default=None, help="expected winning probability (p_max if omitted)")
    p.add_argument("--eps-smo", type=float, default=1e-5, help="smoothing parameter (dimensionless)")
    p.add_argument("--eps-snd", type=float, default=1e-2, help="soundness parameter (dimensionless)")
    p.add_argument("--trials", type=int, default=0, help="extra runs for the abort estimate (0 skips, else >= 100)")
    p.add_argument("--seed", type=int, default=0, help="64-bit root seed")
    p.add_argument("--protocol", type=int, choices=(1, 2), default=1, help="2 adds the Jordan-block instrument")
    p.add_argument("--device", choices=("honest-optimal", "classical-deterministic"), default="honest-optimal",
                   help="measurement device model")
    p.add_argument("--transcript", action="store_true", help="also write the JSON-lines transcript")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="MABK operator identities on random settings", formatter_class=fmt)
    p.add_argument("--m", type=int, default=4, help="number of parties M")
    p.add_argument("--trials", type=int, default=50, help="random equatorial instances")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--flip-coefficient", default=None, metavar="BITS",
                   help="flip the sign of one table entry (mutation check; should fail)")
    common(p, svg=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tradeoff", help="f and its linearization f_max on a p1 grid", formatter_class=fmt)
    p.add_argument("--m", type=int, default=4, help="number of parties M")
    p.add_argument("--gamma", type=float, default=0.5, help="test probability per round")
    p.add_argument("--pt1", type=float, default=None, help="tangent point (gamma*(p_min+p_max)/2 if omitted)")
    p.add_argument("--points", type=int, default=201, help="p1 grid size over [0, gamma]")
    common(p)
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("entropy", help="entropy table of a GHZ-diagonal state", formatter_class=fmt)
    p.add_argument("spec", help="GhzDiagonalSpec JSON file ('-' for stdin)")
    p.add_argument("--eps-prime", type=float, default=1e-4, help="one-shot smoothing (dimensionless)")
    p.add_argument("--no-hmax", action="store_true", help="skip the H_max column and the one-shot bound")
    common(p, svg=False)
    p.set_defaults(func=cmd_entropy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
