"""Command-line front end: ``kflab <subcommand> ...``.

Exit status is 0 when every embedded verdict passes, 2 when a verdict fails
and 1 on malformed input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import exterior as ext
from . import kempf_ness as kn
from .fano_p1 import make_profile
from .functionals import ConvexityScan, ding_convexity_scan
from .io import InputError, check_writable, emit, load_json, load_profile, save_profile
from .parallel import ordered_map
from .ricci_flow import FlowConfig, FlowTrace, monotonicity_report, run
from .spectral import SpectralReport, spectral_report

log = logging.getLogger("kflab")

EXTERIOR_COLUMNS = ("seed", "n", "pair_alpha_alpha", "identity5_max_residual", "gram_max_eig")
KN_CONFIG_FIELDS = {
    "m": 3, "k": 2, "weights": None, "shift": None, "base_point": None, "b_function": "quadratic",
    "dt": 1e-3, "t_max": 1.0, "seed": None, "sample_every": 1, "max_weight": 2, "path_pairs": 20,
}


def _schema_epilog(name, columns):
    return f"CSV columns ({name}): " + ", ".join(columns)


# subcommands -----------------------------------------------------------------


def exterior_sample(n, seed, n_vectors=4):
    """Pairing, largest transverse Gram eigenvalue and contraction-identity residual at one cone point."""
    rng = np.random.default_rng(seed)
    point = ext.random_cone_point(n, seed)
    p = complex(ext.pair(point.realized, point.realized))
    G, max_eig = ext.tangent_gram(point)
    res = max(ext.identity5_residual(rng.normal(size=2 * n), point) for _ in range(n_vectors))
    ok = p.real > 0 and abs(p.imag) < 1e-10 and max_eig <= -1e-8 * np.linalg.norm(G, 2) and res < 1e-10
    return p.real, res, max_eig, ok


def sample_seeds(seed, count):
    """Independent integer seeds derived from one master seed."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def cmd_exterior(args):
    if args.n not in (1, 2, 3):
        raise InputError("--n must be 1, 2 or 3")
    if args.samples < 0:
        raise InputError("--samples must be non-negative")
    check_writable(args.out)
    seeds = sample_seeds(args.seed, args.samples)
    results = ordered_map(lambda s: exterior_sample(args.n, s), seeds)
    emit([(s, args.n, p, r, e) for s, (p, r, e, _) in zip(seeds, results)], EXTERIOR_COLUMNS, args.out)
    ok = all(r[-1] for r in results)
    _report({"all_samples_pass": ok})
    return ok


def _as_int(cfg, key):
    val = cfg[key]
    if not isinstance(val, int) or isinstance(val, bool):
        raise InputError(f"kempf-ness config field {key!r} must be an integer")
    return val


def _b_function(spec):
    if isinstance(spec, str):
        spec = {"tag": spec}
    if not isinstance(spec, dict) or set(spec) - {"tag", "a", "C"}:
        raise InputError("kempf-ness config field 'b_function' must be a tag or an object with keys tag, a, C")
    try:
        return kn.BFunction(**spec)
    except (TypeError, ValueError) as exc:
        raise InputError(f"kempf-ness config field 'b_function': {exc}") from None


def _kn_setup(cfg, rng):
    m, k = _as_int(cfg, "m"), _as_int(cfg, "k")
    explicit = [cfg[f] is not None for f in ("weights", "shift", "base_point")]
    if not any(explicit):
        try:
            return kn.TorusSetup.random(m, k, int(rng.integers(0, 2**63)), _as_int(cfg, "max_weight"))
        except ValueError as exc:
            raise InputError(f"kempf-ness config field 'k': {exc}") from None
    if not all(explicit):
        raise InputError("kempf-ness config: give all of 'weights', 'shift', 'base_point' or none")
    try:
        w = np.asarray(cfg["weights"], dtype=float).reshape(k, m)
    except (TypeError, ValueError):
        raise InputError(f"kempf-ness config field 'weights' must hold k*m = {k * m} numbers (row-major)") from None
    try:
        shift = np.asarray(cfg["shift"], dtype=float).reshape(k)
    except (TypeError, ValueError):
        raise InputError(f"kempf-ness config field 'shift' must hold k = {k} numbers") from None
    try:
        bp = np.asarray(cfg["base_point"], dtype=float).reshape(m, 2)
    except (TypeError, ValueError):
        raise InputError(f"kempf-ness config field 'base_point' must hold m = {m} [re, im] pairs") from None
    try:
        return kn.TorusSetup(w, shift, bp[:, 0] + 1j * bp[:, 1])
    except ValueError as exc:
        raise InputError(f"kempf-ness config field 'weights': {exc}") from None


def _kn_config(data, seed):
    if not isinstance(data, dict):
        raise InputError("kempf-ness config must be a JSON object")
    unknown = set(data) - set(KN_CONFIG_FIELDS)
    if unknown:
        raise InputError(f"unknown kempf-ness config field(s): {sorted(unknown)}")
    cfg = {**KN_CONFIG_FIELDS, **data}
    if cfg["seed"] is None:
        cfg["seed"] = seed
    for key in ("sample_every", "path_pairs", "seed"):
        _as_int(cfg, key)
    for key in ("t_max", "dt"):
        if not isinstance(cfg[key], (int, float)) or isinstance(cfg[key], bool) or cfg[key] <= 0:
            raise InputError(f"kempf-ness config field {key!r} must be a positive number")
    cfg["b_function"] = _b_function(cfg["b_function"])
    return cfg


def path_independence(setup, rng, pairs, radius=1.0, corners=3):
    """Largest discrepancy of the integral of the 1-form over pairs of random paths with common ends."""
    worst = 0.0
    for _ in range(pairs):
        end = rng.uniform(-radius, radius, setup.k)
        paths = [
            np.vstack([np.zeros(setup.k), rng.uniform(-radius, radius, (corners, setup.k)), end])
            for _ in range(2)
        ]
        a, b = (kn.path_integral(setup, p) for p in paths)
        worst = max(worst, abs(a - b))
    return worst


def cmd_kempf_ness(args):
    cfg = _kn_config(load_json(args.config), args.seed)
    check_writable(args.out)
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"]))
    setup = _kn_setup(cfg, rng)
    B = cfg["b_function"]
    trace = kn.flow(setup, B, t_max=cfg["t_max"], dt=cfg["dt"], sample_every=cfg["sample_every"])
    emit(trace.rows(), kn.FlowTraceFD.COLUMNS, args.out)
    verdicts = kn.flow_verdicts(trace, B)
    worst = path_independence(setup, rng, cfg["path_pairs"])
    verdicts["path_independent"] = bool(worst <= 1e-8)
    _report(verdicts)
    return all(verdicts.values())


def _flow_config(data):
    if not isinstance(data, dict):
        raise InputError("flow config must be a JSON object")
    data = dict(data)
    init = data.get("initial")
    if isinstance(init, dict) and set(init) == {"profile"}:
        data["initial"] = load_profile(init["profile"])
    try:
        return FlowConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"flow config: {exc}") from None


def cmd_flow(args):
    config = _flow_config(load_json(args.config))
    check_writable(args.out)
    try:
        config.initial_profile()
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"flow config field 'initial': {exc}") from None
    trace = run(config)
    emit(trace.rows(), FlowTrace.COLUMNS, args.out)
    verdict = monotonicity_report(trace).as_dict()
    # non-convergence by t_max is reported but is not a verdict failure
    if trace.message:
        log.warning("flow: %s", trace.message)
    _report(verdict)
    return bool(verdict["passed"])


def cmd_geodesic(args):
    if args.samples < 2:
        raise InputError("--samples must be at least 2")
    p0, p1 = load_profile(args.a), load_profile(args.b)
    if not p0.same_grid(p1):
        raise InputError("profiles --a and --b must share T and N")
    check_writable(args.out)
    scan = ding_convexity_scan(p0, p1, args.samples)
    emit(scan.rows(), ConvexityScan.COLUMNS, args.out)
    _report({"convex": scan.passed, "min_second_diff": scan.min_second_diff})
    return scan.passed


def cmd_spectrum(args):
    prof = load_profile(args.metric)
    if not 1 <= args.k <= prof.N // 4:
        raise InputError(f"-k must lie in [1, N/4] = [1, {prof.N // 4}]")
    check_writable(args.out)
    rep = spectral_report(prof, args.k)
    emit(rep.rows(), SpectralReport.COLUMNS, args.out)
    _report({"passed": rep.passed, "epsilon": rep.epsilon, "gap_violations": list(rep.gap_violations)})
    return rep.passed


def cmd_profile(args):
    try:
        spec = json.loads(args.spec)
    except json.JSONDecodeError:
        spec = args.spec
    check_writable(args.out)
    try:
        prof = make_profile(args.T, args.N, spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"--spec: {exc}") from None
    save_profile(prof, args.out)
    return True


def _report(verdicts):
    log.info("verdicts: %s", json.dumps(verdicts, default=float))
    failed = [k for k, v in verdicts.items() if v is False]
    if failed:
        print("verdict failure: " + ", ".join(failed), file=sys.stderr)


# parser ----------------------------------------------------------------------


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="kflab", description=__doc__, formatter_class=fmt)
    parser.add_argument("--seed", type=int, default=0, help="master seed for all randomness (default 0)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exterior", help="negativity of the pairing on random cone points",
                       epilog=_schema_epilog("exterior", EXTERIOR_COLUMNS), formatter_class=fmt)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_exterior)

    p = sub.add_parser("kempf-ness", help="gradient flow of B(mu) on a random torus setup",
                       epilog=_schema_epilog("kempf-ness", kn.FlowTraceFD.COLUMNS)
                       + "\nconfig fields: " + ", ".join(KN_CONFIG_FIELDS), formatter_class=fmt)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_kempf_ness)

    p = sub.add_parser("flow", help="Kähler–Ricci flow with monotonicity monitors",
                       epilog=_schema_epilog("flow", FlowTrace.COLUMNS)
                       + "\nconfig fields: " + ", ".join(FlowConfig.__dataclass_fields__), formatter_class=fmt)
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("geodesic", help="Ding functional along the geodesic between two profiles",
                       epilog=_schema_epilog("geodesic", ConvexityScan.COLUMNS), formatter_class=fmt)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--samples", type=int, default=21)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("spectrum", help="weighted Laplacian spectrum of a profile",
                       epilog=_schema_epilog("spectrum", SpectralReport.COLUMNS), formatter_class=fmt)
    p.add_argument("--metric", required=True)
    p.add_argument("-k", type=int, default=4)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("profile", help="write a profile JSON file from a spec")
    p.add_argument("--spec", default="fubini_study",
                   help='"fubini_study" or JSON such as {"kind": "sech2", "a": 0.5}')
    p.add_argument("--T", type=float, default=15.0)
    p.add_argument("--N", type=int, default=1500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)
    return parser


def dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(name)s: %(message)s")
    try:
        ok = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 2


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
