"""Acceptance criteria, each run at its stated tolerance with one printed pass/fail line."""

import time

import numpy as np
import pytest

from kflab import exterior as ext
from kflab import kempf_ness as kn
from kflab.cli import exterior_sample, path_independence, sample_seeds
from kflab.fano_p1 import densities, make_profile, random_profile
from kflab.functionals import ding_convexity_scan, ding_F, he_H
from kflab.ricci_flow import FlowConfig, monotonicity_report, run
from kflab.spectral import spectral_report


@pytest.fixture
def verdict(capsys):
    """Yields a recorder; the recorded line is printed uncaptured whether or not the test passes."""
    record = {}

    def _set(name, ok, detail=""):
        record.update(name=name, ok=bool(ok), detail=detail)
        return ok

    yield _set
    if record:
        with capsys.disabled():
            status = "PASS" if record["ok"] else "FAIL"
            print(f"\n[acceptance] {record['name']}: {status} {record['detail']}")


def test_1_exterior_negativity(verdict):
    start = time.perf_counter()
    worst_res, worst_ratio, min_pair, all_ok = 0.0, -np.inf, np.inf, True
    for n in (1, 2, 3):
        for seed in sample_seeds(1000 + n, 100):
            p, res, max_eig, ok = exterior_sample(n, seed)
            G, _ = ext.tangent_gram(ext.random_cone_point(n, seed))
            worst_ratio = max(worst_ratio, max_eig / np.linalg.norm(G, 2))
            worst_res, min_pair = max(worst_res, res), min(min_pair, p)
            all_ok &= ok
    elapsed = time.perf_counter() - start
    ok = all_ok and min_pair > 0 and worst_ratio <= -1e-8 and worst_res < 1e-10 and elapsed < 10
    verdict("1 exterior negativity", ok,
            f"min pair={min_pair:.3g} max eig/|G|={worst_ratio:.3g} max residual={worst_res:.3g} time={elapsed:.1f}s")
    assert ok


def test_2_spectral_gap(verdict):
    start = time.perf_counter()
    fs = spectral_report(make_profile(), 4)
    fs_err = float(np.abs(fs.eigenvalues - [0, 1, 3, 6]).max())
    worst_val, worst_vec, violations = 0.0, 0.0, 0
    for seed in range(20):
        rep = spectral_report(random_profile(seed), 6)
        present = rep.holomorphy_index is not None
        worst_val = max(worst_val, abs(rep.holomorphy_eigenvalue - 1) if present else np.inf)
        worst_vec = max(worst_vec, rep.holomorphy_vector_error if present else np.inf)
        violations += len(rep.gap_violations)
    elapsed = time.perf_counter() - start
    ok = fs_err <= 1e-3 and worst_val <= 1e-3 and worst_vec <= 1e-3 and violations == 0 and elapsed < 30
    verdict("2 spectral gap", ok,
            f"FS err={fs_err:.3g} |lambda-1|={worst_val:.3g} vector err={worst_vec:.3g} "
            f"gap violations={violations} time={elapsed:.1f}s")
    assert ok


def test_3_ding_convexity(verdict):
    start = time.perf_counter()
    min_d2 = np.inf
    for i in range(10):
        scan = ding_convexity_scan(random_profile(2 * i), random_profile(2 * i + 1), 21)
        min_d2 = min(min_d2, scan.min_second_diff)
    fs, tr = make_profile(), make_profile(spec={"kind": "translated_fs", "a": 0.5})
    affine = ding_convexity_scan(fs, tr, 21).max_abs_second_diff
    elapsed = time.perf_counter() - start
    ok = min_d2 >= -1e-6 and affine <= 1e-6 and elapsed < 60
    verdict("3 Ding convexity", ok,
            f"min second diff={min_d2:.3g} FS->translated |d2|={affine:.3g} time={elapsed:.1f}s")
    assert ok


def test_4_ricci_flow_monotonicity(verdict):
    start = time.perf_counter()
    config = FlowConfig(initial={"kind": "sech2", "a": 0.5}, symmetrize=True, t_max=20.0)
    trace = run(config)
    v = monotonicity_report(trace, h_slack=1e-10, fd_rel=1e-4, slack=1e-8, bound_factor=1e-2)
    final = float(trace.sup_mu_over_C[-1])
    elapsed = time.perf_counter() - start
    ok = v.passed and trace.s[-1] >= 20.0 - 1e-9 and final < 1e-4 and elapsed < 60
    verdict("4 Ricci flow monotonicity", ok,
            f"max dH={v.max_H_increase:.3g} fd err={v.max_fd_error:.3g} bound ok={v.discrete_dF_bound} "
            f"final sup|mu|/C={final:.3g} time={elapsed:.1f}s")
    assert ok, v.as_dict()


def test_5_kempf_ness(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(5))
    setup = kn.TorusSetup.random(4, 2, rng)
    path_err = path_independence(setup, rng, 20)
    d2_min = np.inf
    for _ in range(20):
        e0, e1 = rng.uniform(-1, 1, (2, setup.k))
        F = np.array([kn.kn_potential(setup, (1 - s) * e0 + s * e1) for s in np.linspace(0, 1, 21)])
        d2_min = min(d2_min, float((F[:-2] + F[2:] - 2 * F[1:-1]).min()))
    quad = kn.BFunction("quadratic")
    tq = kn.flow(setup, quad, t_max=1.0, dt=1e-3)
    rel = float(np.max(np.abs(tq.dF_dt + 2 * tq.E) / np.maximum(2 * tq.E, 1e-300)))
    cosh = kn.BFunction("cosh_minus_one")
    tc = kn.flow(setup, cosh, t_max=1.0, dt=1e-3)
    excess = float(np.max(tc.dF_dt + tc.H))
    phases = max(float(np.abs(np.angle(t.z / t.z[0])).max()) for t in (tq, tc))
    elapsed = time.perf_counter() - start
    ok = path_err <= 1e-8 and d2_min >= -1e-10 and rel <= 1e-6 and excess <= 1e-8 and phases <= 1e-9
    ok = ok and elapsed < 10
    verdict("5 Kempf-Ness package", ok,
            f"path err={path_err:.3g} min d2={d2_min:.3g} |dF/dt+2E|/2E={rel:.3g} "
            f"max(dF/dt+B)={excess:.3g} phase drift={phases:.3g} time={elapsed:.1f}s")
    assert ok


def test_6_normalisation_identities(verdict):
    fs = make_profile()
    d = densities(fs)
    profiles = [fs, make_profile(spec={"kind": "sech2", "a": 0.5}),
                make_profile(spec={"kind": "translated_fs", "a": 0.5})]
    profiles += [random_profile(seed) for seed in range(20)]
    vol_err = max(abs(densities(p).vol_omega - 4 * np.pi) for p in profiles)
    mu_int = max(abs(densities(p).integral_mu()) for p in profiles)
    mass_err = abs(d.mass_omega - np.pi)
    F_err = abs(ding_F(fs, d) + np.log(np.pi))
    H_fs = abs(he_H(fs, dens=d))
    ok = vol_err <= 1e-10 and mass_err <= 1e-8 and F_err <= 1e-8 and H_fs <= 1e-10 and mu_int <= 1e-9
    verdict("6 normalisation identities", ok,
            f"|Vol-4pi|={vol_err:.3g} |Mass-pi|={mass_err:.3g} |F+log pi|={F_err:.3g} "
            f"|H(FS)|={H_fs:.3g} max|int mu|={mu_int:.3g}")
    assert ok
