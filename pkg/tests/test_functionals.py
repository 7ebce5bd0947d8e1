import numpy as np
import pytest

from kflab.fano_p1 import C_NORM, densities, ke_residual, make_profile, random_profile
from kflab.functionals import (
    B_mu,
    dF_prediction,
    ding_convexity_scan,
    ding_F,
    energy_I,
    he_H,
    report,
)


def test_energy_normalisation(fs):
    assert energy_I(fs) == 0.0
    kappa = 0.37
    assert energy_I(fs.with_phi(fs.phi + kappa)) == pytest.approx(kappa, abs=1e-9)


def test_energy_directional_derivative():
    prof = make_profile(spec={"kind": "sech2", "a": 0.3})
    d = densities(prof)
    eps = 1e-4
    for seed in range(3):
        psi = random_profile(seed).phi * 3 + 0.1 * seed
        fd = (energy_I(prof.with_phi(prof.phi + eps * psi)) - energy_I(prof.with_phi(prof.phi - eps * psi))) / (2 * eps)
        assert fd == pytest.approx(C_NORM * d.integrate(psi, "w"), abs=1e-6)


def test_ding_fubini_study(fs):
    assert ding_F(fs) == pytest.approx(-np.log(np.pi), abs=1e-8)
    assert ding_F(fs.with_phi(fs.phi + 1.3)) == pytest.approx(ding_F(fs), abs=1e-9)


def test_ding_constant_shift_invariance(random_profiles):
    for prof in random_profiles[:5]:
        assert ding_F(prof.with_phi(prof.phi - 0.8)) == pytest.approx(ding_F(prof), abs=1e-9)


def test_he_fubini_study(fs):
    assert abs(he_H(fs)) < 1e-10
    assert abs(he_H(fs, "log")) < 1e-10


def test_he_positive_off_ke(sech2_05):
    assert he_H(sech2_05) > 1e-3


def test_he_unknown_form(fs):
    with pytest.raises(ValueError):
        he_H(fs, "other")


def test_report_invariants(random_profiles, sech2_05, translated_fs):
    for prof in [sech2_05, translated_fs, *random_profiles]:
        r = report(prof)
        assert r.H_he >= -1e-12
        assert abs(r.H_entropy - r.H_log) <= 1e-8 * (1 + r.H_he)
        assert abs(r.B_mu - r.H_he) <= 1e-8
        assert r.dF_prediction <= -r.H_he + 1e-8


def test_H_zero_iff_ke(fs, translated_fs, random_profiles):
    small = make_profile(spec={"kind": "translated_fs", "a": 0.01})
    for prof in [fs, small, *random_profiles[:5]]:
        assert (ke_residual(prof) < 1e-6) == (he_H(prof) < 1e-8)
    # the KE orbit: H vanishes although the pointwise residual is limited by rounding at the grid ends
    assert he_H(translated_fs) < 1e-8


def test_pointwise_functionals_agree(sech2_05):
    d = densities(sech2_05)
    assert B_mu(sech2_05, d) == pytest.approx(he_H(sech2_05, dens=d), abs=1e-8)
    assert dF_prediction(sech2_05, d) < 0


def test_scan_fs_to_translated_is_affine(fs, translated_fs):
    scan = ding_convexity_scan(fs, translated_fs, 11)
    assert scan.max_abs_second_diff <= 1e-6
    assert np.allclose(scan.F, -np.log(np.pi), atol=1e-8)


def test_scan_fs_to_sech2_convex(fs):
    scan = ding_convexity_scan(fs, make_profile(spec={"kind": "sech2", "a": 0.4}), 21)
    assert scan.passed and scan.min_second_diff >= -1e-6
    assert len(scan.rows()) == 21


def test_scan_two_samples_trivial(fs, sech2_05):
    scan = ding_convexity_scan(fs, sech2_05, 2)
    assert scan.second_diff.size == 0 and scan.passed


def test_scan_rejects_mismatched_grids(fs):
    with pytest.raises(ValueError):
        ding_convexity_scan(fs, make_profile(N=1000), 5)
