import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kflab.fano_p1 import (
    C_NORM,
    MetricProfile,
    ProfileError,
    densities,
    derivative,
    f0,
    f0_d2,
    geodesic_profile,
    ke_residual,
    legendre,
    legendre_inverse,
    make_profile,
    random_profile,
    u0,
)


def test_derivative_order_four():
    errs = []
    for n in (100, 200):
        x = np.linspace(0, 1, n + 1)
        h = x[1] - x[0]
        y = np.sin(3 * x)
        errs.append(np.abs(derivative(y, h, 2) + 9 * np.sin(3 * x)).max())
    assert errs[1] < errs[0] / 12


def test_fubini_study_is_zero(fs):
    assert np.all(fs.phi == 0)


def test_sech2_profile_values_and_validity(sech2_05):
    t = sech2_05.t
    assert np.allclose(sech2_05.phi, 0.5 / np.cosh(t / 2) ** 2, rtol=1e-12, atol=1e-300)
    for a in (0.3, 0.4):
        make_profile(spec={"kind": "sech2", "a": a})


def test_sech2_large_amplitude_reports_node():
    with pytest.raises(ProfileError, match="node"):
        make_profile(spec={"kind": "sech2", "a": 10})


def test_profile_preconditions():
    with pytest.raises(ValueError):
        make_profile(T=15, N=32)
    with pytest.raises(ValueError):
        make_profile(T=5, N=1500)
    with pytest.raises(ValueError):
        make_profile(spec={"kind": "sech2", "a": 0.1, "bogus": 1})
    with pytest.raises(ValueError):
        MetricProfile(15.0, 100, np.zeros(5))


def test_boundary_flatness_enforced():
    prof = make_profile()
    tilted = prof.with_phi(1e-3 * prof.t)
    with pytest.raises(ProfileError, match="flat"):
        tilted.validate()


def test_fs_densities(fs):
    d = densities(fs)
    assert np.allclose(d.q, d.w / 4, rtol=1e-12)
    assert np.abs(d.theta - C_NORM).max() < 1e-10 * C_NORM
    assert abs(d.mass_omega - np.pi) < 1e-8
    assert abs(d.vol_omega - 4 * np.pi) < 1e-9


def test_integral_of_mu_vanishes(fs, sech2_05, translated_fs, random_profiles):
    for prof in [fs, sech2_05, translated_fs, *random_profiles]:
        d = densities(prof)
        assert abs(d.integral_mu()) < 1e-9
        assert abs(d.integrate(d.mu, "w")) < 1e-6
        assert abs(d.vol_omega - 4 * np.pi) < 1e-9
        assert d.theta.min() > 0


def test_ke_residual_examples(fs, sech2_05):
    assert ke_residual(fs) < 1e-10
    assert ke_residual(sech2_05) > 1e-2
    small = make_profile(spec={"kind": "translated_fs", "a": 0.01})
    assert ke_residual(small) < 1e-6


def test_translated_fs_mass_covariance(translated_fs):
    # pulling back by a dilation rescales the volume form by e^a and leaves q/w constant
    d = densities(translated_fs)
    assert d.mass_omega == pytest.approx(np.pi * np.exp(0.5), rel=1e-9)
    ratio = d.q / d.w
    assert np.abs(ratio[50:-50] / ratio[750] - 1).max() < 1e-6


def test_symmetrized_profile_is_even(sech2_05):
    prof = random_profile(3).symmetrized()
    assert np.allclose(prof.phi, prof.phi[::-1])


def test_legendre_fs_closed_form(fs):
    sp = legendre(fs)
    assert np.abs(sp.v).max() < 1e-12
    assert u0(np.array(1.0)) == pytest.approx(-2 * np.log(2), abs=1e-15)
    assert sp.u[len(sp.u) // 2] == pytest.approx(-1.386294, abs=1e-6)


@pytest.mark.parametrize("spec", [{"kind": "sech2", "a": 0.3}, {"kind": "translated_fs", "a": 0.5}])
def test_legendre_round_trip(spec):
    prof = make_profile(spec=spec)
    back = legendre_inverse(legendre(prof), prof.T, prof.N)
    k = prof.N // 20
    assert np.abs(back.phi - prof.phi)[k:-k].max() < 1e-6


def test_legendre_round_trip_random(random_profiles):
    for prof in random_profiles[:8]:
        sp = legendre(prof)
        assert sp.is_convex()
        back = legendre_inverse(sp, prof.T, prof.N)
        k = prof.N // 20
        assert np.abs(back.phi - prof.phi)[k:-k].max() < 1e-6


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_random_profiles_valid_and_dual_convex(seed, symmetric):
    prof = random_profile(seed, symmetric=symmetric, N=600)
    prof.validate()
    assert legendre(prof).is_convex()
    if symmetric:
        assert np.allclose(prof.phi, prof.phi[::-1])


def test_geodesic_endpoints(fs, sech2_05):
    for s, target in ((0.0, fs), (1.0, sech2_05)):
        prof = geodesic_profile(fs, sech2_05, s)
        assert np.abs(prof.phi - target.phi).max() < 1e-6


def test_geodesic_fs_to_translated_is_translation(fs, translated_fs):
    for s in (0.25, 0.5, 0.75):
        prof = geodesic_profile(fs, translated_fs, s)
        expected = f0(prof.t - 0.5 * s) - f0(prof.t)
        assert np.abs(prof.phi - expected).max() < 1e-8


def test_geodesic_midpoint_valid(fs):
    p1 = make_profile(spec={"kind": "sech2", "a": 0.4})
    mid = geodesic_profile(fs, p1, 0.5).validate()
    assert mid.fpp()[1:-1].min() > 0


def test_geodesic_requires_same_grid(fs):
    with pytest.raises(ValueError):
        geodesic_profile(fs, make_profile(N=1000), 0.5)


def test_profile_json_round_trip(tmp_path, sech2_05):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(sech2_05.to_json()))
    back = MetricProfile.from_json(json.loads(path.read_text()))
    assert np.array_equal(back.phi, sech2_05.phi) and back.T == sech2_05.T and back.N == sech2_05.N
    with pytest.raises(ValueError, match="unknown"):
        MetricProfile.from_json({"T": 15, "N": 64, "phi": [0.0] * 65, "x": 1})


def test_positivity_check_matches_scan():
    # brute-force scan of f'' for sech2(a): positive exactly below a = 1
    # (amplitudes near 1 also break boundary flatness at T = 15, so they are not probed)
    t = np.linspace(-15, 15, 3001)
    for a in (0.5, 0.75, 1.1, 3.0):
        sech2 = 1 / np.cosh(t / 2) ** 2
        fpp = f0_d2(t) + a * (0.5 * sech2 * (3 * np.tanh(t / 2) ** 2 - 1))
        expected_ok = bool(np.all(fpp > 0))
        try:
            make_profile(spec={"kind": "sech2", "a": a})
            ok = True
        except ProfileError:
            ok = False
        assert ok == expected_ok
