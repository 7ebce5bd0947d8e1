import numpy as np
import pytest

from kflab.fano_p1 import densities, legendre, make_profile
from kflab.functionals import dF_prediction, ding_F, he_H
from kflab.ricci_flow import (
    FlowConfig,
    StepRejected,
    TauGrid,
    monotonicity_report,
    run,
    step,
)


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(dt_init=0)
    with pytest.raises(ValueError):
        FlowConfig(safety=1.5)
    with pytest.raises(ValueError, match="unknown"):
        FlowConfig.from_dict({"t_maxx": 1})


def test_step_fixed_points(fs, translated_fs):
    assert np.abs(step(fs, 1e-4).phi).max() < 1e-10
    assert np.abs(step(translated_fs, 1e-4).phi - translated_fs.phi).max() < 1e-8


def test_step_decreases_H():
    prof = make_profile(spec={"kind": "sech2", "a": 0.3})
    grid = TauGrid(201)
    dt = grid.stable_dt(legendre(prof, 201).v)
    out = step(prof, dt).validate()
    assert he_H(out) < he_H(prof)


def test_step_rejects_huge_dt(sech2_05):
    with pytest.raises(StepRejected):
        step(sech2_05, 1.0)


def test_tau_monitors_match_log_radial_functionals(random_profiles, sech2_05):
    grid = TauGrid(801)
    for prof in [sech2_05, *random_profiles[:3]]:
        mon = grid.monitors(legendre(prof, 801).v)
        d = densities(prof)
        assert mon["F"] == pytest.approx(ding_F(prof, d), abs=1e-5)
        assert mon["H"] == pytest.approx(he_H(prof, dens=d), abs=1e-5)
        assert mon["dF_dt_pred"] == pytest.approx(dF_prediction(prof, d), abs=1e-5)
        assert mon["mass_omega_cap"] == pytest.approx(d.mass_omega, rel=1e-5)


def test_fs_discrete_fixed_point():
    grid = TauGrid(201)
    v = np.zeros(201)
    assert np.abs(grid.rhs(v)).max() < 1e-14
    mon = grid.monitors(v)
    assert abs(mon["H"]) < 1e-9 and abs(mon["dF_dt_pred"]) < 1e-9 and mon["sup_mu_over_C"] < 1e-9


def test_fs_stationary_trace():
    trace = run(FlowConfig(initial="fubini_study", t_max=0.05))
    assert np.abs(trace.F + np.log(np.pi)).max() < 1e-9
    assert np.abs(trace.H).max() < 1e-9 and np.abs(trace.dF_dt_pred).max() < 1e-9
    assert monotonicity_report(trace).passed


def test_translation_neutrality():
    grid = TauGrid(201)
    prof = make_profile(spec={"kind": "sech2", "a": 0.3})
    v = legendre(prof, 201).v
    a = 0.4
    vt = v + a * grid.tau
    for _ in range(200):
        v, vt = grid.rk4(v, 1.5e-4), grid.rk4(vt, 1.5e-4)
    assert np.abs(vt - v - a * grid.tau).max() < 1e-6


def test_short_sech2_trace_verdicts():
    trace = run(FlowConfig(initial={"kind": "sech2", "a": 0.4}, t_max=1.0))
    verdict = monotonicity_report(trace)
    assert verdict.passed, verdict.as_dict()
    assert np.all(np.diff(trace.s) > 0)
    assert np.all(trace.min_fpp > 0)
    assert not trace.converged


def test_jensen_direction_along_trace():
    trace = run(FlowConfig(initial={"kind": "sech2", "a": 0.3}, t_max=0.5))
    assert np.all(trace.dF_dt_pred <= -trace.H + 1e-12)
    assert np.all(trace.E_surrogate >= 0)


def test_reversed_trace_fails():
    trace = run(FlowConfig(initial={"kind": "sech2", "a": 0.4}, t_max=0.3))
    assert not monotonicity_report(trace.reversed()).H_non_increasing


def test_unsymmetrized_flow_keeps_kahler():
    # the sampled dF/dt meets the quadrature prediction to first order in the tau spacing, so refine it
    trace = run(FlowConfig(initial={"kind": "random", "seed": 2}, symmetrize=False, t_max=0.5, n_tau=401))
    assert monotonicity_report(trace).passed
    trace.final_profile().validate()
