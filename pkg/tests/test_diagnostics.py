import math

import numpy as np
import pytest

from ucm_blowup import diagnostics as dg
from ucm_blowup.grid import RadialGrid
from ucm_blowup.initial_data import InitialData
from ucm_blowup.model import Parameters, background_speed
from ucm_blowup.radial import RadialState, RunConfig, SchemeConfig, run

from conftest import pulse


def record(data, params, cfg, sigma=None):
    sigma = sigma or background_speed(params)
    rec = dg.Recorder(params, sigma, data.R)
    res = run(data, params, cfg, sigma_est=sigma, callback=rec)
    return res, dg.complete(rec.series(), data, params, sigma), sigma


def test_functionals_match_initial_data(params):
    d = pulse(1024, params)
    s = RadialState.from_initial(d)
    assert dg.quad_m(s) == pytest.approx(d.m0, rel=1e-12)
    assert dg.quad_W(s) == pytest.approx(d.W0, rel=1e-12)
    # twice the non-kinetic energy at t = 0 is H0
    E = dg.quad_E(s, params)
    assert 2.0 * E - dg.quad_kinetic2(s) == pytest.approx(d.H0, rel=1e-12)


def test_background_functionals(params):
    s = RadialState.background(RadialGrid(100, 0.1))
    assert dg.quad_m(s) == dg.quad_W(s) == dg.quad_E(s, params) == 0.0
    assert dg.check_jensen(s, params, 1.0, 5.0) == 0.0
    assert dg.support_radius(s) == 0.0


def test_cauchy_schwarz(params):
    d = pulse(1024, params, L=2.0)
    s = RadialState.from_initial(d)
    g = s.grid
    rhs = g.integrate(s.rho * g.centers ** 2) * g.integrate(s.rho * s.u ** 2)
    assert dg.quad_W(s) ** 2 <= rhs


def test_jensen_positive_for_bump(params):
    d = pulse(1024, params)
    s = RadialState.from_initial(d)
    assert dg.check_jensen(s, params, 1.0, d.R) > 0


def test_background_run_checks_pass(params, sigma):
    g = RadialGrid(200, 0.05)
    d = InitialData.from_arrays(g, 5.0, params, np.ones(200), np.zeros(200))
    _, ser, _ = record(d, params, RunConfig(t_end=0.5, output_interval=0.1), sigma)
    assert np.all(ser.energy_residual == 0.0)
    assert np.all(ser.trT_slack == ser.trT_slack[0])
    for c in dg.verify(ser, d, params, sigma):
        assert c.passed, c
        assert c.residual == 0.0


def test_smooth_run_checks_pass(params):
    d = pulse(1024, params)
    _, ser, sigma = record(d, params, RunConfig(t_end=1.0, output_interval=1 / 64))
    assert all(c.passed for c in dg.verify(ser, d, params, sigma))
    assert ser.trT_slack[0] == pytest.approx(dg.trT_budget(d, params), rel=1e-15)
    inc = np.diff(ser.cum_int_trT)
    ref = 0.5 * np.diff(ser.t) * (ser.int_trT[1:] + ser.int_trT[:-1])
    assert np.allclose(inc, ref, rtol=1e-14)


def test_insufficient_records(params):
    d = pulse(640, params)
    _, ser, sigma = record(d, params, RunConfig(t_end=0.0))
    assert np.isnan(ser.energy_residual).all()
    with pytest.raises(dg.InsufficientData):
        dg.check_W_inequality(ser, sigma, d.R, d.rho0_max)


def test_W_inequality_trivial_at_rest():
    p = Parameters()
    g = RadialGrid(640, 10 / 640)
    d = pulse(640, p, rho0_amplitude=0.0)
    d.u0[:] = 0.0
    d.refresh()
    _, ser, sigma = record(d, p, RunConfig(t_end=0.02, output_interval=0.01))
    # W = 0 at t = 0 so the right side is -int tr(T) < 0
    assert dg.W_ineq_rhs(0.0, ser.W[0], ser.int_trT[0], d.R, sigma, d.rho0_max) < 0
    assert ser.W_ineq_residual[0] > 0


def test_relaxation_energy_decreases():
    p = Parameters(lam=0.5, mu0=0.5)
    d = pulse(1024, p)
    cfg = RunConfig(t_end=1.0, scheme=SchemeConfig(pin_velocity=True, dt_max=5e-4 * p.lam))
    _, ser, _ = record(d, p, cfg)
    assert np.all(np.diff(ser.E) < 0)
    exact = ser.int_trT[0] * np.exp(-ser.t / p.lam)
    assert np.max(np.abs(ser.int_trT / exact - 1.0)) <= 1e-6


def test_corrupted_W_fails(params):
    d = pulse(1024, params, L=2.0)
    _, ser, sigma = record(d, params, RunConfig(t_end=0.25, output_interval=1 / 64))
    ser.W = -ser.W
    dg.complete(ser, d, params, sigma)
    res = {c.name: c.passed for c in dg.verify(ser, d, params, sigma)}
    assert not res["W_inequality"] and not res["W_geq_V"]
    assert res["mass_conservation"] and res["trace_bound"]


def test_rows_match_columns(params):
    d = pulse(640, params)
    _, ser, _ = record(d, params, RunConfig(t_end=0.1, output_interval=0.05))
    rows = list(ser.rows())
    assert len(rows) == 3 and all(len(r) == len(dg.CSV_COLUMNS) for r in rows)
    assert [r[0] for r in rows] == [0.0, 0.05, 0.1]
