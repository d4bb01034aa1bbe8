import math

import numpy as np
import pytest
from hypothesis import example, given, strategies as st

from becotto.gpe import NumericalAbort, PhysicalParams, WaveFunction
from becotto.sgle import (BathParams, StationarityCriterion, StrokeLimit, Thermalizer,
                          density_mean_in_trap, make_rng, mu_update, relative_trend, sgle_step,
                          thermalize, thomas_fermi_state)
from becotto.spectral import fft, make_grid

from conftest import random_field


def test_bath_validation():
    with pytest.raises(ValueError):
        BathParams(T=-1.0, mu0=0.0)
    with pytest.raises(ValueError):
        BathParams(T=0.0, mu0=0.0, dt=0.0)
    with pytest.raises(ValueError):
        BathParams(T=0.0, mu0=0.0, gamma=-1.0)


@given(st.floats(-1, 1), st.floats(0, 2), st.floats(0, 2))
@example(1.0, 2.2250738585072014e-308, 0.0)
def test_mu_controller_direction(mu, rho_bar, target):
    bath = BathParams(T=0.0, mu0=0.0, gamma=2.0, rho_target=target, dt=0.01)
    new = mu_update(mu, rho_bar, bath)
    assert new == pytest.approx(mu - 0.02 * (rho_bar - target))
    if rho_bar > target:
        assert new <= mu
        # strictly lower whenever the step is resolvable in floating point
        if 0.02 * (rho_bar - target) > 4 * np.spacing(abs(mu)):
            assert new < mu


def test_rng_streams_reproducible_and_distinct():
    a = make_rng(7, 0).standard_normal(5)
    assert np.array_equal(a, make_rng(7, 0).standard_normal(5))
    assert not np.array_equal(a, make_rng(7, 1).standard_normal(5))
    assert not np.array_equal(a, make_rng(8, 0).standard_normal(5))


def test_relative_trend():
    assert relative_trend(np.full(50, 3.0)) == 0.0
    y = 10.0 + 0.01 * np.arange(100)
    assert relative_trend(y) == pytest.approx(0.01 * 100 / y.mean())


def test_stationarity_criterion():
    c = StationarityCriterion(window=10, rel_slope_tol=1e-3, min_steps=100, stride=10)
    flat = [1.0] * 20
    assert not c.is_met(flat, 50)
    assert c.is_met(flat, 100)
    assert not c.is_met(list(np.linspace(1, 2, 20)), 200)
    assert not c.is_met([1.0] * 5, 200)
    assert not StrokeLimit(5).is_met(flat, 10**6)


def test_zero_noise_uniform_fixed_point(params):
    # uniform state relaxes to rho = m mu / g at fixed mu
    g = make_grid(16)
    mu = 0.05
    wf = WaveFunction(np.full(g.shape, 0.1 + 0j), g)
    bath = BathParams(T=0.0, mu0=mu, dt=0.05)
    th = Thermalizer(wf, 0.0, params, bath, potential=np.zeros(g.shape), control_mu=False)
    for _ in range(3000):
        th.step()
    assert th.rho_bar == pytest.approx(params.m * mu / params.g, abs=1e-10)


def test_noise_variance_per_mode(params):
    # drift off: each retained normalized amplitude gains variance 2 dt T/(V hbar) per step
    g = make_grid(16)
    T, dt, n = 1e-3, 1e-2, 50
    wf = WaveFunction(np.zeros(g.shape, complex), g)
    bath = BathParams(T=T, mu0=0.0, dt=dt, seed=3)
    th = Thermalizer(wf, 0.0, params, bath, potential=np.zeros(g.shape), control_mu=False, drift=False)
    for _ in range(n):
        th.step()
    a = th.psi_hat / g.n_points
    var = np.mean(np.abs(a[g.dealias_mask]) ** 2)
    expected = n * 2 * dt * T / (g.volume * params.hbar)
    assert var == pytest.approx(expected, rel=0.05)
    assert not a[~g.dealias_mask].any()


def test_thermalizer_deterministic(grid16, params):
    psi = random_field(grid16, 1)
    bath = BathParams(T=1e-4, mu0=0.1, dt=5e-3, rho_target=0.01)
    runs = []
    for _ in range(2):
        th = Thermalizer(WaveFunction(psi, grid16), 0.3, params, bath, rng=make_rng(5))
        th.run(StrokeLimit(40))
        runs.append((th.psi.copy(), th.mu))
    assert np.array_equal(runs[0][0], runs[1][0]) and runs[0][1] == runs[1][1]


def test_controller_reaches_target_mass(params):
    g = make_grid(16)
    wf, mu = thomas_fermi_state(g, 0.6, params, 0.02)
    bath = BathParams(T=0.0, mu0=mu, dt=5e-3, rho_target=0.015, gamma=20.0)
    out, trace = thermalize(wf, 0.6, params, bath,
                            StationarityCriterion(window=200, min_steps=6000, max_steps=20000, stride=5))
    assert trace.stationary
    assert params.m * out.mass() == pytest.approx(0.015, rel=1e-3)


def test_nonstationary_run_warns_and_returns(grid16, params, caplog):
    wf = WaveFunction(random_field(grid16, 2), grid16)
    bath = BathParams(T=0.0, mu0=0.0, dt=5e-3)
    out, trace = thermalize(wf, 0.3, params, bath,
                            StationarityCriterion(window=10, min_steps=100, max_steps=20, stride=5))
    assert not trace.stationary
    assert "without stationarity" in caplog.text


def test_sgle_step_aborts_on_nan(grid16, params):
    psi = random_field(grid16, 0)
    psi[1, 2, 3] = np.nan
    with pytest.raises(NumericalAbort):
        sgle_step(WaveFunction(psi, grid16), np.zeros(grid16.shape), params,
                  BathParams(T=0.0, mu0=0.0), make_rng(0))


def test_thomas_fermi_state_mass_and_region(params):
    g = make_grid(32)
    wf, mu = thomas_fermi_state(g, 0.337613, params, 0.0125)
    assert params.m * wf.mass() == pytest.approx(0.0125)
    assert not fft(wf.psi)[~g.dealias_mask].any() or np.abs(fft(wf.psi)[~g.dealias_mask]).max() < 1e-9
    assert density_mean_in_trap(wf) > wf.mass()
    with pytest.raises(ValueError):
        density_mean_in_trap(wf, r0=0.0)
