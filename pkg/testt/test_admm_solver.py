from dataclasses import replace

import numpy as np
import pytest
import torch

from irstd import oracles
from irstd import tensor_core as tc
from irstd.admm_solver import (
    SolverParams,
    SolverState,
    objective,
    solve,
    update_b,
    update_multipliers,
    update_n,
    update_t,
    update_v,
    update_z,
)
from irstd.asstv import Axis, diff, operator_spectrum
from irstd.errors import ConfigError, RankOutOfRange
from irstd.tlnm import l21_prox_matrix

NAMES = ("b", "t", "n", "z", "v1", "v2", "v3", "y1", "y2", "y3", "y4", "y5")


@pytest.fixture
def random_state(randn):
    def make(shape=(6, 5, 3), mu=2.0):
        return SolverState(**{k: randn(*shape) for k in NAMES}, mu=mu)
    return make


def zero_state(shape, mu):
    return SolverState.initial(shape, mu)


# --- Parameters ---

def test_params_defaults():
    p = SolverParams()
    assert (p.r, p.frames_per_window, p.h_tuning) == (180, 3, 6.0)
    assert (p.lambda_tv, p.lambda3, p.mu0, p.rho, p.mu_max, p.xi) == (0.5, 100.0, 0.005, 1.5, 1e7, 1e-6)
    assert p.lambda_s is None


def test_params_resolve_lambda_s():
    p = SolverParams(h_tuning=6.0).resolve((64, 48, 3))
    assert p.lambda_s == pytest.approx(6.0 / np.sqrt(64 * 3))
    fixed = SolverParams(lambda_s=0.1)
    assert fixed.resolve((64, 48, 3)).lambda_s == 0.1


@pytest.mark.parametrize("kwargs", [{"rho": 1.0}, {"mu0": 1.0, "mu_max": 0.5}, {"lambda3": -1.0}, {"r": 0}, {"xi": 0.0}])
def test_params_validation(kwargs):
    with pytest.raises(ConfigError):
        SolverParams(**kwargs)


# --- Z ---

def test_update_z_zero():
    out = update_z(tc.zeros(4, 4, 2), tc.zeros(4, 4, 2), 1.0, SolverParams(r=4))
    assert float(out.abs().max()) == 0.0


def test_update_z_large_mu_is_identity(randn):
    b, y2 = randn(6, 5, 3), randn(6, 5, 3)
    mu = 1e9
    out = update_z(b, y2, mu, SolverParams(r=5))
    assert float((out - (b - y2 / mu)).abs().max()) <= 1e-6


def test_update_z_matches_matrix_prox_objective(randn):
    b = randn(12, 10, 1)
    y2 = tc.zeros(12, 10, 1)
    mu = 200.0
    out = update_z(b, y2, mu, SolverParams(r=10))[:, :, 0]
    x = b[:, :, 0]
    exact = l21_prox_matrix(x, 1 / mu)

    def obj(m):
        return float(torch.linalg.vector_norm(m, dim=0).sum()) / mu + 0.5 * float(torch.linalg.vector_norm(m - x) ** 2)

    assert obj(out) <= 1.01 * obj(exact)


def test_update_z_rank_out_of_range(randn):
    with pytest.raises(RankOutOfRange):
        update_z(randn(4, 6, 2), randn(4, 6, 2), 1.0, SolverParams(r=5))


# --- B ---

def test_update_b_constant():
    shape, c = (5, 4, 3), 0.7
    state = replace(zero_state(shape, 3.0), z=torch.full(shape, c, dtype=tc.DTYPE))
    k = torch.full(shape, c, dtype=tc.DTYPE)
    b = update_b(state, k, operator_spectrum(*shape))
    torch.testing.assert_close(b, torch.full(shape, c, dtype=tc.DTYPE), rtol=0, atol=1e-12)


def test_update_b_zero_rhs():
    shape = (4, 4, 2)
    b = update_b(zero_state(shape, 1.0), tc.zeros(*shape), operator_spectrum(*shape))
    assert float(b.abs().max()) <= 1e-15


def test_update_b_matches_dense_solve(gen):
    err = oracles.b_update_vs_dense(gen, trials=20)
    assert err <= 1e-8, f"worst relative residual {err:.3e}"


def test_update_b_rejects_wrong_spectrum(random_state, randn):
    with pytest.raises(ValueError):
        update_b(random_state(), randn(6, 5, 3), operator_spectrum(6, 5, 4))


# --- T ---

def test_update_t_examples():
    one = torch.ones(1, 1, 1, dtype=tc.DTYPE)
    zero = tc.zeros(1, 1, 1)
    # K - B - N + y1/mu = 0.7, threshold lambda_s/mu = 0.5
    t = update_t(0.7 * one, zero, zero, zero, 2.0, 1.0)
    assert float(t) == pytest.approx(0.2)
    t = update_t(0.4 * one, zero, zero, zero, 2.0, 1.0)
    assert float(t) == 0.0


def test_update_t_small_arguments_give_zero(randn):
    k = randn(4, 4, 2) * 0.1
    z = tc.zeros(4, 4, 2)
    t = update_t(k, z, z, z, 1.0, float(k.abs().max()))
    assert float(t.abs().max()) == 0.0


def test_soft_threshold_matches_grid_minimization(gen):
    assert oracles.soft_threshold_vs_grid(gen, trials=20) <= 1e-6


# --- V ---

def test_update_v_constant_b_gives_zero():
    shape = (4, 3, 3)
    b = torch.full(shape, 0.3, dtype=tc.DTYPE)
    z = tc.zeros(*shape)
    for v in update_v(b, z, z, z, 1.0, 0.5, 1.0):
        assert float(v.abs().max()) == 0.0


def test_update_v_cell_example():
    shape = (2, 2, 2)
    y = torch.full(shape, -1.0, dtype=tc.DTYPE)
    v1, v2, v3 = update_v(tc.zeros(*shape), y, y, y, 1.0, 0.3, 1.0)
    for v in (v1, v2, v3):
        torch.testing.assert_close(v, torch.full(shape, 0.7, dtype=tc.DTYPE))


def test_update_v_delta_scales_only_temporal(randn):
    shape = (4, 4, 3)
    b = tc.zeros(*shape)
    y = randn(*shape)
    mu, lambda_tv, delta = 1.0, 0.4, 2.0
    v1, v2, v3 = update_v(b, y, y, y, mu, lambda_tv, delta)
    torch.testing.assert_close(v1, v2)
    assert bool((v3.abs() <= v1.abs()).all())

    x = (-y / mu).flatten().numpy()
    for v, level in ((v1, lambda_tv / mu), (v3, delta * lambda_tv / mu)):
        span = np.abs(x) + 1
        ref = oracles.grid_argmin(lambda t: level * np.abs(t) + 0.5 * (t - x[:, None]) ** 2, -span, span)
        assert float(np.abs(v.flatten().numpy() - ref).max()) <= 1e-6


# --- N ---

def test_update_n_example():
    one = torch.ones(1, 1, 1, dtype=tc.DTYPE)
    zero = tc.zeros(1, 1, 1)
    n = update_n(one, zero, zero, zero, 200.0, 100.0)
    assert float(n) == pytest.approx(0.5)


def test_update_n_large_lambda3_vanishes(randn):
    k, b, t, y1 = randn(3, 3, 2), randn(3, 3, 2), randn(3, 3, 2), randn(3, 3, 2)
    n = update_n(k, b, t, y1, 1.0, 1e12)
    assert float(n.abs().max()) <= 1e-10


def test_update_n_stationarity(randn):
    k, b, t, y1 = randn(4, 3, 2), randn(4, 3, 2), randn(4, 3, 2), randn(4, 3, 2)
    mu, lambda3 = 3.0, 100.0
    n = update_n(k, b, t, y1, mu, lambda3)
    grad = 2 * lambda3 * n - mu * (k - b - t - n) - y1
    assert float(grad.abs().max()) <= 1e-10


# --- Multipliers ---

def test_multipliers_zero_residuals_scale_mu():
    shape = (3, 3, 2)
    state = zero_state(shape, 0.005)
    out = update_multipliers(state, tc.zeros(*shape), SolverParams())
    for name in ("y1", "y2", "y3", "y4", "y5"):
        assert float(getattr(out, name).abs().max()) == 0.0
    assert out.mu == pytest.approx(0.0075)


def test_multipliers_mu_cap():
    shape = (2, 2, 2)
    p = SolverParams()
    out = update_multipliers(zero_state(shape, p.mu_max), tc.zeros(*shape), p)
    assert out.mu == p.mu_max


def test_multipliers_follow_residuals(random_state, randn):
    state = random_state()
    k = randn(6, 5, 3)
    out = update_multipliers(state, k, SolverParams())
    mu = state.mu
    torch.testing.assert_close(out.y1, state.y1 + mu * (k - state.b - state.t - state.n))
    torch.testing.assert_close(out.y2, state.y2 + mu * (state.z - state.b))
    torch.testing.assert_close(out.y5, state.y5 + mu * (state.v3 - diff(state.b, Axis.TEMPORAL)))


# --- Sub-updates decrease the augmented Lagrangian ---

@pytest.mark.parametrize("which", ["b", "t", "v", "n"])
def test_sub_update_decreases_objective(random_state, randn, which):
    state = random_state(mu=2.0)
    k = randn(6, 5, 3)
    p = SolverParams(r=5, lambda_s=0.3, lambda_tv=0.5, lambda3=10.0, delta=1.5)
    before = objective(state, k, p)
    if which == "b":
        after_state = replace(state, b=update_b(state, k, operator_spectrum(6, 5, 3)))
    elif which == "t":
        after_state = replace(state, t=update_t(k, state.b, state.n, state.y1, state.mu, p.lambda_s))
    elif which == "v":
        v1, v2, v3 = update_v(state.b, state.y3, state.y4, state.y5, state.mu, p.lambda_tv, p.delta)
        after_state = replace(state, v1=v1, v2=v2, v3=v3)
    else:
        after_state = replace(state, n=update_n(k, state.b, state.t, state.y1, state.mu, p.lambda3))
    after = objective(after_state, k, p)
    assert after <= before + 1e-9 * abs(before), f"{which}: {before} -> {after}"


# --- Full solve ---

def test_solve_zero_input():
    result = solve(tc.zeros(6, 6, 3), SolverParams(r=6))
    assert result.iterations == 1
    assert result.converged
    for part in (result.background, result.target, result.noise):
        assert float(part.abs().max()) == 0.0


def test_solve_rank_out_of_range(randn):
    with pytest.raises(RankOutOfRange):
        solve(randn(8, 8, 3).abs(), SolverParams())


def test_solve_is_deterministic_and_mu_monotone():
    g = torch.Generator().manual_seed(5)
    k = torch.rand(12, 10, 3, generator=g, dtype=tc.DTYPE)
    p = SolverParams(r=6, max_outer_iters=25, trifactor_iters=5)
    a, b = solve(k, p), solve(k, p)
    assert a.residual_history == b.residual_history
    assert torch.equal(a.target, b.target)
    mus = np.array(a.mu_history)
    assert np.all(np.diff(mus) >= 0) and mus.max() <= p.mu_max
    assert len(a.residual_history) == a.iterations
    for part in (a.background, a.target, a.noise):
        assert torch.isfinite(part).all()


def test_solve_callback_sees_every_iteration():
    g = torch.Generator().manual_seed(9)
    k = torch.rand(8, 8, 2, generator=g, dtype=tc.DTYPE)
    seen = []
    result = solve(k, SolverParams(r=4, max_outer_iters=6, trifactor_iters=3), callback=lambda s, r: seen.append(r))
    assert tuple(seen) == result.residual_history
