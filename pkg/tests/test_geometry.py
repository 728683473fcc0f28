from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hbfsim.config import ScenarioConfig
from hbfsim.geometry import (array_response, channel_from_paths, draw_channel, draw_paths,
                             rician_weights, spatial_frequency, steering_vector)

angles = st.floats(-20.0, 20.0, allow_nan=False)


def test_array_response_examples():
    np.testing.assert_allclose(array_response(np.pi / 2, 4), 0.5 * np.ones(4), atol=1e-15)
    np.testing.assert_allclose(array_response(0.0, 2), np.array([1, -1]) / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(array_response(np.pi / 3, 4), 0.5 * np.array([1, 1j, -1, -1j]), atol=1e-15)


def test_array_response_rejects_empty_array():
    with pytest.raises(ValueError):
        array_response(0.3, 0)


def test_matrix_form_stacks_columns():
    phis = np.array([0.1, 1.0, 2.5])
    A = array_response(phis, 8)
    assert A.shape == (8, 3)
    for i, p in enumerate(phis):
        np.testing.assert_allclose(A[:, i], array_response(p, 8))


@settings(max_examples=1000, deadline=None)
@given(angles, st.integers(1, 300))
def test_unit_norm(phi, n):
    assert abs(np.linalg.norm(array_response(phi, n)) - 1.0) < 1e-12


@settings(max_examples=200, deadline=None)
@given(angles, st.integers(1, 64), st.integers(-3, 3))
def test_periodic_in_angle(phi, n, m):
    np.testing.assert_allclose(array_response(phi + 2 * np.pi * m, n), array_response(phi, n), atol=1e-9)


def test_steering_vector_matches_spatial_frequency():
    phi = 0.7
    np.testing.assert_allclose(steering_vector(spatial_frequency(phi), 16), array_response(phi, 16), atol=1e-12)


def test_rician_weights():
    assert rician_weights(0.0) == (0.0, 1.0)
    assert rician_weights(np.inf) == (1.0, 0.0)
    assert rician_weights(5.0, los_only=True) == (1.0, 0.0)
    a, b = rician_weights(30.0)
    assert a * a + b * b == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rician_weights(-1.0)


def test_los_only_channel_is_rank_one_los_term(rng):
    cfg = ScenarioConfig(n_bs=16, n_ue=4, n_users=3, n_paths=2, los_only=True)
    ch = draw_channel(cfg, rng)
    np.testing.assert_array_equal(ch.H, ch.H_los)


def test_scalar_channel_is_path_gain(rng):
    paths = draw_paths(rng, 5, 1)
    ch = channel_from_paths(paths, 1, 1, 0.0)
    np.testing.assert_allclose(ch.H[:, 0, 0], paths.gains[:, 0], atol=1e-14)


def test_missing_paths_rejected(rng):
    paths = draw_paths(rng, 2, 0)
    with pytest.raises(ValueError):
        channel_from_paths(paths, 8, 2, 10.0)
    bare = SimpleNamespace(n_bs=8, n_ue=2, n_users=2, n_paths=0, rician_factor=10.0,
                           los_only=False, angle_model="physical")
    with pytest.raises(ValueError):
        draw_channel(bare, rng)


@pytest.mark.parametrize("model", ["physical", "spatial"])
def test_los_component_rank_one(rng, model):
    cfg = ScenarioConfig(n_bs=32, n_ue=4, n_users=20, n_paths=3, angle_model=model)
    ch = draw_channel(cfg, rng)
    for k in range(cfg.n_users):
        s = np.linalg.svd(ch.H_los[k], compute_uv=False)
        assert s[1] < 1e-10 * s[0]
        np.testing.assert_allclose(s[0], np.sqrt(32 * 4), rtol=1e-12)


def test_angles_in_range(rng):
    for model in ("physical", "spatial"):
        p = draw_paths(rng, 1000, 2, model)
        for a in (p.los_aod, p.los_aoa, p.nlos_aod, p.nlos_aoa):
            assert np.all((a >= 0) & (a < 2 * np.pi))


def test_spatial_model_gives_uniform_spatial_frequency(rng):
    psi = draw_paths(rng, 200_000, 1, "spatial").los_psi
    hist, _ = np.histogram(psi, bins=8, range=(0, 2 * np.pi))
    np.testing.assert_allclose(hist / psi.size, 1 / 8, atol=0.005)


@pytest.mark.parametrize("v,L", [(0.0, 1), (3.0, 2), (30.0, 4)])
def test_mean_frobenius_energy(v, L):
    # oracle: E||H||_F^2 = N_BS N_UE for unit-norm steering vectors and CN(0,1) gains
    rng = np.random.default_rng(7)
    paths = draw_paths(rng, 100_000, L)
    ch = channel_from_paths(paths, 8, 2, v)
    energy = np.sum(np.abs(ch.H) ** 2, axis=(1, 2))
    assert abs(energy.mean() / 16 - 1) < 0.02


def test_combination_weights_exact(rng):
    ch = draw_channel(ScenarioConfig(n_bs=16, n_ue=2, n_users=4, n_paths=2, rician_factor=7.0), rng)
    a, b = rician_weights(7.0)
    np.testing.assert_allclose(ch.H, a * ch.H_los + b * ch.H_nlos, atol=1e-14)
