import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from hbfsim.analysis import interference_samples
from hbfsim.beamforming import (assemble_beamformer, design_svd_abf, equivalent_channel,
                                power_factor, rzf_precoder, schedule_users, svd_beamformer,
                                zf_precoder)
from hbfsim.config import ScenarioConfig
from hbfsim.errors import DegenerateInputError, SingularMatrixError
from hbfsim.geometry import array_response, draw_channel, steering_vector
from hbfsim.hardware import AnalogMatrix, draw_profile

TWO_PI = 2 * np.pi


def los(aod, aoa, n_bs, n_ue):
    return np.sqrt(n_bs * n_ue) * np.outer(array_response(aoa, n_ue), array_response(aod, n_bs).conj())


def gain(H, bs, ue):
    f = np.exp(1j * bs) / np.sqrt(H.shape[1])
    w = np.exp(1j * ue) / np.sqrt(H.shape[0])
    return abs(w.conj() @ H @ f)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_svd_continuous_los_gain():
    H = los(1.1, 2.3, 64, 4)
    bs, ue = design_svd_abf(H)
    assert gain(H, bs, ue) == pytest.approx(np.sqrt(256), abs=1e-9)
    assert bs[0] == 0 and ue[0] == 0


def test_svd_three_bit_los_gain():
    # oracle: brute-force gain over random LOS geometries
    rng = np.random.default_rng(5)
    g = []
    for _ in range(500):
        a, b = rng.uniform(0, TWO_PI, 2)
        H = los(a, b, 128, 4)
        g.append(gain(H, *design_svd_abf(H, 3, 3)) / np.sqrt(512))
    g = np.array(g)
    assert g.mean() >= 0.95
    assert g.min() >= 0.94


def test_svd_scale_invariance(rng):
    H = random_complex(rng, (4, 16))
    for c in (1e-3, 2.0, 1e4):
        for a, b in zip(design_svd_abf(H, 3, 2), design_svd_abf(c * H, 3, 2)):
            np.testing.assert_allclose(a, b, atol=1e-9)


def test_svd_rejects_zero_channel():
    with pytest.raises(DegenerateInputError):
        design_svd_abf(np.zeros((2, 8)))


def test_schedule_examples():
    assert schedule_users([0.3, 0.3], TWO_PI / 128) == [0]
    assert schedule_users([0, np.pi / 2, np.pi], TWO_PI / 128) == [0, 1, 2]


def test_schedule_chain():
    t = 0.1
    chain = [0.0, 0.07, 0.14]
    assert schedule_users(chain, t, "greedy") == [0, 2]
    assert schedule_users(chain, t, "cluster") == [0]


def test_schedule_wraps_around_circle():
    assert schedule_users([0.01, TWO_PI - 0.01], 0.05) == [0]
    assert schedule_users([0.01, TWO_PI - 0.01, 3.0], 0.05, "cluster") == [0, 2]


def test_schedule_strongest_tie():
    assert schedule_users([1.0, 1.0, 2.0], 0.1, tie="strongest", strength=[1, 5, 1]) == [1, 2]
    with pytest.raises(ValueError):
        schedule_users([1.0], 0.1, tie="strongest")


def test_schedule_bad_options():
    with pytest.raises(ValueError):
        schedule_users([1.0], 0.1, rule="nope")
    with pytest.raises(ValueError):
        schedule_users([1.0], 0.1, tie="nope")
    assert schedule_users([], 0.1) == []


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, TWO_PI, exclude_max=True), min_size=1, max_size=12),
       st.randoms(use_true_random=False), st.sampled_from(["greedy", "cluster"]))
def test_schedule_permutation_covariant(metrics, rnd, rule):
    n = len(metrics)
    perm = list(range(n))
    rnd.shuffle(perm)
    base = schedule_users(metrics, 0.3, rule)
    # keep the original index order as priority after relabelling
    permuted = schedule_users([metrics[p] for p in perm], 0.3, rule, "strongest",
                              strength=[-p for p in perm])
    assert sorted(perm[i] for i in permuted) == base


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, TWO_PI, exclude_max=True), min_size=1, max_size=12),
       st.sampled_from(["greedy", "cluster"]))
def test_schedule_output_is_separated(metrics, rule):
    kept = schedule_users(metrics, 0.3, rule)
    assert kept
    for i in kept:
        for j in kept:
            if i < j:
                d = abs(np.angle(np.exp(1j * (metrics[i] - metrics[j]))))
                assert d >= 0.3 - 1e-12


def test_equivalent_channel_without_errors(rng):
    ch = draw_channel(ScenarioConfig(n_bs=32, n_ue=4, n_users=3, n_paths=2), rng)
    bf = svd_beamformer(ch, None, None)
    eq = bf.equivalent(ch.H)
    assert np.all(eq.delta == 0)
    k = bf.active[0]
    W, F = bf.restricted()
    assert eq.ideal[0, 0] == pytest.approx(W.values[:, 0].conj() @ ch.H[k] @ F.values[:, 0])


def test_equivalent_channel_single_user(rng):
    H = random_complex(rng, (1, 2, 8))
    W = AnalogMatrix.from_phases(rng.uniform(0, TWO_PI, (2, 1)))
    F = AnalogMatrix.from_phases(rng.uniform(0, TWO_PI, (8, 1)))
    eq = equivalent_channel(W, H, F)
    assert eq.ideal.shape == (1, 1)
    assert eq.ideal[0, 0] == pytest.approx(W.values[:, 0].conj() @ H[0] @ F.values[:, 0])


def test_equivalent_channel_orthogonal_users_is_diagonal():
    n_bs, n_ue = 32, 4
    psis = TWO_PI * np.array([1, 5, 11]) / n_bs
    H = np.stack([np.sqrt(n_bs * n_ue) * np.outer(steering_vector(0.4 * i, n_ue),
                                                  steering_vector(p, n_bs).conj())
                  for i, p in enumerate(psis)])
    W = AnalogMatrix.from_phases(np.outer(np.arange(n_ue), 0.4 * np.arange(3)))
    F = AnalogMatrix.from_phases(np.outer(np.arange(n_bs), psis))
    eq = equivalent_channel(W, H, F)
    np.testing.assert_allclose(eq.ideal, np.sqrt(n_bs * n_ue) * np.eye(3), atol=1e-9)


def test_equivalent_channel_shape_mismatch(rng):
    W = AnalogMatrix.from_phases(np.zeros((2, 2)))
    F = AnalogMatrix.from_phases(np.zeros((8, 2)))
    with pytest.raises(ValueError):
        equivalent_channel(W, np.zeros((3, 2, 8)), F)


def test_zf_examples():
    np.testing.assert_allclose(zf_precoder(np.eye(3)), np.eye(3), atol=1e-15)
    d = np.array([1.0, 2.0, 4.0])
    np.testing.assert_allclose(zf_precoder(np.diag(d)), np.diag(1 / d), atol=1e-15)


def test_zf_random_residual(rng):
    H = random_complex(rng, (4, 4)) + 4 * np.eye(4)
    assert np.linalg.norm(H @ zf_precoder(H) - np.eye(4)) < 1e-9


def test_zf_singular():
    with pytest.raises(SingularMatrixError):
        zf_precoder(np.ones((3, 3)))
    with pytest.raises(ValueError):
        zf_precoder(np.ones((2, 3)))


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_zf_residual_property(k, seed):
    H = random_complex(np.random.default_rng(seed), (k, k))
    if np.linalg.cond(H) > 1e8:
        return
    assert np.linalg.norm(H @ zf_precoder(H) - np.eye(k)) < 1e-9


def test_rzf_examples(rng):
    np.testing.assert_allclose(rzf_precoder(np.eye(2), 1.0, 1.0), np.eye(2) / 3, atol=1e-15)
    H = random_complex(rng, (4, 4)) + 3 * np.eye(4)
    assert np.linalg.norm(rzf_precoder(H, 1e12, 1.0) - zf_precoder(H)) < 1e-6
    with pytest.raises(ValueError):
        rzf_precoder(H, 0.0)


def test_rzf_eta_at_least_zf(rng):
    for _ in range(200):
        H = random_complex(rng, (4, 4))
        rho = 10 ** rng.uniform(-2, 2)
        assert power_factor(rzf_precoder(H, rho)) >= power_factor(zf_precoder(H))


def test_power_factor_examples():
    assert power_factor(np.eye(4)) == pytest.approx(0.5)
    s = np.array([1.0, 2.0, 3.0])
    assert power_factor(np.diag(1 / s)) == pytest.approx(1 / np.sqrt(np.sum(1 / s ** 2)))
    with pytest.raises(ValueError):
        power_factor(np.zeros((2, 2)))


@settings(max_examples=1000, deadline=None)
@given(hnp.arrays(np.float64, (3, 3), elements=st.floats(-10, 10)),
       st.floats(1e-3, 1e3))
def test_power_factor_homogeneous(F, c):
    assume(np.sum(F ** 2) > 1e-200)
    assert power_factor(c * F) == pytest.approx(power_factor(F) / c, rel=1e-9)


def test_mismatch_residual_is_interference(rng):
    cfg = ScenarioConfig(n_bs=64, n_ue=4, n_users=6, n_paths=2, angle_model="spatial")
    ch = draw_channel(cfg, rng)
    prof = draw_profile(64, 4, 6, 0.1, 0.1, rng)
    bf = svd_beamformer(ch, 3, 3, prof)
    eq = bf.equivalent(ch.H)
    F_BB = zf_precoder(eq.ideal)
    residual = eq.impaired @ F_BB - np.eye(bf.n_active)
    assert not np.allclose(residual, 0)
    np.testing.assert_allclose(np.sum(np.abs(residual) ** 2, axis=1),
                               interference_samples(eq.delta, F_BB), rtol=1e-9, atol=1e-15)


def test_assemble_masks_silent_users(rng):
    prof = draw_profile(8, 2, 3, 0.1, 0.1, rng)
    bf = assemble_beamformer(rng.uniform(0, TWO_PI, (8, 3)), rng.uniform(0, TWO_PI, (2, 3)), [0, 2], prof)
    assert np.all(bf.F_RF.values[:, 1] == 0) and np.all(bf.W.values[:, 1] == 0)
    np.testing.assert_allclose(np.abs(bf.F_RF.ideal_values[:, [0, 2]]), 1 / np.sqrt(8))
