import json
import math

import numpy as np
import pytest
import scipy.special

from tlsbath.model import (
    BandedEnvironment,
    ModelParams,
    QubitState,
    beta_working_point,
    binomial_degeneracy,
    build_band_environment,
    build_spin_environment,
    build_total_hamiltonian,
    effective_beta,
)
from tlsbath.model import _digamma


def test_binomial_degeneracies():
    assert binomial_degeneracy(7, 1) == 7
    assert binomial_degeneracy(7, 2) == 21
    assert binomial_degeneracy(13, 0) == 1
    assert binomial_degeneracy(62, 31) == math.comb(62, 31)


def test_binomial_degeneracy_bounds():
    with pytest.raises(ValueError):
        binomial_degeneracy(7, 8)
    with pytest.raises(ValueError):
        binomial_degeneracy(7, -1)
    with pytest.raises(ValueError):
        binomial_degeneracy(63, 2)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(delta_s=0.0)
    with pytest.raises(ValueError):
        ModelParams(delta_s=1.0, detuning=-1.0)
    with pytest.raises(ValueError):
        ModelParams(delta_s=1.0, coupling=-0.1)
    with pytest.raises(ValueError):
        ModelParams(delta_s=1.0, dt=-0.1)
    assert ModelParams(delta_s=1.0, detuning=0.7).delta_b == pytest.approx(1.7)


def test_qubit_state_consistency():
    q = QubitState(rho00=0.3, rho10=0.35 + 0.1j)
    assert q.rho11 == pytest.approx(0.7)
    assert q.rho01 == np.conjugate(q.rho10)
    m = q.matrix()
    assert np.allclose(m, m.conj().T)
    back = QubitState.from_matrix(m)
    assert back.rho00 == pytest.approx(q.rho00)
    assert back.rho10 == pytest.approx(q.rho10)


def test_qubit_state_validate_rejects_overlarge_coherence():
    with pytest.raises(ValueError):
        QubitState(rho00=0.9, rho10=0.5 + 0.0j).validate()


def test_block_shapes():
    env = build_band_environment(7, 1.0, seed=42)
    shapes = [b.shape for b in env.up_blocks]
    assert shapes == [(7, 1), (21, 7), (35, 21), (35, 35), (21, 35), (7, 21), (1, 7)]
    assert env.dim == 2**7


def test_coupling_block_statistics():
    """Mean |C|^2 of the 21x7 block across seeds against its target value."""
    target = (21 * 7) ** -0.5
    samples = []
    for seed in range(120):
        env = build_band_environment(7, 1.0, seed=seed)
        samples.append(np.mean(np.abs(env.up_blocks[1]) ** 2))
    samples = np.asarray(samples)
    stderr = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - target) < 5 * stderr


def test_coupling_hermiticity():
    env = build_band_environment(6, 1.0, seed=3)
    b = env.coupling_matrix()
    assert np.array_equal(b, b.conj().T)


def test_band_environment_determinism():
    a = build_band_environment(5, 1.0, seed=7)
    b = build_band_environment(5, 1.0, seed=7)
    for x, y in zip(a.up_blocks, b.up_blocks):
        assert np.array_equal(x, y)


def test_band_range_dimension():
    env = build_band_environment(9, 1.0, seed=1, band_range=(1, 3))
    assert env.degeneracies == (9, 36, 84)
    assert env.dim == 9 + 36 + 84
    assert list(env.ks) == [1, 2, 3]


def test_band_width_validation():
    with pytest.raises(ValueError):
        build_band_environment(5, 1.0, seed=0, band_width=1.0)
    with pytest.raises(ValueError):
        build_band_environment(5, 1.0, seed=0, band_width=-0.1)


def test_band_offsets_within_width():
    env = build_band_environment(5, 1.0, seed=0, band_width=0.2)
    for off in env.offsets:
        assert np.all(np.abs(off) <= 0.1)


def test_spin_environment_single_spin():
    env = build_spin_environment(1, 1.0, seed=0)
    assert env.up_blocks[0].shape == (1, 1)
    assert env.up_blocks[0][0, 0] != 0


def test_spin_environment_adjacency_and_determinism():
    env = build_spin_environment(5, 1.0, seed=12)
    b = env.coupling_matrix()
    labels = env.band_of_level()
    far = np.abs(labels[:, None] - labels[None, :]) > 1
    assert np.all(b[far] == 0)
    env2 = build_spin_environment(5, 1.0, seed=12)
    assert np.array_equal(b, env2.coupling_matrix())


def test_spin_environment_global_normalization():
    """Total mean-square coupling matches the random-band convention."""
    env = build_spin_environment(6, 1.0, seed=4)
    total = sum(np.sum(np.abs(b) ** 2) for b in env.up_blocks)
    target = sum(
        math.sqrt(math.comb(6, k + 1) * math.comb(6, k)) for k in range(6)
    )
    assert total == pytest.approx(target, rel=1e-12)


def test_hamiltonian_hermitian_and_diagonal_at_zero_coupling(seven_env):
    p0 = ModelParams(delta_s=1.0, coupling=0.0)
    h0 = build_total_hamiltonian(p0, seven_env)
    assert np.array_equal(h0, np.diag(np.diag(h0)))
    p = ModelParams(delta_s=1.0, coupling=0.05)
    h = build_total_hamiltonian(p, seven_env)
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_hamiltonian_spectrum_multiset(seven_env):
    p0 = ModelParams(delta_s=1.0, coupling=0.0)
    h0 = build_total_hamiltonian(p0, seven_env)
    expect = []
    for k in range(8):
        expect += [k - 0.5] * math.comb(7, k)
        expect += [k + 0.5] * math.comb(7, k)
    got = np.sort(np.linalg.eigvalsh(h0))
    assert np.allclose(got, np.sort(expect), atol=1e-12)


def test_hamiltonian_dimension_mismatch(seven_env):
    p = ModelParams(delta_s=1.0, detuning=0.5)
    with pytest.raises(ValueError):
        build_total_hamiltonian(p, seven_env)


def test_digamma_against_scipy():
    for x in [0.05, 0.3, 1.0, 2.5, 7.7, 11.0, 101.0, 901.5]:
        assert _digamma(x) == pytest.approx(scipy.special.digamma(x), abs=1e-12)


def test_beta_working_point_values():
    assert beta_working_point(8, 4, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert beta_working_point(1000, 100, 1.0, method="log-approx") == pytest.approx(
        math.log(9), rel=1e-14
    )
    bd = beta_working_point(1000, 100, 2.0, method="digamma")
    oracle = (scipy.special.digamma(901) - scipy.special.digamma(101)) / 2.0
    assert bd == pytest.approx(oracle, rel=1e-10)


def test_beta_working_point_validation():
    with pytest.raises(ValueError):
        beta_working_point(7, 0, 1.0)
    with pytest.raises(ValueError):
        beta_working_point(7, 7, 1.0)
    with pytest.raises(ValueError):
        beta_working_point(7, 2, 1.0, method="pade")


def test_effective_beta_values():
    assert effective_beta(7, 1, 2, 1.0) == pytest.approx(math.log(3))
    assert effective_beta(7, 2, 3, 1.7) == pytest.approx(math.log(35 / 21) / 1.7)
    assert effective_beta(9, 4, 5, 1.0) == pytest.approx(0.0, abs=1e-14)
    # two-band-gap variant averages the pair ratio
    assert effective_beta(7, 1, 3, 3.0) == pytest.approx(math.log(5) / 6.0)


def test_degeneracy_ratio_matches_digamma_beta():
    n, k0 = 1000, 100
    beta = beta_working_point(n, k0, 1.0, method="digamma")
    ratio = (n - k0) / (k0 + 1)  # N_{k0+1}/N_{k0}
    assert abs(ratio / math.exp(beta) - 1.0) < 1e-2


def test_short_time_sum_property():
    """Band-summed cos(alpha t) factors agree with the degenerate-band value."""
    p = ModelParams(delta_s=1.0, detuning=0.0, coupling=0.05, dt=math.pi)
    t = 0.8 * p.dt

    def band_sum(env):
        blk = env.up_blocks[1]  # bands 1 -> 2
        e_hi = 2.0 * env.delta_b + env.offsets[2]
        e_lo = 1.0 * env.delta_b + env.offsets[1]
        alpha = e_hi[:, None] - e_lo[None, :]
        return np.sum(np.abs(blk) ** 2 * np.cos(alpha * t))

    env0 = build_band_environment(5, 1.0, seed=33, band_width=0.0)
    flat = np.sum(np.abs(env0.up_blocks[1]) ** 2) * math.cos(1.0 * t)
    assert band_sum(env0) == pytest.approx(flat, rel=1e-12)

    envw = build_band_environment(5, 1.0, seed=33, band_width=0.01)
    flat_w = np.sum(np.abs(envw.up_blocks[1]) ** 2) * math.cos(1.0 * t)
    assert band_sum(envw) == pytest.approx(flat_w, rel=0.05)


def test_environment_json_round_trip():
    env = build_band_environment(5, 1.3, seed=77, band_width=0.1, band_range=(1, 4))
    clone = BandedEnvironment.from_json(env.to_json())
    assert clone.degeneracies == env.degeneracies
    assert json.loads(env.to_json())["model"] == "random-band"
    for a, b in zip(env.up_blocks, clone.up_blocks):
        assert np.array_equal(a, b)
    for a, b in zip(env.offsets, clone.offsets):
        assert np.array_equal(a, b)

    spin = build_spin_environment(4, 1.0, seed=5)
    spin2 = BandedEnvironment.from_json(spin.to_json())
    assert np.array_equal(spin.coupling_matrix(), spin2.coupling_matrix())
