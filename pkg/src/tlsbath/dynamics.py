"""Exact joint evolution: propagator, band measurements, resets, trajectory and
ensemble runners.

Two engines share one step convention: unitary evolution over dt, then a
projective measurement of the environment band. The sampled engine propagates
pure state vectors (mixed inputs are unraveled into eigenstate draws), the
nonselective engine propagates the exact outcome-averaged density matrix.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .model import BandedEnvironment, ModelParams, QubitState, build_total_hamiltonian

__all__ = [
    "Propagator",
    "TotalState",
    "Trajectory",
    "EnsembleSeries",
    "band_projector",
    "measure_band_selective",
    "measure_band_nonselective",
    "coarse_reset",
    "reduced_qubit_state",
    "cojump_norm",
    "run_trajectory",
    "run_ensemble",
    "trajectory_seed",
]


class Propagator:
    """Unitary exp(-i H dt) from a cached Hermitian eigendecomposition."""

    def __init__(self, h: np.ndarray, herm_tol: float = 1e-10):
        h = np.asarray(h, dtype=complex)
        if np.max(np.abs(h - h.conj().T)) > herm_tol:
            raise ValueError("Hamiltonian is not Hermitian")
        self.energies, self.modes = np.linalg.eigh(h)

    def unitary(self, dt: float) -> np.ndarray:
        phases = np.exp(-1j * self.energies * dt)
        return (self.modes * phases) @ self.modes.conj().T


@dataclass
class TotalState:
    """State of TLS x environment, as a pure vector or a density matrix.

    Joint index layout: s * env.dim + level, with TLS sector s in {0: ground,
    1: excited} and environment levels grouped contiguously by band.
    """

    env: BandedEnvironment
    vector: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.vector is None) == (self.matrix is None):
            raise ValueError("provide exactly one of vector, matrix")

    @property
    def kind(self) -> str:
        return "pure-vector" if self.vector is not None else "density-matrix"

    @property
    def dim(self) -> int:
        return 2 * self.env.dim

    @classmethod
    def pure_product(
        cls, env: BandedEnvironment, tls_vec: np.ndarray, k: int, level: int
    ) -> "TotalState":
        d = env.dim
        psi = np.zeros(2 * d, dtype=complex)
        idx = env.band_slice(env.band_index(k)).start + level
        psi[idx] = tls_vec[0]
        psi[d + idx] = tls_vec[1]
        return cls(env=env, vector=psi)

    def density(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        return np.outer(self.vector, self.vector.conj())


def trajectory_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Deterministic per-trajectory seed, independent of execution order."""
    return np.random.SeedSequence(entropy=(master_seed, index))


def _joint_band_ids(env: BandedEnvironment) -> np.ndarray:
    band_pos = np.repeat(np.arange(env.n_bands), env.degeneracies)
    return np.concatenate((band_pos, band_pos))


def band_projector(env: BandedEnvironment, k: int) -> np.ndarray:
    """Projector 1_S x P_k onto all levels of band k, as a dense matrix."""
    i = env.band_index(k)
    mask = (_joint_band_ids(env) == i).astype(float)
    return np.diag(mask)


def measure_band_selective(
    state: TotalState, rng: np.random.Generator
) -> tuple[int, TotalState, float]:
    """Projective band measurement with a Born-sampled outcome.

    Returns the measured band k, the renormalized collapsed state and the
    outcome probability.
    """
    env = state.env
    ids = _joint_band_ids(env)
    if state.vector is not None:
        per_level = np.abs(state.vector) ** 2
    else:
        per_level = np.real(np.diag(state.matrix))
    weights = np.bincount(ids, weights=per_level, minlength=env.n_bands)
    total = weights.sum()
    if total < 1e-15:
        raise ValueError("state norm lost: all band weights below 1e-15")
    weights = weights / total
    pick = int(np.searchsorted(np.cumsum(weights), rng.random()))
    pick = min(pick, env.n_bands - 1)
    prob = float(weights[pick])
    keep = ids == pick
    if state.vector is not None:
        psi = np.where(keep, state.vector, 0.0)
        psi = psi / np.linalg.norm(psi)
        collapsed = TotalState(env=env, vector=psi)
    else:
        rho = np.where(np.outer(keep, keep), state.matrix, 0.0)
        collapsed = TotalState(env=env, matrix=rho / np.trace(rho).real)
    return env.band_range[0] + pick, collapsed, prob


def measure_band_nonselective(rho: np.ndarray, env: BandedEnvironment) -> np.ndarray:
    """Outcome-averaged measurement: rho -> sum_k P_k rho P_k."""
    ids = _joint_band_ids(env)
    same_band = ids[:, None] == ids[None, :]
    return np.where(same_band, rho, 0.0)


def coarse_reset(rho_s: QubitState | np.ndarray, env: BandedEnvironment, k: int) -> TotalState:
    """Product state of the given TLS state with the maximally mixed band k."""
    if isinstance(rho_s, QubitState):
        rho_s = rho_s.matrix()
    i = env.band_index(k)
    nk = env.degeneracies[i]
    d = env.dim
    sl = env.band_slice(i)
    rho = np.zeros((2 * d, 2 * d), dtype=complex)
    idx = np.arange(sl.start, sl.stop)
    for a in range(2):
        for b in range(2):
            rho[a * d + idx, b * d + idx] = rho_s[a, b] / nk
    return TotalState(env=env, matrix=rho)


def reduced_qubit_state(state: TotalState) -> QubitState:
    """Partial trace over the environment."""
    d = state.env.dim
    if state.vector is not None:
        a = state.vector.reshape(2, d)
        rho00 = float(np.vdot(a[0], a[0]).real)
        rho10 = complex(np.vdot(a[0], a[1]))
    else:
        m = state.matrix
        rho00 = float(np.trace(m[:d, :d]).real)
        rho10 = complex(np.trace(m[d:, :d]))
    return QubitState(rho00=rho00, rho10=rho10)


def cojump_norm(state: TotalState) -> float:
    """Frobenius norm of the system-environment correlation rho - rho_S x rho_B."""
    rho = state.density()
    d = state.env.dim
    rho_s = np.empty((2, 2), dtype=complex)
    blocks = [[rho[a * d:(a + 1) * d, b * d:(b + 1) * d] for b in range(2)] for a in range(2)]
    for a in range(2):
        for b in range(2):
            rho_s[a, b] = np.trace(blocks[a][b])
    rho_b = blocks[0][0] + blocks[1][1]
    corr = rho - np.kron(rho_s, rho_b)
    return float(np.linalg.norm(corr))


@dataclass
class Trajectory:
    """Single measurement record: band outcomes, reduced states, probabilities."""

    outcomes: np.ndarray          # (J+1,), outcomes[0] = initial band k0
    rho00: np.ndarray             # (J+1,)
    rho10: np.ndarray             # (J+1,) complex
    probs: np.ndarray             # (J,) Born probability of outcome j
    seed: object = None

    @property
    def steps(self) -> int:
        return len(self.probs)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "k_j", "rho00", "re_rho10", "im_rho10", "stderr"])
            for j in range(len(self.rho00)):
                w.writerow(
                    [
                        j,
                        int(self.outcomes[j]),
                        repr(float(self.rho00[j])),
                        repr(float(self.rho10[j].real)),
                        repr(float(self.rho10[j].imag)),
                        "",
                    ]
                )


@dataclass
class EnsembleSeries:
    """Per-step ensemble averages of the reduced TLS state."""

    rho00: np.ndarray             # (J+1,)
    rho10: np.ndarray             # (J+1,) complex
    stderr: np.ndarray            # (J+1,) standard error of rho00 (0 for exact engine)
    n_traj: int | None
    engine: str
    reset_mode: str
    master_seed: int | None = None
    wall_time: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.rho00) - 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "k_j", "rho00", "re_rho10", "im_rho10", "stderr"])
            for j in range(len(self.rho00)):
                w.writerow(
                    [
                        j,
                        "",
                        repr(float(self.rho00[j])),
                        repr(float(self.rho10[j].real)),
                        repr(float(self.rho10[j].imag)),
                        repr(float(self.stderr[j])),
                    ]
                )

    def to_json(self, path, metadata: dict | None = None) -> None:
        doc = {
            "engine": self.engine,
            "reset_mode": self.reset_mode,
            "n_traj": self.n_traj,
            "master_seed": self.master_seed,
            "wall_time": self.wall_time,
            "rho00": self.rho00.tolist(),
            "re_rho10": self.rho10.real.tolist(),
            "im_rho10": self.rho10.imag.tolist(),
            "stderr": self.stderr.tolist(),
        }
        if metadata:
            doc["metadata"] = metadata
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)


def _eig2(rho00: np.ndarray, rho10: np.ndarray):
    """Vectorized eigen-decomposition of 2x2 density matrices.

    Returns (p_plus, v_plus, v_minus) with eigenvectors as (2, m) arrays;
    p_plus is the eigenvalue of v_plus.
    """
    rho00 = np.atleast_1d(np.asarray(rho00, dtype=float))
    rho10 = np.atleast_1d(np.asarray(rho10, dtype=complex))
    half_diff = (rho00 - (1.0 - rho00)) / 2.0
    s = np.sqrt(half_diff**2 + np.abs(rho10) ** 2)
    lam_p = 0.5 + s
    # Eigenvector of the larger eigenvalue: (rho01, lam_p - rho00), with a
    # diagonal fallback where the matrix is already (numerically) diagonal.
    v0 = np.conjugate(rho10)
    v1 = lam_p - rho00
    norm = np.sqrt(np.abs(v0) ** 2 + np.abs(v1) ** 2)
    diagonal = norm < 1e-14
    excited_heavy = rho00 < 0.5
    v0 = np.where(diagonal, np.where(excited_heavy, 0.0, 1.0), v0)
    v1 = np.where(diagonal, np.where(excited_heavy, 1.0, 0.0), v1)
    norm = np.where(diagonal, 1.0, norm)
    v_plus = np.stack((v0 / norm, v1 / norm))
    # Orthogonal partner.
    v_minus = np.stack((-np.conjugate(v_plus[1]), np.conjugate(v_plus[0])))
    return lam_p, v_plus, v_minus


def _sample_paths(
    params: ModelParams,
    env: BandedEnvironment,
    rho0: QubitState,
    k0: int,
    steps: int,
    seeds: list,
    reset_mode: str,
):
    """Batched pure-state trajectories; per-column RNG keeps each trajectory
    identical to an independent single run with the same seed."""
    if reset_mode not in ("exact", "coarse"):
        raise ValueError(f"unknown reset_mode {reset_mode!r}")
    d = env.dim
    m = len(seeds)
    rngs = [np.random.default_rng(s) for s in seeds]
    prop = Propagator(build_total_hamiltonian(params, env))
    u = prop.unitary(params.dt)

    ids_env = np.repeat(np.arange(env.n_bands), env.degeneracies)
    starts = env.band_starts
    degs = np.asarray(env.degeneracies)
    i0 = env.band_index(k0)

    out_k = np.empty((steps + 1, m), dtype=int)
    out_p = np.empty((steps, m))
    out_r00 = np.empty((steps + 1, m))
    out_r10 = np.empty((steps + 1, m), dtype=complex)

    # Initial unraveling: TLS eigenstate draw + uniform level within band k0.
    lam_p, v_plus, v_minus = _eig2(rho0.rho00, rho0.rho10)
    psi = np.zeros((2 * d, m), dtype=complex)
    for c, rng in enumerate(rngs):
        take_plus = rng.random() < lam_p[0]
        lvl = int(rng.integers(degs[i0]))
        vec = v_plus[:, 0] if take_plus else v_minus[:, 0]
        row = starts[i0] + lvl
        psi[row, c] = vec[0]
        psi[d + row, c] = vec[1]
    out_k[0] = env.band_range[0] + i0
    a = psi.reshape(2, d, m)
    out_r00[0] = np.einsum("im,im->m", a[0], a[0].conj()).real
    out_r10[0] = np.einsum("im,im->m", a[0].conj(), a[1])

    cur_band = np.full(m, i0, dtype=int)
    for j in range(1, steps + 1):
        psi = u @ psi
        # Band weights, restricted to the adjacent triple (selection rule).
        prob2 = np.abs(psi.reshape(2, d, m)) ** 2
        per_level = prob2[0] + prob2[1]
        w = np.zeros((env.n_bands, m))
        for i in range(env.n_bands):
            sl = env.band_slice(i)
            w[i] = per_level[sl].sum(axis=0)
        adj = np.abs(np.arange(env.n_bands)[:, None] - cur_band[None, :]) <= 1
        w_adj = np.where(adj, w, 0.0)
        tot = w_adj.sum(axis=0)
        # Leakage past the adjacent triple is a fourth-order effect; only a
        # gross violation indicates a broken propagator.
        leak_tol = max(1e-9, 1e3 * params.coupling**4)
        if np.any(w.sum(axis=0) - tot > leak_tol):
            raise ValueError(
                f"band-adjacency selection rule violated beyond {leak_tol:.1e}"
            )
        w_adj = w_adj / tot
        cum = np.cumsum(w_adj, axis=0)
        draws = np.array([rng.random() for rng in rngs])
        picks = (cum < draws[None, :]).sum(axis=0)
        np.minimum(picks, env.n_bands - 1, out=picks)
        out_p[j - 1] = w_adj[picks, np.arange(m)]
        # Collapse and renormalize.
        keep = ids_env[:, None] == picks[None, :]
        psi = psi.reshape(2, d, m) * keep[None, :, :]
        norms = np.sqrt((np.abs(psi) ** 2).sum(axis=(0, 1)))
        psi = psi / norms
        cur_band = picks
        out_k[j] = env.band_range[0] + picks
        r00 = np.einsum("im,im->m", psi[0], psi[0].conj()).real
        r10 = np.einsum("im,im->m", psi[0].conj(), psi[1])
        out_r00[j] = r00
        out_r10[j] = r10
        psi = psi.reshape(2 * d, m)
        if reset_mode == "coarse":
            # Exact unraveling of rho_S x (1_k / N_k): TLS eigenstate draw plus
            # a uniformly drawn level within the measured band.
            lam_p, v_plus, v_minus = _eig2(r00, r10)
            psi = np.zeros((2 * d, m), dtype=complex)
            cols = np.arange(m)
            take_plus = np.empty(m, dtype=bool)
            lvls = np.empty(m, dtype=int)
            for c, rng in enumerate(rngs):
                take_plus[c] = rng.random() < lam_p[c]
                lvls[c] = rng.integers(degs[picks[c]])
            vec = np.where(take_plus[None, :], v_plus, v_minus)
            rows = starts[picks] + lvls
            psi[rows, cols] = vec[0]
            psi[d + rows, cols] = vec[1]
    return out_k, out_p, out_r00, out_r10


def run_trajectory(
    params: ModelParams,
    env: BandedEnvironment,
    rho0: QubitState,
    k0: int,
    steps: int,
    seed,
    reset_mode: str = "coarse",
) -> Trajectory:
    """One selective-measurement trajectory, deterministic in the seed."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    out_k, out_p, out_r00, out_r10 = _sample_paths(
        params, env, rho0, k0, steps, [seed], reset_mode
    )
    return Trajectory(
        outcomes=out_k[:, 0],
        rho00=out_r00[:, 0],
        rho10=out_r10[:, 0],
        probs=out_p[:, 0],
        seed=seed,
    )


def _run_nonselective_exact(params, env, rho0: QubitState, k0, steps):
    """Full joint density matrix, nonselective measurement, no coarse graining."""
    d = env.dim
    prop = Propagator(build_total_hamiltonian(params, env))
    u = prop.unitary(params.dt)
    rho = coarse_reset(rho0, env, k0).matrix
    ids = _joint_band_ids(env)
    same_band = ids[:, None] == ids[None, :]
    r00 = np.empty(steps + 1)
    r10 = np.empty(steps + 1, dtype=complex)
    state = TotalState(env=env, matrix=rho)
    q = reduced_qubit_state(state)
    r00[0], r10[0] = q.rho00, q.rho10
    for j in range(1, steps + 1):
        rho = u @ rho @ u.conj().T
        rho = np.where(same_band, rho, 0.0)
        state = TotalState(env=env, matrix=rho)
        q = reduced_qubit_state(state)
        r00[j], r10[j] = q.rho00, q.rho10
    return r00, r10


def _coarse_step_operator(params, env) -> np.ndarray:
    """One-step transfer matrix on per-band TLS blocks for coarse-reset runs.

    With coarse graining the post-measurement state is fully described by one
    (generally unnormalized) 2x2 TLS block per band; the evolve-measure-reset
    step is linear on that collection.
    """
    d = env.dim
    nb = env.n_bands
    prop = Propagator(build_total_hamiltonian(params, env))
    u = prop.unitary(params.dt)
    t = np.zeros((4 * nb, 4 * nb), dtype=complex)
    for kb in range(nb):
        sl = env.band_slice(kb)
        nk = env.degeneracies[kb]
        for a in range(2):
            ua = u[:, a * d + sl.start:a * d + sl.stop]
            for b in range(2):
                ub = u[:, b * d + sl.start:b * d + sl.stop]
                col = 4 * kb + 2 * a + b
                # rho_out = (ua ub^+) / nk; extract the per-band TLS blocks.
                for k2 in range(nb):
                    sl2 = env.band_slice(k2)
                    for s in range(2):
                        rows_s = slice(s * d + sl2.start, s * d + sl2.stop)
                        for s2 in range(2):
                            rows_s2 = slice(s2 * d + sl2.start, s2 * d + sl2.stop)
                            val = np.einsum(
                                "il,il->", ua[rows_s], ub[rows_s2].conj()
                            )
                            t[4 * k2 + 2 * s + s2, col] = val / nk
    return t


def _run_nonselective_coarse(params, env, rho0: QubitState, k0, steps):
    nb = env.n_bands
    t = _coarse_step_operator(params, env)
    x = np.zeros(4 * nb, dtype=complex)
    i0 = env.band_index(k0)
    rs = rho0.matrix()
    x[4 * i0:4 * i0 + 4] = rs.reshape(-1)
    r00 = np.empty(steps + 1)
    r10 = np.empty(steps + 1, dtype=complex)
    idx00 = 4 * np.arange(nb)
    idx10 = 4 * np.arange(nb) + 2
    for j in range(steps + 1):
        if j:
            x = t @ x
        r00[j] = x[idx00].sum().real
        r10[j] = x[idx10].sum()
    return r00, r10


def run_ensemble(
    params: ModelParams,
    env: BandedEnvironment,
    rho0: QubitState,
    k0: int,
    steps: int,
    n_traj: int | None = None,
    master_seed: int | None = None,
    reset_mode: str = "coarse",
    engine: str = "nonselective",
) -> EnsembleSeries:
    """Ensemble-averaged measurement series.

    engine "sampled" averages n_traj independent trajectories with seeds derived
    from master_seed; "nonselective" evolves the exact outcome-averaged density
    matrix (no statistical error).
    """
    t0 = time.perf_counter()
    if engine == "sampled":
        if n_traj is None or n_traj < 1:
            raise ValueError("sampled engine requires n_traj >= 1")
        if master_seed is None:
            raise ValueError("sampled engine requires a master_seed")
        seeds = [trajectory_seed(master_seed, i) for i in range(n_traj)]
        _, _, r00, r10 = _sample_paths(params, env, rho0, k0, steps, seeds, reset_mode)
        mean00 = r00.mean(axis=1)
        mean10 = r10.mean(axis=1)
        if n_traj > 1:
            stderr = r00.std(axis=1, ddof=1) / np.sqrt(n_traj)
        else:
            stderr = np.zeros(steps + 1)
        series = EnsembleSeries(
            rho00=mean00,
            rho10=mean10,
            stderr=stderr,
            n_traj=n_traj,
            engine=engine,
            reset_mode=reset_mode,
            master_seed=master_seed,
        )
    elif engine == "nonselective":
        if reset_mode == "coarse":
            r00, r10 = _run_nonselective_coarse(params, env, rho0, k0, steps)
        elif reset_mode == "exact":
            r00, r10 = _run_nonselective_exact(params, env, rho0, k0, steps)
        else:
            raise ValueError(f"unknown reset_mode {reset_mode!r}")
        series = EnsembleSeries(
            rho00=r00,
            rho10=r10,
            stderr=np.zeros(steps + 1),
            n_traj=None,
            engine=engine,
            reset_mode=reset_mode,
            master_seed=master_seed,
        )
    else:
        raise ValueError(f"unknown engine {engine!r}")
    series.wall_time = time.perf_counter() - t0
    return series
