"""Model construction: banded spin environments, joint Hamiltonians, degeneracy utilities.

The environment is a set of energy bands k = 0..n with energies E_k = k*delta_b,
degeneracies N_k = C(n, k) and (optionally) a small intra-band level spread.
Adjacent bands are coupled either by seeded random Gaussian blocks normalized to
mean |C_{k+1,k}|^2 = (N_{k+1} N_k)^{-1/2}, or by a physical sigma_x-type spin
coupling with random per-spin weights.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MAX_EXACT_N",
    "ModelParams",
    "QubitState",
    "BandedEnvironment",
    "binomial_degeneracy",
    "build_band_environment",
    "build_spin_environment",
    "build_total_hamiltonian",
    "beta_working_point",
    "effective_beta",
]

# Largest spin count for which exact integer binomials are supported.
MAX_EXACT_N = 62


@dataclass(frozen=True)
class ModelParams:
    """Physical scalars shared by both engines (hbar = 1, energies in units u).

    delta_s:  TLS energy splitting, > 0.
    detuning: environment-spin splitting minus delta_s; delta_b = delta_s + detuning > 0.
    coupling: interaction strength lambda, >= 0 (dimensionless, weak-coupling regime << 1).
    dt:       time between consecutive band measurements, >= 0.
    beta:     environmental inverse-temperature parameter (any sign).
    """

    delta_s: float
    detuning: float = 0.0
    coupling: float = 0.05
    dt: float = math.pi
    beta: float = 0.0

    def __post_init__(self) -> None:
        if self.delta_s <= 0:
            raise ValueError(f"delta_s must be > 0, got {self.delta_s}")
        if self.delta_b <= 0:
            raise ValueError(
                f"delta_b = delta_s + detuning must be > 0, got {self.delta_b}"
            )
        if self.coupling < 0:
            raise ValueError(f"coupling must be >= 0, got {self.coupling}")
        if self.dt < 0:
            raise ValueError(f"dt must be >= 0, got {self.dt}")

    @property
    def delta_b(self) -> float:
        """Environment-spin splitting delta_s + detuning."""
        return self.delta_s + self.detuning


@dataclass
class QubitState:
    """2x2 density matrix of the TLS; index 0 is the ground state."""

    rho00: float
    rho10: complex = 0.0 + 0.0j

    @property
    def rho11(self) -> float:
        return 1.0 - self.rho00

    @property
    def rho01(self) -> complex:
        return np.conjugate(self.rho10)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "QubitState":
        m = np.asarray(m)
        tr = m[0, 0].real + m[1, 1].real
        return cls(rho00=m[0, 0].real / tr, rho10=complex(m[1, 0]) / tr)

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.rho00, np.conjugate(self.rho10)], [self.rho10, self.rho11]],
            dtype=complex,
        )

    def validate(self, tol: float = 1e-9) -> None:
        """Check trace, hermiticity and positivity within tolerance."""
        if not (-tol <= self.rho00 <= 1.0 + tol):
            raise ValueError(f"rho00 = {self.rho00} outside [0, 1]")
        if abs(self.rho10) ** 2 > self.rho00 * self.rho11 + tol:
            raise ValueError(
                f"coherence too large: |rho10|^2 = {abs(self.rho10)**2:.3e} > "
                f"rho00*rho11 = {self.rho00 * self.rho11:.3e}"
            )


def binomial_degeneracy(n: int, k: int) -> int:
    """Exact degeneracy N_k = C(n, k) of the band with k spins up."""
    if n > MAX_EXACT_N:
        raise ValueError(f"n = {n} exceeds exact-arithmetic limit {MAX_EXACT_N}")
    if not 0 <= k <= n:
        raise ValueError(f"band index k = {k} outside [0, {n}]")
    return math.comb(n, k)


def _digamma(x: float) -> float:
    """Digamma psi(x) for x > 0 by recurrence plus asymptotic series."""
    if x <= 0:
        raise ValueError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    # Bernoulli-number tail sum(B_2j / (2j x^2j)); truncation error < 1e-13 for x >= 10.
    tail = inv2 * (
        1.0 / 12.0
        - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0)))
    )
    return acc + math.log(x) - 0.5 / x - tail


def beta_working_point(n: int, k0: int, delta_b: float, method: str = "digamma") -> float:
    """Local inverse temperature of the degeneracy profile at working point k0.

    method "log-approx": ln(n/k0 - 1)/delta_b; "digamma": exact slope of
    ln Gamma-interpolated binomials, (psi(n-k0+1) - psi(k0+1))/delta_b.
    """
    if not 0 < k0 < n:
        raise ValueError(f"working point k0 = {k0} must satisfy 0 < k0 < n = {n}")
    if method == "log-approx":
        return math.log(n / k0 - 1.0) / delta_b
    if method == "digamma":
        return (_digamma(n - k0 + 1.0) - _digamma(k0 + 1.0)) / delta_b
    raise ValueError(f"unknown method {method!r}")


def effective_beta(n: int, k_low: int, k_high: int, delta_b: float) -> float:
    """Inverse temperature from the degeneracy ratio of two bands.

    ln(N_high/N_low) / ((k_high - k_low) * delta_b); valid for any n via log-gamma.
    """
    if not 0 <= k_low < k_high <= n:
        raise ValueError(f"need 0 <= k_low < k_high <= n, got ({k_low}, {k_high}, {n})")

    def log_binom(k: int) -> float:
        return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)

    return (log_binom(k_high) - log_binom(k_low)) / ((k_high - k_low) * delta_b)


@dataclass(frozen=True)
class BandedEnvironment:
    """Immutable band environment: energies, degeneracies, adjacent-band couplings.

    up_blocks[i] couples band ks[i] -> ks[i+1] and has shape (N_{k+1}, N_k); the
    down block is its conjugate transpose by construction (hermiticity of V).
    """

    n: int
    delta_b: float
    seed: int
    band_width: float
    band_range: tuple[int, int]
    model: str
    degeneracies: tuple[int, ...]
    offsets: tuple[np.ndarray, ...]
    up_blocks: tuple[np.ndarray, ...]

    @property
    def ks(self) -> range:
        return range(self.band_range[0], self.band_range[1] + 1)

    @property
    def n_bands(self) -> int:
        return len(self.degeneracies)

    @property
    def dim(self) -> int:
        return int(sum(self.degeneracies))

    @property
    def band_starts(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.degeneracies)))[:-1].astype(int)

    def band_slice(self, i: int) -> slice:
        """Index slice of band position i (0-based within band_range)."""
        start = int(self.band_starts[i])
        return slice(start, start + self.degeneracies[i])

    def band_index(self, k: int) -> int:
        if not self.band_range[0] <= k <= self.band_range[1]:
            raise ValueError(f"band k = {k} outside range {self.band_range}")
        return k - self.band_range[0]

    def band_of_level(self) -> np.ndarray:
        """Band label k for every environment level index."""
        return np.repeat(np.fromiter(self.ks, dtype=int), self.degeneracies)

    def level_energies(self) -> np.ndarray:
        parts = [
            k * self.delta_b + off for k, off in zip(self.ks, self.offsets, strict=True)
        ]
        return np.concatenate(parts)

    def coupling_matrix(self) -> np.ndarray:
        """Hermitian environment coupling operator B with adjacent-band blocks only."""
        b = np.zeros((self.dim, self.dim), dtype=complex)
        for i, block in enumerate(self.up_blocks):
            rows = self.band_slice(i + 1)
            cols = self.band_slice(i)
            b[rows, cols] = block
            b[cols, rows] = block.conj().T
        return b

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "delta_b": self.delta_b,
                "seed": self.seed,
                "band_width": self.band_width,
                "band_range": list(self.band_range),
                "model": self.model,
            }
        )

    @classmethod
    def from_json(cls, doc: str) -> "BandedEnvironment":
        spec = json.loads(doc)
        model = spec.pop("model")
        band_range = spec.pop("band_range", None)
        if model == "random-band":
            return build_band_environment(
                n=spec["n"],
                delta_b=spec["delta_b"],
                seed=spec["seed"],
                band_width=spec.get("band_width", 0.0),
                band_range=tuple(band_range) if band_range is not None else None,
            )
        if model == "sigma-x":
            return build_spin_environment(
                n=spec["n"], delta_b=spec["delta_b"], seed=spec["seed"]
            )
        raise ValueError(f"unknown environment model {model!r}")


def build_band_environment(
    n: int,
    delta_b: float,
    seed: int,
    band_width: float = 0.0,
    band_range: tuple[int, int] | None = None,
) -> BandedEnvironment:
    """Random-band environment with seeded complex Gaussian coupling blocks.

    Entries of C_{k+1,k} have i.i.d. real/imaginary parts of variance
    (N_{k+1} N_k)^{-1/2} / 2 so that E|C|^2 = (N_{k+1} N_k)^{-1/2}.
    """
    if n < 1:
        raise ValueError(f"need at least one spin, got n = {n}")
    if band_width < 0:
        raise ValueError(f"band_width must be >= 0, got {band_width}")
    if band_width >= delta_b:
        raise ValueError(
            f"band_width = {band_width} must be smaller than delta_b = {delta_b}"
        )
    if band_range is None:
        band_range = (0, n)
    lo, hi = band_range
    if not (0 <= lo <= hi <= n):
        raise ValueError(f"band_range {band_range} not a contiguous window in [0, {n}]")

    rng = np.random.default_rng(seed)
    degs = tuple(binomial_degeneracy(n, k) for k in range(lo, hi + 1))
    offsets = tuple(
        rng.uniform(-band_width / 2.0, band_width / 2.0, size=d)
        if band_width > 0
        else np.zeros(d)
        for d in degs
    )
    blocks = []
    for i in range(len(degs) - 1):
        n_hi, n_lo = degs[i + 1], degs[i]
        scale = math.sqrt((n_hi * n_lo) ** -0.5 / 2.0)
        blocks.append(
            scale
            * (
                rng.standard_normal((n_hi, n_lo))
                + 1j * rng.standard_normal((n_hi, n_lo))
            )
        )
    return BandedEnvironment(
        n=n,
        delta_b=delta_b,
        seed=seed,
        band_width=band_width,
        band_range=(lo, hi),
        model="random-band",
        degeneracies=degs,
        offsets=offsets,
        up_blocks=tuple(blocks),
    )


def build_spin_environment(n: int, delta_b: float, seed: int) -> BandedEnvironment:
    """Physical n-spin environment coupled through sigma_x on every spin.

    The environment part of the interaction is sum_i g_i sigma_x^(i) with i.i.d.
    standard-normal weights g_i, rescaled globally so that the total mean-square
    matrix element between adjacent bands matches the random-band convention.
    Single spin flips connect bands k and k+1 only.
    """
    if n < 1:
        raise ValueError(f"need at least one spin, got n = {n}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(n)

    degs = tuple(binomial_degeneracy(n, k) for k in range(n + 1))
    # Basis configs per band (bitmask, ascending); position in list = level index.
    configs = [[] for _ in range(n + 1)]
    for c in range(1 << n):
        configs[bin(c).count("1")].append(c)
    pos = [{c: i for i, c in enumerate(band)} for band in configs]

    blocks = []
    for k in range(n):
        block = np.zeros((degs[k + 1], degs[k]), dtype=complex)
        for col, c in enumerate(configs[k]):
            for i in range(n):
                bit = 1 << i
                if not c & bit:
                    block[pos[k + 1][c | bit], col] = g[i]
        blocks.append(block)

    # Global rescale: total sum |C|^2 over all blocks matches the band-model
    # expectation sum_k sqrt(N_{k+1} N_k).
    total = sum(float(np.sum(np.abs(b) ** 2)) for b in blocks)
    target = sum(math.sqrt(degs[k + 1] * degs[k]) for k in range(n))
    scale = math.sqrt(target / total)
    blocks = tuple(scale * b for b in blocks)

    return BandedEnvironment(
        n=n,
        delta_b=delta_b,
        seed=seed,
        band_width=0.0,
        band_range=(0, n),
        model="sigma-x",
        degeneracies=degs,
        offsets=tuple(np.zeros(d) for d in degs),
        up_blocks=blocks,
    )


def build_total_hamiltonian(params: ModelParams, env: BandedEnvironment) -> np.ndarray:
    """Joint Hamiltonian on TLS x environment, ground TLS sector first.

    H = delta_s/2 sigma_z x 1 + 1 x H_B + coupling * (sigma^+ x B + sigma^- x B^+).
    """
    if abs(env.delta_b - params.delta_b) > 1e-9 * max(1.0, abs(params.delta_b)):
        raise ValueError(
            f"environment splitting {env.delta_b} inconsistent with "
            f"params.delta_b = {params.delta_b}"
        )
    d = env.dim
    h = np.zeros((2 * d, 2 * d), dtype=complex)
    e_env = env.level_energies()
    diag = np.concatenate((e_env - params.delta_s / 2.0, e_env + params.delta_s / 2.0))
    np.fill_diagonal(h, diag)
    b = env.coupling_matrix()
    h[d:, :d] = params.coupling * b
    h[:d, d:] = params.coupling * b.conj().T
    return h
