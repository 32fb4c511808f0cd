"""Gaussian free-field data, cylindrical Wiener increments and white-noise functionals.

Every draw comes from a stream keyed by (seed, purpose, sample, ...), so the
value attached to a given sample never depends on how an ensemble is chunked
or scheduled.  Within a stream, values are drawn in mode order, which makes the
draws on a smaller basis a prefix of the draws on a larger one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._runtime import map_chunks, stream, write_csv, manifest_lines
from .spectral_basis import SpectralBasis, SpectralField

__all__ = [
    "GaussianPair",
    "WienerPath",
    "sample_mu",
    "sample_mu_ensemble",
    "standard_normals",
    "sample_wiener",
    "white_noise_functional",
    "write_ensemble_csv",
]

BLOCK = 256  # time steps per Wiener stream block


@dataclass(frozen=True)
class GaussianPair:
    u0: SpectralField
    u1: SpectralField


def standard_normals(seed: int, purpose: str, samples: Sequence[int], n: int) -> np.ndarray:
    """Array (len(samples), n); row i is the first n draws of stream (purpose, samples[i])."""
    out = np.empty((len(samples), n))
    for i, s in enumerate(samples):
        out[i] = stream(seed, purpose, s).standard_normal(n)
    return out


def sample_mu_ensemble(
    basis: SpectralBasis, seed: int, samples: Sequence[int] | int, threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (a, b) of M draws of mu: a_n = g_n / <lambda_n>, b_n = h_n."""
    if isinstance(samples, int):
        samples = range(samples)
    samples = list(samples)
    n = basis.n_modes

    def work(chunk):
        return standard_normals(seed, "mu0", chunk, n), standard_normals(seed, "mu1", chunk, n)

    parts = map_chunks(work, samples, threads)
    g = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, n))
    h = np.concatenate([p[1] for p in parts]) if parts else np.empty((0, n))
    return g / basis.bracket, h


def sample_mu(basis: SpectralBasis, seed: int, sample: int = 0) -> GaussianPair:
    a, b = sample_mu_ensemble(basis, seed, [sample])
    return GaussianPair(SpectralField(a[0], basis), SpectralField(b[0], basis))


@dataclass(frozen=True)
class WienerPath:
    """Per-mode Brownian increments on the mesh j*dt, j = 0..n_steps, for a set of samples.

    Increments are generated lazily in blocks of BLOCK steps; block ``q`` of
    sample ``s`` comes from stream (purpose, s, q) laid out mode-major, so both
    the mode prefix property and chunked evaluation hold.
    """

    n_modes: int
    T: float
    dt: float
    seed: int
    samples: tuple
    purpose: str = "wiener"
    scale: float = 1.0  # 0 gives the zero path

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def subset(self, samples: Sequence[int]) -> "WienerPath":
        return WienerPath(self.n_modes, self.T, self.dt, self.seed, tuple(samples), self.purpose, self.scale)

    def _normals(self, purpose: str, q: int) -> np.ndarray:
        out = np.empty((len(self.samples), self.n_modes, BLOCK))
        for i, s in enumerate(self.samples):
            out[i] = stream(self.seed, purpose, s, q).standard_normal((self.n_modes, BLOCK))
        return out

    def block(self, q: int) -> np.ndarray:
        """Increments for steps q*BLOCK .. (q+1)*BLOCK-1, shape (M, n_modes, BLOCK)."""
        if self.scale == 0:
            return np.zeros((len(self.samples), self.n_modes, BLOCK))
        return self._normals(self.purpose, q) * (self.scale * math.sqrt(self.dt))

    def aux_block(self, q: int) -> np.ndarray:
        """Independent standard normals aligned with block(q), for exact OU updates."""
        if self.scale == 0:
            return np.zeros((len(self.samples), self.n_modes, BLOCK))
        return self._normals(self.purpose + "/aux", q)

    def steps(self, aux: bool = False):
        """Yield (j, dbeta) or (j, dbeta, z) per time step, dbeta of shape (M, n_modes)."""
        q_cur = -1
        for j in range(self.n_steps):
            q, r = divmod(j, BLOCK)
            if q != q_cur:
                blk = self.block(q)
                ablk = self.aux_block(q) if aux else None
                q_cur = q
            if aux:
                yield j, blk[:, :, r], ablk[:, :, r]
            else:
                yield j, blk[:, :, r]

    def increments(self) -> np.ndarray:
        """All increments at once, shape (M, n_modes, n_steps)."""
        n = self.n_steps
        nb = -(-n // BLOCK)
        return np.concatenate([self.block(q) for q in range(nb)], axis=2)[:, :, :n]

    def endpoint(self) -> np.ndarray:
        """beta_n(T), shape (M, n_modes)."""
        total = np.zeros((len(self.samples), self.n_modes))
        for _, d in self.steps():
            total += d
        return total


def sample_wiener(
    basis: SpectralBasis | int,
    T: float,
    dt: float,
    seed: int,
    samples: Sequence[int] | int = 1,
    purpose: str = "wiener",
) -> WienerPath:
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_steps = T / dt
    if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
        raise ValueError("dt must divide T")
    if isinstance(samples, int):
        samples = range(samples)
    n = basis if isinstance(basis, int) else basis.n_modes
    return WienerPath(n, float(T), float(dt), int(seed), tuple(samples), purpose)


def white_noise_functional(f: SpectralField | np.ndarray, xi0: np.ndarray) -> np.ndarray:
    """W_f = <f, xi0> = sum_n f_n g_n for coefficient draws g (last axis = modes)."""
    coeffs = f.coeffs if isinstance(f, SpectralField) else np.asarray(f)
    return xi0 @ coeffs


def write_ensemble_csv(path, basis: SpectralBasis, coeffs: np.ndarray, config: dict, seed: int) -> None:
    """Long-format CSV (sample, mode, coefficient) with manifest header."""
    rows = ((i, n, coeffs[i, n]) for i in range(coeffs.shape[0]) for n in range(coeffs.shape[1]))
    write_csv(
        path,
        ["sample", "mode", "coefficient"],
        rows,
        manifest_lines(config, seed, basis.manifest().splitlines()[:5]),
    )
