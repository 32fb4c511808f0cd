"""Hermite/Wick algebra, renormalization constants and truncated covariance kernels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .projector import smooth_multipliers
from .spectral_basis import SpectralBasis, SpectralField, build_basis

__all__ = [
    "hermite",
    "hermite_all",
    "WickData",
    "compute_sigma_N",
    "compute_sigma_Nt",
    "sigma_t_bracket",
    "sigma_t_remainder",
    "wick_power",
    "CovarianceKernel",
    "covariance_kernel",
    "green_power_bound",
    "gibbs_potential",
    "gibbs_potential_batch",
    "chaos_moment_ratio",
    "chaos_bound",
    "KERNEL_ENTRY_CAP",
]

KERNEL_ENTRY_CAP = 40_000_000  # grid x grid entries allowed in kernel assembly


def hermite(k: int, x, sigma=1.0):
    """H_k(x; sigma) from H_{j+1} = x H_j - j sigma H_{j-1}, H_0 = 1, H_1 = x."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("variance parameter must be non-negative")
    prev, cur = np.ones(np.broadcast(x, sigma).shape), x + 0.0 * sigma
    if k == 0:
        return prev
    for j in range(1, k):
        prev, cur = cur, x * cur - j * sigma * prev
    return cur


def hermite_all(kmax: int, x, sigma=1.0) -> list:
    """[H_0, ..., H_kmax] evaluated at (x, sigma)."""
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    out = [np.ones(np.broadcast(x, sigma).shape)]
    if kmax >= 1:
        out.append(x + 0.0 * sigma)
    for j in range(1, kmax):
        out.append(x * out[j] - j * sigma * out[j - 1])
    return out


@dataclass
class WickData:
    """Renormalization variance on the grid: shape (n_points,) or (n_times, n_points)."""

    N: float
    sigma: np.ndarray
    basis: SpectralBasis = field(repr=False)
    times: np.ndarray | None = None
    multiplier_power: int = 2

    @property
    def cutoff(self) -> str:
        return f"psi0(lambda^2/N^2)^{self.multiplier_power}, N={self.N:g}"


def _require_cap(basis: SpectralBasis, N: float):
    if basis.max_lambda < N:
        raise ValueError(
            f"basis cap {basis.max_lambda:g} below N = {N:g}: the variance sum would be truncated"
        )


def compute_sigma_N(basis: SpectralBasis, N: float) -> WickData:
    """sigma_N(x) = sum_n psi0(lambda_n^2/N^2)^2 phi_n(x)^2 / <lambda_n>^2 on the grid."""
    _require_cap(basis, N)
    w = smooth_multipliers(basis, N, 2) / basis.bracket_sq
    sig = w @ basis.eigenfunction_table**2
    return WickData(N, sig, basis, None, 2)


def sigma_t_bracket(bracket: np.ndarray, t) -> np.ndarray:
    """int_0^t [sin((t-s)w)/w]^2 ds = t/(2w^2) - sin(2tw)/(4w^3), shape (n_t, n_modes)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
    w = bracket[None, :]
    return t / (2 * w * w) - np.sin(2 * t * w) / (4 * w**3)


def compute_sigma_Nt(basis: SpectralBasis, N: float, times, power: int = 1) -> WickData:
    """sigma_N(t, x) for the undamped stochastic convolution.

    ``power`` is the exponent on psi0.  With ``power=1`` the multiplier enters
    linearly; ``power=2`` is the exact variance of P_N applied to the
    convolution (the multiplier acts on the field, so it appears squared).
    """
    _require_cap(basis, N)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    c = sigma_t_bracket(basis.bracket, times) * smooth_multipliers(basis, N, power)
    sig = c @ basis.eigenfunction_table**2
    return WickData(N, sig, basis, times, power)


def sigma_t_remainder(basis: SpectralBasis, N: float, t: float, power: int = 1) -> np.ndarray:
    """Diagonal of sigma_N(t,.) - (t/2) sigma~_N: -sum psi0^p sin(2t<l>)/(4<l>^3) phi^2."""
    m = smooth_multipliers(basis, N, power)
    w = basis.bracket
    coef = -m * np.sin(2 * t * w) / (4 * w**3)
    return coef @ basis.eigenfunction_table**2


def wick_power(values: np.ndarray, k: int, wick: WickData) -> np.ndarray:
    """Pointwise H_k(u_N(x); sigma_N(x)); time-dependent data broadcast over the time axis."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != wick.sigma.shape[-1]:
        raise ValueError("field grid does not match the renormalization grid")
    if wick.sigma.ndim == 2 and (values.ndim < 2 or values.shape[-2] != wick.sigma.shape[0]):
        raise ValueError("time axis of the field does not match the renormalization mesh")
    return hermite(k, values, wick.sigma)


@dataclass
class CovarianceKernel:
    values: np.ndarray
    N: float
    basis: SpectralBasis = field(repr=False)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.values)


def _guard(n_points: int, cap: int):
    if n_points * n_points > cap:
        raise MemoryError(
            f"kernel on {n_points} grid points needs {n_points**2} entries, above the cap {cap}"
        )


def _kernel_rows(basis: SpectralBasis, N: float, rows=None) -> np.ndarray:
    T = basis.eigenfunction_table
    w = smooth_multipliers(basis, N, 2) / basis.bracket_sq
    left = T if rows is None else T[:, rows]
    return (left * w[:, None]).T @ T


def covariance_kernel(basis: SpectralBasis, N: float, cap: int = KERNEL_ENTRY_CAP) -> CovarianceKernel:
    """gamma_N(x, y) = sum psi0^2 phi_n(x) phi_n(y) / <lambda_n>^2 on grid x grid."""
    _require_cap(basis, N)
    _guard(basis.n_points, cap)
    return CovarianceKernel(_kernel_rows(basis, N), N, basis)


def green_power_bound(
    manifold: str,
    N: float,
    k: int,
    eps: float,
    cap: int = KERNEL_ENTRY_CAP,
    basis: SpectralBasis | None = None,
) -> float:
    """max_{x,y} |(1 - Delta)_y^{-eps/2} gamma_N(x, .)^k (y)| over the grid.

    The k-th power of gamma_N(x, .) only contains frequencies up to k*N, so the
    powers are analyzed on a basis with cap k*N whose grid is exact for that
    band; the smoothing is then exact on the full spectrum of the power.
    """
    fine = basis if basis is not None else build_basis(manifold, k * N)
    if fine.max_lambda < k * N:
        raise ValueError("basis must carry the full band of gamma_N^k (cap >= k N)")
    _guard(fine.n_points, cap)
    gamma = _kernel_rows(fine, N)
    coeffs = fine.analyze(gamma**k) * fine.bracket ** (-eps)
    return float(np.abs(fine.synthesize(coeffs)).max())


def _quadrature_basis(basis: SpectralBasis, N: float, degree: int, quad: SpectralBasis | None):
    if quad is None:
        return basis.truncate(N, degree=degree)
    if quad.degree < degree:
        raise ValueError(
            f"quadrature grid is exact for degree {quad.degree}, integrand has degree {degree}"
        )
    if quad.manifold != basis.manifold or quad.max_lambda < min(N, basis.max_lambda):
        raise ValueError("quadrature basis must contain every mode of P_N u0")
    return quad


def gibbs_potential_batch(
    coeffs: np.ndarray,
    basis: SpectralBasis,
    N: float,
    k: int,
    quad: SpectralBasis | None = None,
) -> np.ndarray:
    """(1/(k+1)) int H_{k+1}(P_N u0; sigma_N) dx for coefficient rows on ``basis``.

    The integrand has degree k+1 in modes with lambda <= N, so it is evaluated on
    a grid exact for that degree.
    """
    _require_cap(basis, N)
    q = _quadrature_basis(basis, N, k + 1, quad)
    m = smooth_multipliers(q, N)
    c = np.asarray(coeffs)[..., : q.n_modes] * m
    sig = compute_sigma_N(q, N).sigma
    vals = q.synthesize(c)
    return hermite(k + 1, vals, sig) @ q.grid.weights / (k + 1)


def gibbs_potential(u0: SpectralField, N: float, k: int, quad: SpectralBasis | None = None) -> float:
    return float(gibbs_potential_batch(u0.coeffs, u0.basis, N, k, quad))


def chaos_bound(d: int, p: float = 4.0) -> float:
    """Hypercontractive constant (p-1)^{d/2} for degree-d polynomials of Gaussians."""
    return (p - 1.0) ** (d / 2.0)


def chaos_moment_ratio(samples: np.ndarray, p: float = 4.0) -> float:
    """Empirical ||Q||_p / ||Q||_2 from Monte-Carlo samples of Q."""
    samples = np.asarray(samples, dtype=float)
    return float(np.mean(np.abs(samples) ** p) ** (1 / p) / np.sqrt(np.mean(samples**2)))
