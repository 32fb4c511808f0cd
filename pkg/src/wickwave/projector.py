"""Smooth and sharp frequency truncation, dyadic blocks and spectral norms.

Conventions (also in NORMS.md): W^{s,p} applies the multiplier <lambda>^s and
takes the quadrature L^p norm of the synthesized field; p = inf uses the grid
maximum, which is a lower bound for the true supremum.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .spectral_basis import SpectralBasis, SpectralField

__all__ = [
    "psi0",
    "psi0_derivative",
    "smooth_multipliers",
    "sharp_mask",
    "apply_PN",
    "apply_sharp",
    "dyadic_ladder",
    "lp_norm",
    "sobolev_norm",
    "besov_norm",
    "CapBelowTruncation",
]


class CapBelowTruncation(UserWarning):
    """The basis does not contain every mode the cutoff would keep."""


def psi0(x):
    """Even cutoff: 1 on |x| <= 1/2, 0 on |x| >= 1, exp(1 - 1/(1 - r^2)) with r = 2|x| - 1 between."""
    x = np.abs(np.asarray(x, dtype=float))
    r = 2.0 * x - 1.0
    mid = (x > 0.5) & (x < 1.0)
    out = np.where(x <= 0.5, 1.0, 0.0)
    rm = np.where(mid, r, 0.0)
    return np.where(mid, np.exp(1.0 - 1.0 / (1.0 - rm * rm)), out)


def psi0_derivative(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    mid = (ax > 0.5) & (ax < 1.0)
    r = np.where(mid, 2.0 * ax - 1.0, 0.0)
    d = -psi0(x) * 2.0 * r / (1.0 - r * r) ** 2 * 2.0
    return np.where(mid, d * np.sign(x), 0.0)


def smooth_multipliers(basis: SpectralBasis, N: float, power: int = 1) -> np.ndarray:
    """psi0(lambda_n^2 / N^2) ** power for every retained mode (N = 0 keeps the mean)."""
    if N < 0:
        raise ValueError("N must be non-negative")
    if N == 0:
        m = (basis.lambda_sq == 0).astype(float)
    else:
        # ratio first: N * N underflows for tiny N
        with np.errstate(over="ignore"):
            m = psi0((basis.lam / N) ** 2)
    return m**power


def sharp_mask(basis: SpectralBasis, N: float) -> np.ndarray:
    return (basis.lam <= N * (1 + 1e-12) + 1e-12).astype(float)


def _cap_check(basis: SpectralBasis, N: float):
    if basis.max_lambda < N:
        warnings.warn(
            f"basis cap {basis.max_lambda:g} is below N = {N:g}; modes in "
            f"({basis.max_lambda:g}, {N:g}] are missing from the result",
            CapBelowTruncation,
            stacklevel=3,
        )


def apply_PN(field: SpectralField, N: float) -> SpectralField:
    """Smooth projector P_N: coefficient-wise multiply by psi0(lambda_n^2 / N^2)."""
    _cap_check(field.basis, N)
    return SpectralField(field.coeffs * smooth_multipliers(field.basis, N), field.basis)


def apply_sharp(field: SpectralField, N: float) -> SpectralField:
    """Sharp projector onto modes with lambda_n <= N."""
    return SpectralField(field.coeffs * sharp_mask(field.basis, N), field.basis)


def dyadic_ladder(basis: SpectralBasis) -> list[int]:
    """Dyadic levels 1, 2, 4, ... up to the first N at which P_N keeps every mode."""
    top = float(basis.lam.max()) if basis.n_modes else 0.0
    levels = [1]
    # psi0 equals 1 only on [0, 1/2], so every mode is kept once N >= sqrt(2) * top
    while levels[-1] < math.sqrt(2.0) * top:
        levels.append(2 * levels[-1])
    return levels


def lp_norm(basis: SpectralBasis, values: np.ndarray, p: float) -> np.ndarray:
    if p == math.inf:
        return np.abs(values).max(axis=-1)
    if p < 1:
        raise ValueError("p must be >= 1")
    return (np.abs(values) ** p @ basis.grid.weights) ** (1.0 / p)


def _check(field: SpectralField):
    if field.basis.n_modes == 0:
        raise ValueError("empty basis")


def sobolev_norm(field: SpectralField, s: float, p: float = 2) -> float:
    _check(field)
    b = field.basis
    c = field.coeffs * b.bracket**s
    if p == 2:
        return np.sqrt((c * c).sum(axis=-1))
    return lp_norm(b, b.synthesize(c), p)


def besov_norm(field: SpectralField, s: float, p: float = 2, q: float = 2) -> float:
    """B^s_{p,q}: l^q over dyadic N of N^s ||(P_N - P_{N/2}) u||_{L^p}, block N = 1 being P_1 u."""
    _check(field)
    b = field.basis
    levels = dyadic_ladder(b)
    prev = np.zeros(b.n_modes)
    terms = []
    for N in levels:
        cur = smooth_multipliers(b, N)
        block = field.coeffs * (cur - prev)
        prev = cur
        if p == 2:
            bn = np.sqrt((block * block).sum(axis=-1))
        else:
            bn = lp_norm(b, b.synthesize(block), p)
        terms.append(float(N) ** s * bn)
    terms = np.stack(terms, axis=-1)
    if q == math.inf:
        return terms.max(axis=-1)
    return (terms**q).sum(axis=-1) ** (1.0 / q)
