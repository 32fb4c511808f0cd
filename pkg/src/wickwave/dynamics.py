"""Exact linear wave flows, stochastic convolutions and Strang-split nonlinear dynamics.

Every mode n carries a position/velocity pair (a_n, b_n) with frequency
w_n = <lambda_n>.  The linear part

    a'' + nu a' + w^2 a = gain * dbeta/dt

is integrated exactly per mode; the nonlinearity enters as a velocity kick at
the midpoint of each step (Strang splitting).  Two placements of the noise are
available:

``left``   the increment of step j is added to the velocity at t_j and then
           carried by the exact flow over the whole step (left-point Duhamel sum);
``exact``  each half step adds a Gaussian with the exact covariance of the
           stochastic integral over that half step (the path mesh is dt/2).

Ensembles are arrays of shape (M, n_modes); all randomness comes from a
WienerPath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from ._runtime import map_chunks
from .gaussian_fields import WienerPath
from .projector import smooth_multipliers
from .renormalization import (
    compute_sigma_N,
    hermite,
    hermite_all,
    sigma_t_bracket,
)
from .spectral_basis import SpectralBasis, SpectralField

__all__ = [
    "KINDS",
    "EquationSpec",
    "PairState",
    "Trajectory",
    "BlowupError",
    "linear_flow",
    "propagate_linear",
    "noise_covariance",
    "stochastic_convolution",
    "solve_remainder",
    "evolve_full",
    "evolve_ensemble",
    "hamiltonian",
    "linear_energy",
    "remainder_energy",
    "s_crit",
]

KINDS = ("SDNLW_truncData", "SDNLW_truncNonlin", "NLW_truncData", "NLW_truncNonlin", "SNLW")
_DEFAULTS = {
    "SDNLW_truncData": (1, math.sqrt(2.0)),
    "SDNLW_truncNonlin": (1, math.sqrt(2.0)),
    "NLW_truncData": (0, 0.0),
    "NLW_truncNonlin": (0, 0.0),
    "SNLW": (0, 1.0),
}
BLOWUP_H1 = 1e6


class BlowupError(RuntimeError):
    pass


def s_crit(k: int) -> float:
    """Critical regularity max(1 - 2/(k-1), 3/4 - 1/(k-1), 0); k = 1 has no constraint."""
    if k <= 1:
        return 0.0
    return max(1.0 - 2.0 / (k - 1), 0.75 - 1.0 / (k - 1), 0.0)


@dataclass(frozen=True)
class EquationSpec:
    """Which truncated equation to integrate.

    ``damping`` and ``noise`` default from ``kind``; explicit values must agree
    with it (damped kinds carry sqrt(2) noise, SNLW unit noise, NLW none).
    ``naive`` replaces every Hermite polynomial by the plain power.
    ``sigma_t_power`` is the exponent on psi0 in the time-dependent SNLW variance.
    """

    kind: str
    k: int
    N: float
    damping: int | None = None
    noise: float | None = None
    naive: bool = False
    sigma_t_power: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown equation kind {self.kind!r}; expected one of {KINDS}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if not self.N > 0:
            raise ValueError("N must be positive")
        nu, g = _DEFAULTS[self.kind]
        if self.damping is None:
            object.__setattr__(self, "damping", nu)
        if self.noise is None:
            object.__setattr__(self, "noise", g)
        if self.damping != nu or not math.isclose(self.noise, g):
            raise ValueError(
                f"{self.kind} requires damping={nu} and noise={g:g}, got {self.damping}, {self.noise:g}"
            )
        if self.sigma_t_power not in (1, 2):
            raise ValueError("sigma_t_power must be 1 or 2")

    @property
    def truncated_nonlinearity(self) -> bool:
        return self.kind.endswith("truncNonlin")

    def to_config(self) -> dict:
        return {f.name: str(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_config(cls, cfg: dict) -> "EquationSpec":
        conv = {
            "kind": str,
            "k": int,
            "N": float,
            "damping": int,
            "noise": float,
            "naive": lambda s: str(s).lower() in ("1", "true", "yes"),
            "sigma_t_power": int,
        }
        unknown = set(cfg) - set(conv)
        if unknown:
            raise ValueError(f"unknown equation keys: {sorted(unknown)}")
        return cls(**{k: conv[k](v) for k, v in cfg.items() if v not in (None, "None")})


@dataclass
class PairState:
    u: SpectralField
    v: SpectralField
    t: float = 0.0

    def __post_init__(self):
        if self.u.basis is not self.v.basis:
            raise ValueError("position and velocity must share one basis")


@dataclass
class Trajectory:
    """Recorded states; arrays a, b have shape (n_records, M, n_modes)."""

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    basis: SpectralBasis = field(repr=False)
    path: WienerPath | None = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)
    blowup: np.ndarray | None = None

    def state(self, i: int, sample: int = 0) -> PairState:
        return PairState(
            SpectralField(self.a[i, sample], self.basis),
            SpectralField(self.b[i, sample], self.basis),
            float(self.times[i]),
        )

    @staticmethod
    def concatenate(parts: Sequence["Trajectory"]) -> "Trajectory":
        first = parts[0]
        diag = {
            k: np.concatenate([p.diagnostics[k] for p in parts], axis=1) for k in first.diagnostics
        }
        blow = None if first.blowup is None else np.concatenate([p.blowup for p in parts])
        return Trajectory(
            first.times,
            np.concatenate([p.a for p in parts], axis=1),
            np.concatenate([p.b for p in parts], axis=1),
            first.basis,
            None,
            diag,
            blow,
        )


# ---------------------------------------------------------------------------
# linear flow
# ---------------------------------------------------------------------------


def linear_flow(bracket: np.ndarray, nu: int, t: float):
    """Per-mode 2x2 flow (L11, L12, L21, L22) of a'' + nu a' + w^2 a = 0 over time t.

    With V the solution of V'' + nu V' + w^2 V = 0, V(0) = 0, V'(0) = 1:
    L = [[V' + nu V, V], [-w^2 V, V']].
    """
    w = np.asarray(bracket, dtype=float)
    if nu == 0:
        c, s = np.cos(w * t), np.sin(w * t)
        return c, s / w, -w * s, c
    kappa = np.sqrt(w * w - nu * nu / 4.0)
    e = math.exp(-nu * t / 2.0)
    V = e * np.sin(kappa * t) / kappa
    dV = e * np.cos(kappa * t) - nu / 2.0 * V
    return dV + nu * V, V, -w * w * V, dV


def _apply(L, a, b):
    return L[0] * a + L[1] * b, L[2] * a + L[3] * b


def propagate_linear(state: PairState, dt: float, damped: bool) -> PairState:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    basis = state.u.basis
    L = linear_flow(basis.bracket, int(damped), dt)
    a, b = _apply(L, state.u.coeffs, state.v.coeffs)
    return PairState(SpectralField(a, basis), SpectralField(b, basis), state.t + dt)


def noise_covariance(bracket: np.ndarray, nu: int, gain: np.ndarray, h: float):
    """Covariance (Q_aa, Q_ab, Q_bb) of the stochastic integral over one step h."""
    w = np.asarray(bracket, dtype=float)
    c2 = np.asarray(gain, dtype=float) ** 2 * np.ones_like(w)
    if nu == 0:
        s2 = np.sin(2 * w * h) / (4 * w)
        qaa = c2 * (h / 2 - s2) / (w * w)
        qab = c2 * np.sin(w * h) ** 2 / (2 * w * w)
        qbb = c2 * (h / 2 + s2)
        return qaa, qab, qbb
    if nu != 1:
        raise ValueError("damping must be 0 or 1")
    # stationary covariance minus what the flow carries over from it
    saa, sbb = c2 / (2 * w * w), c2 / 2
    L11, L12, L21, L22 = linear_flow(w, 1, h)
    qaa = saa - (L11 * L11 * saa + L12 * L12 * sbb)
    qab = -(L11 * L21 * saa + L12 * L22 * sbb)
    qbb = sbb - (L21 * L21 * saa + L22 * L22 * sbb)
    return qaa, qab, qbb


def _cholesky_ba(q):
    qaa, qab, qbb = q
    lbb = np.sqrt(np.maximum(qbb, 0.0))
    lab = np.divide(qab, lbb, out=np.zeros_like(qab), where=lbb > 0)
    laa = np.sqrt(np.maximum(qaa - lab * lab, 0.0))
    return laa, lab, lbb


class _LinearStepper:
    """Advances (a, b) by full steps with the midpoint state exposed for kicks."""

    def __init__(self, bracket, nu, gain, dt, scheme):
        self.h = dt / 2.0
        self.L = linear_flow(bracket, nu, self.h)
        self.gain = gain
        self.scheme = scheme
        if scheme == "exact":
            self.chol = _cholesky_ba(noise_covariance(bracket, nu, gain, self.h))
        elif scheme != "left":
            raise ValueError("noise scheme must be 'left' or 'exact'")

    def _exact_noise(self, db, z):
        laa, lab, lbb = self.chol
        z1 = db / math.sqrt(self.h)
        return lab * z1 + laa * z, lbb * z1

    def first_half(self, a, b, noise):
        if noise is None:
            return _apply(self.L, a, b)
        if self.scheme == "left":
            return _apply(self.L, a, b + self.gain * noise[0])
        a, b = _apply(self.L, a, b)
        ea, eb = self._exact_noise(noise[0], noise[1])
        return a + ea, b + eb

    def second_half(self, a, b, noise):
        a, b = _apply(self.L, a, b)
        if noise is None or self.scheme == "left":
            return a, b
        ea, eb = self._exact_noise(noise[2], noise[3])
        return a + ea, b + eb


def _noise_steps(path: WienerPath | None, n_steps: int, dt: float, scheme: str):
    """Per-step noise tuples: ('left') (db,), ('exact') (db1, z1, db2, z2) on the half mesh."""
    if path is None:
        for _ in range(n_steps):
            yield None
        return
    if scheme == "left":
        if path.n_steps != n_steps or not math.isclose(path.dt, dt):
            raise ValueError("left scheme needs a path on the step mesh")
        for _, db in path.steps():
            yield (db,)
    else:
        if path.n_steps != 2 * n_steps or not math.isclose(path.dt, dt / 2):
            raise ValueError("exact scheme needs a path on the half-step mesh dt/2")
        it = path.steps(aux=True)
        for _ in range(n_steps):
            _, d1, z1 = next(it)
            _, d2, z2 = next(it)
            yield (d1, z1, d2, z2)


def _n_steps(T: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError("dt must be positive and divide T")
    n = T / dt
    if abs(n - round(n)) > 1e-9 * max(n, 1.0):
        raise ValueError("dt must be positive and divide T")
    return int(round(n))


def _record_plan(n_steps: int, record_every: int):
    rec = list(range(0, n_steps + 1, record_every))
    if rec[-1] != n_steps:
        rec.append(n_steps)
    return rec


def stochastic_convolution(
    basis: SpectralBasis,
    path: WienerPath | None,
    damped: bool,
    gain=1.0,
    T: float | None = None,
    dt: float | None = None,
    initial: tuple | None = None,
    scheme: str = "left",
    record_every: int = 1,
) -> Trajectory:
    """Linear stochastic flow with exact propagator; zero data unless ``initial`` is given.

    ``gain`` is a scalar or per-mode array multiplying the increments.
    """
    if path is not None:
        T = path.T if T is None else T
        dt = (path.dt if scheme == "left" else 2 * path.dt) if dt is None else dt
        M = len(path.samples)
    else:
        M = 1 if initial is None else np.atleast_2d(initial[0]).shape[0]
    n_steps = _n_steps(T, dt)
    gain = np.broadcast_to(np.asarray(gain, dtype=float), (basis.n_modes,))
    st = _LinearStepper(basis.bracket, int(damped), gain, dt, scheme)
    if initial is None:
        a = np.zeros((M, basis.n_modes))
        b = np.zeros((M, basis.n_modes))
    else:
        a = np.array(np.broadcast_to(initial[0], (M, basis.n_modes)), dtype=float)
        b = np.array(np.broadcast_to(initial[1], (M, basis.n_modes)), dtype=float)
    rec = _record_plan(n_steps, record_every)
    A, B = [a.copy()], [b.copy()]
    recset = set(rec)
    for j, nz in enumerate(_noise_steps(path, n_steps, dt, scheme)):
        a, b = st.first_half(a, b, nz)
        a, b = st.second_half(a, b, nz)
        if j + 1 in recset:
            A.append(a.copy())
            B.append(b.copy())
    return Trajectory(dt * np.array(rec), np.array(A), np.array(B), basis, path)


# ---------------------------------------------------------------------------
# nonlinear dynamics
# ---------------------------------------------------------------------------


class _Nonlinearity:
    """Grid evaluation of the Wick nonlinearity for one EquationSpec on one basis."""

    def __init__(self, spec: EquationSpec, basis: SpectralBasis):
        self.spec = spec
        self.basis = basis
        self.quad = basis.oversampled(spec.k + 1)
        m = smooth_multipliers(basis, spec.N)
        ones = np.ones(basis.n_modes)
        self.m_in = m if spec.truncated_nonlinearity else ones
        self.m_out = m if spec.truncated_nonlinearity else ones
        self.gain_mult = ones if spec.truncated_nonlinearity else m
        if spec.kind == "SNLW":
            self.table_sq = self.quad.eigenfunction_table**2
            self.sigma_coef = smooth_multipliers(basis, spec.N, spec.sigma_t_power)
            self.sigma_static = None
        else:
            if basis.max_lambda < spec.N:
                raise ValueError("computational basis must contain every mode below N")
            sig = compute_sigma_N(self.quad, spec.N).sigma
            self.sigma_static = sig

    def sigma(self, t: float) -> np.ndarray:
        if self.spec.naive:
            return np.zeros(self.quad.n_points)
        if self.sigma_static is not None:
            return self.sigma_static
        c = sigma_t_bracket(self.basis.bracket, t)[0] * self.sigma_coef
        return c @ self.table_sq

    def grid(self, coeffs):
        return self.quad.synthesize(coeffs * self.m_in)

    def project(self, values):
        return self.quad.analyze(values) * self.m_out

    def direct_force(self, a, t):
        return self.project(hermite(self.spec.k, self.grid(a), self.sigma(t)))

    def wick_fields(self, r, t):
        return hermite_all(self.spec.k, self.grid(r), self.sigma(t))

    def split_force(self, wick, w):
        k = self.spec.k
        wg = self.grid(w)
        total = np.zeros_like(wg)
        for l in range(k + 1):
            total += math.comb(k, l) * wick[l] * wg ** (k - l)
        return self.project(total)

    def potential(self, a):
        """(1/(k+1)) int H_{k+1}(P u; sigma) dx, requires time-independent sigma."""
        k = self.spec.k
        return hermite(k + 1, self.grid(a), self.sigma(0.0)) @ self.quad.grid.weights / (k + 1)


def linear_energy(basis: SpectralBasis, a, b) -> np.ndarray:
    return 0.5 * (basis.bracket_sq * a * a + b * b).sum(axis=-1)


def hamiltonian(spec: EquationSpec, basis: SpectralBasis, a, b) -> np.ndarray:
    """E_N = 1/2 sum(<lambda>^2 a^2 + b^2) + (1/(k+1)) int H_{k+1}(P_N u; sigma_N) dx."""
    nl = _Nonlinearity(spec, basis)
    return linear_energy(basis, a, b) + nl.potential(a)


def remainder_energy(spec: EquationSpec, basis: SpectralBasis, a, b) -> np.ndarray:
    """1/2 int (w_t^2 + |grad w|^2 + w^2) + (1/(k+1)) int (P_N w)^{k+1}."""
    nl = _Nonlinearity(spec, basis)
    k = spec.k
    pw = nl.quad.synthesize(a * smooth_multipliers(basis, spec.N))
    return linear_energy(basis, a, b) + pw ** (k + 1) @ nl.quad.grid.weights / (k + 1)


def _h1(basis, a):
    return np.sqrt((basis.bracket_sq * a * a).sum(axis=-1))


class _Guard:
    def __init__(self, M, threshold, on_blowup):
        if on_blowup not in ("raise", "flag"):
            raise ValueError("on_blowup must be 'raise' or 'flag'")
        self.hit = np.zeros(M, dtype=bool)
        self.threshold = threshold
        self.on_blowup = on_blowup

    def check(self, norm, t):
        bad = ~np.isfinite(norm) | (norm > self.threshold)
        new = bad & ~self.hit
        if new.any():
            if self.on_blowup == "raise":
                raise BlowupError(
                    f"H^1 norm of the remainder exceeded {self.threshold:g} at t = {t:g}; "
                    "reduce dt or the horizon"
                )
            self.hit |= new
        return self.hit


def solve_remainder(
    spec: EquationSpec,
    basis: SpectralBasis,
    wick_source: Callable[[int, float], list],
    w0: tuple | None,
    T: float,
    dt: float,
    M: int = 1,
    record_every: int = 1,
    blowup: float = BLOWUP_H1,
    on_blowup: str = "raise",
) -> Trajectory:
    """Integrate w'' + nu w' + (1-Delta) w + sum_l C(k,l) :r^l: w^{k-l} = 0 by Strang splitting.

    ``wick_source(j, t_mid)`` returns the list [:r^0:, ..., :r^k:] of grid
    arrays (shape (M, n_points) of the oversampled grid) at the midpoint of step j.
    """
    n_steps = _n_steps(T, dt)
    nl = _Nonlinearity(spec, basis)
    st = _LinearStepper(basis.bracket, spec.damping, np.zeros(basis.n_modes), dt, "left")
    a, b = _init(w0, M, basis)
    guard = _Guard(M, blowup, on_blowup)
    rec = _record_plan(n_steps, record_every)
    recset = set(rec)
    A, B = [a.copy()], [b.copy()]
    for j in range(n_steps):
        t_mid = (j + 0.5) * dt
        a1, b1 = st.first_half(a, b, None)
        b1 = b1 - dt * nl.split_force(wick_source(j, t_mid), a1)
        a1, b1 = st.second_half(a1, b1, None)
        hit = guard.check(_h1(basis, a1), (j + 1) * dt)
        a = np.where(hit[:, None], a, a1)
        b = np.where(hit[:, None], b, b1)
        if j + 1 in recset:
            A.append(a.copy())
            B.append(b.copy())
    return Trajectory(dt * np.array(rec), np.array(A), np.array(B), basis, None, {}, guard.hit)


def _init(x0, M, basis):
    if x0 is None:
        return np.zeros((M, basis.n_modes)), np.zeros((M, basis.n_modes))
    a = np.array(np.broadcast_to(x0[0], (M, basis.n_modes)), dtype=float)
    b = np.array(np.broadcast_to(x0[1], (M, basis.n_modes)), dtype=float)
    return a, b


def evolve_full(
    spec: EquationSpec,
    basis: SpectralBasis,
    data: tuple | None,
    path: WienerPath | None,
    T: float,
    dt: float,
    method: str = "split",
    scheme: str = "left",
    record_every: int = 1,
    blowup: float = BLOWUP_H1,
    on_blowup: str = "flag",
    energy: bool = False,
) -> Trajectory:
    """Solve the truncated equation; returns u (and u_t) on the recorded mesh.

    ``data`` holds coefficient arrays (a0, b0) of shape (M, n) or (n,).  For the
    truncated-data kinds the smooth projector is applied to them here; SNLW data
    are taken as given.  ``method='split'`` evolves u = r + w with r the linear
    (stochastic) solution and w the remainder; ``method='direct'`` integrates the
    mode system for u itself.  With the same increments and the left noise
    scheme the two agree to rounding.
    """
    if method not in ("split", "direct"):
        raise ValueError("method must be 'split' or 'direct'")
    if method == "split" and scheme != "left":
        raise ValueError("the split solver uses the left noise scheme")
    n_steps = _n_steps(T, dt)
    M = len(path.samples) if path is not None else (np.atleast_2d(data[0]).shape[0] if data is not None else 1)
    if path is not None and path.n_modes < basis.n_modes:
        raise ValueError("Wiener path has fewer modes than the basis")
    if path is not None and path.n_modes > basis.n_modes:
        path = WienerPath(basis.n_modes, path.T, path.dt, path.seed, path.samples, path.purpose, path.scale)
    if spec.noise == 0:
        path = None
    nl = _Nonlinearity(spec, basis)
    gain = spec.noise * nl.gain_mult
    x0 = _init(data, M, basis)
    if not spec.truncated_nonlinearity and spec.kind != "SNLW":
        x0 = (x0[0] * nl.gain_mult, x0[1] * nl.gain_mult)

    st = _LinearStepper(basis.bracket, spec.damping, gain, dt, scheme)
    zero = _LinearStepper(basis.bracket, spec.damping, gain, dt, "left")
    if method == "direct":
        ua, ub = x0
    elif spec.kind == "SNLW":
        ra, rb = np.zeros((M, basis.n_modes)), np.zeros((M, basis.n_modes))
        wa, wb = x0
    else:
        (ra, rb), (wa, wb) = x0, (np.zeros((M, basis.n_modes)), np.zeros((M, basis.n_modes)))

    guard = _Guard(M, blowup, on_blowup)
    rec = _record_plan(n_steps, record_every)
    recset = set(rec)

    def current():
        return (ua, ub) if method == "direct" else (ra + wa, rb + wb)

    A, B = [current()[0].copy()], [current()[1].copy()]
    def energy_of(a, b):
        return linear_energy(basis, a, b) + nl.potential(a)

    E = [energy_of(*current())] if energy else None
    for j, nz in enumerate(_noise_steps(path, n_steps, dt, scheme)):
        t_mid = (j + 0.5) * dt
        if method == "direct":
            a1, b1 = st.first_half(ua, ub, nz)
            b1 = b1 - dt * nl.direct_force(a1, t_mid)
            a1, b1 = st.second_half(a1, b1, nz)
            norm = _h1(basis, a1)
        else:
            ra, rb = st.first_half(ra, rb, nz)
            a1, b1 = zero.first_half(wa, wb, None)
            b1 = b1 - dt * nl.split_force(nl.wick_fields(ra, t_mid), a1)
            a1, b1 = zero.second_half(a1, b1, None)
            ra, rb = st.second_half(ra, rb, nz)
            norm = _h1(basis, a1)
        hit = guard.check(norm, (j + 1) * dt)
        if method == "direct":
            ua = np.where(hit[:, None], ua, a1)
            ub = np.where(hit[:, None], ub, b1)
        else:
            wa = np.where(hit[:, None], wa, a1)
            wb = np.where(hit[:, None], wb, b1)
        if j + 1 in recset:
            ca, cb = current()
            A.append(ca.copy())
            B.append(cb.copy())
            if energy:
                E.append(energy_of(ca, cb))
    diag = {"energy": np.array(E)} if energy else {}
    return Trajectory(dt * np.array(rec), np.array(A), np.array(B), basis, path, diag, guard.hit)


def evolve_ensemble(
    spec: EquationSpec,
    basis: SpectralBasis,
    data: tuple | None,
    path: WienerPath | None,
    T: float,
    dt: float,
    threads: int = 1,
    samples: Sequence[int] | None = None,
    **kwargs,
) -> Trajectory:
    """evolve_full over fixed-size sample chunks, optionally on several threads.

    ``data`` rows are aligned with ``samples`` (default: the path's samples).
    """
    if samples is None:
        samples = list(path.samples) if path is not None else list(range(np.atleast_2d(data[0]).shape[0]))
    index = {s: i for i, s in enumerate(samples)}

    def work(chunk):
        rows = [index[s] for s in chunk]
        d = None if data is None else (np.atleast_2d(data[0])[rows], np.atleast_2d(data[1])[rows])
        p = None if path is None else path.subset(chunk)
        return evolve_full(spec, basis, d, p, T, dt, **kwargs)

    return Trajectory.concatenate(map_chunks(work, list(samples), threads))
