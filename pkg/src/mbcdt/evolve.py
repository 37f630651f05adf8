"""Fixed-step integration of the Fock-chain amplitudes and their observables.

Two fourth-order one-step schemes are available:

``"cfm4"`` (default)
    Commutator-free Magnus scheme with two Gauss nodes.  Every step is a
    product of two exponentials of real symmetric tridiagonal matrices, so
    the propagator is unitary to rounding error regardless of the drive
    strength.
``"rk4"``
    Classical Runge-Kutta in the interaction frame that removes the diagonal
    drive phase ``exp(-i V_l Gamma(t))`` exactly.  Its norm drift grows
    with ``g1 * max(V)``; it is kept as an independent cross-check.

When the step divides the drive period the per-step propagators repeat, so
they are computed once per phase of the cycle and reused.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigurationError, NumericalFailure
from .lattice import LatticeModel

STEPS_PER_CYCLE = 200
MAX_STEP_PHASE = 0.1

_S3 = math.sqrt(3.0)
_NODES = (0.5 - _S3 / 6.0, 0.5 + _S3 / 6.0)
_WEIGHTS = (0.25 + _S3 / 6.0, 0.25 - _S3 / 6.0)


def default_dt(omega: float) -> float:
    return 2 * math.pi / (omega * STEPS_PER_CYCLE)


@dataclass
class Trajectory:
    """Sampled evolution: distances (mm), amplitudes, occupations and S."""

    times: np.ndarray
    amplitudes: np.ndarray
    N: int

    @property
    def occupations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def imbalance(self) -> np.ndarray:
        return imbalance(self.amplitudes, self.N)

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.occupations.sum(axis=1) - 1.0)))

    def leakage(self, l0: int) -> np.ndarray:
        """Population beyond site ``l0``, i.e. probability that more than
        ``l0`` bosons sit in the left well."""
        return self.occupations[:, l0 + 1:].sum(axis=1)

    def to_csv(self, path, amplitudes_path=None) -> None:
        path = Path(path)
        occ = self.occupations
        S = self.imbalance
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_mm"] + [f"p{l}" for l in range(self.N + 1)] + ["S"])
            for t, row, s in zip(self.times, occ, S):
                w.writerow([_fmt(t)] + [_fmt(p) for p in row] + [_fmt(s)])
        if amplitudes_path is not None:
            with Path(amplitudes_path).open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                head = ["t_mm"]
                for l in range(self.N + 1):
                    head += [f"re{l}", f"im{l}"]
                w.writerow(head)
                for t, row in zip(self.times, self.amplitudes):
                    vals = [_fmt(t)]
                    for a in row:
                        vals += [_fmt(a.real), _fmt(a.imag)]
                    w.writerow(vals)


def _fmt(x) -> str:
    return f"{float(x):.12e}"


def imbalance(c, N: int):
    """Normalized population imbalance ``sum_l (N-2l)/N |c_l|^2``.

    ``c`` may hold one state or a stack of states along the first axis.
    """
    if N < 1:
        raise ConfigurationError("imbalance is undefined for N = 0")
    c = np.asarray(c)
    if c.shape[-1] != N + 1:
        raise ConfigurationError(f"expected {N + 1} amplitudes, got {c.shape[-1]}")
    w = (N - 2.0 * np.arange(N + 1)) / N
    return np.abs(c) ** 2 @ w


# -- step propagators -------------------------------------------------------


def _expm_tridiagonal(diag, off, h):
    """``exp(-i h T)`` for the real symmetric tridiagonal matrix ``T``."""
    e, Q = eigh_tridiagonal(diag, off)
    return (Q * np.exp(-1j * h * e)) @ Q.T


def cfm4_step(model: LatticeModel, t: float, h: float) -> np.ndarray:
    """Fourth-order commutator-free Magnus propagator from ``t`` to ``t+h``."""
    ga = model.drive(t + _NODES[0] * h)
    gb = model.drive(t + _NODES[1] * h)
    V = model.site_weight
    static = 0.0 if model.onsite is None else 0.5 * model.onsite
    off = 0.5 * model.kappa
    first = _expm_tridiagonal(static + (_WEIGHTS[0] * ga + _WEIGHTS[1] * gb) * V, off, h)
    second = _expm_tridiagonal(static + (_WEIGHTS[1] * ga + _WEIGHTS[0] * gb) * V, off, h)
    return second @ first


def _drive_phase_integral(model: LatticeModel, t):
    """Gamma(t) = integral of g from 0 to t."""
    p = model.params
    return p.g1 / p.omega * (np.cos(p.drive_phase) - np.cos(p.omega * t + p.drive_phase))


def rk4_step(model: LatticeModel, t: float, h: float) -> np.ndarray:
    """Interaction-frame RK4 propagator from ``t`` to ``t+h`` (not unitary)."""
    V = model.site_weight
    dV = V[1:] - V[:-1]
    k = model.kappa
    onsite = None if model.onsite is None else model.onsite[:, None]

    def rhs(s, a):
        ph = np.exp(-1j * dV * _drive_phase_integral(model, s))[:, None]
        out = np.zeros_like(a)
        out[:-1] = k[:, None] * ph * a[1:]
        out[1:] += k[:, None] * np.conj(ph) * a[:-1]
        if onsite is not None:
            out += onsite * a
        return -1j * out

    a = np.eye(model.dim, dtype=complex)
    k1 = rhs(t, a)
    k2 = rhs(t + h / 2, a + h / 2 * k1)
    k3 = rhs(t + h / 2, a + h / 2 * k2)
    k4 = rhs(t + h, a + h * k3)
    step = a + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    # back to the lab frame: c = exp(-i V Gamma) a
    left = np.exp(-1j * V * _drive_phase_integral(model, t + h))
    right = np.exp(1j * V * _drive_phase_integral(model, t))
    return left[:, None] * step * right[None, :]


_STEPPERS = {"cfm4": cfm4_step, "rk4": rk4_step}


class _Propagators:
    """Step propagators for a uniform grid, cached per drive-cycle phase."""

    def __init__(self, model, dt, t0, method):
        if method not in _STEPPERS:
            raise ConfigurationError(
                f"unknown method {method!r}; choose from {sorted(_STEPPERS)}"
            )
        self.model, self.dt, self.t0 = model, dt, t0
        self.step = _STEPPERS[method]
        m = model.params.period / dt
        self.cycle = int(round(m)) if abs(m - round(m)) < 1e-9 * m else None
        self.cache = {}
        if model.params.g1 == 0:
            self.cycle = 1

    def __call__(self, i: int) -> np.ndarray:
        key = i % self.cycle if self.cycle else None
        if key is not None and key in self.cache:
            return self.cache[key]
        U = self.step(self.model, self.t0 + i * self.dt, self.dt)
        if key is not None:
            self.cache[key] = U
        return U


def _check_step(model: LatticeModel, dt: float) -> None:
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if model.params.g1 != 0 and dt * model.params.omega > MAX_STEP_PHASE:
        raise ConfigurationError(
            f"dt*omega = {dt * model.params.omega:.3g} exceeds {MAX_STEP_PHASE}; "
            "the drive is not resolved"
        )


def integrate(
    model: LatticeModel,
    c0,
    t_end: float,
    dt: float | None = None,
    sample_every: int = 1,
    *,
    t0: float = 0.0,
    method: str = "cfm4",
) -> Trajectory:
    """Integrate the Fock-chain equations from ``t0`` to ``t0 + t_end``.

    Snapshots are kept every ``sample_every`` steps plus the endpoint; a final
    partial step lands exactly on ``t_end``.  The state is never renormalized.
    """
    dt = default_dt(model.params.omega) if dt is None else dt
    _check_step(model, dt)
    if t_end < 0:
        raise ConfigurationError(f"t_end must be non-negative, got {t_end}")
    if sample_every < 1:
        raise ConfigurationError("sample_every must be >= 1")
    c = np.array(c0, dtype=complex)
    if c.shape != (model.dim,):
        raise ConfigurationError(f"c0 must have length {model.dim}, got {c.shape}")

    n_full = int(math.floor(t_end / dt + 1e-9))
    rest = t_end - n_full * dt
    if rest < 1e-9 * dt:
        rest = 0.0
    props = _Propagators(model, dt, t0, method)

    times, states = [0.0], [c.copy()]
    for i in range(n_full):
        c = props(i) @ c
        if not np.all(np.isfinite(c)):
            raise NumericalFailure(f"non-finite amplitudes at step {i + 1}")
        if (i + 1) % sample_every == 0:
            times.append((i + 1) * dt)
            states.append(c.copy())
    if rest > 0:
        c = _STEPPERS[method](model, t0 + n_full * dt, rest) @ c
        if not np.all(np.isfinite(c)):
            raise NumericalFailure(f"non-finite amplitudes at step {n_full + 1}")
    if times[-1] != t_end:
        times.append(t_end)
        states.append(c.copy())
    return Trajectory(np.array(times), np.array(states), model.N)


def propagator(
    model: LatticeModel,
    duration: float,
    dt: float | None = None,
    *,
    t0: float = 0.0,
    method: str = "cfm4",
) -> np.ndarray:
    """Matrix propagator ``U(t0 + duration, t0)`` on the uniform step grid."""
    dt = default_dt(model.params.omega) if dt is None else dt
    _check_step(model, dt)
    n_full = int(math.floor(duration / dt + 1e-9))
    rest = duration - n_full * dt
    props = _Propagators(model, dt, t0, method)
    U = np.eye(model.dim, dtype=complex)
    for i in range(n_full):
        U = props(i) @ U
    if rest > 1e-9 * dt:
        U = _STEPPERS[method](model, t0 + n_full * dt, rest) @ U
    if not np.all(np.isfinite(U)):
        raise NumericalFailure("non-finite propagator entries")
    return U


def revival_check(model: LatticeModel, c0, dt: float | None = None) -> float:
    """Largest occupation change after the self-imaging distance ``2 pi / v``.

    Only meaningful for the undriven chain, whose equally spaced levels
    ``v (m - N/2)`` make the evolution periodic.
    """
    if model.params.g1 != 0:
        raise ConfigurationError("revival_check requires g1 = 0")
    c0 = np.asarray(c0, dtype=complex)
    t_rev = 2 * math.pi / model.params.v
    traj = integrate(model, c0, t_rev, dt=dt, sample_every=10**9)
    return float(np.max(np.abs(traj.occupations[-1] - np.abs(c0) ** 2)))
