"""High-frequency effective chain with Bessel-renormalized hopping.

In the frame ``a_l = c_l exp(i V_l Gamma(t))``, ``Gamma(t) = int_0^t g``, the
bond ``l -> l+1`` carries the phase ``exp(i (N-2l-1) Gamma(t))``.  Averaging
it over one drive cycle of ``g = g1 sin(omega t + phi)`` leaves

    sigma_l = kappa_l exp(i x_l cos(phi)) J0(x_l),   x_l = g1 (N-2l-1) / omega

so bond ``l0`` is switched off whenever ``x_{l0}`` is a zero of J0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, SearchFailure
from .evolve import Trajectory, default_dt
from .lattice import LatticeModel, ModelParams, build_lattice

SERIES_LIMIT = 12.0
RECURRENCE_LIMIT = 25.0
MAX_ROOT_INDEX = 50


# -- Bessel functions of order 0 and 1 -------------------------------------


def _series(x: float) -> tuple[float, float]:
    q = -0.25 * x * x
    t0 = 1.0
    t1 = 0.5 * x
    s0, s1 = [t0], [t1]
    k = 0
    while True:
        k += 1
        t0 *= q / (k * k)
        t1 *= q / (k * (k + 1))
        s0.append(t0)
        s1.append(t1)
        if k > 4 and abs(t0) < 1e-18 and abs(t1) < 1e-18:
            break
    return math.fsum(s0), math.fsum(s1)


def _miller(x: float) -> tuple[float, float]:
    # backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1},
    # normalized by J0 + 2 sum_k J_{2k} = 1
    m = 2 * ((int(x) + 40) // 2)
    jp, j = 0.0, 1e-300
    norm = []
    j0 = j1 = 0.0
    for k in range(m, 0, -1):
        jm = 2.0 * k / x * j - jp
        jp, j = j, jm
        if abs(j) > 1e250:
            j *= 1e-250
            jp *= 1e-250
            norm = [s * 1e-250 for s in norm]
            j1 *= 1e-250
        if k == 1:
            j1 = jp
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm.append(2.0 * j)
    j0 = j
    total = math.fsum(norm + [j0])
    return j0 / total, j1 / total


def _hankel(x: float) -> tuple[float, float]:
    """Hankel asymptotic expansion, summed until the terms stop shrinking."""
    z8 = 8.0 * x
    out = []
    for mu in (0.0, 4.0):
        P, Q = [1.0], []
        t = 1.0
        prev = math.inf
        for k in range(1, 60):
            t *= (mu - (2 * k - 1) ** 2) / (k * z8)
            if abs(t) >= prev or abs(t) < 1e-18:
                break
            prev = abs(t)
            if k % 2:
                Q.append(t if (k // 2) % 2 == 0 else -t)
            else:
                P.append(t if (k // 2) % 2 == 0 else -t)
        out.append((math.fsum(P), math.fsum(Q)))
    (P0, Q0), (P1, Q1) = out
    amp = math.sqrt(2.0 / (math.pi * x))
    c0 = x - 0.25 * math.pi
    c1 = x - 0.75 * math.pi
    return (
        amp * (P0 * math.cos(c0) - Q0 * math.sin(c0)),
        amp * (P1 * math.cos(c1) - Q1 * math.sin(c1)),
    )


def _j0_j1(x: float) -> tuple[float, float]:
    ax = abs(x)
    if ax < SERIES_LIMIT:
        j0, j1 = _series(ax)
    elif ax < RECURRENCE_LIMIT:
        j0, j1 = _miller(ax)
    else:
        j0, j1 = _hankel(ax)
    return j0, (j1 if x >= 0 else -j1)


def _scalar_or_array(f):
    vec = np.vectorize(f, otypes=[float])

    def wrapper(x):
        if np.ndim(x) == 0:
            return f(float(x))
        return vec(np.asarray(x, dtype=float))

    wrapper.__name__ = f.__name__
    wrapper.__doc__ = f.__doc__
    return wrapper


@_scalar_or_array
def bessel_j0(x: float) -> float:
    """Bessel function J0.

    Power series below ``|x| = 12``, Miller backward recurrence up to 25 and
    the Hankel asymptotic expansion beyond.  Absolute error is about 1e-13 or
    better on ``|x| <= 50``.
    """
    if not math.isfinite(x):
        raise ConfigurationError(f"bessel_j0 requires a finite argument, got {x}")
    return _j0_j1(x)[0]


@_scalar_or_array
def bessel_j1(x: float) -> float:
    """Bessel function J1 (= -J0'), same branches as :func:`bessel_j0`."""
    if not math.isfinite(x):
        raise ConfigurationError(f"bessel_j1 requires a finite argument, got {x}")
    return _j0_j1(x)[1]


@lru_cache(maxsize=None)
def j0_root(k: int) -> float:
    """k-th positive zero of J0.

    Starts from McMahon's expansion, then runs Newton steps that fall back to
    bisection whenever they leave the current sign-change bracket.
    """
    if int(k) != k or k < 1:
        raise ConfigurationError(f"root index must be a positive integer, got {k!r}")
    if k > MAX_ROOT_INDEX:
        raise ConfigurationError(f"root index {k} exceeds the supported {MAX_ROOT_INDEX}")
    b = (k - 0.25) * math.pi
    guess = b + 1 / (8 * b) - 124 / (3 * (8 * b) ** 3)
    lo, hi = guess - 0.3, guess + 0.3
    flo = bessel_j0(lo)
    if flo * bessel_j0(hi) > 0:
        raise SearchFailure(f"no sign change bracketing J0 root {k}")
    x = guess
    for _ in range(100):
        f, j1 = _j0_j1(x)
        if f == 0.0:
            return x
        if (f > 0) == (flo > 0):
            lo = x
        else:
            hi = x
        step = f / j1  # Newton with J0' = -J1
        xn = x + step
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 4e-16 * xn:
            return xn
        x = xn
    raise SearchFailure(f"J0 root {k} did not converge")


def bond_argument(N: int, l: int, g1: float, omega: float) -> float:
    """Bessel argument ``g1 (N-2l-1)/omega`` of bond ``l -> l+1``."""
    return g1 * (N - 2 * l - 1) / omega


def cdt_amplitude(N: int, l0: int, omega: float, k: int = 1) -> float:
    """Drive amplitude that severs bond ``l0``, letting at most ``l0`` bosons
    tunnel out of an initially filled right well."""
    if l0 < 0 or N - 2 * l0 - 1 <= 0:
        raise ConfigurationError(
            f"bond l0={l0} has no suppressible coupling for N={N} (needs N-2*l0-1 > 0)"
        )
    if not omega > 0:
        raise ConfigurationError("omega must be positive")
    return j0_root(k) * omega / (N - 2 * l0 - 1)


@dataclass(frozen=True)
class EffectiveModel:
    sigma: np.ndarray
    base: LatticeModel

    @property
    def N(self) -> int:
        return self.base.N

    def matrix(self) -> np.ndarray:
        """Hermitian generator with ``sigma_l`` above the diagonal."""
        return np.diag(self.sigma, 1) + np.diag(np.conj(self.sigma), -1)


def bond_arguments(params: ModelParams) -> np.ndarray:
    l = np.arange(params.N)
    return params.g1 * (params.N - 2 * l - 1) / params.omega


def effective_couplings(params: ModelParams, phase_convention: str = "derived") -> EffectiveModel:
    """Cycle-averaged couplings of the driven chain.

    ``phase_convention="none"`` drops the bond phases; every occupation
    probability is unchanged because a chain has no loops.
    """
    base = build_lattice(params)
    x = bond_arguments(params)
    mag = base.kappa * bessel_j0(x)
    if phase_convention == "derived":
        sigma = mag * np.exp(1j * x * math.cos(params.drive_phase))
    elif phase_convention == "none":
        sigma = mag.astype(complex)
    else:
        raise ConfigurationError(f"unknown phase convention {phase_convention!r}")
    return EffectiveModel(sigma=sigma, base=base)


def integrate_effective(
    eff: EffectiveModel,
    a0,
    t_end: float,
    dt: float | None = None,
    sample_every: int = 1,
) -> Trajectory:
    """Evolve the averaged chain on the same sample grid as ``integrate``.

    The generator is constant, so each sample is obtained exactly from its
    eigendecomposition instead of by stepping.
    """
    dt = default_dt(eff.base.params.omega) if dt is None else dt
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if t_end < 0:
        raise ConfigurationError(f"t_end must be non-negative, got {t_end}")
    a0 = np.asarray(a0, dtype=complex)
    if a0.shape != (eff.N + 1,):
        raise ConfigurationError(f"a0 must have length {eff.N + 1}")
    n_full = int(math.floor(t_end / dt + 1e-9))
    times = list(dt * np.arange(0, n_full + 1, sample_every))
    if times[-1] != t_end:
        times.append(t_end)
    times = np.array(times)
    e, Q = np.linalg.eigh(eff.matrix())
    coeff = Q.conj().T @ a0
    amps = (Q @ (np.exp(-1j * np.outer(e, times)) * coeff[:, None])).T
    return Trajectory(times, amps, eff.N)
