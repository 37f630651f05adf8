"""Fock-space tight-binding chain of the driven two-site Bose-Hubbard model.

Site ``l`` of the chain holds the amplitude ``c_l`` of the Fock state with
``l`` bosons in the left well and ``N - l`` in the right well.  The amplitudes
obey

    i dc_l/dt = kappa_l c_{l+1} + kappa_{l-1} c_{l-1} + g(t) V_l c_l

with ``kappa_l = (v/2) sqrt((l+1)(N-l))``, ``V_l = (2l-N)^2/4`` and the
sinusoidal interaction drive ``g(t) = g1 sin(omega t + drive_phase)``.
Distances ``t`` are in mm and every rate in mm^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class ModelParams:
    """Particle number, tunneling rate and drive of the two-site model."""

    N: int
    v: float
    g1: float = 0.0
    omega: float = 0.628
    drive_phase: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be an integer >= 1, got {self.N!r}")
        if not self.v > 0:
            raise ConfigurationError(f"v must be positive, got {self.v!r}")
        if not self.omega > 0:
            raise ConfigurationError(f"omega must be positive, got {self.omega!r}")
        if not self.g1 >= 0:
            raise ConfigurationError(f"g1 must be non-negative, got {self.g1!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dim(self) -> int:
        return self.N + 1

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class LatticeModel:
    """Tridiagonal generator ``H(t) = offdiag(kappa) + diag(onsite + g(t) V)``.

    ``onsite`` is zero for the Fock chain itself; the parity blocks used by
    the Floquet analysis of odd ``N`` need it.
    """

    kappa: np.ndarray
    site_weight: np.ndarray
    params: ModelParams
    onsite: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def dim(self) -> int:
        return len(self.site_weight)

    def diagonal(self, t) -> np.ndarray:
        d = self.drive(t) * self.site_weight
        return d if self.onsite is None else d + self.onsite

    def drive(self, t):
        """Interaction strength g(t) at distance ``t`` (scalar or array)."""
        p = self.params
        return p.g1 * np.sin(p.omega * np.asarray(t) + p.drive_phase)


def coupling_rates(N: int, v: float) -> np.ndarray:
    l = np.arange(N)
    return 0.5 * v * np.sqrt((l + 1.0) * (N - l))


def site_weights(N: int) -> np.ndarray:
    l = np.arange(N + 1)
    return (2.0 * l - N) ** 2 / 4.0


def build_lattice(params: ModelParams) -> LatticeModel:
    kappa = coupling_rates(params.N, params.v)
    weight = site_weights(params.N)
    kappa.flags.writeable = False
    weight.flags.writeable = False
    return LatticeModel(kappa=kappa, site_weight=weight, params=params)


def _check_length(model: LatticeModel, c: np.ndarray) -> None:
    if c.shape[0] != model.dim:
        raise ConfigurationError(
            f"amplitude vector has length {c.shape[0]}, expected N+1 = {model.dim}"
        )


def hamiltonian_action(model: LatticeModel, t: float, c) -> np.ndarray:
    """Return ``H(t) @ c`` using the tridiagonal structure.

    ``c`` may be a vector or a matrix whose columns are states.
    """
    c = np.asarray(c, dtype=complex)
    _check_length(model, c)
    k = model.kappa if c.ndim == 1 else model.kappa[:, None]
    diag = model.diagonal(t)
    out = (diag if c.ndim == 1 else diag[:, None]) * c
    out[:-1] += k * c[1:]
    out[1:] += k * c[:-1]
    return out


def apply_hamiltonian(model: LatticeModel, t: float, c) -> np.ndarray:
    """Time derivative ``dc/dt = -i H(t) c`` of the amplitude vector."""
    return -1j * hamiltonian_action(model, t, c)


def dense_hamiltonian(model: LatticeModel, t: float = 0.0) -> np.ndarray:
    """Real symmetric (N+1)x(N+1) matrix of H(t)."""
    H = np.diag(model.diagonal(t))
    H += np.diag(model.kappa, 1) + np.diag(model.kappa, -1)
    return H


def parity_reverse(c) -> np.ndarray:
    """Reflect the chain, ``out[l] = c[N - l]``."""
    return np.asarray(c)[::-1].copy()


def parity_matrix(dim: int) -> np.ndarray:
    return np.eye(dim)[::-1]


def basis_state(dim: int, l: int) -> np.ndarray:
    """Fock state with ``l`` bosons in the left well (``c_k = delta_{k,l}``)."""
    c = np.zeros(dim, dtype=complex)
    c[l] = 1.0
    return c


def normalized(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ConfigurationError("cannot normalize the zero vector")
    return c / norm
