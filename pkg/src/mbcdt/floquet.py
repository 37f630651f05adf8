"""Quasi-energy spectrum of the periodically driven Fock chain.

Reflection ``l -> N - l`` commutes with ``H(t)`` at every instant, so the
one-period propagator splits into an even and an odd block.  Each block is a
tridiagonal chain of its own and is integrated separately; eigenvalues of
the block propagators give quasi-energies with exact parity labels.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigurationError, NumericalFailure, SearchFailure
from .evolve import propagator
from .lattice import LatticeModel, ModelParams, build_lattice, parity_matrix

UNITARITY_LIMIT = 1e-5


@dataclass(frozen=True)
class FloquetResult:
    """Quasi-energies (mm^-1, ascending) with parity labels and Floquet states.

    ``states`` holds the full-space Floquet vectors at ``t0`` as columns, in
    the same order as ``quasi_energies``.
    """

    quasi_energies: np.ndarray
    parities: np.ndarray
    period: float
    unitarity_defect: float
    states: np.ndarray

    @property
    def omega(self) -> float:
        return 2 * math.pi / self.period

    def opposite_parity_gaps(self) -> np.ndarray:
        """Zone-aware distances between every even and every odd level."""
        e = self.quasi_energies[self.parities > 0]
        o = self.quasi_energies[self.parities < 0]
        return zone_distance(e[:, None], o[None, :], self.omega)

    def min_opposite_gap(self) -> float:
        gaps = self.opposite_parity_gaps()
        return float(gaps.min()) if gaps.size else math.inf


def fold(eps, omega: float):
    """Map quasi-energies into the zone ``(-omega/2, omega/2]``."""
    half = 0.5 * omega
    return half - np.mod(half - np.asarray(eps, dtype=float), omega)


def zone_distance(a, b, omega: float):
    d = np.mod(np.asarray(a) - np.asarray(b), omega)
    return np.minimum(d, omega - d)


def _unitarity_defect(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def _checked(U: np.ndarray) -> tuple[np.ndarray, float]:
    defect = _unitarity_defect(U)
    if not defect < UNITARITY_LIMIT:
        raise NumericalFailure(
            f"one-period propagator has unitarity defect {defect:.2e}; use a smaller dt"
        )
    return U, defect


def monodromy(
    model: LatticeModel, dt: float | None = None, *, t0: float = 0.0, method: str = "cfm4"
) -> np.ndarray:
    """Full-space propagator over one drive period starting at ``t0``."""
    U = propagator(model, model.params.period, dt, t0=t0, method=method)
    return _checked(U)[0]


# -- parity blocks ----------------------------------------------------------


@dataclass(frozen=True)
class ParityBlock:
    parity: int
    basis: np.ndarray  # (N+1, n) orthonormal columns
    model: LatticeModel


def parity_blocks(model: LatticeModel) -> tuple[ParityBlock, ParityBlock]:
    """Even and odd sub-chains of the Fock chain.

    The block basis pairs ``e_l`` with ``e_{N-l}`` for ``l < N/2``; for even
    ``N`` the middle site joins the even block.  For odd ``N`` the bond
    joining the two middle sites becomes a diagonal ``+kappa`` (even) or
    ``-kappa`` (odd) on the last block site.
    """
    N = model.N
    k, V = np.asarray(model.kappa), np.asarray(model.site_weight)
    half = (N + 1) // 2  # number of mirror pairs
    dim = N + 1
    s = 1 / math.sqrt(2)

    def pair_basis(sign):
        B = np.zeros((dim, half))
        for l in range(half):
            B[l, l] = s
            B[N - l, l] = sign * s
        return B

    if N % 2 == 0:
        m = N // 2
        Be = np.hstack([pair_basis(+1), np.eye(dim)[:, [m]]])
        ke = k[:m].copy()
        ke[-1] *= math.sqrt(2)
        even = LatticeModel(ke, V[: m + 1].copy(), model.params)
        odd = LatticeModel(k[: m - 1].copy(), V[:m].copy(), model.params)
        Bo = pair_basis(-1)
    else:
        m = (N - 1) // 2
        tail = np.zeros(half)
        tail[-1] = k[m]
        Be, Bo = pair_basis(+1), pair_basis(-1)
        even = LatticeModel(k[:m].copy(), V[: m + 1].copy(), model.params, onsite=tail)
        odd = LatticeModel(k[:m].copy(), V[: m + 1].copy(), model.params, onsite=-tail)
    return ParityBlock(+1, Be, even), ParityBlock(-1, Bo, odd)


def quasi_energies(
    model: LatticeModel, dt: float | None = None, *, t0: float = 0.0, method: str = "cfm4"
) -> FloquetResult:
    """Floquet spectrum from the separately integrated parity blocks."""
    T = model.params.period
    omega = model.params.omega
    eps, par, vecs = [], [], []
    defect = 0.0
    for block in parity_blocks(model):
        U, d = _checked(propagator(block.model, T, dt, t0=t0, method=method))
        defect = max(defect, d)
        lam, W = np.linalg.eig(U)
        eps.append(fold(-np.angle(lam) / T, omega))
        par.append(np.full(len(lam), block.parity))
        vecs.append(block.basis @ W)
    eps = np.concatenate(eps)
    order = np.argsort(eps, kind="stable")
    return FloquetResult(
        quasi_energies=eps[order],
        parities=np.concatenate(par)[order],
        period=T,
        unitarity_defect=defect,
        states=np.hstack(vecs)[:, order],
    )


def quasi_energies_full(
    model: LatticeModel, dt: float | None = None, *, t0: float = 0.0, method: str = "cfm4"
) -> FloquetResult:
    """Floquet spectrum from the full propagator, parity read off afterwards
    from the expectation value of the reflection operator.

    Mixing of degenerate opposite-parity states makes these labels unreliable
    at crossings; :func:`quasi_energies` is the primary route.
    """
    T = model.params.period
    U, defect = _checked(propagator(model, T, dt, t0=t0, method=method))
    lam, W = np.linalg.eig(U)
    W = W / np.linalg.norm(W, axis=0)
    P = parity_matrix(model.dim)
    expect = np.real(np.einsum("ij,ik,kj->j", W.conj(), P, W))
    eps = fold(-np.angle(lam) / T, model.params.omega)
    order = np.argsort(eps, kind="stable")
    return FloquetResult(
        quasi_energies=eps[order],
        parities=np.where(expect[order] >= 0, 1, -1),
        period=T,
        unitarity_defect=defect,
        states=W[:, order],
    )


# -- sweeps ---------------------------------------------------------------


def _point(args):
    params, dt = args
    return quasi_energies(build_lattice(params), dt)


def sweep_quasi_energies(
    params: ModelParams,
    g1_values: Sequence[float],
    dt: float | None = None,
    workers: int | None = None,
) -> list[FloquetResult]:
    """One :class:`FloquetResult` per drive amplitude, in input order.

    ``workers > 1`` evaluates points in a process pool.
    """
    g = np.asarray(g1_values, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ConfigurationError("g1_values must be a non-empty 1-D sequence")
    if np.any(g < 0):
        raise ConfigurationError("g1_values must be non-negative")
    if np.any(np.diff(g) < 0):
        raise ConfigurationError("g1_values must be sorted ascending")
    jobs = [(params.with_(g1=float(x)), dt) for x in g]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point, jobs))
    return [_point(j) for j in jobs]


def write_sweep_csv(path, g1_values, results: Sequence[FloquetResult]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["g1_mm_inv", "band_index", "quasi_energy_mm_inv", "parity"])
        for g, res in zip(g1_values, results):
            for n, (e, p) in enumerate(zip(res.quasi_energies, res.parities)):
                w.writerow([f"{g:.12e}", n, f"{e:.12e}", int(p)])


# -- crossing search ------------------------------------------------------

PairSelector = Callable[[FloquetResult], float]


def closest_pair(res: FloquetResult) -> float:
    """Smallest gap between any even and any odd quasi-energy."""
    return res.min_opposite_gap()


def edge_pair(l0: int) -> PairSelector:
    """Gap of the mirror-partner pair living on the outer ``l0 + 1`` sites.

    The even Floquet state with the largest weight on ``l <= l0`` or
    ``l >= N - l0`` is paired with the odd state that best matches it after
    flipping the sign of one half of the chain.
    """
    if l0 < 0:
        raise ConfigurationError("l0 must be non-negative")

    def selector(res: FloquetResult) -> float:
        X = res.states
        dim = X.shape[0]
        N = dim - 1
        if 2 * (l0 + 1) > dim:
            raise ConfigurationError(f"edge region l0={l0} covers the whole chain")
        l = np.arange(dim)
        edge = (l <= l0) | (l >= N - l0)
        evens = np.flatnonzero(res.parities > 0)
        odds = np.flatnonzero(res.parities < 0)
        weight = np.sum(np.abs(X[edge][:, evens]) ** 2, axis=0)
        i = evens[int(np.argmax(weight))]
        flipped = np.sign(N / 2 - l) * X[:, i]
        j = odds[int(np.argmax(np.abs(X[:, odds].conj().T @ flipped)))]
        return float(zone_distance(res.quasi_energies[i], res.quasi_energies[j], res.omega))

    return selector


@dataclass(frozen=True)
class Crossing:
    g1: float
    gap: float
    evaluations: int


def find_crossing(
    params: ModelParams,
    g1_bracket: tuple[float, float],
    pair: PairSelector | int | None = None,
    *,
    rel_tol: float = 1e-4,
    n_scan: int = 9,
    dt: float | None = None,
) -> Crossing:
    """Locate the minimum of an opposite-parity gap inside ``g1_bracket``.

    ``pair`` is a selector callable, an integer ``l0`` (shorthand for
    :func:`edge_pair`) or ``None`` for :func:`closest_pair`.  A coarse scan
    first confirms an interior minimum; bounded Brent refinement (golden
    section with parabolic steps) then narrows it to ``rel_tol``.
    """
    lo, hi = map(float, g1_bracket)
    if not 0 <= lo < hi:
        raise ConfigurationError(f"invalid bracket {g1_bracket!r}")
    if pair is None:
        selector = closest_pair
    elif isinstance(pair, (int, np.integer)):
        selector = edge_pair(int(pair))
    else:
        selector = pair

    count = 0

    def gap(g):
        nonlocal count
        count += 1
        return selector(quasi_energies(build_lattice(params.with_(g1=float(g))), dt))

    grid = np.linspace(lo, hi, n_scan)
    values = np.array([gap(g) for g in grid])
    if not np.all(np.isfinite(values)):
        raise SearchFailure("selected pair is missing at some bracket points")
    spread = values.max() - values.min()
    if spread <= 1e-12 * params.omega:
        raise SearchFailure("gap is flat across the bracket; no minimum to refine")
    i = int(np.argmin(values))
    if i == 0 or i == n_scan - 1:
        raise SearchFailure(
            f"gap minimum sits at the bracket edge g1={grid[i]:.6g}; widen or move the bracket"
        )
    a, b = grid[i - 1], grid[i + 1]
    res = minimize_scalar(
        gap,
        bounds=(a, b),
        method="bounded",
        options={"xatol": rel_tol * grid[i] / 4, "maxiter": 200},
    )
    g_star, g_val = float(res.x), float(res.fun)
    if values[i] < g_val:
        g_star, g_val = float(grid[i]), float(values[i])
    return Crossing(g1=g_star, gap=g_val, evaluations=count)
