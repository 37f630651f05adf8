"""Split-step pseudospectral beam propagation in modulated waveguide arrays.

The envelope obeys the scalar paraxial equation

    i lbar d(phi)/dz = -(lbar^2 / 2 n_s) d^2(phi)/dx^2 + (n_s - n(x, z)) phi

with ``lbar = lambda / 2 pi``.  Transverse coordinates are in um; propagation
distance is stored in mm on :class:`Field` and trajectories but the step
``dz`` is given in um.  Each step applies half an index phase, the exact
free-diffraction operator in Fourier space, the second half phase and then
the edge absorber.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import scipy.fft as sfft
from scipy.special import erf

from .errors import ConfigurationError, NoBoundModeError, ResolutionWarning

if TYPE_CHECKING:
    from .designer import ArrayDesign

UM_PER_MM = 1000.0


@dataclass(frozen=True)
class OpticalConstants:
    lambda_um: float = 0.633
    n_s: float = 1.45

    @property
    def lambdabar(self) -> float:
        return self.lambda_um / (2 * math.pi)


@dataclass(frozen=True)
class WaveguideProfile:
    """Normalized erf channel profile of half-width ``w_um`` and edge
    diffusion length ``Dx_um``."""

    w_um: float = 2.0
    Dx_um: float = 0.3

    def __call__(self, x) -> np.ndarray:
        w, D = self.w_um, self.Dx_um
        return (erf((x + w) / D) - erf((x - w) / D)) / (2 * erf(w / D))

    @property
    def reach_um(self) -> float:
        """Distance beyond which the profile is below ~1e-16."""
        return self.w_um + 6 * self.Dx_um


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_points: int = 8192
    dz_um: float = 1.0
    absorber_width: float = 10.0
    absorber_strength: float = 0.05

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ConfigurationError(f"n_points must be a power of two, got {n}")
        if not self.x_max > self.x_min:
            raise ConfigurationError("x_max must exceed x_min")
        if not self.dz_um > 0:
            raise ConfigurationError("dz_um must be positive")
        if self.absorber_width < 0 or 2 * self.absorber_width >= self.x_max - self.x_min:
            raise ConfigurationError("absorber regions must fit inside the grid")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        return 2 * math.pi * sfft.fftfreq(self.n_points, self.dx)

    def absorber_mask(self, dz_um: float | None = None) -> np.ndarray:
        """Per-step multiplicative loss, a raised-cosine ramp in the outer
        ``absorber_width`` on each side."""
        dz = self.dz_um if dz_um is None else dz_um
        if self.absorber_width == 0 or self.absorber_strength == 0:
            return np.ones(self.n_points)
        x = self.x
        depth = np.maximum(self.x_min + self.absorber_width - x, 0) + np.maximum(
            x - (self.x_max - self.absorber_width), 0
        )
        ramp = 0.5 * (1 - np.cos(np.pi * np.clip(depth / self.absorber_width, 0, 1)))
        return np.exp(-self.absorber_strength * ramp * dz)

    def with_(self, **changes) -> "Grid":
        from dataclasses import replace

        return replace(self, **changes)

    @classmethod
    def for_centers(cls, centers, margin_um: float = 30.0, **kw) -> "Grid":
        centers = np.asarray(centers, dtype=float)
        return cls(centers.min() - margin_um, centers.max() + margin_um, **kw)


@dataclass
class Field:
    phi: np.ndarray
    grid: Grid
    z: float = 0.0  # mm

    def power(self) -> float:
        return float(np.sum(np.abs(self.phi) ** 2) * self.grid.dx)

    def normalized(self) -> "Field":
        return Field(self.phi / math.sqrt(self.power()), self.grid, self.z)

    def intensity(self) -> np.ndarray:
        return np.abs(self.phi) ** 2

    def copy(self) -> "Field":
        return Field(self.phi.copy(), self.grid, self.z)


def center_of_mass(f: Field) -> float:
    """First moment ``int x |phi|^2 / int |phi|^2`` in um."""
    I = f.intensity()
    total = I.sum()
    if not total > 0:
        raise ConfigurationError("center of mass of a zero-power field is undefined")
    return float(I @ f.grid.x / total)


def retrieved_imbalance(x_com, x0: float, N: int, d_r: float):
    """Imbalance estimate ``1 - 2 (<x> - x0) / (N d_r)`` from the beam centroid."""
    return 1.0 - 2.0 * (np.asarray(x_com) - x0) / (N * d_r)


# -- index profiles ---------------------------------------------------------


def _check_centers(design, grid: Grid) -> None:
    c = np.asarray(design.centers)
    if c.min() < grid.x_min or c.max() >= grid.x_max:
        raise ConfigurationError("waveguide center lies outside the grid")
    inner_lo = grid.x_min + grid.absorber_width
    inner_hi = grid.x_max - grid.absorber_width
    reach = design.profile.reach_um
    if grid.absorber_strength > 0 and (c.min() - reach < inner_lo or c.max() + reach > inner_hi):
        raise ConfigurationError("absorber overlaps a waveguide core; enlarge the grid margin")


def profile_components(design, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Static and modulated parts of ``n(x, z) - n_s``.

    ``n - n_s = base + sin(omega z) * modulated``.
    """
    _check_centers(design, grid)
    x = grid.x
    G = np.array([design.profile(x - c) for c in design.centers])
    base = design.dn_base * G.sum(axis=0)
    mod = np.asarray(design.modulation) @ G
    return base, mod


def index_profile(design, z_mm: float, grid: Grid | None = None) -> np.ndarray:
    """Index contrast ``n(x, z) - n_s`` sampled on the grid."""
    grid = design.default_grid() if grid is None else grid
    base, mod = profile_components(design, grid)
    return base + math.sin(design.omega * z_mm) * mod


# -- propagation ------------------------------------------------------------


class SplitStepper:
    """Precomputed operators for repeated symmetric split steps."""

    def __init__(self, design, grid: Grid, constants: OpticalConstants, dz_um=None):
        self.design, self.grid, self.constants = design, grid, constants
        self.dz = grid.dz_um if dz_um is None else dz_um
        lb = constants.lambdabar
        self.base, self.mod = profile_components(design, grid)
        self.kinetic = np.exp(-1j * lb * grid.k**2 * self.dz / (2 * constants.n_s))
        self.half = self.dz / (2 * lb)
        self.base_phase = np.exp(1j * self.base * self.half)
        self.absorber = grid.absorber_mask(self.dz)
        self.has_absorber = bool(np.any(self.absorber != 1.0))
        self.omega_um = design.omega / UM_PER_MM
        n = grid.n_points
        edge = int(round(0.05 * n))
        # fftfreq order: outer 10% of |k| sits around index n/2
        self.outer = slice(n // 2 - edge, n // 2 + edge)

    def half_phase(self, z_um: float) -> np.ndarray:
        s = math.sin(self.omega_um * z_um)
        if s == 0.0 or not np.any(self.mod):
            return self.base_phase
        return self.base_phase * np.exp(1j * s * self.half * self.mod)

    def spectral_tail(self, spectrum: np.ndarray) -> float:
        p = np.abs(spectrum) ** 2
        total = p.sum()
        return float(p[self.outer].sum() / total) if total > 0 else 0.0

    def run(self, phi, z0_um, n_steps, callback=None, every=1, check_every=None):
        """Advance ``n_steps``; ``callback(step, phi)`` fires every ``every``."""
        h1 = self.half_phase(z0_um)
        warned = False
        for i in range(n_steps):
            z_next = z0_um + (i + 1) * self.dz
            h2 = self.half_phase(z_next)
            spec = sfft.fft(phi * h1)
            if check_every and not warned and i % check_every == 0:
                tail = self.spectral_tail(spec)
                if tail > 1e-6:
                    warnings.warn(
                        f"{tail:.2e} of the spectral power lies in the outer 10% of "
                        "k-space; refine the transverse grid",
                        ResolutionWarning,
                        stacklevel=3,
                    )
                    warned = True
            phi = sfft.ifft(self.kinetic * spec) * h2
            if self.has_absorber:
                phi *= self.absorber
            h1 = h2
            if callback is not None and (i + 1) % every == 0:
                callback(i + 1, phi)
        return phi


def split_step(f: Field, design, constants: OpticalConstants, dz_um: float | None = None) -> Field:
    """One symmetric split step of length ``dz_um`` followed by the absorber."""
    stepper = SplitStepper(design, f.grid, constants, dz_um)
    phi = stepper.run(f.phi, f.z * UM_PER_MM, 1, check_every=1)
    return Field(phi, f.grid, f.z + stepper.dz / UM_PER_MM)


@dataclass
class BeamTrajectory:
    z: np.ndarray  # mm
    x_com: np.ndarray  # um
    S: np.ndarray
    power: np.ndarray
    guide_power: np.ndarray  # fraction of power in each guide's cell
    intensity: np.ndarray | None = None
    grid: Grid | None = None
    final: Field | None = None
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        lines = ["z_mm,x_com_um,S_retrieved"]
        for z, x, s in zip(self.z, self.x_com, self.S):
            lines.append(f"{z:.9e},{x:.12e},{s:.12e}")
        Path(path).write_text("\n".join(lines) + "\n")

    def write_intensity(self, path, fmt: str = "npy") -> Path:
        """Write the |phi|^2 movie (rows = z samples) plus a JSON sidecar."""
        if self.intensity is None or self.grid is None:
            raise ConfigurationError("trajectory was recorded without intensity snapshots")
        path = Path(path)
        if fmt == "npy":
            np.save(path, self.intensity)
        elif fmt == "csv":
            np.savetxt(path, self.intensity, delimiter=",", fmt="%.6e")
        else:
            raise ConfigurationError(f"unknown intensity format {fmt!r}")
        g = self.grid
        sidecar = {
            "x_min_um": g.x_min,
            "x_max_um": g.x_max,
            "n_points": g.n_points,
            "dx_um": g.dx,
            "dz_um": g.dz_um,
            "z_mm": [float(z) for z in self.z],
            "format": fmt,
            "rows": "z samples",
            "columns": "|phi|^2 on grid x_min + dx * j",
        }
        side = path.with_name(path.name + ".json")
        side.write_text(json.dumps(sidecar, indent=2))
        return side


def _guide_cells(centers, x) -> np.ndarray:
    """Index of the nearest guide for every grid point."""
    centers = np.asarray(centers)
    edges = 0.5 * (centers[1:] + centers[:-1])
    return np.searchsorted(edges, x)


def propagate(
    design,
    input_field: Field,
    length_mm: float | None = None,
    sample_every: int = 200,
    constants: OpticalConstants | None = None,
    keep_intensity: bool = False,
    check_resolution: bool = True,
) -> BeamTrajectory:
    """Propagate through the array and record centroid and imbalance.

    The imbalance uses guide 0 as origin and the design's reference spacing.
    """
    constants = design.constants if constants is None else constants
    grid = input_field.grid
    length_mm = design.length_mm if length_mm is None else length_mm
    stepper = SplitStepper(design, grid, constants)
    n_steps = int(round(length_mm * UM_PER_MM / stepper.dz))
    x = grid.x
    cells = _guide_cells(design.centers, x)
    n_guides = len(design.centers)

    zs, coms, pows, gps, snaps = [], [], [], [], []

    def record(step, phi):
        I = np.abs(phi) ** 2
        total = I.sum()
        zs.append(input_field.z + step * stepper.dz / UM_PER_MM)
        coms.append(float(I @ x / total))
        pows.append(float(total * grid.dx))
        gps.append(np.bincount(cells, weights=I, minlength=n_guides) / total)
        if keep_intensity:
            snaps.append(I.astype(np.float32))

    record(0, input_field.phi)
    check = max(1, sample_every * 10) if check_resolution else None
    phi = stepper.run(
        input_field.phi.astype(complex), input_field.z * UM_PER_MM, n_steps,
        callback=record, every=sample_every, check_every=check,
    )
    if n_steps % sample_every:
        record(n_steps, phi)
    com = np.array(coms)
    S = retrieved_imbalance(com, design.centers[0], n_guides - 1, design.d_r)
    return BeamTrajectory(
        z=np.array(zs),
        x_com=com,
        S=S,
        power=np.array(pows),
        guide_power=np.array(gps),
        intensity=np.array(snaps) if keep_intensity else None,
        grid=grid,
        final=Field(phi, grid, input_field.z + n_steps * stepper.dz / UM_PER_MM),
        meta={"dz_um": stepper.dz, "n_steps": n_steps},
    )


def step_convergence(
    design, input_field: Field, length_mm: float = 10.0, dz_um: float = 1.0,
    constants: OpticalConstants | None = None,
) -> dict:
    """Compare runs at ``dz_um`` and ``dz_um / 2`` over ``length_mm``.

    Returns the relative L2 field difference and the largest difference of
    the retrieved imbalance sampled every 0.1 mm.
    """
    constants = design.constants if constants is None else constants
    out = {}
    for label, dz in (("coarse", dz_um), ("fine", 0.5 * dz_um)):
        grid = input_field.grid.with_(dz_um=dz)
        every = max(1, int(round(100.0 / dz)))
        traj = propagate(design, Field(input_field.phi, grid, input_field.z), length_mm,
                         sample_every=every, constants=constants, check_resolution=False)
        out[label] = traj
    a, b = out["coarse"], out["fine"]
    err = np.linalg.norm(a.final.phi - b.final.phi) / np.linalg.norm(b.final.phi)
    return {"dz_um": dz_um, "field_error": float(err),
            "max_S_difference": float(np.max(np.abs(a.S - b.S)))}


# -- guided mode -------------------------------------------------------------


def modal_shift(phi: np.ndarray, dn: np.ndarray, grid: Grid, constants: OpticalConstants) -> float:
    """Rayleigh quotient of the paraxial operator, as a propagation-constant
    shift above ``n_s k0`` in mm^-1."""
    lb = constants.lambdabar
    spec = sfft.fft(phi)
    kin = np.sum(lb * grid.k**2 / (2 * constants.n_s) * np.abs(spec) ** 2) / np.sum(np.abs(spec) ** 2)
    pot = np.sum(dn / lb * np.abs(phi) ** 2) / np.sum(np.abs(phi) ** 2)
    return float((pot - kin) * UM_PER_MM)


def imaginary_distance_mode(
    dn: np.ndarray,
    grid: Grid,
    constants: OpticalConstants,
    x0: float = 0.0,
    dtau_schedule=(20.0, 1.0),
    tol: float = 1e-10,
    max_steps: int = 100_000,
) -> tuple[np.ndarray, float]:
    """Ground mode of the index contrast ``dn`` by imaginary-distance
    propagation, normalized after every step.

    A coarse step reaches the mode quickly and the final step in the schedule
    sets the splitting error; each stage runs until the relative L2 change per
    step drops below ``tol``.
    """
    lb = constants.lambdabar
    x = grid.x
    phi = np.exp(-((x - x0) / 3.0) ** 2).astype(complex)
    phi /= np.linalg.norm(phi)
    used = 0
    for dtau in dtau_schedule:
        kin = np.exp(-lb * grid.k**2 * dtau / (2 * constants.n_s))
        pot = np.exp(dn * dtau / (2 * lb))
        converged = False
        while used < max_steps:
            new = pot * sfft.ifft(kin * sfft.fft(pot * phi))
            new /= np.linalg.norm(new)
            change = np.linalg.norm(new - phi)
            phi = new
            used += 1
            if change < tol:
                converged = True
                break
        if not converged:
            raise NoBoundModeError(
                f"imaginary-distance propagation did not converge in {max_steps} steps"
            )
    shift = modal_shift(phi, dn, grid, constants)
    if not shift > 0:
        raise NoBoundModeError("no guided mode: propagation-constant shift is not positive")
    phi = phi.real if np.allclose(phi.imag, 0, atol=1e-12) else phi
    return np.asarray(phi, dtype=complex), shift


def fundamental_mode(
    profile: WaveguideProfile,
    dn: float,
    grid: Grid,
    constants: OpticalConstants = OpticalConstants(),
    center: float = 0.0,
    **kw,
) -> tuple[Field, float]:
    """Fundamental mode of a single isolated guide and its propagation-constant
    shift (mm^-1); the field is normalized to unit power."""
    contrast = dn * profile(grid.x - center)
    phi, shift = imaginary_distance_mode(contrast, grid, constants, x0=center, **kw)
    f = Field(phi, grid).normalized()
    return f, shift
