"""Synthesis of waveguide arrays that realize the Fock-space chain.

Spacings set the couplings through an exponential law
``kappa(d) = kappa0 exp(-gamma (d - d_r))`` calibrated from two-guide power
exchange, and each guide's contrast is modulated as
``dn_l(z) = dn + beta g1 V_l lbar sin(omega z)`` so that its propagation
constant follows the site energy ``g(z) V_l``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bpm import (
    UM_PER_MM,
    Field,
    Grid,
    OpticalConstants,
    SplitStepper,
    WaveguideProfile,
    fundamental_mode,
)
from .errors import ConfigurationError, ExtrapolationWarning, NumericalFailure
from .lattice import ModelParams, coupling_rates, site_weights

SCHEMA_VERSION = 1
DN_REFERENCE = 2e-3
D_REFERENCE = 9.0

# design constants quoted with the original proposal
REPORTED_KAPPA0 = 0.2144  # mm^-1 at d_r = 9 um
REPORTED_GAMMA = 0.6  # um^-1
REPORTED_BETA = 1.23


@dataclass(frozen=True)
class CouplingCalibration:
    kappa0: float  # mm^-1
    gamma: float  # um^-1
    d_r: float = D_REFERENCE  # um
    fit_residual: float = 0.0
    d_values: tuple = ()
    kappa_values: tuple = ()

    def __post_init__(self):
        if not (self.kappa0 > 0 and self.gamma > 0):
            raise ConfigurationError("kappa0 and gamma must be positive")

    def kappa(self, d):
        return self.kappa0 * np.exp(-self.gamma * (np.asarray(d) - self.d_r))

    def spacing(self, kappa):
        return self.d_r - np.log(np.asarray(kappa) / self.kappa0) / self.gamma

    @property
    def d_range(self) -> tuple[float, float] | None:
        if not self.d_values:
            return None
        return min(self.d_values), max(self.d_values)

    @classmethod
    def reported(cls) -> "CouplingCalibration":
        return cls(REPORTED_KAPPA0, REPORTED_GAMMA, D_REFERENCE)


@dataclass
class ArrayDesign:
    centers: np.ndarray  # um
    modulation: np.ndarray  # contrast amplitude m_l per guide
    dn_base: float = DN_REFERENCE
    profile: WaveguideProfile = WaveguideProfile()
    omega: float = 0.628  # mm^-1
    length_mm: float = 100.0
    d_r: float = D_REFERENCE
    constants: OpticalConstants = OpticalConstants()
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        self.modulation = np.asarray(self.modulation, dtype=float)
        if self.centers.shape != self.modulation.shape:
            raise ConfigurationError("centers and modulation must have equal length")
        if np.any(np.diff(self.centers) <= 2 * self.profile.w_um):
            raise ConfigurationError("guide spacings must exceed the core width 2w")

    @property
    def N(self) -> int:
        return len(self.centers) - 1

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.centers)

    def contrast(self, z_mm: float) -> np.ndarray:
        return self.dn_base + self.modulation * math.sin(self.omega * z_mm)

    def default_grid(self, n_points: int = 8192, margin_um: float = 30.0, **kw) -> Grid:
        x_min = self.centers[0] - margin_um
        x_max = self.centers[0] + self.N * self.d_r + margin_um
        x_max = max(x_max, self.centers[-1] + margin_um)
        return Grid(x_min, x_max, n_points=n_points, **kw)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "lambda_um": self.constants.lambda_um,
            "n_s": self.constants.n_s,
            "w_um": self.profile.w_um,
            "Dx_um": self.profile.Dx_um,
            "dn_base": self.dn_base,
            "omega_mm_inv": self.omega,
            "length_mm": self.length_mm,
            "d_r_um": self.d_r,
            "guides": [
                {"x_um": float(x), "m_contrast": float(m)}
                for x, m in zip(self.centers, self.modulation)
            ],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayDesign":
        try:
            guides = d["guides"]
            return cls(
                centers=[g["x_um"] for g in guides],
                modulation=[g["m_contrast"] for g in guides],
                dn_base=d["dn_base"],
                profile=WaveguideProfile(d["w_um"], d["Dx_um"]),
                omega=d["omega_mm_inv"],
                length_mm=d["length_mm"],
                d_r=d.get("d_r_um", D_REFERENCE),
                constants=OpticalConstants(d["lambda_um"], d["n_s"]),
                warnings=list(d.get("warnings", [])),
            )
        except KeyError as exc:
            raise ConfigurationError(f"array design is missing key {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "ArrayDesign":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- coupling calibration ----------------------------------------------------


def _coupler(d_um: float, dn: float, profile: WaveguideProfile, omega=0.628) -> ArrayDesign:
    return ArrayDesign(
        centers=[0.0, d_um], modulation=[0.0, 0.0], dn_base=dn, profile=profile, omega=omega,
    )


def coupler_grid(d_um: float, n_points: int = 2048, margin_um: float = 25.0, dz_um: float = 1.0) -> Grid:
    return Grid(-margin_um, d_um + margin_um, n_points=n_points, dz_um=dz_um,
                absorber_width=8.0, absorber_strength=0.05)


def transfer_length(
    d_um: float,
    dn: float = DN_REFERENCE,
    profile: WaveguideProfile = WaveguideProfile(),
    constants: OpticalConstants = OpticalConstants(),
    max_length_mm: float = 40.0,
    n_points: int = 2048,
    dz_um: float = 1.0,
    sample_um: float = 10.0,
) -> float:
    """Distance (mm) to the first maximum of power in the second guide of a
    symmetric coupler excited in its first guide.

    Propagation stops at the first maximum; if none shows up within
    ``max_length_mm`` the search is extended once to twice that length.
    """
    design = _coupler(d_um, dn, profile)
    grid = coupler_grid(d_um, n_points, dz_um=dz_um)
    mode, _ = fundamental_mode(profile, dn, grid, constants)
    stepper = SplitStepper(design, grid, constants)
    right = grid.x > 0.5 * d_um
    every = max(1, int(round(sample_um / dz_um)))
    chunk = 200 * every
    samples = [0.0]

    def record(step, phi):
        I = np.abs(phi) ** 2
        samples.append(I[right].sum() / I.sum())

    phi = mode.phi.copy()
    done = 0
    for limit in (max_length_mm, 2 * max_length_mm):
        while done * dz_um < limit * UM_PER_MM:
            phi = stepper.run(phi, done * dz_um, chunk, callback=record, every=every)
            done += chunk
            p = np.array(samples)
            peaks = np.where((p[1:-1] >= p[:-2]) & (p[1:-1] > p[2:]) & (p[1:-1] > 0.5))[0] + 1
            if peaks.size:
                i = peaks[0]
                # parabolic refinement of the sampled maximum
                a, b, c = p[i - 1], p[i], p[i + 1]
                denom = a - 2 * b + c
                offset = 0.5 * (a - c) / denom if denom != 0 else 0.0
                return (i + offset) * every * dz_um / UM_PER_MM
    raise NumericalFailure(
        f"no complete power transfer within {2 * max_length_mm} mm at d = {d_um} um"
    )


def coupling_from_transfer(d_um: float, **kw) -> float:
    """Coupling rate kappa = pi / (2 L_transfer) in mm^-1."""
    return math.pi / (2 * transfer_length(d_um, **kw))


def fit_exponential(d_values, kappa_values, d_r: float = D_REFERENCE) -> CouplingCalibration:
    d = np.asarray(d_values, dtype=float)
    k = np.asarray(kappa_values, dtype=float)
    slope, intercept = np.polyfit(d - d_r, np.log(k), 1)
    cal = CouplingCalibration(
        kappa0=float(math.exp(intercept)),
        gamma=float(-slope),
        d_r=d_r,
        d_values=tuple(float(x) for x in d),
        kappa_values=tuple(float(x) for x in k),
    )
    resid = math.sqrt(np.mean((cal.kappa(d) / k - 1) ** 2))
    return replace(cal, fit_residual=float(resid))


def calibrate_coupling(
    d_values=(8.5, 9.0, 9.5, 10.0, 10.5),
    constants: OpticalConstants = OpticalConstants(),
    dn: float = DN_REFERENCE,
    profile: WaveguideProfile = WaveguideProfile(),
    d_r: float = D_REFERENCE,
    **kw,
) -> CouplingCalibration:
    """Fit ``ln kappa`` against spacing from two-guide power-exchange runs."""
    d_values = sorted(float(d) for d in d_values)
    if len(d_values) < 5 or d_values[0] > 8.5 or d_values[-1] < 10.5:
        raise ConfigurationError("need at least 5 spacings spanning [8.5, 10.5] um")
    kappas = [coupling_from_transfer(d, dn=dn, profile=profile, constants=constants, **kw)
              for d in d_values]
    return fit_exponential(d_values, kappas, d_r)


# -- modulation calibration --------------------------------------------------


@dataclass(frozen=True)
class BetaCalibration:
    beta: float
    contrasts: tuple
    shifts: tuple  # mm^-1
    nonlinearity: float

    def __float__(self) -> float:
        return self.beta


def single_guide_grid(n_points: int = 2048, half_width_um: float = 30.0) -> Grid:
    return Grid(-half_width_um, half_width_um, n_points=n_points, absorber_width=0.0,
                absorber_strength=0.0)


def calibrate_beta(
    constants: OpticalConstants = OpticalConstants(),
    profile: WaveguideProfile = WaveguideProfile(),
    dn: float = DN_REFERENCE,
    rel_span: float = 0.25,
    n_contrasts: int = 5,
    grid: Grid | None = None,
) -> BetaCalibration:
    """Contrast-to-propagation-constant conversion factor.

    Fits the fundamental-mode shift linearly over ``dn * (1 +- rel_span)``;
    ``beta = 1 / (slope * lbar)`` so that a contrast increment
    ``beta * delta * lbar`` shifts the propagation constant by ``delta``.
    """
    grid = single_guide_grid() if grid is None else grid
    contrasts = dn * np.linspace(1 - rel_span, 1 + rel_span, n_contrasts)
    shifts = np.array([fundamental_mode(profile, c, grid, constants)[1] for c in contrasts])
    slope, icpt = np.polyfit(contrasts, shifts, 1)  # mm^-1 per unit contrast
    resid = shifts - (slope * contrasts + icpt)
    nonlin = float(np.max(np.abs(resid)) / (shifts.max() - shifts.min()))
    if nonlin > 0.05:
        raise ConfigurationError(
            f"mode shift is {nonlin:.1%} nonlinear over the contrast range; narrow rel_span"
        )
    beta = 1.0 / (slope / UM_PER_MM * constants.lambdabar)
    return BetaCalibration(float(beta), tuple(contrasts), tuple(shifts), nonlin)


# -- synthesis ---------------------------------------------------------------


def modulation_coefficients(params: ModelParams, beta: float, constants: OpticalConstants) -> np.ndarray:
    """``beta g1 V_l lbar`` with g1 converted to um^-1."""
    return beta * params.g1 / UM_PER_MM * site_weights(params.N) * constants.lambdabar


def design_array(
    params: ModelParams,
    cal: CouplingCalibration,
    beta: float,
    profile: WaveguideProfile = WaveguideProfile(),
    dn_base: float = DN_REFERENCE,
    length_mm: float = 100.0,
    constants: OpticalConstants = OpticalConstants(),
) -> ArrayDesign:
    """Array whose spacings realize ``kappa_l`` and whose contrast modulation
    realizes the site energies ``g(z) V_l``."""
    kappa = coupling_rates(params.N, params.v)
    d = cal.spacing(kappa)
    notes = []
    rng = cal.d_range
    if rng is not None:
        lo, hi = rng
        outside = [i + 1 for i, x in enumerate(d) if x < lo - 1e-9 or x > hi + 1e-9]
        if outside:
            msg = f"spacings d_{outside} lie outside the calibrated range [{lo}, {hi}] um"
            warnings.warn(msg, ExtrapolationWarning, stacklevel=2)
            notes.append(msg)
    centers = np.concatenate([[0.0], np.cumsum(d)])
    return ArrayDesign(
        centers=centers,
        modulation=modulation_coefficients(params, float(beta), constants),
        dn_base=dn_base,
        profile=profile,
        omega=params.omega,
        length_mm=length_mm,
        d_r=cal.d_r,
        constants=constants,
        warnings=notes,
    )


def input_mode(design: ArrayDesign, grid: Grid, guide: int = 0) -> Field:
    """Fundamental mode of one guide of the array, computed in isolation."""
    f, _ = fundamental_mode(design.profile, float(design.contrast(0.0)[guide]), grid,
                            design.constants, center=float(design.centers[guide]))
    return f
