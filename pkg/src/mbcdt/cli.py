"""Command-line runs: lattice evolution, Floquet sweeps, array design and BPM.

Every run resolves a :class:`RunConfig` from defaults, an optional JSON file,
the ``MBCDT_OUTPUT_DIR`` environment variable and command-line flags (in
increasing priority), writes plot-ready CSV/JSON files and a
``<mode>.manifest.json`` recording the resolved parameters.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import cdt_amplitude, effective_couplings, integrate_effective
from .bpm import OpticalConstants, WaveguideProfile, propagate
from .designer import (
    D_REFERENCE,
    REPORTED_BETA,
    REPORTED_GAMMA,
    REPORTED_KAPPA0,
    ArrayDesign,
    CouplingCalibration,
    calibrate_beta,
    calibrate_coupling,
    design_array,
    input_mode,
)
from .errors import ConfigurationError, NumericalFailure
from .evolve import integrate
from .floquet import edge_pair, find_crossing, sweep_quasi_energies, write_sweep_csv
from .lattice import ModelParams, basis_state, build_lattice

SCHEMA_VERSION = 1
OUTPUT_ENV = "MBCDT_OUTPUT_DIR"
MODES = (
    "evolve",
    "evolve-effective",
    "floquet-sweep",
    "cdt-amplitude",
    "calibrate",
    "design",
    "bpm-run",
    "crossval",
)


@dataclass
class RunConfig:
    mode: str = "evolve"
    # model
    N: int = 10
    v_mm_inv: float = 0.08
    omega_mm_inv: float = 0.628
    g1_mm_inv: float | None = None
    l0: int | None = None
    root: int = 1
    drive_phase_rad: float = 0.0
    initial_site: int = 0
    # lattice integration
    t_end_mm: float = 100.0
    dt_mm: float | None = None
    sample_every: int = 1
    method: str = "cfm4"
    write_amplitudes: bool = False
    # Floquet sweep
    g1_min_mm_inv: float = 0.0
    g1_max_mm_inv: float = 0.35
    n_points: int = 200
    workers: int | None = None
    crossing_l0: list = field(default_factory=list)
    crossing_window: float = 0.1
    # optics and design
    lambda_um: float = 0.633
    n_s: float = 1.45
    w_um: float = 2.0
    Dx_um: float = 0.3
    dn_base: float = 2e-3
    calibration: str = "reported"
    kappa0_mm_inv: float | None = None
    gamma_um_inv: float | None = None
    beta: float | None = None
    d_r_um: float = D_REFERENCE
    d_values_um: list = field(default_factory=lambda: [8.5, 9.0, 9.5, 10.0, 10.5])
    length_mm: float = 100.0
    # beam propagation
    design_path: str | None = None
    grid_points: int = 8192
    dz_um: float = 1.0
    bpm_sample_every: int = 200
    keep_intensity: bool = False
    intensity_format: str = "npy"
    input_guide: int = 0
    g1_list_mm_inv: list | None = None
    # output
    output_dir: str | None = None
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigurationError(f"mode: must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"schema_version: expected {SCHEMA_VERSION}")
        if not (isinstance(self.N, int) and self.N >= 1):
            raise ConfigurationError(f"N: must be an integer >= 1, got {self.N!r}")
        for name in ("v_mm_inv", "omega_mm_inv", "lambda_um", "n_s", "w_um", "Dx_um",
                     "dn_base", "length_mm", "dz_um", "d_r_um"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name}: must be positive, got {getattr(self, name)!r}")
        if self.t_end_mm < 0:
            raise ConfigurationError("t_end_mm: must be non-negative")
        if self.dt_mm is not None and not self.dt_mm > 0:
            raise ConfigurationError("dt_mm: must be positive")
        if self.sample_every < 1 or self.bpm_sample_every < 1:
            raise ConfigurationError("sample_every: must be >= 1")
        if self.g1_mm_inv is not None and self.l0 is not None:
            raise ConfigurationError("g1_mm_inv, l0: give either g1 or (l0, root), not both")
        if self.g1_mm_inv is not None and self.g1_mm_inv < 0:
            raise ConfigurationError("g1_mm_inv: must be non-negative")
        if not 0 <= self.initial_site <= self.N:
            raise ConfigurationError(f"initial_site: must lie in [0, {self.N}]")
        if self.calibration not in ("reported", "computed"):
            raise ConfigurationError("calibration: must be 'reported' or 'computed'")
        if self.mode == "cdt-amplitude" and self.l0 is None:
            raise ConfigurationError("l0: required for mode cdt-amplitude")
        if self.mode == "floquet-sweep":
            if not (0 <= self.g1_min_mm_inv < self.g1_max_mm_inv) or self.n_points < 1:
                raise ConfigurationError("g1_min_mm_inv, g1_max_mm_inv, n_points: invalid sweep range")
        return self

    def resolved_g1(self) -> float:
        if self.l0 is not None:
            return cdt_amplitude(self.N, self.l0, self.omega_mm_inv, self.root)
        return 0.0 if self.g1_mm_inv is None else float(self.g1_mm_inv)

    def params(self, g1: float | None = None) -> ModelParams:
        return ModelParams(
            self.N, self.v_mm_inv, self.resolved_g1() if g1 is None else g1,
            self.omega_mm_inv, self.drive_phase_rad,
        )

    def constants(self) -> OpticalConstants:
        return OpticalConstants(self.lambda_um, self.n_s)

    def profile(self) -> WaveguideProfile:
        return WaveguideProfile(self.w_um, self.Dx_um)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def config_from_dict(d: dict, base: RunConfig | None = None) -> RunConfig:
    unknown = sorted(set(d) - set(_FIELDS))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    return replace(base or RunConfig(), **d)


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    return data


# -- presets ---------------------------------------------------------------

_FIG1_G1 = {"a": 0.167804, "b": 0.215748, "c": 0.302047, "d": 0.134580}

PRESETS: dict[str, dict] = {
    **{f"fig1{p}": {"mode": "evolve", "g1_mm_inv": g, "t_end_mm": 100.0}
       for p, g in _FIG1_G1.items()},
    "fig2b": {"mode": "floquet-sweep", "g1_min_mm_inv": 0.0, "g1_max_mm_inv": 0.35,
              "n_points": 200, "crossing_l0": [0, 1, 2]},
    **{f"fig3{p}": {"mode": "crossval", "g1_mm_inv": g, "length_mm": 100.0,
                    "calibration": "reported", "keep_intensity": True}
       for p, g in _FIG1_G1.items()},
    "fig3e": {"mode": "crossval", "g1_list_mm_inv": list(_FIG1_G1.values()),
              "length_mm": 100.0, "calibration": "reported"},
}


def fig_presets(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {name!r}; valid presets: {', '.join(sorted(PRESETS))}"
        )
    return config_from_dict(PRESETS[name]).validate()


# -- helpers ---------------------------------------------------------------


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigurationError(f"output_dir: {out} is not writable")
    return out


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _calibration(cfg: RunConfig) -> tuple[CouplingCalibration, float, dict]:
    if cfg.calibration == "computed":
        cal = calibrate_coupling(cfg.d_values_um, cfg.constants(), cfg.dn_base, cfg.profile(),
                                 cfg.d_r_um)
        beta = calibrate_beta(cfg.constants(), cfg.profile(), cfg.dn_base).beta
    else:
        cal = CouplingCalibration(REPORTED_KAPPA0, REPORTED_GAMMA, cfg.d_r_um)
        beta = REPORTED_BETA
    if cfg.kappa0_mm_inv is not None or cfg.gamma_um_inv is not None:
        cal = replace(cal, kappa0=cfg.kappa0_mm_inv or cal.kappa0,
                      gamma=cfg.gamma_um_inv or cal.gamma)
    if cfg.beta is not None:
        beta = cfg.beta
    info = {"kappa0_mm_inv": cal.kappa0, "gamma_um_inv": cal.gamma, "d_r_um": cal.d_r,
            "beta": beta, "fit_residual": cal.fit_residual}
    return cal, beta, info


def _design(cfg: RunConfig, g1: float) -> tuple[ArrayDesign, dict]:
    if cfg.design_path:
        return ArrayDesign.load(cfg.design_path), {"design_path": cfg.design_path}
    cal, beta, info = _calibration(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = design_array(cfg.params(g1), cal, beta, cfg.profile(), cfg.dn_base,
                         cfg.length_mm, cfg.constants())
    return d, info


def _bpm(cfg: RunConfig, design: ArrayDesign):
    grid = design.default_grid(cfg.grid_points, dz_um=cfg.dz_um)
    f0 = input_mode(design, grid, cfg.input_guide)
    return propagate(design, f0, cfg.length_mm, cfg.bpm_sample_every,
                     keep_intensity=cfg.keep_intensity)


# -- modes -------------------------------------------------------------------


def _run_evolve(cfg, out, derived):
    model = build_lattice(cfg.params())
    c0 = basis_state(model.dim, cfg.initial_site)
    traj = integrate(model, c0, cfg.t_end_mm, cfg.dt_mm, cfg.sample_every, method=cfg.method)
    amps = out / "evolve_amplitudes.csv" if cfg.write_amplitudes else None
    traj.to_csv(out / "evolve.csv", amps)
    derived["norm_drift"] = traj.norm_drift
    return ["evolve.csv"] + (["evolve_amplitudes.csv"] if amps else [])


def _run_effective(cfg, out, derived):
    eff = effective_couplings(cfg.params())
    c0 = basis_state(cfg.N + 1, cfg.initial_site)
    traj = integrate_effective(eff, c0, cfg.t_end_mm, cfg.dt_mm, cfg.sample_every)
    amps = out / "evolve_effective_amplitudes.csv" if cfg.write_amplitudes else None
    traj.to_csv(out / "evolve_effective.csv", amps)
    derived["effective_couplings_abs"] = np.abs(eff.sigma)
    return ["evolve_effective.csv"] + (["evolve_effective_amplitudes.csv"] if amps else [])


def _run_sweep(cfg, out, derived):
    g = np.linspace(cfg.g1_min_mm_inv, cfg.g1_max_mm_inv, cfg.n_points)
    base = cfg.params(0.0)
    res = sweep_quasi_energies(base, g, cfg.dt_mm, cfg.workers)
    write_sweep_csv(out / "floquet_sweep.csv", g, res)
    files = ["floquet_sweep.csv"]
    if cfg.crossing_l0:
        rows = []
        for l0 in cfg.crossing_l0:
            g_cdt = cdt_amplitude(cfg.N, l0, cfg.omega_mm_inv, cfg.root)
            w = cfg.crossing_window
            c = find_crossing(base, ((1 - w) * g_cdt, (1 + w) * g_cdt), edge_pair(l0),
                              dt=cfg.dt_mm)
            rows.append({"l0": l0, "g1_cdt_mm_inv": g_cdt, "g1_crossing_mm_inv": c.g1,
                         "gap_mm_inv": c.gap, "gap_over_omega": c.gap / cfg.omega_mm_inv,
                         "relative_shift": c.g1 / g_cdt - 1})
        _write_json(out / "floquet_crossings.json", rows)
        derived["crossings"] = rows
        files.append("floquet_crossings.json")
    return files


def _run_cdt(cfg, out, derived):
    data = {"N": cfg.N, "l0": cfg.l0, "omega": cfg.omega_mm_inv, "root_index": cfg.root,
            "g1": derived["g1_mm_inv"]}
    _write_json(out / "cdt_amplitude.json", data)
    return ["cdt_amplitude.json"]


def _run_calibrate(cfg, out, derived):
    cal = calibrate_coupling(cfg.d_values_um, cfg.constants(), cfg.dn_base, cfg.profile(),
                             cfg.d_r_um)
    beta = calibrate_beta(cfg.constants(), cfg.profile(), cfg.dn_base)
    data = {
        "kappa0_mm_inv": cal.kappa0, "gamma_um_inv": cal.gamma, "d_r_um": cal.d_r,
        "fit_residual": cal.fit_residual,
        "points": [{"d_um": d, "kappa_mm_inv": k} for d, k in zip(cal.d_values, cal.kappa_values)],
        "beta": beta.beta, "beta_nonlinearity": beta.nonlinearity,
    }
    _write_json(out / "calibration.json", data)
    derived.update({k: data[k] for k in ("kappa0_mm_inv", "gamma_um_inv", "beta")})
    return ["calibration.json"]


def _run_design(cfg, out, derived):
    design, info = _design(cfg, derived["g1_mm_inv"])
    design.save(out / "design.json")
    derived.update(info)
    derived["spacings_um"] = design.spacings
    return ["design.json"]


def _run_bpm(cfg, out, derived):
    design, info = _design(cfg, derived["g1_mm_inv"])
    derived.update(info)
    design.save(out / "bpm_design.json")
    traj = _bpm(cfg, design)
    traj.to_csv(out / "bpm.csv")
    files = ["bpm_design.json", "bpm.csv"]
    if cfg.keep_intensity:
        name = "bpm_intensity." + cfg.intensity_format
        traj.write_intensity(out / name, cfg.intensity_format)
        files += [name, name + ".json"]
    derived["power_loss"] = float(1 - traj.power[-1] / traj.power[0])
    return files


def _run_crossval(cfg, out, derived):
    g_list = cfg.g1_list_mm_inv or [derived["g1_mm_inv"]]
    lines = ["panel,g1_mm_inv,z_mm,S_lattice,S_bpm"]
    summary = []
    files = []
    for panel, g1 in enumerate(g_list):
        design, info = _design(cfg, float(g1))
        traj = _bpm(cfg, design)
        model = build_lattice(cfg.params(float(g1)))
        lat = integrate(model, basis_state(model.dim, cfg.input_guide), cfg.length_mm,
                        cfg.dt_mm, method=cfg.method)
        S_lat = np.interp(traj.z, lat.times, lat.imbalance)
        rms = float(np.sqrt(np.mean((S_lat - traj.S) ** 2)))
        summary.append({"panel": panel, "g1_mm_inv": float(g1), "rms_S_difference": rms,
                        "min_S_bpm": float(traj.S.min()), "min_S_lattice": float(S_lat.min()),
                        **info})
        for z, a, b in zip(traj.z, S_lat, traj.S):
            lines.append(f"{panel},{float(g1):.9e},{z:.9e},{a:.12e},{b:.12e}")
        if cfg.keep_intensity:
            name = f"crossval_intensity_{panel}." + cfg.intensity_format
            traj.write_intensity(out / name, cfg.intensity_format)
            files += [name, name + ".json"]
    (out / "crossval.csv").write_text("\n".join(lines) + "\n")
    _write_json(out / "crossval.json", summary)
    derived["crossval"] = summary
    return ["crossval.csv", "crossval.json"] + files


_RUNNERS = {
    "evolve": _run_evolve,
    "evolve-effective": _run_effective,
    "floquet-sweep": _run_sweep,
    "cdt-amplitude": _run_cdt,
    "calibrate": _run_calibrate,
    "design": _run_design,
    "bpm-run": _run_bpm,
    "crossval": _run_crossval,
}


def run(cfg: RunConfig, preset: str | None = None) -> dict:
    """Execute one run and return its manifest."""
    cfg.validate()
    out = _output_dir(cfg)
    derived = {"g1_mm_inv": cfg.resolved_g1()}
    files = _RUNNERS[cfg.mode](cfg, out, derived)
    manifest = {
        "tool": "mbcdt",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "mode": cfg.mode,
        "preset": preset,
        "config": asdict(cfg),
        "derived": derived,
        "outputs": files,
    }
    name = f"{cfg.mode}.manifest.json"
    _write_json(out / name, manifest)
    return manifest


# -- argument parsing --------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [_parse_value(t) for t in text.split(",")]
    return text


def _add_field_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (value parsed as JSON)")
    for name in _FIELDS:
        if name in ("mode", "schema_version"):
            continue
        flag = "--" + name.replace("_", "-")
        p.add_argument(flag, dest=name, type=_parse_value, default=None, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbcdt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mbcdt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        _add_field_flags(sub.add_parser(mode, help=f"run mode {mode}"))
    pre = sub.add_parser("preset", help="run a figure preset")
    pre.add_argument("name", nargs="?", help="preset name")
    pre.add_argument("--list", action="store_true", help="list preset names")
    pre.add_argument("--show", action="store_true", help="print the resolved config only")
    _add_field_flags(pre)
    return parser


def _resolve(args, base: RunConfig) -> RunConfig:
    d = {}
    if args.config:
        d.update(load_config(args.config))
    env = os.environ.get(OUTPUT_ENV)
    if env:
        d["output_dir"] = env
    for name in _FIELDS:
        val = getattr(args, name, None)
        if val is not None:
            d[name] = val
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        d[key.strip()] = _parse_value(val)
    if "mode" in d and d["mode"] != base.mode and args.command != "preset":
        raise ConfigurationError(f"mode: config says {d['mode']!r} but command is {base.mode!r}")
    return config_from_dict(d, base)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        preset = None
        if args.command == "preset":
            if args.list or not args.name:
                print("\n".join(sorted(PRESETS)))
                return 0
            preset = args.name
            base = fig_presets(preset)
            if base.output_dir is None:
                base = replace(base, output_dir=preset)
        else:
            base = RunConfig(mode=args.command)
        cfg = _resolve(args, base).validate()
        if args.command == "preset" and args.show:
            print(json.dumps(asdict(cfg), indent=2))
            return 0
        manifest = run(cfg, preset)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"mode": manifest["mode"], "outputs": manifest["outputs"],
                      "output_dir": str(Path(cfg.output_dir or ".").resolve())}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
