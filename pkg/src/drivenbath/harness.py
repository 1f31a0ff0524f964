"""Scenario harness: config parsing, solver dispatch, comparison, export.

A scenario JSON fully determines a run (model, drive, grid, solver list,
observables); identical configs produce byte-identical CSV output.  All
frequencies are given in a declared reference unit (omega_S for emitter
scenarios, the hopping J for tight-binding ones) and all dynamics run in
the rotating frame (laser carrier / band center).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .drives import DriveProtocol, drive_samples
from .errors import ConfigError, SolverRefusal
from .green import (
    GreenFunction,
    LinearModel,
    find_bound_states,
    green_lorentzian_network,
    green_markovian,
    green_tb_pair,
    green_tb_single,
    solve_green_direct,
    solve_green_volterra,
)
from .grids import TimeGrid
from .lindblad import DensityMatrix, Trajectory, fidelity, propagate_lindblad, sigma_z
from .lme import attach_drive, build_lme_generator, compute_lme_coefficients
from .markovian import (
    ShiftedSpectrum,
    ame_generator,
    fme_generator,
    obe_generator,
    obe_two_emitter_generator,
    tdme_generator,
)
from .pseudomode import PseudoModeModel, estimate_truncation, solve_pseudomode
from .spectral import LorentzianSpectral, TightBindingSpectral, discretize_environment

__all__ = [
    "ScenarioConfig",
    "ComparisonSeries",
    "ResultsBundle",
    "classify_regime",
    "run_scenario",
    "compare_trajectories",
    "export_results",
    "config_hash",
]

NEG_LOG_CAP = 16.0
EMITTER_SOLVERS = ("PM", "LME", "OBE", "FME", "AME", "TDME")
MODE_SOLVERS = ("volterra", "direct", "closed-form", "markovian", "ring")


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    raw: dict

    def __post_init__(self):
        _validate_config(self.raw)

    @property
    def scenario_id(self) -> str:
        return self.raw["id"]

    @property
    def kind(self) -> str:
        return self.raw["model"]["kind"]

    @property
    def n_modes(self) -> int:
        return int(self.raw["model"]["n_modes"])

    @property
    def detunings(self) -> list[float]:
        return [float(x) for x in self.raw["model"]["detunings"]]

    @property
    def solvers(self) -> list[str]:
        return list(self.raw["solvers"])

    @property
    def observables(self) -> list[str]:
        return list(self.raw.get("observables", []))

    @property
    def options(self) -> dict:
        return dict(self.raw.get("options", {}))

    def grid(self) -> TimeGrid:
        g = self.raw["grid"]
        return TimeGrid.from_t_max(float(g["t_max"]), float(g["dt"]))

    def store_every(self) -> int:
        return int(self.raw.get("store_every", 1))

    def spectral(self):
        spec = self.raw["model"]["spectral"]
        if spec["type"] == "lorentzian":
            return LorentzianSpectral(g_se=float(spec["g_se"]),
                                      kappa=float(spec["kappa"]),
                                      eta=float(spec.get("eta_offset", 0.0)))
        if spec["type"] == "tight_binding":
            return TightBindingSpectral(J=float(spec["J"]), g=float(spec["g"]),
                                        n12=spec.get("n12"))
        raise ConfigError(f"unknown spectral type {spec['type']!r}")

    def drive(self) -> DriveProtocol | None:
        d = self.raw.get("drive")
        if d is None:
            return None
        amp = d.get("amplitude", 1.0)
        if isinstance(amp, list):
            amp = complex(amp[0], amp[1])
        return DriveProtocol(
            kind=d["kind"], amplitude=amp, delta=float(d.get("delta", 0.0)),
            t0=float(d.get("t0", 0.0)), sigma_l=d.get("sigma_l"),
            mode_weights={int(k): complex(v) for k, v in
                          d.get("modes", {"0": 1.0}).items()})

    def initial_state(self) -> DensityMatrix:
        spec = self.raw.get("initial_state", "excited")
        n = self.n_modes
        if isinstance(spec, str):
            single = {
                "excited": np.array([0.0, 1.0]),
                "ground": np.array([1.0, 0.0]),
                "superposition": np.array([1.0, 1.0]) / np.sqrt(2.0),
            }
            if spec not in single:
                raise ConfigError(f"unknown initial state {spec!r}")
            psi = np.array([1.0])
            for _ in range(n):
                psi = np.kron(psi, single[spec])
            return DensityMatrix.pure(psi)
        return DensityMatrix.pure(np.asarray(spec, dtype=complex))

    def omega_s(self) -> float:
        return float(self.raw["model"].get("omega_s", 1.0))

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls(raw)


def _validate_config(raw: dict) -> None:
    for key in ("id", "model", "grid", "solvers"):
        if key not in raw:
            raise ConfigError(f"config missing required key {key!r}")
    model = raw["model"]
    kind = model.get("kind")
    if kind not in ("emitters", "modes"):
        raise ConfigError("model.kind must be 'emitters' or 'modes'")
    if len(model.get("detunings", [])) != int(model.get("n_modes", 0)):
        raise ConfigError("detunings must list one entry per mode")
    allowed = EMITTER_SOLVERS if kind == "emitters" else MODE_SOLVERS
    for s in raw["solvers"]:
        if s not in allowed:
            raise ConfigError(f"solver {s!r} not applicable to {kind} scenarios")
    drive = raw.get("drive")
    if "FME" in raw["solvers"]:
        if drive is None or drive.get("kind") != "monochromatic":
            raise ConfigError("FME requires a monochromatic drive")
    if kind == "emitters" and model["spectral"]["type"] != "lorentzian":
        raise ConfigError("emitter scenarios need a Lorentzian bath (pseudo-mode oracle)")
    if raw["grid"]["dt"] <= 0 or raw["grid"]["t_max"] <= 0:
        raise ConfigError("grid needs positive dt and t_max")


def config_hash(config: ScenarioConfig) -> str:
    return hashlib.sha256(config.canonical_json().encode()).hexdigest()


# ---------------------------------------------------------------------------
# regime classification
# ---------------------------------------------------------------------------


def classify_regime(config: ScenarioConfig) -> dict:
    """Energy-scale report: Gamma_FGR/Delta_omega_E, g_SL/Gamma_FGR,
    Delta_omega_L/Delta_omega_E, and a Markovianity label (thresholds 0.1/1.0)."""
    spec = config.spectral()
    drive = config.drive()
    det = config.detunings[0]
    if isinstance(spec, LorentzianSpectral):
        d_omega_e = spec.kappa
        j_at_system = (spec.g_se**2 / np.pi) * spec.kappa / (
            (det - spec.eta) ** 2 + spec.kappa**2)
        gamma_fgr = 2.0 * np.pi * j_at_system
    else:
        d_omega_e = spec.J
        dos = spec.density_of_states(det)
        gamma_fgr = 2.0 * np.pi * spec.g**2 * dos
    ratio = gamma_fgr / d_omega_e
    if ratio < 0.1:
        label = "markovian"
    elif ratio < 1.0:
        label = "non-markovian"
    else:
        label = "deep-non-markovian"
    g_sl = 0.0 if drive is None else float(np.abs(drive.envelope(
        drive.t0 if drive.kind == "gaussian" else 0.0)))
    bw = 0.0 if drive is None else drive.bandwidth()
    return {
        "gamma_fgr": gamma_fgr,
        "delta_omega_e": d_omega_e,
        "backaction_ratio": ratio,
        "drive_to_fgr": (g_sl / gamma_fgr) if gamma_fgr > 0 else float("inf"),
        "bandwidth_ratio": bw / d_omega_e,
        "label": label,
    }


# ---------------------------------------------------------------------------
# emitter-scenario solvers
# ---------------------------------------------------------------------------


def _emitter_observables(n: int) -> dict:
    sz = sigma_z()
    obs = {}
    for i in range(n):
        op = np.array([[1.0 + 0j]])
        for j in range(n):
            op = np.kron(op, sz if j == i else np.eye(2))
        name = "sigma_z" if n == 1 else f"sigma_z_{i + 1}"
        obs[name] = op
    return obs


def _reference_green(config: ScenarioConfig, grid: TimeGrid) -> GreenFunction:
    spec = config.spectral()
    return green_lorentzian_network(config.detunings, spec.g_se, spec.kappa,
                                    spec.eta, grid)


def _run_emitter_solver(name, config, grid, rho0, obs, store_every):
    spec = config.spectral()
    drive = config.drive()
    n = config.n_modes
    det = config.detunings
    opts = config.options
    regime = classify_regime(config)
    gamma_fgr = regime["gamma_fgr"]
    omega_l = config.omega_s() - det[0]
    spectrum = ShiftedSpectrum(spec.g_se, spec.kappa, spec.eta, omega_l)

    if name == "PM":
        g_sl_peak = 0.0 if drive is None else float(np.abs(drive.envelope(
            drive.t0 if drive.kind == "gaussian" else 0.0)))
        n_trunc = opts.get("n_trunc") or estimate_truncation(
            spec.g_se, g_sl_peak, spec.kappa)
        model = PseudoModeModel(n_emitters=n, M=np.diag(det), lam=spec.g_se,
                                kappa=spec.kappa, eta=spec.eta,
                                n_trunc=int(n_trunc), drive=drive)
        return solve_pseudomode(model, rho0, grid, store_every=store_every,
                                observables=obs)
    if name == "LME":
        green = _reference_green(config, grid)
        coeffs = compute_lme_coefficients(green)
        f = drive_samples(drive, grid, n)
        coeffs = attach_drive(coeffs, green, f)
        gen = build_lme_generator(coeffs, target="emitters")
        return propagate_lindblad(rho0, gen, grid, store_every=store_every,
                                  observables=obs)
    if name == "OBE":
        if n == 1:
            gen = obe_generator(det[0], drive, gamma_fgr)
        elif n == 2:
            gen = obe_two_emitter_generator(det, drive, spec.g_se, spec.kappa,
                                            spec.eta)
        else:
            raise SolverRefusal("OBE implemented for one or two emitters")
        return propagate_lindblad(rho0, gen, grid, store_every=store_every,
                                  observables=obs)
    if name in ("FME", "AME", "TDME"):
        if n != 1:
            raise SolverRefusal(f"{name} implemented for a single emitter")
        if name == "FME":
            gen = fme_generator(det[0], drive, spectrum)
        elif name == "TDME":
            gen, _ = tdme_generator(det[0], drive, spectrum, grid)
        else:
            gen, _ = ame_generator(det[0], drive, spectrum, grid)
        return propagate_lindblad(rho0, gen, grid, store_every=store_every,
                                  observables=obs)
    raise ConfigError(f"unknown emitter solver {name!r}")


# ---------------------------------------------------------------------------
# mode-scenario (linear) solvers
# ---------------------------------------------------------------------------


def _run_mode_solver(name, config, grid):
    spec = config.spectral()
    det = config.detunings
    opts = config.options
    n = config.n_modes
    M = np.diag(det).astype(complex)

    if isinstance(spec, TightBindingSpectral):
        n_env = int(opts.get("n_env", 2048))
        if name == "ring":
            if n == 1:
                return green_tb_single(spec, det[0], grid, n_env=n_env)
            return green_tb_pair(spec, det[0], grid, n_env=n_env)
        if name == "direct":
            env = discretize_environment(spec, n_env)
            return solve_green_direct(LinearModel(M, env), grid).green_function()
        if name == "volterra":
            return solve_green_volterra(LinearModel(M, spec), grid)
        if name == "markovian":
            return green_markovian(LinearModel(M, spec), grid)
        raise ConfigError(f"solver {name!r} unsupported for tight-binding scenarios")

    if name == "closed-form":
        return green_lorentzian_network(det, spec.g_se, spec.kappa, spec.eta, grid)
    if name == "volterra":
        return solve_green_volterra(LinearModel(M, spec), grid)
    if name == "direct":
        n_env = int(opts.get("n_env", 400))
        env = discretize_environment(spec, n_env, n_system=n)
        return solve_green_direct(LinearModel(M, env), grid).green_function()
    if name == "markovian":
        return green_markovian(LinearModel(M, spec), grid)
    raise ConfigError(f"unknown mode solver {name!r}")


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------


@dataclass
class ComparisonSeries:
    times: np.ndarray
    infidelity: np.ndarray
    neg_log: np.ndarray
    observable_diffs: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """Max/mean infidelity with t=0 excluded (both solutions exact there)."""
        mask = self.times > 0
        inf = self.infidelity[mask]
        return {"max_infidelity": float(inf.max()) if inf.size else 0.0,
                "mean_infidelity": float(inf.mean()) if inf.size else 0.0}


def compare_trajectories(traj_a: Trajectory, traj_b: Trajectory) -> ComparisonSeries:
    """Pointwise Uhlmann infidelity and observable differences on a shared grid."""
    if traj_a.states.shape != traj_b.states.shape:
        raise ValueError("trajectories have different shapes")
    if not np.array_equal(traj_a.sample_indices, traj_b.sample_indices) or \
            traj_a.grid.dt != traj_b.grid.dt:
        raise ValueError("trajectories live on different grids")
    n = traj_a.states.shape[0]
    infid = np.empty(n)
    for k in range(n):
        infid[k] = 1.0 - fidelity(traj_a.states[k], traj_b.states[k])
    infid = np.clip(infid, 0.0, 1.0)
    infid[infid < 1e-14] = 0.0  # below the double-precision resolution of F
    neg_log = -np.log10(np.maximum(infid, 10.0**(-NEG_LOG_CAP)))
    diffs = {}
    for name in traj_a.observables:
        if name in traj_b.observables:
            diffs[name] = np.abs(traj_a.observables[name] - traj_b.observables[name])
    return ComparisonSeries(traj_a.sample_times, infid, neg_log, diffs)


# ---------------------------------------------------------------------------
# scenario execution
# ---------------------------------------------------------------------------


@dataclass
class ResultsBundle:
    config: ScenarioConfig
    series: dict                 # name -> {"t": array, "columns": {name: array}}
    diagnostics: dict
    trajectories: dict = field(default_factory=dict)
    greens: dict = field(default_factory=dict)


def _traj_series(traj: Trajectory) -> dict:
    cols = {}
    for name, vals in traj.observables.items():
        cols[f"re_{name}"] = vals.real
        cols[f"im_{name}"] = vals.imag
    cols["trace_drift"] = traj.trace_drift
    cols["min_eig"] = traj.min_eig
    return {"t": traj.sample_times, "columns": cols}


def green_series(green: GreenFunction) -> dict:
    """GreenFunction export: t then re/im W_ij in row-major ij order."""
    cols = {}
    d = green.n_modes
    for i in range(d):
        for j in range(d):
            cols[f"re_W_{i + 1}{j + 1}"] = green.W[:, i, j].real
            cols[f"im_W_{i + 1}{j + 1}"] = green.W[:, i, j].imag
    return {"t": green.grid.times(), "columns": cols}


def fnm_series(grid: TimeGrid, f: np.ndarray, f_nm: np.ndarray,
               flags: np.ndarray) -> dict:
    cols = {}
    for i in range(f.shape[1]):
        cols[f"re_f_{i + 1}"] = f[:, i].real
        cols[f"im_f_{i + 1}"] = f[:, i].imag
        cols[f"re_fnm_{i + 1}"] = f_nm[:, i].real
        cols[f"im_fnm_{i + 1}"] = f_nm[:, i].imag
        cols[f"abs_fnm_{i + 1}"] = np.abs(f_nm[:, i])
    cols["flag"] = flags.astype(float)
    return {"t": grid.times(), "columns": cols}


def run_scenario(config: ScenarioConfig) -> ResultsBundle:
    """Execute every listed solver on the shared grid; deterministic."""
    grid = config.grid()
    diagnostics = {"regime": classify_regime(config),
                   "config_hash": config_hash(config)}
    series: dict = {}
    bundle = ResultsBundle(config, series, diagnostics)

    if config.kind == "emitters":
        rho0 = config.initial_state()
        obs = _emitter_observables(config.n_modes)
        store_every = config.store_every()
        for name in config.solvers:
            traj = _run_emitter_solver(name, config, grid, rho0, obs, store_every)
            bundle.trajectories[name] = traj
            series[f"traj_{name}"] = _traj_series(traj)
            if traj.meta.get("under_truncated"):
                diagnostics[f"{name}_under_truncated"] = True
        ref = config.raw.get("reference")
        if ref and ref in bundle.trajectories:
            for name, traj in bundle.trajectories.items():
                if name == ref:
                    continue
                comp = compare_trajectories(traj, bundle.trajectories[ref])
                series[f"compare_{name}_vs_{ref}"] = {
                    "t": comp.times,
                    "columns": {"infidelity": comp.infidelity,
                                "neg_log_infidelity": comp.neg_log},
                }
                diagnostics[f"summary_{name}_vs_{ref}"] = comp.summary()
        return bundle

    # linear (modes) scenario
    from .lme import compute_f_nm  # local import to keep module load light

    drive = config.drive()
    n = config.n_modes
    for name in config.solvers:
        green = _run_mode_solver(name, config, grid)
        bundle.greens[name] = green
        series[f"green_{name}"] = green_series(green)
        if drive is not None:
            f = drive_samples(drive, grid, n)
            f_nm, flags = compute_f_nm(green, f)
            series[f"fnm_{name}"] = fnm_series(grid, f, f_nm, flags)
            diagnostics[f"peak_fnm_ratio_{name}"] = [
                float(np.abs(f_nm[:, i]).max()
                      / max(np.abs(f[:, 0]).max(), 1e-300))
                for i in range(n)]
    names = [s for s in config.solvers if s in bundle.greens]
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            wa, wb = bundle.greens[names[a]].W, bundle.greens[names[b]].W
            diagnostics[f"max_dW_{names[a]}_vs_{names[b]}"] = float(
                np.abs(wa - wb).max())
    spec = config.spectral()
    if isinstance(spec, TightBindingSpectral) and config.options.get("bound_states"):
        poles = []
        for win in ((2.0 * spec.J + 1e-9, 8.0 * spec.J),
                    (-8.0 * spec.J, -2.0 * spec.J - 1e-9)):
            poles += find_bound_states(spec, config.detunings[0], win)
        diagnostics["bound_states"] = [
            {"energy": p.energy, "residue": p.residue} for p in poles]
    return bundle


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def _format_value(x: float) -> str:
    if x == 0.0:
        return "0"
    return repr(float(x))


def _write_csv(path: Path, t: np.ndarray, columns: dict) -> None:
    names = ["t"] + list(columns.keys())
    lines = [",".join(names)]
    data = [np.asarray(t, dtype=float)] + [np.asarray(c, dtype=float)
                                           for c in columns.values()]
    for row in zip(*data):
        lines.append(",".join(_format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def export_results(bundle: ResultsBundle, out_dir, formats=("csv",)) -> Path:
    """Write one CSV per series plus a manifest; byte-identical across reruns."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sid = bundle.config.scenario_id
    files = []
    for name, ser in bundle.series.items():
        fname = f"{sid}__{name}.csv"
        if "csv" in formats:
            _write_csv(out / fname, ser["t"], ser["columns"])
        files.append({"name": fname, "series": name,
                      "columns": ["t"] + list(ser["columns"].keys())})
    manifest = {
        "scenario_id": sid,
        "config": bundle.config.raw,
        "config_sha256": config_hash(bundle.config),
        "files": files,
        "diagnostics": _jsonable(bundle.diagnostics),
        "code_version": __version__,
    }
    mpath = out / f"{sid}__manifest.json"
    mpath.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return mpath


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
