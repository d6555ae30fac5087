"""TOML scenario and experiment files.

Keys carry their units (``power_budget_watts``, ``frequency_hz``). Loading
materializes every default so that the resolved configuration can be echoed
next to the results.
"""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli

from .channel import IrsEnvironment, LinkStats, Scenario
from .irs import TWO_PI, IdealIrs, IrsParameters, ParameterBox, VaractorCircuit, VaractorIrs
from .optimizer import OptimizerConfig, normalize_schedule


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, path, problems):
        self.path = str(path)
        self.problems = list(problems)
        super().__init__(f"{self.path}: " + "; ".join(self.problems))


SCENARIO_DEFAULTS = {
    "scenario": {
        "name": "unnamed",
        "power_budget_watts": 1.0,
        "noise_var_watts": 1.0,
        "weights": 1.0,
        "geometry_seed": 0,
        "irs_correlation": 0.0,
    },
    "links": {
        "direct": {"mean_gain": 1.0, "rician_factor": 0.0},
        "tx_irs": {"mean_gain": 1.0, "rician_factor": 0.0},
        "irs_user": {"mean_gain": 1.0, "rician_factor": 0.0},
    },
    "irs": {
        "kind": "ideal",
        "amplitude_bounds": [0.0, 1.0],
        "phase_bounds_rad": [-TWO_PI, TWO_PI],
        "varactor": {
            "frequency_hz": 5e9,
            "series_resistance_ohm": 1.0,
            "series_inductance_henry": 0.7e-9,
            "patch_inductance_henry": 2.5e-9,
            "free_space_impedance_ohm": 376.73,
            "capacitance_bounds_pf": [0.2, 2.0],
        },
    },
}

OPTIMIZER_DEFAULTS = {
    "iterations": 1000,
    "step_size": 0.01,
    "smoothing": 1e-3,
    "smoothing_constant": 1.0,
    "warm_start": True,
    "seed": 0,
    "budget_schedule": [[0, 20]],
    "directions_per_step": 1,
    "error_every": 0,
    "reference_iterations": 100,
    "snapshot_every": 0,
}

REQUIRED_SCENARIO_KEYS = ("tx_antennas", "users", "irs_elements")


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_path(path) -> Path:
    """Existing path as given, else a file of that name among the shipped configs."""
    path = Path(path)
    if path.exists():
        return path
    shipped = resources.files("izosga") / "configs" / path.name
    if shipped.is_file():
        return Path(str(shipped))
    raise FileNotFoundError(f"config file not found: {path}")


def read_toml(path) -> dict:
    path = resolve_path(path)
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(path, [f"parse error: {exc}"]) from exc


def fingerprint(path) -> str:
    return hashlib.sha256(resolve_path(path).read_bytes()).hexdigest()


@dataclass
class LoadedScenario:
    scenario: Scenario
    box: ParameterBox
    irs: IrsParameters
    irs_model: object
    path: Path
    fingerprint: str
    resolved: dict = field(repr=False)

    def __iter__(self):
        # unpacks as (scenario, box, irs)
        return iter((self.scenario, self.box, self.irs))

    def environment(self) -> IrsEnvironment:
        return IrsEnvironment(self.scenario, self.irs_model)


def _bounds(section, key, problems, lo_limit=None, hi_limit=None):
    value = section.get(key)
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        problems.append(f"irs.{key} must be a two-element list")
        return None
    lo, hi = float(value[0]), float(value[1])
    if lo > hi:
        problems.append(f"irs.{key} has lower bound above upper bound")
    if lo_limit is not None and lo < lo_limit:
        problems.append(f"irs.{key} lower bound {lo} below {lo_limit}")
    if hi_limit is not None and hi > hi_limit:
        problems.append(f"irs.{key} upper bound {hi} above {hi_limit}")
    return lo, hi


def build_scenario(raw: dict, path="<memory>", kind: str | None = None) -> LoadedScenario:
    """Validate a parsed scenario tree; every problem is reported at once."""
    cfg = _merge(SCENARIO_DEFAULTS, raw)
    if kind is not None:
        cfg["irs"]["kind"] = kind
    problems = []
    sc = cfg["scenario"]
    for key in REQUIRED_SCENARIO_KEYS:
        if key not in sc:
            problems.append(f"scenario.{key} is required")
    links = {}
    for name in ("direct", "tx_irs", "irs_user"):
        link = cfg["links"].get(name, {})
        unknown = set(link) - {"mean_gain", "rician_factor"}
        if unknown:
            problems.append(f"links.{name} has unknown keys {sorted(unknown)}")
        gain, kappa = float(link.get("mean_gain", 1.0)), float(link.get("rician_factor", 0.0))
        if not (np.isfinite(gain) and gain >= 0):
            problems.append(f"links.{name}.mean_gain must be finite and >= 0")
        if not kappa >= 0:
            problems.append(f"links.{name}.rician_factor must be >= 0")
        links[name] = LinkStats(gain, kappa)
    irs_cfg = cfg["irs"]
    kind = irs_cfg.get("kind")
    if kind not in ("ideal", "varactor"):
        problems.append(f"irs.kind must be 'ideal' or 'varactor', got {kind!r}")
    amp = _bounds(irs_cfg, "amplitude_bounds", problems, 0.0, 1.0)
    phase = _bounds(irs_cfg, "phase_bounds_rad", problems)
    var = irs_cfg["varactor"]
    cap = _bounds(var, "capacitance_bounds_pf", problems, lo_limit=1e-12)
    circuit = None
    try:
        circuit = VaractorCircuit(
            frequency=float(var["frequency_hz"]),
            series_resistance=float(var["series_resistance_ohm"]),
            series_inductance=float(var["series_inductance_henry"]),
            patch_inductance=float(var["patch_inductance_henry"]),
            free_space_impedance=float(var["free_space_impedance_ohm"]),
        )
    except ValueError as exc:
        problems.append(f"irs.varactor: {exc}")
    scenario = None
    if not any(p.startswith("scenario.") for p in problems):
        try:
            scenario = Scenario(
                tx_antennas=sc["tx_antennas"],
                users=sc["users"],
                irs_elements=sc["irs_elements"],
                power_budget=float(sc["power_budget_watts"]),
                noise_vars=sc["noise_var_watts"],
                weights=sc["weights"],
                direct=links["direct"],
                tx_irs=links["tx_irs"],
                irs_user=links["irs_user"],
                geometry_seed=int(sc["geometry_seed"]),
                irs_correlation=float(sc["irs_correlation"]),
            )
        except (ValueError, TypeError) as exc:
            problems.append(str(exc))
    if problems:
        raise ConfigError(path, problems)
    s = scenario.irs_elements
    if kind == "ideal":
        model = IdealIrs(s, amplitude_bounds=amp, phase_bounds=phase)
        initial = np.concatenate([np.full(s, amp[1]), np.zeros(s)])
    else:
        model = VaractorIrs(s, circuit=circuit, capacitance_bounds_pf=cap)
        initial = np.full(s, 0.5 * (cap[0] + cap[1]))
    params = IrsParameters(kind, np.clip(initial, model.box.lower, model.box.upper),
                           circuit if kind == "varactor" else None)
    try:
        fp = fingerprint(path)
    except (FileNotFoundError, TypeError):
        fp = hashlib.sha256(repr(sorted(cfg.items())).encode()).hexdigest()
    return LoadedScenario(scenario, model.box, params, model, Path(str(path)), fp, cfg)


def load_scenario(path, kind: str | None = None) -> LoadedScenario:
    """Parse and validate a scenario file; ``kind`` overrides ``irs.kind``."""
    path = resolve_path(path)
    return build_scenario(read_toml(path), path, kind=kind)


def build_optimizer(section: dict, path="<memory>") -> tuple[OptimizerConfig, dict]:
    cfg = _merge(OPTIMIZER_DEFAULTS, section or {})
    unknown = set(cfg) - set(OPTIMIZER_DEFAULTS) - {"theorem3"}
    if unknown:
        raise ConfigError(path, [f"optimizer has unknown keys {sorted(unknown)}"])
    try:
        schedule = normalize_schedule([tuple(e) for e in cfg["budget_schedule"]])
        opt = OptimizerConfig(
            iterations=int(cfg["iterations"]),
            step_size=cfg["step_size"],
            smoothing=cfg["smoothing"],
            budget_schedule=schedule,
            warm_start=bool(cfg["warm_start"]),
            seed=int(cfg["seed"]),
            smoothing_constant=float(cfg["smoothing_constant"]),
            theorem3=cfg.get("theorem3"),
            directions_per_step=int(cfg["directions_per_step"]),
            error_every=int(cfg["error_every"]),
            reference_iterations=int(cfg["reference_iterations"]),
            snapshot_every=int(cfg["snapshot_every"]),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, [f"optimizer: {exc}"]) from exc
    return opt, cfg
