"""Run configuration: JSON schema, validation, presets.

All frequencies in config files are plain Hz (and are converted to
angular frequencies internally); times are seconds.  The loader rejects
unknown keys so typos cannot silently disable a noise channel.

Example:

    {
      "physical": {"trap_frequency_hz": 207e3, "gradient_t_per_m": 38.5},
      "schedule": {"rabi_target_hz": 26.6e3, "carrier_target_hz": 50e3,
                   "loops": 2, "phase_flips": 31},
      "model": {"kind": "full"},
      "noise": {"magnetic": {"tau_s": 2e-4, "t2_s": 2e-3},
                "drive": {"tau_s": 1e-3, "relative_std": 0.0025}},
      "heating": {"rate_phonons_per_s": 200.0},
      "ensemble": {"realizations": 20, "master_seed": 1234}
    }
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field

from . import constants as const
from .controls import (
    ControlSchedule,
    PhysicalParams,
    qubit_splitting,
    solve_schedule,
    valid_dd_amplitudes,
)
from .models import StaticErrors
from .noise import DriveNoise, LindbladChannel, MagneticNoise, heating_channel
from .propagate import IntegratorConfig

SCHEMA_VERSION = 1
TWO_PI = const.TWO_PI


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def _section(raw: dict, name: str, allowed: dict, required=()) -> dict:
    """Validate one config section against its allowed keys with defaults."""
    data = raw.get(name)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be an object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {sorted(unknown)}")
    for key in required:
        if key not in data:
            raise ConfigError(f"missing required key '{name}.{key}'")
    out = dict(allowed)
    out.update(data)
    return out


@dataclass(frozen=True)
class ScheduleInputs:
    rabi_target: float          # rad/s
    carrier_target: float       # rad/s
    loops: int = 2
    phase_flips: int = 31
    gate_angle: float = math.pi / 8.0
    phase_modulated: bool = True

    def solve(self, p: PhysicalParams) -> ControlSchedule:
        return solve_schedule(p, self.rabi_target, self.loops,
                              self.phase_flips, self.carrier_target,
                              self.gate_angle, self.phase_modulated)


@dataclass(frozen=True)
class EnsembleConfig:
    realizations: int = 20
    master_seed: int = 12345
    jobs: int = 1
    initial_state: str = "thermal"   # "thermal", "vacuum"
    dissipation: str = "jump"        # "jump", "lindblad"
    apply_pi_pulses: bool = True


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalParams
    schedule: ScheduleInputs
    model_kind: str
    model_options: dict
    magnetic: MagneticNoise | None
    drive: DriveNoise | None
    heating: LindbladChannel | None
    static: StaticErrors
    integrator: IntegratorConfig
    ensemble: EnsembleConfig
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    def build_schedule(self) -> ControlSchedule:
        return self.schedule.solve(self.physical)

    def trajectory_kwargs(self) -> dict:
        return dict(
            model_kind=self.model_kind,
            model_options=self.model_options or None,
            magnetic=self.magnetic,
            drive=self.drive,
            heating=self.heating,
            static=self.static,
            integrator=self.integrator,
            initial_modes=self.ensemble.initial_state,
            dissipation_method=self.ensemble.dissipation,
            apply_pi_pulses=self.ensemble.apply_pi_pulses,
        )


_TOP_LEVEL = ("physical", "schedule", "model", "noise", "heating",
              "static_errors", "integrator", "ensemble", "preset_options")


def load_config(raw: dict) -> RunConfig:
    """Validate a raw (JSON-style, Hz-unit) dictionary into a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - set(_TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")

    phys = _section(raw, "physical", {
        "trap_frequency_hz": None, "gradient_t_per_m": None,
        "ion_mass_amu": const.YB171_MASS_AMU,
        "n_cm": 15, "n_br": 5, "initial_nbar": 1.0,
    }, required=("trap_frequency_hz", "gradient_t_per_m"))
    try:
        physical = PhysicalParams(
            nu=TWO_PI * float(phys["trap_frequency_hz"]),
            g_B=float(phys["gradient_t_per_m"]),
            mass=float(phys["ion_mass_amu"]) * const.ATOMIC_MASS_KG,
            n_cm=int(phys["n_cm"]), n_br=int(phys["n_br"]),
            nbar0=float(phys["initial_nbar"]),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid physical parameters: {exc}") from exc

    sched = _section(raw, "schedule", {
        "rabi_target_hz": None, "carrier_target_hz": None,
        "loops": 2, "phase_flips": 31,
        "gate_angle_rad": math.pi / 8.0, "phase_modulated": True,
    }, required=("rabi_target_hz", "carrier_target_hz"))
    schedule = ScheduleInputs(
        rabi_target=TWO_PI * float(sched["rabi_target_hz"]),
        carrier_target=TWO_PI * float(sched["carrier_target_hz"]),
        loops=int(sched["loops"]), phase_flips=int(sched["phase_flips"]),
        gate_angle=float(sched["gate_angle_rad"]),
        phase_modulated=bool(sched["phase_modulated"]),
    )

    model = _section(raw, "model", {
        "kind": "full", "crosstalk": True, "breathing": True,
    })
    kind = model["kind"]
    if kind not in ("full", "simplified", "gate"):
        raise ConfigError(f"unknown model.kind {kind!r}")
    options = {}
    if kind == "full":
        options = {"crosstalk": bool(model["crosstalk"]),
                   "breathing": bool(model["breathing"])}

    noise = _section(raw, "noise", {"magnetic": None, "drive": None})
    magnetic = None
    if noise["magnetic"] is not None:
        m = _section(noise, "magnetic", {
            "tau_s": None, "t2_s": None, "correlated": False,
        }, required=("tau_s", "t2_s"))
        magnetic = MagneticNoise(tau=float(m["tau_s"]), t2=float(m["t2_s"]),
                                 correlated=bool(m["correlated"]))
    drive = None
    if noise["drive"] is not None:
        d = _section(noise, "drive", {
            "tau_s": None, "relative_std": None,
        }, required=("tau_s", "relative_std"))
        drive = DriveNoise(tau=float(d["tau_s"]),
                           relative_std=float(d["relative_std"]))

    heating = None
    if raw.get("heating") is not None:
        h = _section(raw, "heating", {
            "rate_phonons_per_s": None, "temperature_k": 300.0,
        }, required=("rate_phonons_per_s",))
        rate = float(h["rate_phonons_per_s"])
        if rate > 0:
            heating = heating_channel(rate, physical.nu,
                                      float(h["temperature_k"]))

    se = _section(raw, "static_errors", {
        "qubit1_offset_hz": 0.0, "qubit2_offset_hz": 0.0,
        "rabi_scale_error": 0.0, "carrier_scale_error": 0.0,
    })
    static = StaticErrors(
        eps1=TWO_PI * float(se["qubit1_offset_hz"]),
        eps2=TWO_PI * float(se["qubit2_offset_hz"]),
        omega_scale=float(se["rabi_scale_error"]),
        omega_dd_scale=float(se["carrier_scale_error"]),
    )

    integ = _section(raw, "integrator", {
        "method": "rk4", "step_fraction": 1.0 / 50.0,
        "rtol": 1e-8, "atol": 1e-10,
    })
    if integ["method"] not in ("rk4", "adaptive"):
        raise ConfigError(f"unknown integrator.method {integ['method']!r}")
    integrator = IntegratorConfig(method=integ["method"],
                                  step_fraction=float(integ["step_fraction"]),
                                  rtol=float(integ["rtol"]),
                                  atol=float(integ["atol"]))

    ens = _section(raw, "ensemble", {
        "realizations": 20, "master_seed": 12345, "jobs": 1,
        "initial_state": "thermal", "dissipation": "jump",
        "apply_pi_pulses": True,
    })
    if ens["initial_state"] not in ("thermal", "vacuum"):
        raise ConfigError(f"unknown ensemble.initial_state {ens['initial_state']!r}")
    if ens["dissipation"] not in ("jump", "lindblad"):
        raise ConfigError(f"unknown ensemble.dissipation {ens['dissipation']!r}")
    ensemble = EnsembleConfig(
        realizations=int(ens["realizations"]),
        master_seed=int(ens["master_seed"]), jobs=int(ens["jobs"]),
        initial_state=ens["initial_state"], dissipation=ens["dissipation"],
        apply_pi_pulses=bool(ens["apply_pi_pulses"]),
    )
    if ensemble.realizations < 1:
        raise ConfigError("ensemble.realizations must be >= 1")

    return RunConfig(physical=physical, schedule=schedule, model_kind=kind,
                     model_options=options, magnetic=magnetic, drive=drive,
                     heating=heating, static=static, integrator=integrator,
                     ensemble=ensemble, raw=copy.deepcopy(raw))


def set_by_path(raw: dict, path: str, value) -> dict:
    """Copy of a raw config with one dotted-path entry replaced."""
    out = copy.deepcopy(raw)
    keys = path.split(".")
    node = out
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = {}
            node[k] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(f"path '{path}' does not resolve to a setting")
        node = nxt
    node[keys[-1]] = value
    load_config(out)  # reject paths that produce an invalid config
    return out


def merge_configs(base: dict, override: dict) -> dict:
    """Deep merge, with scalar and list values in `override` winning."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge_configs(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def resolved_echo(cfg: RunConfig) -> dict:
    """Human-readable resolved parameters, in both Hz and rad/s."""
    s = cfg.build_schedule()
    p = cfg.physical
    dw = qubit_splitting(p)
    return {
        "lamb_dicke": s.eta,
        "trap_frequency": {"hz": p.nu / TWO_PI, "rad_per_s": p.nu},
        "qubit_splitting": {"hz": dw / TWO_PI, "rad_per_s": dw},
        "rabi": {"hz": s.omega / TWO_PI, "rad_per_s": s.omega},
        "detuning": {"hz": s.delta / TWO_PI, "rad_per_s": s.delta},
        "gate_detuning": {"hz": s.xi / TWO_PI, "rad_per_s": s.xi},
        "carrier": {"hz": s.omega_dd / TWO_PI, "rad_per_s": s.omega_dd},
        "effective_carrier": {"hz": s.eff_dd / TWO_PI, "rad_per_s": s.eff_dd},
        "carrier_snap_delta_hz":
            (s.omega_dd - cfg.schedule.carrier_target) / TWO_PI,
        "loop_divisor_n": s.big_n,
        "loops": s.n_loops,
        "gate_time_s": s.t_gate,
        "phase_flips": s.n_pf,
        "flip_times_s": list(s.flip_times),
        "pi_pulse_times_s": list(s.pi_pulse_times),
        "phase_amplitude_rad": s.phase_amplitude,
        "phase_modulated": s.phase_modulated,
        "mode_truncations": [p.n_cm, p.n_br],
    }


# ---------------------------------------------------------------------------
# Named experiment presets
# ---------------------------------------------------------------------------

_PANELS = {
    # (gradient T/m, trap Hz, rabi Hz, drive tau s, drive rel std, heating /s)
    "left": (20.9, 138e3, 37e3, 500e-6, 0.005, 300.0),
    "right": (38.5, 207e3, 26.6e3, 1e-3, 0.0025, 200.0),
}

# Magnetic-noise strengths swept in the noisy conditions: (tau, T2) in s.
_NOISE_GRADES = [
    ("noise_t2_0.5ms", 0.05e-3, 0.5e-3),
    ("noise_t2_1ms", 0.1e-3, 1e-3),
    ("noise_t2_2ms", 0.2e-3, 2e-3),
]


@dataclass(frozen=True)
class PlanRow:
    condition: str
    value: float
    overrides: dict


def _fig1_base(carrier_hz: float) -> dict:
    # Baseline scheme: one carrier sign flip at mid-gate; the dressed-frame
    # shifts (the carrier-strength term and the quadratic response to a
    # qubit-frequency offset) are constant, so a single flip refocuses them.
    return {
        "physical": {"trap_frequency_hz": 138e3, "gradient_t_per_m": 20.9},
        "schedule": {"rabi_target_hz": 26e3, "carrier_target_hz": carrier_hz,
                     "loops": 2, "phase_flips": 1},
        "model": {"kind": "simplified"},
        "ensemble": {"realizations": 1, "initial_state": "vacuum"},
    }


def _linspace(lo, hi, n):
    step = (hi - lo) / (n - 1)
    return [lo + k * step for k in range(n)]


def preset_fig1a(options: dict) -> tuple[dict, list[PlanRow]]:
    """Bell fidelity against a constant qubit-frequency offset, with and
    without the carrier and its phase modulation."""
    opts = _section({"preset_options": options}, "preset_options", {
        "epsilon_values_hz": _linspace(-10e3, 10e3, 21),
        "carrier_hz": 49e3,
    })
    base = _fig1_base(opts["carrier_hz"])
    rows = []
    conditions = [
        ("no_carrier", {"schedule": {"carrier_target_hz": 0.0}}),
        ("carrier_plain", {"schedule": {"phase_modulated": False}}),
        ("carrier_modulated", {}),
    ]
    for label, cond_over in conditions:
        for eps in opts["epsilon_values_hz"]:
            over = merge_configs(cond_over, {
                "static_errors": {"qubit1_offset_hz": eps,
                                  "qubit2_offset_hz": eps}})
            rows.append(PlanRow(label, eps, over))
    return base, rows


def preset_fig1b(options: dict) -> tuple[dict, list[PlanRow]]:
    """Bell fidelity against a constant carrier-amplitude error, with zero
    versus one carrier sign flip."""
    opts = _section({"preset_options": options}, "preset_options", {
        "scale_values": _linspace(-0.02, 0.02, 21),
        "carrier_hz": 49e3,
    })
    base = _fig1_base(opts["carrier_hz"])
    # Snap the carrier for the flipped variant first; the flip-free grid is
    # twice as fine, so the same value is feasible for both conditions and
    # the comparison isolates the effect of the flip.
    snapped = load_config(base).build_schedule().omega_dd / TWO_PI
    base["schedule"]["carrier_target_hz"] = snapped
    rows = []
    for label, n_pf in (("no_flip", 0), ("one_flip", 1)):
        for sc in opts["scale_values"]:
            rows.append(PlanRow(label, sc, {
                "schedule": {"phase_flips": n_pf},
                "static_errors": {"carrier_scale_error": sc}}))
    return base, rows


def preset_fig1c(options: dict) -> tuple[dict, list[PlanRow]]:
    """Bell fidelity against a constant error on the bichromatic amplitude."""
    opts = _section({"preset_options": options}, "preset_options", {
        "scale_values": _linspace(-0.02, 0.02, 21),
        "carrier_hz": 49e3,
    })
    base = _fig1_base(opts["carrier_hz"])
    rows = [PlanRow("rabi_shift", sc,
                    {"static_errors": {"rabi_scale_error": sc}})
            for sc in opts["scale_values"]]
    return base, rows


def preset_fig3(options: dict) -> tuple[dict, list[PlanRow]]:
    """Log Bell infidelity against the carrier amplitude for the full model:
    noiseless with and without phase modulation, and with stochastic noise
    plus heating at three magnetic-noise strengths."""
    opts = _section({"preset_options": options}, "preset_options", {
        "panel": "right",
        "conditions": ["ideal_modulated", "ideal_unmodulated"]
                      + [g[0] for g in _NOISE_GRADES],
        "carrier_values_hz": None,
        "carrier_min_hz": 20e3,
        "carrier_max_hz": 80e3,
    })
    panel = opts["panel"]
    if panel not in _PANELS:
        raise ConfigError(f"unknown fig3 panel {panel!r}")
    g_b, trap, rabi, tau_d, rel_d, ndot = _PANELS[panel]
    base = {
        "physical": {"trap_frequency_hz": trap, "gradient_t_per_m": g_b},
        "schedule": {"rabi_target_hz": rabi, "carrier_target_hz": 50e3,
                     "loops": 2, "phase_flips": 31},
        "model": {"kind": "full"},
        "ensemble": {"realizations": 20, "initial_state": "thermal"},
    }
    carriers = opts["carrier_values_hz"]
    if carriers is None:
        sched = load_config(base).build_schedule()
        grid = valid_dd_amplitudes(sched, TWO_PI * opts["carrier_min_hz"],
                                   TWO_PI * opts["carrier_max_hz"])
        carriers = [0.0] + [w / TWO_PI for w in grid]

    noise_for = {label: (tau, t2) for label, tau, t2 in _NOISE_GRADES}
    rows = []
    for label in opts["conditions"]:
        for car in carriers:
            over = {"schedule": {"carrier_target_hz": car}}
            if label == "ideal_modulated":
                over["ensemble"] = {"realizations": 1,
                                    "initial_state": "vacuum"}
            elif label == "ideal_unmodulated":
                over["schedule"]["phase_modulated"] = False
                over["ensemble"] = {"realizations": 1,
                                    "initial_state": "vacuum"}
            elif label in noise_for:
                tau, t2 = noise_for[label]
                over["noise"] = {
                    "magnetic": {"tau_s": tau, "t2_s": t2},
                    "drive": {"tau_s": tau_d, "relative_std": rel_d}}
                over["heating"] = {"rate_phonons_per_s": ndot}
            else:
                raise ConfigError(f"unknown fig3 condition {label!r}")
            rows.append(PlanRow(label, car, over))
    return base, rows


PRESETS = {
    "fig1a": preset_fig1a,
    "fig1b": preset_fig1b,
    "fig1c": preset_fig1c,
    "fig3": preset_fig3,
}


def build_preset(name: str, options: dict | None) -> tuple[dict, list[PlanRow]]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](options or {})
