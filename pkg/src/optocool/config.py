"""JSON run configuration: schema, defaults and validation.

Every physical key carries its unit in the name.  Unknown keys anywhere are
rejected so typos cannot silently fall back to defaults.
"""
import copy
import json
from pathlib import Path

from .constants import KB
from .errors import ConfigError
from .molphys import RotationalState, load_molecule

MM = 1e-3

DEFAULTS = {
    "molecule": "CF3H",
    "seed": 0,
    "output_dir": "out",
    "stark_map": {
        "K_values": [2],
        "M_values": [-1, -2, -3],
        "fields_V_per_m": [0.0, 5e5, 2e6],
        "j_extra": 30,
        "n_levels": 4,
    },
    "branching": {
        "excited": [1, 2, 2, -2],
        "fields_V_per_m": [0.0, 2e6, 5e6, 7.5e6, 1e7],
        "high_j": 4,
    },
    "cool": {
        "trap": {
            "volume1_mm3": 100.0,
            "volume2_mm3": 100.0,
            "interface_area_mm2": 10.0,
            "field1_V_per_m": 5e5,
            "field_step_initial_V_per_m": 1.5e6,
        },
        "grid": {"bin_width_K": 0.12e-3, "n_bins": None},
        "ramp": {
            "kappa": 1.0,
            "percentile": 0.8,
            "update_interval_s": 10e-3,
            "min_step_V_per_m": 1e4,
            "enabled": True,
        },
        "drive_rate_hz": 10e3,
        "gamma_hz": None,
        "drives": None,
        "n_total": 1.0,
        "v_cutoff_m_per_s": 11.7,
        "duration_s": 10.0,
        "dt_s": 1e-4,
        "snapshot_times_s": [0.0, 0.2, 1.0, 5.0, 10.0],
        "record_interval_s": 10e-3,
    },
    "trajectories": {
        "trap_geometry": {
            "plate_gap_m": 3e-3,
            "half_width_m": 5e-3,
            "micro_period_m": 0.4e-3,
            "micro_field_surface_V_per_m": 5e6,
            "homogeneous_field_V_per_m": 5e5,
            "perimeter_barrier_field_V_per_m": 1e7,
            "perimeter_decay_length_m": 5e-6,
            "top_plate_rotated": False,
        },
        "n_particles": 200,
        "duration_s": 2.0,
        "speed_m_per_s": 10.0,
        "sample_dt_s": 10e-6,
        "state": [0, 2, 2, -2],
        "workers": 1,
        "tau_fine_max_s": 20e-3,
        "tau_max_s": None,  # null: min(1 s, duration / 2)
        "fit_tau_max_s": 10e-3,
    },
}

# keys whose value is a free-form JSON document rather than a section
_OPAQUE = {("cool", "drives")}


def _merge(base, over, path=()):
    if not isinstance(over, dict):
        raise ConfigError(f"section {'.'.join(path) or '<root>'} must be a JSON object")
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {'.'.join(path + (key,))!r}")
        if isinstance(base[key], dict) and (path + (key,)) not in _OPAQUE:
            out[key] = _merge(base[key], val, path + (key,))
        else:
            out[key] = val
    return out


def resolve(user=None, base_dir=None):
    """Merge a user config over the defaults and validate it."""
    cfg = _merge(DEFAULTS, user or {})
    if base_dir is not None:
        cfg["_base_dir"] = str(base_dir)
    validate(cfg)
    # pin file references so the emitted config re-runs from any directory
    mol = _resolve_path(cfg, cfg["molecule"])
    if mol.suffix == ".json" and mol.exists():
        cfg["molecule"] = str(mol.resolve())
    if isinstance(cfg["cool"]["drives"], str):
        cfg["cool"]["drives"] = str(_resolve_path(cfg, cfg["cool"]["drives"]).resolve())
    return cfg


def load(path):
    p = Path(path)
    try:
        user = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return resolve(user, base_dir=p.parent)


def _positive(section, keys, where):
    for k in keys:
        v = section[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"{where}.{k} must be a positive number, got {v!r}")


def _state(val, where):
    if not (isinstance(val, list) and len(val) == 4 and all(isinstance(x, int) for x in val)):
        raise ConfigError(f"{where} must be a list [v, J, K, M] of integers")
    s = RotationalState(*val)
    if not s.is_physical:
        raise ConfigError(f"{where} {val} is not a physical state")
    return s


def _resolve_path(cfg, value):
    p = Path(value)
    if not p.is_absolute() and "_base_dir" in cfg:
        cand = Path(cfg["_base_dir"]) / p
        if cand.exists():
            return cand
    return p


def molecule(cfg):
    name = cfg["molecule"]
    path = _resolve_path(cfg, name)
    try:
        return load_molecule(path if path.suffix == ".json" else name)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None


def validate(cfg):
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    molecule(cfg)

    sm = cfg["stark_map"]
    if not sm["fields_V_per_m"] or any(f < 0 for f in sm["fields_V_per_m"]):
        raise ConfigError("stark_map.fields_V_per_m must be a non-empty list of non-negative fields")
    if sm["j_extra"] < 10 or sm["n_levels"] < 1:
        raise ConfigError("stark_map.j_extra must be >= 10 and n_levels >= 1")

    br = cfg["branching"]
    exc = _state(br["excited"], "branching.excited")
    if exc.v != 1:
        raise ConfigError("branching.excited must be a v=1 state")
    if any(f < 0 for f in br["fields_V_per_m"]):
        raise ConfigError("branching.fields_V_per_m must be non-negative")

    c = cfg["cool"]
    _positive(c["trap"], c["trap"].keys(), "cool.trap")
    _positive(c["grid"], ["bin_width_K"], "cool.grid")
    if c["grid"]["n_bins"] is not None and (not isinstance(c["grid"]["n_bins"], int) or c["grid"]["n_bins"] < 1):
        raise ConfigError("cool.grid.n_bins must be a positive integer or null")
    _positive(c["ramp"], ["kappa", "update_interval_s", "min_step_V_per_m"], "cool.ramp")
    if not 0 < c["ramp"]["percentile"] < 1:
        raise ConfigError("cool.ramp.percentile must lie in (0, 1)")
    _positive(c, ["drive_rate_hz", "n_total", "v_cutoff_m_per_s", "duration_s", "dt_s",
                  "record_interval_s"], "cool")
    if c["gamma_hz"] is not None and c["gamma_hz"] < 0:
        raise ConfigError("cool.gamma_hz must be non-negative or null")
    if any(t < 0 for t in c["snapshot_times_s"]):
        raise ConfigError("cool.snapshot_times_s must be non-negative")
    if isinstance(c["drives"], str) and not _resolve_path(cfg, c["drives"]).exists():
        raise ConfigError(f"drive override file {c['drives']} does not exist")

    t = cfg["trajectories"]
    g = t["trap_geometry"]
    _positive(g, [k for k in g if k != "top_plate_rotated"], "trajectories.trap_geometry")
    if not isinstance(g["top_plate_rotated"], bool):
        raise ConfigError("trajectories.trap_geometry.top_plate_rotated must be true or false")
    _positive(t, ["n_particles", "duration_s", "speed_m_per_s", "sample_dt_s", "workers",
                  "tau_fine_max_s", "fit_tau_max_s"], "trajectories")
    if t["tau_max_s"] is not None:
        _positive(t, ["tau_max_s"], "trajectories")
    st = _state(t["state"], "trajectories.state")
    if st.K * st.M >= 0:
        raise ConfigError("trajectories.state must be a low-field seeker (K*M < 0)")
    if tau_window(cfg)[0] >= t["duration_s"]:
        raise ConfigError("trajectories.tau_max_s must be shorter than the trajectory duration")


def tau_window(cfg):
    """(tau_max, fine_max, fit_tau_max) for the trajectory correlation analysis."""
    t = cfg["trajectories"]
    tau_max = t["tau_max_s"] if t["tau_max_s"] is not None else min(1.0, 0.5 * t["duration_s"])
    return tau_max, min(t["tau_fine_max_s"], tau_max), min(t["fit_tau_max_s"], tau_max)


def public(cfg):
    """Config without private bookkeeping keys, suitable for writing out."""
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


# --- builders ---------------------------------------------------------------

def build_cooling(cfg, spec=None):
    from .ratesim import CoolingConfig, EnergyGrid, RampController, TrapConfig, default_grid
    from .scheme import build_default_scheme, load_drive_overrides

    spec = spec or molecule(cfg)
    c = cfg["cool"]
    if c["gamma_hz"] is not None:
        spec = spec.replace(decay_rate=float(c["gamma_hz"]))
    drives = None
    if c["drives"] is not None:
        src = c["drives"]
        drives = load_drive_overrides(_resolve_path(cfg, src) if isinstance(src, str) else src)
    scheme = build_default_scheme(spec, float(c["drive_rate_hz"]), drives=drives)
    tr = c["trap"]
    trap = TrapConfig(
        volume1=tr["volume1_mm3"] * MM**3,
        volume2=tr["volume2_mm3"] * MM**3,
        interface_area=tr["interface_area_mm2"] * MM**2,
        field1=float(tr["field1_V_per_m"]),
        field_step_initial=float(tr["field_step_initial_V_per_m"]),
    )
    bw = c["grid"]["bin_width_K"] * KB
    if c["grid"]["n_bins"] is None:
        grid = default_grid(spec, c["v_cutoff_m_per_s"], trap, bw, scheme=scheme)
    else:
        grid = EnergyGrid(bw, int(c["grid"]["n_bins"]), spec.mass)
    r = c["ramp"]
    ramp = RampController(kappa=float(r["kappa"]), percentile=float(r["percentile"]),
                          update_interval=float(r["update_interval_s"]),
                          min_step=float(r["min_step_V_per_m"]),
                          current_step=trap.field_step_initial)
    return CoolingConfig(
        spec=spec, scheme=scheme, trap=trap, grid=grid, ramp=ramp,
        n_total=float(c["n_total"]), v_cutoff=float(c["v_cutoff_m_per_s"]),
        duration=float(c["duration_s"]), dt=float(c["dt_s"]),
        snapshot_times=tuple(float(x) for x in c["snapshot_times_s"] if x <= c["duration_s"]),
        record_interval=float(c["record_interval_s"]), ramp_enabled=bool(r["enabled"]),
    )


def build_geometry(cfg):
    from .trapsim import TrapGeometry

    g = cfg["trajectories"]["trap_geometry"]
    return TrapGeometry(
        plate_gap=g["plate_gap_m"], half_width=g["half_width_m"], micro_period=g["micro_period_m"],
        micro_field_surface=g["micro_field_surface_V_per_m"],
        homogeneous_field=g["homogeneous_field_V_per_m"],
        perimeter_barrier_field=g["perimeter_barrier_field_V_per_m"],
        perimeter_decay_length=g["perimeter_decay_length_m"],
        top_plate_rotated=g["top_plate_rotated"],
    )


def build_ensemble(cfg):
    from .trapsim import EnsembleConfig

    t = cfg["trajectories"]
    return EnsembleConfig(
        n_particles=int(t["n_particles"]), duration=float(t["duration_s"]),
        speed=float(t["speed_m_per_s"]), sample_dt=float(t["sample_dt_s"]),
        seed=int(cfg["seed"]), state=RotationalState(*t["state"]), workers=int(t["workers"]),
    )
