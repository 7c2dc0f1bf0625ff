"""Velocity-resolved two-region rate equations with a field-step ramp.

Populations live on a kinetic-energy grid, ``p[region, state, bin]`` with
bin ``k`` covering ``[k*eps, (k+1)*eps)``.  Potential steps are snapped to
whole bins, so moving between regions is a pure index shift that conserves
number and total energy exactly.  Internal-state transitions use exact
matrix exponentials; diffusion between regions is explicit Euler.  The two
are combined by Strang splitting.
"""
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.linalg import expm

from .constants import KB, KV_PER_CM
from .errors import ConfigError, DomainError, NumericError, StepSizeError
from .scheme import LOW_FIELD, PotentialSteps, max_stark_factor, potential_steps, rate_matrices

MM = 1e-3


@dataclass(frozen=True)
class TrapConfig:
    volume1: float = 100 * MM**3
    volume2: float = 100 * MM**3
    interface_area: float = 10 * MM**2
    field1: float = 5 * KV_PER_CM
    field_step_initial: float = 15 * KV_PER_CM

    def __post_init__(self):
        for name in ("volume1", "volume2", "interface_area", "field1", "field_step_initial"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"trap {name} must be positive")

    def volume(self, region):
        return self.volume1 if region == LOW_FIELD else self.volume2


@dataclass(frozen=True)
class EnergyGrid:
    bin_width: float  # J
    n_bins: int
    mass: float  # kg

    def __post_init__(self):
        if self.bin_width <= 0 or self.n_bins < 1:
            raise ConfigError("energy grid needs bin_width > 0 and n_bins >= 1")

    @property
    def energies(self):
        """Representative kinetic energy (k + 1/2) eps of each bin."""
        return (np.arange(self.n_bins) + 0.5) * self.bin_width

    @property
    def speeds(self):
        return np.sqrt(2.0 * self.energies / self.mass)

    def speed_of(self, k):
        return math.sqrt(2.0 * (k + 0.5) * self.bin_width / self.mass)


DEFAULT_BIN_WIDTH_K = 0.12e-3  # k_B x 0.12 mK


def default_grid(spec, v_cutoff, trap=None, bin_width=DEFAULT_BIN_WIDTH_K * KB, n_bins=None,
                 scheme=None):
    """Grid covering the cutoff energy plus headroom for two initial potential steps."""
    e_cut = 0.5 * spec.mass * v_cutoff**2
    if n_bins is None:
        trap = trap or TrapConfig()
        fmax = float(max_stark_factor(scheme)) if scheme is not None else 2.0 / 3.0
        step = fmax * spec.dipole * trap.field_step_initial
        n_bins = int(math.ceil((e_cut + 2.0 * step) / bin_width)) + 1
    return EnergyGrid(bin_width, int(n_bins), spec.mass)


@dataclass
class Ensemble:
    grid: EnergyGrid
    populations: np.ndarray  # (2, n_states, n_bins)

    def copy(self):
        return Ensemble(self.grid, self.populations.copy())

    @property
    def total(self):
        return float(self.populations.sum())

    def kinetic_histogram(self):
        return self.populations.sum(axis=(0, 1))

    def total_energy(self, shifts):
        """Kinetic plus region-2 potential energy, using integer bin shifts."""
        e = self.grid.energies
        kin = float((self.populations.sum(axis=(0, 1)) * e).sum())
        pot = float((self.populations[1].sum(axis=1) * np.asarray(shifts)).sum()) * self.grid.bin_width
        return kin + pot


def init_ensemble(grid, n_total, v_cutoff, n_states=6, excited=5):
    """v^2 dv speed distribution up to ``v_cutoff``; v=0 states and regions equally filled."""
    if v_cutoff <= 0 or n_total <= 0:
        raise ConfigError("need v_cutoff > 0 and n_total > 0")
    e_cut = 0.5 * grid.mass * v_cutoff**2
    if grid.bin_width > 0.01 * e_cut:
        raise ConfigError("energy grid too coarse to resolve the cutoff (bin > 1% of cutoff energy)")
    if grid.n_bins * grid.bin_width < e_cut:
        raise ConfigError("energy grid does not reach the cutoff energy")
    edges = np.minimum(np.arange(grid.n_bins + 1) * grid.bin_width, e_cut)
    # v^2 dv  ∝  sqrt(E) dE
    w = np.diff(edges**1.5)
    w /= w.sum()
    pops = np.zeros((2, n_states, grid.n_bins))
    ground = [a for a in range(n_states) if a != excited]
    for i in range(2):
        for a in ground:
            pops[i, a] = w * n_total / (2 * len(ground))
    return Ensemble(grid, pops)


def stationary_ensemble(grid, trap, n_total, n_states=6, bins=None, shifts=None):
    """Discrete image of p ∝ V_i v^2 dv: occupancy ∝ V_i v_k per energy bin.

    ``bins`` truncates the distribution at a total energy of ``bins`` bins;
    region 2 is then cut ``shifts[a]`` bins lower so the cut is flux-neutral.
    """
    v = grid.speeds
    shifts = np.zeros(n_states, dtype=np.int64) if shifts is None else np.asarray(shifts)
    pops = np.zeros((2, n_states, grid.n_bins))
    for a in range(n_states):
        pops[0, a] = trap.volume1 * v
        pops[1, a] = trap.volume2 * v
        if bins is not None:
            pops[0, a, bins:] = 0.0
            pops[1, a, max(bins - int(shifts[a]), 0):] = 0.0
    pops *= n_total / pops.sum()
    return Ensemble(grid, pops)


# --- internal-state transitions -------------------------------------------

class TransitionPropagator:
    """exp(G dt) for both regions, with an extra row integrating gamma * N_e."""

    def __init__(self, rates, dt, excited=None, decay_rate=0.0):
        if dt <= 0:
            raise StepSizeError("transition dt must be positive", {"dt": dt})
        self.dt = dt
        n = rates.c1.shape[0]
        self.props = []
        self.counters = []
        for c in (rates.c1, rates.c2):
            g = np.zeros((n + 1, n + 1))
            g[:n, :n] = c.T - np.diag(c.sum(axis=1))
            if excited is not None:
                g[n, excited] = decay_rate
            p = expm(g * dt)
            self.props.append(np.ascontiguousarray(p[:n, :n]))
            self.counters.append(p[n, :n].copy())

    def apply(self, pops):
        """Advance ``pops`` in place; return the integral of gamma * N_e over dt."""
        decays = 0.0
        for i in range(2):
            decays += float((self.counters[i] @ pops[i]).sum())
            pops[i] = self.props[i] @ pops[i]
        return decays


def _check_nonnegative(pops, where):
    scale = max(float(np.abs(pops).max()), 1e-300)
    lo = float(pops.min())
    if lo < -1e-12 * scale:
        raise NumericError(f"negative population after {where}", {"min": lo, "scale": scale})
    if lo < 0:
        np.maximum(pops, 0.0, out=pops)


_PROP_CACHE = {}


def transition_substep(ens, rates, dt):
    """Exact exponential of each region's generator applied to every bin."""
    key = (rates.c1.tobytes(), rates.c2.tobytes(), float(dt))
    prop = _PROP_CACHE.get(key)
    if prop is None:
        if len(_PROP_CACHE) > 64:
            _PROP_CACHE.clear()
        prop = _PROP_CACHE[key] = TransitionPropagator(rates, dt)
    out = ens.copy()
    prop.apply(out.populations)
    _check_nonnegative(out.populations, "transition substep")
    return out


# --- diffusion between regions --------------------------------------------

def snap_shifts(steps, grid, tol=1e-9):
    """Integer bin shift per state; raises if a step is not a whole number of bins."""
    s = np.asarray(steps.steps if isinstance(steps, PotentialSteps) else steps) / grid.bin_width
    r = np.rint(s)
    if np.any(np.abs(s - r) > tol * np.maximum(1.0, np.abs(s))):
        raise ConfigError(f"potential steps must be whole multiples of the bin width, got {s.tolist()}")
    if np.any(r < 0):
        raise ConfigError("potential steps must be non-negative")
    return r.astype(np.int64)


class Diffusion:
    """Explicit-Euler exchange between regions for fixed integer shifts."""

    def __init__(self, grid, trap, shifts, dt):
        self.grid, self.trap, self.dt = grid, trap, dt
        self.shifts = np.asarray(shifts, dtype=np.int64)
        v = grid.speeds
        n = grid.n_bins
        a = trap.interface_area
        self.out2 = []  # per state: fraction leaving region 2 bin k into region 1 bin k+s
        self.out1 = []  # per state: fraction leaving region 1 bin k+s into region 2 bin k
        max_rate = 0.0
        for s in self.shifts:
            m = n - s
            if m <= 0:
                self.out2.append(np.zeros(0))
                self.out1.append(np.zeros(0))
                continue
            r2 = a / trap.volume2 * v[:m] / 4.0
            r1 = a / trap.volume1 * v[:m] ** 2 / (4.0 * v[s:])
            max_rate = max(max_rate, float(r2.max()), float(r1.max()))
            self.out2.append(r2 * dt)
            self.out1.append(r1 * dt)
        self.max_rate = max_rate
        if dt * max_rate >= 0.5:
            raise StepSizeError("diffusion step violates dt * rate < 0.5",
                                {"dt": dt, "max_rate": max_rate})

    def apply(self, pops):
        n = self.grid.n_bins
        for a, s in enumerate(self.shifts):
            m = n - s
            if m <= 0:
                continue
            p1 = pops[0, a]
            p2 = pops[1, a]
            f21 = self.out2[a] * p2[:m]
            f12 = self.out1[a] * p1[s:]
            net = f21 - f12
            p2[:m] -= net
            p1[s:] += net


def diffusion_substep(ens, trap, steps, dt):
    """One explicit-Euler diffusion step for snapped per-state potential steps."""
    shifts = snap_shifts(steps, ens.grid)
    out = ens.copy()
    Diffusion(ens.grid, trap, shifts, dt).apply(out.populations)
    _check_nonnegative(out.populations, "diffusion substep")
    return out


# --- percentile and ramp --------------------------------------------------

def _weighted_quantile(hist, values, q):
    total = hist.sum()
    nz = np.nonzero(hist > 0)[0]
    w = hist[nz]
    x = values[nz]
    # Hazen positions: each bin's mass centred on its representative value
    pos = (np.cumsum(w) - 0.5 * w) / total
    return float(np.interp(q, pos, x))


def percentile_kinetic(ens, q=0.8):
    """q-quantile of kinetic energy over both regions and all states."""
    if not 0 < q < 1:
        raise DomainError("percentile must lie strictly between 0 and 1")
    hist = ens.kinetic_histogram()
    if not hist.sum() > 0:
        raise DomainError("percentile of an empty ensemble")
    return _weighted_quantile(hist, ens.grid.energies, q)


def step_quantum(spec, scheme, grid):
    """Field-step increment that moves every state's potential by whole bins."""
    fr = [abs(s.stark_factor) for s in scheme.states if s.stark_factor != 0]
    g = reduce(lambda a, b: Fraction(math.gcd(a.numerator * b.denominator, b.numerator * a.denominator),
                                     a.denominator * b.denominator), fr)
    return grid.bin_width / (spec.dipole * float(g))


@dataclass
class RampController:
    kappa: float = 1.0
    percentile: float = 0.8
    update_interval: float = 10e-3
    min_step: float = 100.0 * 100.0  # 100 V/cm
    current_step: float = 15 * KV_PER_CM

    def __post_init__(self):
        if self.kappa <= 0 or not 0 < self.percentile < 1 or self.update_interval <= 0:
            raise ConfigError("ramp needs kappa > 0, 0 < percentile < 1, update_interval > 0")
        if self.min_step <= 0 or self.current_step < self.min_step:
            raise ConfigError("ramp needs 0 < min_step <= current_step")

    def snapped(self, step, spec, scheme, grid):
        qz = step_quantum(spec, scheme, grid)
        n = max(math.floor(step / qz + 1e-9), math.ceil(self.min_step / qz - 1e-9), 1)
        return n * qz


def update_ramp(ctrl, ens, spec, scheme, grid=None):
    """Field step proportional to the q-th kinetic-energy percentile, never rising."""
    grid = grid or ens.grid
    e_q = percentile_kinetic(ens, ctrl.percentile)
    candidate = ctrl.kappa * e_q / (float(max_stark_factor(scheme)) * spec.dipole)
    new = max(min(ctrl.current_step, candidate), ctrl.min_step)
    # snapping rounds down unless that would breach min_step
    new = ctrl.snapped(new, spec, scheme, grid)
    ctrl.current_step = new
    return new


# --- full run -------------------------------------------------------------

@dataclass
class CoolingRecord:
    time: float
    temperature_p80: float
    field_step: float
    total_number: float
    cumulative_decays_per_molecule: float


@dataclass
class CoolingConfig:
    spec: object
    scheme: object
    trap: TrapConfig = field(default_factory=TrapConfig)
    grid: EnergyGrid = None
    ramp: RampController = None
    n_total: float = 1.0
    v_cutoff: float = 11.7
    duration: float = 10.0
    dt: float = 1e-4
    snapshot_times: tuple = (0.0, 0.2, 1.0, 5.0, 10.0)
    record_interval: float = None  # defaults to the ramp interval
    ramp_enabled: bool = True
    initial: Ensemble = None

    def resolved(self):
        c = replace(self)
        if c.grid is None:
            c.grid = default_grid(c.spec, c.v_cutoff, c.trap, scheme=c.scheme)
        if c.ramp is None:
            c.ramp = RampController(current_step=c.trap.field_step_initial)
        if c.record_interval is None:
            c.record_interval = c.ramp.update_interval
        if c.duration <= 0 or c.dt <= 0:
            raise ConfigError("duration and dt must be positive")
        return c


@dataclass
class CoolingResult:
    records: list
    snapshots: dict  # time -> Ensemble
    final: Ensemble
    config: CoolingConfig
    decays: float = 0.0


def _steps_for(spec, scheme, trap, grid, field_step):
    ps = potential_steps(spec, scheme, trap.field1, trap.field1 + field_step)
    return snap_shifts(ps, grid)


def run_cooling(config, progress=None):
    """Strang-split integration of the rate equations with periodic ramp updates."""
    cfg = config.resolved()
    spec, scheme, trap, grid, ctrl = cfg.spec, cfg.scheme, cfg.trap, cfg.grid, cfg.ramp
    ctrl = replace(ctrl)
    ctrl.current_step = ctrl.snapped(ctrl.current_step, spec, scheme, grid)
    ens = cfg.initial.copy() if cfg.initial is not None else init_ensemble(
        grid, cfg.n_total, cfg.v_cutoff, scheme.n, scheme.excited)
    pops = ens.populations
    n0 = ens.total
    gamma = sum(r for _, r in scheme.decay)
    rates = rate_matrices(scheme)
    half = TransitionPropagator(rates, cfg.dt / 2, scheme.excited, gamma)
    full = TransitionPropagator(rates, cfg.dt, scheme.excited, gamma)

    n_steps = int(round(cfg.duration / cfg.dt))
    steps_per_ramp = max(1, int(round(ctrl.update_interval / cfg.dt)))
    steps_per_record = max(1, int(round(cfg.record_interval / cfg.dt)))
    snap_steps = {int(round(t / cfg.dt)): t for t in cfg.snapshot_times if 0 <= t <= cfg.duration + 1e-12}

    shifts = _steps_for(spec, scheme, trap, grid, ctrl.current_step)
    diff = Diffusion(grid, trap, shifts, cfg.dt)
    decays = 0.0
    records = []
    snapshots = {}

    def record(step):
        t = step * cfg.dt
        e80 = percentile_kinetic(ens, 0.8)
        records.append(CoolingRecord(t, 2.0 * e80 / (3.0 * KB), ctrl.current_step, ens.total,
                                     gamma and decays / n0))

    sync = sorted(set(range(0, n_steps + 1, steps_per_ramp)) | set(range(0, n_steps + 1, steps_per_record))
                  | set(snap_steps) | {n_steps})
    record(0)
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = ens.copy()
    if progress is not None:
        progress(0.0, records[-1])
    for k0, k1 in zip(sync[:-1], sync[1:]):
        if cfg.ramp_enabled and k0 % steps_per_ramp == 0 and k0 > 0:
            old = ctrl.current_step
            update_ramp(ctrl, ens, spec, scheme, grid)
            if ctrl.current_step != old:
                shifts = _steps_for(spec, scheme, trap, grid, ctrl.current_step)
                diff = Diffusion(grid, trap, shifts, cfg.dt)
        decays += half.apply(pops)
        for j in range(k1 - k0):
            diff.apply(pops)
            decays += (full if j < k1 - k0 - 1 else half).apply(pops)
        _check_nonnegative(pops, f"step {k1}")
        if k1 % steps_per_record == 0 or k1 == n_steps or k1 in snap_steps:
            record(k1)
        if k1 in snap_steps:
            snapshots[snap_steps[k1]] = ens.copy()
        if progress is not None:
            progress(k1 * cfg.dt, records[-1])
    return CoolingResult(records, snapshots, ens, cfg, decays / n0)
