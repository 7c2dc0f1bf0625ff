"""Monte Carlo trajectories in a parallel-plate trap with microstructured plates.

The plate electrodes at ``y = 0`` and ``y = gap`` each carry the leading
Fourier mode of an alternating strip pattern, a harmonic potential whose
field decays as ``exp(-2 pi d / p)`` with distance ``d`` from the plate.  A
homogeneous field along ``y`` fills the bulk and a smooth exponential wall
stands in for the perimeter electrode.  Trajectories are integrated with an
adaptive Dormand-Prince 5(4) pair that also rejects steps whose energy
drift exceeds a bound.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from scipy.optimize import least_squares

from .constants import KV_PER_CM
from .errors import DomainError, NumericError, StatisticsError
from .molphys import RotationalState

MM = 1e-3


@dataclass(frozen=True)
class TrapGeometry:
    plate_gap: float = 3 * MM
    half_width: float = 5 * MM
    micro_period: float = 0.4 * MM
    micro_field_surface: float = 50 * KV_PER_CM
    homogeneous_field: float = 5 * KV_PER_CM
    perimeter_barrier_field: float = 100 * KV_PER_CM  # W0 = d_el * this
    perimeter_decay_length: float = 0.005 * MM
    top_plate_rotated: bool = False

    def __post_init__(self):
        for name in ("plate_gap", "half_width", "micro_period", "micro_field_surface",
                     "homogeneous_field", "perimeter_barrier_field", "perimeter_decay_length"):
            if not getattr(self, name) > 0:
                raise DomainError(f"trap geometry {name} must be positive")
        if self.micro_period >= self.plate_gap / 2:
            raise DomainError("micro_period must be much smaller than the plate gap")

    def barrier_height(self, spec):
        return spec.dipole * self.perimeter_barrier_field

    def params(self, spec, state):
        """Flat parameter vector consumed by the compiled kernels."""
        f = abs(float(state.stark_factor))
        return np.array([
            self.plate_gap, self.half_width, 2 * math.pi / self.micro_period,
            self.micro_field_surface, self.homogeneous_field,
            self.barrier_height(spec), self.perimeter_decay_length,
            1.0 if self.top_plate_rotated else 0.0,
            spec.dipole * f, spec.mass, self.micro_period,
        ])


# parameter vector layout
GAP, HW, KWAVE, E1, E0, W0, LAM, ROT, DF, MASS, PERIOD = range(11)


@njit(cache=True)
def _field(pr, x, y, z):
    """Field vector and its Jacobian dE_i/dx_j."""
    k = pr[KWAVE]
    ea = pr[E1] * math.exp(-k * y)
    eb = pr[E1] * math.exp(-k * (pr[GAP] - y))
    sx, cx = math.sin(k * x), math.cos(k * x)
    ex = ea * sx
    ey = pr[E0] + ea * cx
    ez = 0.0
    jac = np.zeros((3, 3))
    jac[0, 0] = k * ea * cx
    jac[0, 1] = -k * ea * sx
    jac[1, 0] = -k * ea * sx
    jac[1, 1] = -k * ea * cx
    if pr[ROT] > 0.5:
        su, cu = math.sin(k * z), math.cos(k * z)
        ui = 2
        ez = eb * su
    else:
        su, cu = sx, cx
        ui = 0
        ex += eb * su
    ey -= eb * cu
    jac[ui, ui] += k * eb * cu
    jac[ui, 1] += k * eb * su
    jac[1, ui] += k * eb * su
    jac[1, 1] += -k * eb * cu
    return ex, ey, ez, jac


@njit(cache=True)
def _barrier(pr, u):
    # smooth separable wall for one lateral coordinate: value, derivative
    lam = pr[LAM]
    a = math.exp((u - pr[HW]) / lam)
    b = math.exp((-u - pr[HW]) / lam)
    return pr[W0] * (a + b), pr[W0] * (a - b) / lam


@njit(cache=True)
def _potential_force(pr, x, y, z):
    ex, ey, ez, jac = _field(pr, x, y, z)
    mag = math.sqrt(ex * ex + ey * ey + ez * ez)
    w = pr[DF] * mag
    fx = fy = fz = 0.0
    if mag > 0.0:
        g0 = (ex * jac[0, 0] + ey * jac[1, 0] + ez * jac[2, 0]) / mag
        g1 = (ex * jac[0, 1] + ey * jac[1, 1] + ez * jac[2, 1]) / mag
        g2 = (ex * jac[0, 2] + ey * jac[1, 2] + ez * jac[2, 2]) / mag
        fx = -pr[DF] * g0
        fy = -pr[DF] * g1
        fz = -pr[DF] * g2
    bx, dbx = _barrier(pr, x)
    bz, dbz = _barrier(pr, z)
    return w + bx + bz, fx - dbx, fy, fz - dbz


@njit(cache=True)
def _field_magnitude(pr, x, y, z):
    ex, ey, ez, _ = _field(pr, x, y, z)
    return math.sqrt(ex * ex + ey * ey + ez * ez)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@njit(cache=True)
def _rhs(pr, s, out):
    _, fx, fy, fz = _potential_force(pr, s[0], s[1], s[2])
    m = pr[MASS]
    out[0] = s[3]
    out[1] = s[4]
    out[2] = s[5]
    out[3] = fx / m
    out[4] = fy / m
    out[5] = fz / m


@njit(cache=True)
def _energy(pr, s):
    w, _, _, _ = _potential_force(pr, s[0], s[1], s[2])
    return w + 0.5 * pr[MASS] * (s[3] * s[3] + s[4] * s[4] + s[5] * s[5])


@njit(cache=True)
def _integrate(pr, s0, duration, sample_dt, rtol, energy_tol, h_min):
    """Returns (status, samples, n_collisions, max_rel_energy_error, n_steps, t_end).

    status: 0 ok, 1 lost through a boundary, 2 step-size underflow.
    """
    n_samp = int(math.floor(duration / sample_dt + 1e-9)) + 1
    samples = np.zeros((n_samp, 3))
    s = s0.copy()
    k = np.zeros((7, 6))
    tmp = np.zeros(6)
    y5 = np.zeros(6)
    gap = pr[GAP]
    zone = 0.5 * pr[PERIOD]
    limit = pr[HW] + 20.0 * pr[LAM]

    e0 = _energy(pr, s)
    max_err = 0.0
    pos_scale = gap  # length scale for the error norm
    vel_scale = math.sqrt(s[3] * s[3] + s[4] * s[4] + s[5] * s[5]) + 1e-30

    t = 0.0
    h = 1e-7
    samples[0, 0] = s[3]
    samples[0, 1] = s[4]
    samples[0, 2] = s[5]
    next_i = 1
    in_zone = (s[1] < zone) or (s[1] > gap - zone)
    n_coll = 0
    n_steps = 0
    _rhs(pr, s, k[0])
    while next_i < n_samp:
        t_next = next_i * sample_dt
        land = False
        if t + h >= t_next:
            h = t_next - t
            land = True
        for st in range(1, 7):
            for j in range(6):
                acc = 0.0
                for m in range(st):
                    acc += _A[st, m] * k[m, j]
                tmp[j] = s[j] + h * acc
            _rhs(pr, tmp, k[st])
        err = 0.0
        for j in range(6):
            acc5 = 0.0
            acc4 = 0.0
            for m in range(7):
                acc5 += _B5[m] * k[m, j]
                acc4 += _B4[m] * k[m, j]
            y5[j] = s[j] + h * acc5
            sc = pos_scale if j < 3 else vel_scale
            e = abs(h * (acc5 - acc4)) / (rtol * sc)
            if e > err:
                err = e
        e_new = _energy(pr, y5)
        de = abs(e_new - e0) / abs(e0)
        step_de_ok = True
        # per-step drift bound, measured against the running value
        if err <= 1.0:
            e_prev = _energy(pr, s)
            if abs(e_new - e_prev) > energy_tol * abs(e0):
                step_de_ok = False
        if err <= 1.0 and step_de_ok:
            t = t_next if land else t + h
            for j in range(6):
                s[j] = y5[j]
            for j in range(6):
                k[0, j] = k[6, j]  # FSAL
            n_steps += 1
            if de > max_err:
                max_err = de
            if land:
                samples[next_i, 0] = s[3]
                samples[next_i, 1] = s[4]
                samples[next_i, 2] = s[5]
                next_i += 1
            z_now = (s[1] < zone) or (s[1] > gap - zone)
            if z_now and not in_zone:
                n_coll += 1
            in_zone = z_now
            if s[1] <= 0.0 or s[1] >= gap or abs(s[0]) > limit or abs(s[2]) > limit:
                return 1, samples[:next_i].copy(), n_coll, max_err, n_steps, t
            fac = 0.9 * (1.0 / max(err, 1e-10)) ** 0.2
            fac = min(fac, 5.0)
            if not land:
                h = h * fac
            else:
                h = max(h, h * fac) if fac > 1.0 else h * fac
        else:
            if not step_de_ok and err <= 1.0:
                fac = 0.5
            else:
                fac = max(0.9 * (1.0 / err) ** 0.25, 0.1)
            h = h * fac
        if h < h_min:
            return 2, samples[:next_i].copy(), n_coll, max_err, n_steps, t
    return 0, samples, n_coll, max_err, n_steps, t


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    state: RotationalState = RotationalState(0, 2, 2, -2)
    rng_seed: int = 0


@dataclass
class Trajectory:
    samples: np.ndarray  # velocity samples (n, 3) on a uniform grid
    sample_dt: float
    n_collisions: int
    lost: bool
    max_energy_error: float
    n_steps: int
    duration: float
    seed: int = 0

    @property
    def collision_rate(self):
        return self.n_collisions / self.duration if self.duration > 0 else 0.0


def _require_lfs(state):
    if state.K * state.M >= 0:
        raise DomainError(f"{state} is not a low-field seeker and cannot be trapped")


def _inside(geom, position):
    x, y, z = position
    return 0.0 < y < geom.plate_gap and abs(x) <= geom.half_width and abs(z) <= geom.half_width


def field_magnitude(geom, position):
    """|E| of the analytic trap field at ``position`` (V/m)."""
    if not _inside(geom, position):
        raise DomainError(f"position {tuple(position)} outside the trap")
    pr = geom.params(_DUMMY, RotationalState(0, 1, 1, -1))
    return _field_magnitude(pr, *map(float, position))


class _Dummy:
    dipole = 1.0
    mass = 1.0


_DUMMY = _Dummy()


def stark_potential_and_force(spec, state, geom, position):
    """Low-field-seeker potential energy (J) and force (N)."""
    _require_lfs(state)
    pr = geom.params(spec, state)
    w, fx, fy, fz = _potential_force(pr, *map(float, position))
    return w, np.array([fx, fy, fz])


def total_energy(spec, state, geom, position, velocity):
    w, _ = stark_potential_and_force(spec, state, geom, position)
    return w + 0.5 * spec.mass * float(np.dot(velocity, velocity))


def integrate_trajectory(spec, state, geom, particle, duration, sample_dt=10e-6, rtol=1e-11,
                         energy_tol=1e-9, h_min=1e-15):
    """Integrate one trajectory, sampling the velocity every ``sample_dt``."""
    _require_lfs(state)
    if not _inside(geom, particle.position):
        raise DomainError("particle starts outside the trap")
    pr = geom.params(spec, state)
    s0 = np.concatenate([np.asarray(particle.position, float), np.asarray(particle.velocity, float)])
    status, samples, n_coll, max_err, n_steps, t_end = _integrate(
        pr, s0, float(duration), float(sample_dt), float(rtol), float(energy_tol), float(h_min))
    if status == 2:
        raise NumericError("step size underflow", {"t": t_end, "seed": particle.rng_seed,
                                                   "n_steps": n_steps, "h_min": h_min})
    return Trajectory(samples, sample_dt, n_coll, status == 1, max_err, n_steps,
                      t_end if status == 1 else float(duration), particle.rng_seed)


def random_particle(geom, speed, seed, state=RotationalState(0, 2, 2, -2)):
    """Isotropic direction, uniform position in the homogeneous bulk."""
    rng = np.random.default_rng(seed)
    pos = np.array([
        rng.uniform(-0.5, 0.5) * geom.half_width,
        rng.uniform(0.3, 0.7) * geom.plate_gap,
        rng.uniform(-0.5, 0.5) * geom.half_width,
    ])
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    return Particle(pos, speed * d, state, seed)


# --- correlation analysis -------------------------------------------------

@dataclass
class CorrelationSeries:
    tau: np.ndarray
    c_x: np.ndarray
    c_y: np.ndarray
    c_z: np.ndarray
    collision_rate: float = 0.0
    n_particles: int = 0

    def component(self, i):
        return (self.c_x, self.c_y, self.c_z)[i]


def _lag_sums(a, lags):
    """For each lag l: sum over t of (a[t] - a[t+l])^2 and the pair count."""
    n = a.size
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    fa = np.fft.rfft(a, nfft)
    auto = np.fft.irfft(fa * np.conj(fa), nfft)[:n]
    sq = np.concatenate([[0.0], np.cumsum(a * a)])
    out = np.empty(len(lags))
    cnt = np.empty(len(lags))
    for j, l in enumerate(lags):
        m = n - l
        s_head = sq[m]  # a[0:m]^2
        s_tail = sq[n] - sq[l]  # a[l:n]^2
        out[j] = s_head + s_tail - 2.0 * auto[l]
        cnt[j] = m
    out[np.asarray(lags) == 0] = 0.0
    return np.maximum(out, 0.0), cnt


def lag_indices(tau_grid, sample_dt):
    lags = np.rint(np.asarray(tau_grid) / sample_dt).astype(np.int64)
    if np.any(np.abs(lags * sample_dt - np.asarray(tau_grid)) > 1e-6 * sample_dt + 1e-15):
        raise StatisticsError("tau grid must be a multiple of the sampling interval")
    return lags


def velocity_correlation(samples, tau_grid, sample_dt, collision_rate=0.0):
    """<(|v_i(t)| - |v_i(t+tau)|)^2>, time-averaged within each trajectory then
    averaged over trajectories.

    ``samples`` is one ``(n, 3)`` array or a sequence of them.
    """
    if isinstance(samples, np.ndarray) and samples.ndim == 2:
        samples = [samples]
    lags = lag_indices(tau_grid, sample_dt)
    acc = np.zeros((3, len(lags)))
    n_used = 0
    for s in samples:
        s = np.abs(np.asarray(s, float))
        if s.shape[0] <= lags.max() + 1:
            continue
        for i in range(3):
            tot, cnt = _lag_sums(s[:, i], lags)
            acc[i] += tot / cnt
        n_used += 1
    if n_used == 0:
        raise StatisticsError("no trajectory is longer than the largest lag")
    acc /= n_used
    return CorrelationSeries(np.asarray(tau_grid, float), acc[0], acc[1], acc[2],
                             float(collision_rate), n_used)


class CorrelationAccumulator:
    """Running ensemble average so trajectories can be dropped after use."""

    def __init__(self, tau_grid, sample_dt):
        self.tau = np.asarray(tau_grid, float)
        self.sample_dt = sample_dt
        self.lags = lag_indices(tau_grid, sample_dt)
        self.acc = np.zeros((3, len(self.lags)))
        self.n = 0
        self.collisions = 0
        self.time = 0.0

    def add(self, traj):
        s = np.abs(traj.samples)
        if s.shape[0] <= self.lags.max() + 1:
            return False
        for i in range(3):
            tot, cnt = _lag_sums(s[:, i], self.lags)
            self.acc[i] += tot / cnt
        self.n += 1
        self.collisions += traj.n_collisions
        self.time += traj.duration
        return True

    def series(self):
        if self.n == 0:
            raise StatisticsError("no usable trajectories")
        c = self.acc / self.n
        rate = self.collisions / self.time if self.time > 0 else 0.0
        return CorrelationSeries(self.tau, c[0], c[1], c[2], rate, self.n)


def mixing_model(tau, c_inf, q, rate):
    return c_inf * (1.0 - (1.0 - q) ** (rate * tau))


@dataclass
class MixingFit:
    q: float
    q_stderr: float
    c_inf: tuple
    residual: float
    components: tuple
    tau_range: tuple

    @property
    def interval(self):
        return (self.q - 1.96 * self.q_stderr, self.q + 1.96 * self.q_stderr)


def fit_mixing_probability(series, components=(0, 1), tau_min=None, tau_max=None):
    """Least-squares fit of c_inf (1 - (1 - q)^(nu tau)) with shared q.

    By default only the large-tau half of the grid is used.
    """
    nu = series.collision_rate
    if not nu > 0:
        raise StatisticsError("collision rate must be positive")
    tau = series.tau
    if tau_max is None:
        tau_max = tau.max()
    if tau_min is None:
        tau_min = 0.5 * tau_max
    sel = (tau >= tau_min) & (tau <= tau_max)
    if sel.sum() < 3:
        raise StatisticsError("too few lag points in the fit window")
    t = tau[sel]
    ys = [series.component(i)[sel] for i in components]
    scale = max(float(np.max(np.abs(y))) for y in ys) or 1.0

    def resid(p):
        q = p[0]
        return np.concatenate([(mixing_model(t, ci, q, nu) - y) / scale for ci, y in zip(p[1:], ys)])

    best = None
    for q0 in (0.05, 0.2, 0.5, 0.9):
        x0 = [q0] + [float(y[-1]) for y in ys]
        r = least_squares(resid, x0, bounds=([1e-6] + [0.0] * len(ys), [1.0] + [np.inf] * len(ys)))
        if r.success and (best is None or r.cost < best.cost):
            best = r
    if best is None:
        raise StatisticsError("mixing fit did not converge")
    dof = max(1, best.fun.size - best.x.size)
    s2 = 2 * best.cost / dof
    try:
        cov = np.linalg.pinv(best.jac.T @ best.jac) * s2
        q_err = float(math.sqrt(max(cov[0, 0], 0.0)))
    except np.linalg.LinAlgError:
        q_err = float("nan")
    return MixingFit(float(best.x[0]), q_err, tuple(float(c) for c in best.x[1:]),
                     float(math.sqrt(s2)) * scale, tuple(components), (float(tau_min), float(tau_max)))


def markov_mixing_samples(n_particles, speed, q, collision_rate, duration, sample_dt, seed=0):
    """Velocity samples from a model in which each collision fully re-randomises the
    direction with probability ``q``.  Collisions are evenly spaced with a random phase."""
    rng = np.random.default_rng(seed)
    n = int(math.floor(duration / sample_dt + 1e-9)) + 1
    t = np.arange(n) * sample_dt
    out = []
    for _ in range(n_particles):
        phase = rng.uniform(0, 1.0 / collision_rate)
        times = np.arange(phase, duration + 1.0 / collision_rate, 1.0 / collision_rate)
        mix = rng.uniform(size=times.size) < q
        mix_times = times[mix]
        n_seg = mix_times.size + 1
        dirs = rng.normal(size=(n_seg, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        seg = np.searchsorted(mix_times, t, side="right")
        out.append(speed * dirs[seg])
    return out


# --- ensemble driver -------------------------------------------------------

@dataclass
class EnsembleConfig:
    n_particles: int = 200
    duration: float = 2.0
    speed: float = 10.0
    sample_dt: float = 10e-6
    seed: int = 0
    state: RotationalState = RotationalState(0, 2, 2, -2)
    workers: int = 1


@dataclass
class EnsembleResult:
    series: CorrelationSeries
    trajectories: list  # per particle: dict of seed, collisions, lost, energy error
    config: EnsembleConfig = None
    geometry: TrapGeometry = None


def particle_seeds(seed, n):
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(n)]


def _run_one(args):
    spec, geom, cfg, seed, tau_grid = args
    p = random_particle(geom, cfg.speed, seed, cfg.state)
    traj = integrate_trajectory(spec, cfg.state, geom, p, cfg.duration, cfg.sample_dt)
    acc = CorrelationAccumulator(tau_grid, cfg.sample_dt)
    acc.add(traj)
    summary = {"seed": seed, "collisions": traj.n_collisions, "lost": traj.lost,
               "max_energy_error": traj.max_energy_error, "steps": traj.n_steps,
               "duration": traj.duration}
    return acc, summary


def run_ensemble(spec, geom, cfg, tau_grid, progress=None):
    """Integrate ``cfg.n_particles`` trajectories and reduce their correlations in seed order."""
    seeds = particle_seeds(cfg.seed, cfg.n_particles)
    jobs = [(spec, geom, cfg, s, tau_grid) for s in seeds]
    total = CorrelationAccumulator(tau_grid, cfg.sample_dt)
    summaries = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = ex.map(_run_one, jobs)
            for i, (acc, summ) in enumerate(results):
                _merge(total, acc)
                summaries.append(summ)
                if progress:
                    progress(i + 1, summ)
    else:
        for i, job in enumerate(jobs):
            acc, summ = _run_one(job)
            _merge(total, acc)
            summaries.append(summ)
            if progress:
                progress(i + 1, summ)
    return EnsembleResult(total.series(), summaries, cfg, geom)


def _merge(total, acc):
    total.acc += acc.acc
    total.n += acc.n
    total.collisions += acc.collisions
    total.time += acc.time


def default_tau_grid(sample_dt=10e-6, fine_max=10e-3, coarse_max=1.0, n_coarse=40):
    """Uniform lags up to ``fine_max`` plus log-spaced lags out to ``coarse_max``."""
    fine = np.arange(0, int(round(fine_max / sample_dt)) + 1, 10) * sample_dt
    coarse = np.geomspace(fine_max, coarse_max, n_coarse + 1)[1:]
    coarse = np.rint(coarse / sample_dt) * sample_dt
    return np.unique(np.concatenate([fine, coarse]))


def geometry_to_dict(geom):
    return asdict(geom)
