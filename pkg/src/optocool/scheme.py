"""Six-level opto-electrical cooling scheme: states, drives, decay, potential steps."""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .molphys import RotationalState, first_order_stark, zero_field_branching

EXCITED = RotationalState(1, 2, 2, -2)
GROUND_STATES = (
    RotationalState(0, 2, 2, -1),
    RotationalState(0, 2, 2, -2),
    RotationalState(0, 3, 2, -1),
    RotationalState(0, 3, 2, -2),
    RotationalState(0, 3, 2, -3),
)
DEFAULT_STATES = GROUND_STATES + (EXCITED,)

LOW_FIELD, HIGH_FIELD = 1, 2
DEFAULT_DRIVE_RATE = 10e3  # 1/s


def selection_rules_ok(a, b):
    """Parallel-band rules dJ in {0, +-1}, dK = 0, dM in {0, +-1}."""
    return (a.K == b.K and abs(a.J - b.J) <= 1 and abs(a.M - b.M) <= 1
            and a.is_physical and b.is_physical and a != b)


@dataclass(frozen=True)
class DriveSpec:
    src: int
    dst: int
    rate: float  # 1/s, applied in both directions
    region: int
    kind: str  # "mw" or "ir"

    def validate(self, states):
        n = len(states)
        if not (0 <= self.src < n and 0 <= self.dst < n) or self.src == self.dst:
            raise ConfigError(f"drive {self.src}->{self.dst} does not connect two listed states")
        if self.rate < 0:
            raise ConfigError("drive rate must be non-negative")
        if self.region not in (LOW_FIELD, HIGH_FIELD):
            raise ConfigError(f"region must be 1 or 2, got {self.region}")
        if self.kind not in ("mw", "ir"):
            raise ConfigError(f"drive kind must be 'mw' or 'ir', got {self.kind!r}")
        a, b = states[self.src], states[self.dst]
        if not selection_rules_ok(a, b):
            raise ConfigError(f"drive {a} <-> {b} violates parallel-band selection rules")
        if (a.v != b.v) != (self.kind == "ir"):
            raise ConfigError(f"drive {a} <-> {b}: kind {self.kind!r} inconsistent with vibrational change")

    def to_dict(self, states):
        return {"from": _state_key(states[self.src]), "to": _state_key(states[self.dst]),
                "rate_hz": self.rate, "region": self.region, "kind": self.kind}


@dataclass(frozen=True)
class LevelScheme:
    states: tuple
    drives: tuple
    decay: tuple  # ((lower index, rate 1/s), ...) out of the excited state
    excited: int

    def __post_init__(self):
        if sum(s.v == 1 for s in self.states) != 1:
            raise ConfigError("scheme must contain exactly one v=1 state")
        for d in self.drives:
            d.validate(self.states)
        for lo, rate in self.decay:
            if not 0 <= lo < len(self.states) or rate < 0:
                raise ConfigError(f"bad decay channel {lo}, {rate}")

    @property
    def n(self):
        return len(self.states)

    def index(self, state):
        return self.states.index(state)

    def without_drives(self):
        return LevelScheme(self.states, (), self.decay, self.excited)

    def with_decay_rate(self, gamma):
        total = sum(r for _, r in self.decay)
        scale = 0.0 if total == 0 else gamma / total
        if gamma > 0 and total == 0:
            raise ConfigError("cannot rescale a scheme with no decay channels")
        return LevelScheme(self.states, self.drives, tuple((i, r * scale) for i, r in self.decay),
                           self.excited)

    def with_drive_rate(self, rate):
        drives = tuple(DriveSpec(d.src, d.dst, rate, d.region, d.kind) for d in self.drives)
        return LevelScheme(self.states, drives, self.decay, self.excited)


def _state_key(s):
    return [s.v, s.J, s.K, s.M]


def _default_drives(rate):
    idx = {s: i for i, s in enumerate(DEFAULT_STATES)}

    def st(v, J, K, M):
        return idx[RotationalState(v, J, K, M)]

    return (
        DriveSpec(st(0, 2, 2, -2), st(0, 2, 2, -1), rate, HIGH_FIELD, "mw"),
        DriveSpec(st(0, 3, 2, -3), st(0, 3, 2, -2), rate, HIGH_FIELD, "mw"),
        DriveSpec(st(0, 2, 2, -1), st(0, 3, 2, -1), rate, LOW_FIELD, "mw"),
        DriveSpec(st(0, 3, 2, -2), st(0, 3, 2, -1), rate, LOW_FIELD, "mw"),
        DriveSpec(st(0, 3, 2, -1), st(1, 2, 2, -2), rate, LOW_FIELD, "ir"),
    )


def build_default_scheme(spec, drive_rate=DEFAULT_DRIVE_RATE, drives=None):
    """Six-state scheme for a |2,2,-2> parallel-band cooling cycle.

    High field: strong -> weak microwave steps |2,2,-2>-|2,2,-1> and
    |3,2,-3>-|3,2,-2>.  Low field: |2,2,-1> and |3,2,-2> are funnelled through
    |3,2,-1> to the v=1 level by microwave plus infrared drives.  Decay at the
    molecule's rate with zero-field branching, in both regions.
    """
    if drive_rate <= 0:
        raise ConfigError("drive rate must be positive")
    table = zero_field_branching(EXCITED)
    idx = {s: i for i, s in enumerate(DEFAULT_STATES)}
    decay = tuple((idx[lo], spec.decay_rate * f) for lo, f in table.entries)
    if drives is None:
        drives = _default_drives(drive_rate)
    return LevelScheme(DEFAULT_STATES, tuple(drives), decay, idx[EXCITED])


def load_drive_overrides(path_or_records, states=DEFAULT_STATES):
    """Parse drive records ``{from, to, rate_hz, region, kind}``.

    ``from``/``to`` are ``[v, J, K, M]`` lists or indices into ``states``.
    """
    records = path_or_records
    if isinstance(records, (str, Path)):
        records = json.loads(Path(records).read_text())
    if not isinstance(records, list):
        raise ConfigError("drive override must be a JSON list")
    out = []
    for rec in records:
        if not isinstance(rec, dict) or set(rec) != {"from", "to", "rate_hz", "region", "kind"}:
            raise ConfigError(f"drive record must have keys from, to, rate_hz, region, kind: {rec!r}")
        ends = []
        for key in ("from", "to"):
            val = rec[key]
            if isinstance(val, int):
                ends.append(val)
            else:
                try:
                    ends.append(states.index(RotationalState(*[int(x) for x in val])))
                except (TypeError, ValueError):
                    raise ConfigError(f"drive endpoint {val!r} is not a scheme state") from None
        d = DriveSpec(ends[0], ends[1], float(rec["rate_hz"]), int(rec["region"]), str(rec["kind"]))
        d.validate(states)
        out.append(d)
    return tuple(out)


@dataclass(frozen=True)
class PotentialSteps:
    steps: np.ndarray  # J, per state, for region 1 -> region 2
    field1: float
    field2: float


def potential_steps(spec, scheme, field1, field2):
    """First-order Stark energy difference of each state between the regions.

    The v=1 level uses the same formula as its v=0 counterpart.
    """
    if not 0 <= field1 <= field2:
        raise ConfigError("need 0 <= field1 <= field2")
    steps = np.array([first_order_stark(spec, s, field2) - first_order_stark(spec, s, field1)
                      for s in scheme.states])
    return PotentialSteps(steps, float(field1), float(field2))


def max_stark_factor(scheme):
    return max(abs(s.stark_factor) for s in scheme.states)


@dataclass(frozen=True)
class RateMatrices:
    c1: np.ndarray
    c2: np.ndarray

    def region(self, i):
        return self.c1 if i == LOW_FIELD else self.c2


def rate_matrices(scheme):
    """Entry (a', a) is the rate from a' into a; drives symmetric and region-gated."""
    n = scheme.n
    c = {LOW_FIELD: np.zeros((n, n)), HIGH_FIELD: np.zeros((n, n))}
    for d in scheme.drives:
        c[d.region][d.src, d.dst] += d.rate
        c[d.region][d.dst, d.src] += d.rate
    for lo, rate in scheme.decay:
        for m in c.values():
            m[scheme.excited, lo] += rate
    for m in c.values():
        np.fill_diagonal(m, 0.0)
    return RateMatrices(c[LOW_FIELD], c[HIGH_FIELD])


def generator(c):
    """Column-vector generator G with dp/dt = G p for rate matrix ``c``."""
    return c.T - np.diag(c.sum(axis=1))
