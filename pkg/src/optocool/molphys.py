"""Rigid symmetric-top rotor in a static electric field.

Energies, first-order Stark shifts, field-dressed eigensystems, parallel-band
line strengths and spontaneous-decay branching between v=1 and v=0.
"""
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .angular import direction_cosine, line_strength_exact
from .constants import AMU, CM1, DEBYE, KB
from .errors import DomainError, LabelingError, NumericError
from .tridiag import eigh_tridiagonal

DEFAULT_J_EXTRA = 30
MIN_J_EXTRA = 10
# adiabatic following step for dressed-state labels
MAX_FOLLOW_STEP = 1e5  # V/m (1 kV/cm)


@dataclass(frozen=True, order=True)
class RotationalState:
    """Rovibrational level |J, K, M> in vibrational level v.

    Construction does not validate, so unphysical combinations can be passed
    to selection-rule queries; use :attr:`is_physical` or :meth:`check`.
    """

    v: int
    J: int
    K: int
    M: int

    @property
    def is_physical(self):
        return self.J >= 0 and abs(self.K) <= self.J and abs(self.M) <= self.J

    def check(self):
        if not self.is_physical:
            raise DomainError(f"invalid quantum numbers {self}")
        return self

    @property
    def stark_factor(self):
        """KM / (J(J+1)) as an exact fraction, 0 for J = 0."""
        if self.J == 0:
            return Fraction(0)
        return Fraction(self.K * self.M, self.J * (self.J + 1))

    def label(self):
        return f"v={self.v}|{self.J},{self.K},{self.M}>"

    def __str__(self):
        return self.label()


@dataclass(frozen=True)
class MoleculeSpec:
    name: str
    mass: float  # kg
    dipole: float  # C m
    rot_const_B: float  # J
    rot_const_A: float  # J
    vib_freq: float  # cm^-1
    decay_rate: float  # 1/s

    def __post_init__(self):
        if self.mass <= 0 or self.dipole <= 0:
            raise DomainError("mass and dipole must be positive")
        if self.rot_const_A <= 0 or self.rot_const_B <= 0:
            raise DomainError("rotational constants must be positive")
        if self.decay_rate < 0:
            raise DomainError("decay rate must be non-negative")

    @classmethod
    def from_dict(cls, d):
        keys = {"name", "mass_amu", "dipole_debye", "A_cm1", "B_cm1", "f_vib_cm1", "gamma_hz"}
        missing = keys - set(d)
        if missing:
            raise DomainError(f"molecule record missing keys: {sorted(missing)}")
        return cls(
            name=str(d["name"]),
            mass=float(d["mass_amu"]) * AMU,
            dipole=float(d["dipole_debye"]) * DEBYE,
            rot_const_B=float(d["B_cm1"]) * CM1,
            rot_const_A=float(d["A_cm1"]) * CM1,
            vib_freq=float(d["f_vib_cm1"]),
            decay_rate=float(d["gamma_hz"]),
        )

    def to_dict(self):
        return {
            "name": self.name,
            "mass_amu": self.mass / AMU,
            "dipole_debye": self.dipole / DEBYE,
            "A_cm1": self.rot_const_A / CM1,
            "B_cm1": self.rot_const_B / CM1,
            "f_vib_cm1": self.vib_freq,
            "gamma_hz": self.decay_rate,
        }

    def replace(self, **changes):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return MoleculeSpec(**d)


def available_molecules():
    root = resources.files("optocool") / "data" / "molecules"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_molecule(name_or_path):
    """Load a molecule-constants JSON file, by path or shipped name (e.g. ``"CF3H"``)."""
    p = Path(name_or_path)
    if p.suffix == ".json" and p.exists():
        text = p.read_text()
    else:
        res = resources.files("optocool") / "data" / "molecules" / f"{name_or_path}.json"
        if not res.is_file():
            raise FileNotFoundError(f"no molecule file or shipped molecule named {name_or_path!r}")
        text = res.read_text()
    return MoleculeSpec.from_dict(json.loads(text))


def rigid_rotor_energy(spec, state):
    """B J(J+1) + (A - B) K^2."""
    state.check()
    J, K = state.J, state.K
    return spec.rot_const_B * J * (J + 1) + (spec.rot_const_A - spec.rot_const_B) * K * K


def first_order_stark(spec, state, field):
    """-|E| d KM / (J(J+1)); positive for low-field seekers (KM < 0)."""
    state.check()
    if field < 0:
        raise DomainError("field magnitude must be non-negative")
    return -field * spec.dipole * float(state.stark_factor)


def kinetic_temperature(spec, speed):
    """Temperature with (m/2) v^2 = (3/2) k_B T."""
    return spec.mass * np.square(speed) / (3.0 * KB)


def dipole_coupling_sq(upper, lower):
    """Parallel-band squared direction-cosine element, summed over polarisation.

    Zero whenever a selection rule is violated or either state is unphysical.
    Normalised so that the sum over all lower states of a given upper state is 1.
    """
    return float(line_strength_exact(upper.J, upper.K, upper.M, lower.J, lower.K, lower.M))


@dataclass(frozen=True)
class BranchingTable:
    upper: RotationalState
    entries: tuple  # ((lower, fraction), ...)

    def as_dict(self):
        return {lo: f for lo, f in self.entries}

    @property
    def total(self):
        return float(sum(f for _, f in self.entries))

    def fraction(self, lower):
        return self.as_dict().get(lower, 0.0)


def allowed_lower_states(upper, v_lower=0):
    """All v_lower levels reachable from ``upper`` under parallel-band rules."""
    out = []
    for J in (upper.J - 1, upper.J, upper.J + 1):
        for M in (upper.M - 1, upper.M, upper.M + 1):
            s = RotationalState(v_lower, J, upper.K, M)
            if s.is_physical and line_strength_exact(upper.J, upper.K, upper.M, J, upper.K, M) > 0:
                out.append(s)
    return out


def zero_field_branching_exact(excited):
    """Exact rational branching fractions for decay of a v=1 level."""
    excited.check()
    if excited.v != 1:
        raise DomainError("decay branching needs a v=1 upper state")
    lows = allowed_lower_states(excited)
    weights = [line_strength_exact(excited.J, excited.K, excited.M, s.J, s.K, s.M) for s in lows]
    total = sum(weights)
    return {s: w / total for s, w in zip(lows, weights)}


def zero_field_branching(excited):
    """Decay fractions into v=0 levels, proportional to the line strengths.

    The omega^3 factor across rotational sublevels is dropped; rotational
    splittings are tiny next to the vibrational quantum.
    """
    exact = zero_field_branching_exact(excited)
    return BranchingTable(excited, tuple((s, float(f)) for s, f in exact.items()))


# --- field-dressed states -------------------------------------------------

@dataclass(frozen=True)
class StarkBlock:
    K: int
    M: int
    j_min: int
    j_max: int
    field: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns over J = j_min..j_max
    labels: tuple = field(default=())  # zero-field J of each column, if followed

    @property
    def j_values(self):
        return np.arange(self.j_min, self.j_max + 1)

    def dominant_j(self):
        return self.j_values[np.argmax(np.abs(self.eigenvectors), axis=0)]


def stark_matrix(spec, K, M, field, j_max):
    """Diagonal and off-diagonal of the (K, M) rotor-plus-field block."""
    j_min = max(abs(K), abs(M))
    js = np.arange(j_min, j_max + 1)
    diag = spec.rot_const_B * js * (js + 1) + (spec.rot_const_A - spec.rot_const_B) * K * K
    dE = spec.dipole * field
    cos_diag = np.array([direction_cosine(j, K, M, j, K, M) for j in js])
    cos_off = np.array([direction_cosine(j + 1, K, M, j, K, M) for j in js[:-1]])
    return diag - dE * cos_diag, -dE * cos_off


def _solve_block(spec, K, M, field, j_max):
    j_min = max(abs(K), abs(M))
    diag, off = stark_matrix(spec, K, M, field, j_max)
    w, v = eigh_tridiagonal(diag, off)
    # fix the arbitrary sign: largest component positive
    idx = np.argmax(np.abs(v), axis=0)
    sgn = np.sign(v[idx, np.arange(v.shape[1])])
    v = v * sgn
    return j_min, w, v


def stark_eigensystem(spec, K, M, field, j_max=None, check_convergence=False):
    """Diagonalise the (K, M) block of the rigid rotor in a field along Z."""
    if field < 0:
        raise DomainError("field magnitude must be non-negative")
    j_min = max(abs(K), abs(M))
    if j_max is None:
        j_max = j_min + DEFAULT_J_EXTRA
    if j_max < j_min + MIN_J_EXTRA:
        raise DomainError(f"j_max must be at least {j_min + MIN_J_EXTRA}")
    j_min, w, v = _solve_block(spec, K, M, field, j_max)
    if check_convergence:
        _, w2, _ = _solve_block(spec, K, M, field, 2 * j_max - j_min)
        scale = np.maximum(np.abs(w[:5]), spec.rot_const_B)
        dev = np.max(np.abs(w2[:5] - w[:5]) / scale)
        if dev >= 1e-10:
            raise NumericError("Stark block not converged in j_max", {"j_max": j_max, "deviation": dev})
    return StarkBlock(K, M, j_min, j_max, float(field), w, v)


def follow_block(spec, K, M, field, j_max=None, max_step=MAX_FOLLOW_STEP):
    """Eigensystem at ``field`` with each column labelled by its zero-field J.

    Labels are carried from zero field by maximal eigenvector overlap in
    field increments no larger than ``max_step``.
    """
    j_min = max(abs(K), abs(M))
    if j_max is None:
        j_max = j_min + DEFAULT_J_EXTRA
    n_steps = max(1, int(np.ceil(field / max_step)))
    _, w, v = _solve_block(spec, K, M, 0.0, j_max)
    labels = np.arange(j_min, j_max + 1)[np.argmax(np.abs(v), axis=0)]
    for f in np.linspace(0.0, field, n_steps + 1)[1:]:
        _, w_new, v_new = _solve_block(spec, K, M, f, j_max)
        overlap = np.abs(v.T @ v_new)  # rows: old, cols: new
        best = np.argmax(overlap, axis=1)
        if len(set(best.tolist())) != len(best):
            raise LabelingError("adiabatic labels collided", {"K": K, "M": M, "field": f})
        top2 = np.sort(overlap, axis=1)[:, -2:]
        ambiguous = np.isclose(top2[:, 0], top2[:, 1], rtol=1e-9, atol=0)
        # states that a truncated basis cannot resolve sit near j_max and are never asked for
        if np.any(ambiguous[: len(ambiguous) - MIN_J_EXTRA]):
            raise LabelingError("equal overlaps in adiabatic following", {"K": K, "M": M, "field": f})
        new_labels = np.empty_like(labels)
        new_labels[best] = labels
        labels, w, v = new_labels, w_new, v_new
    return StarkBlock(K, M, j_min, j_max, float(field), w, v, tuple(int(j) for j in labels))


def transition_amplitudes(upper_vec, upper_block, lower_block):
    """<lower_n| D_q |upper> for every eigenvector of ``lower_block``."""
    K = upper_block.K
    Mu, Ml = upper_block.M, lower_block.M
    ju, jl = upper_block.j_values, lower_block.j_values
    D = np.array([[direction_cosine(a, K, Ml, b, K, Mu) for b in ju] for a in jl])
    return lower_block.eigenvectors.T @ (D @ upper_vec)


@dataclass(frozen=True)
class DressedBranching:
    field: float
    table: BranchingTable  # lower entries carry their adiabatic zero-field labels
    leak_high_j: float
    upper_energy: float
    lower_energies: tuple


def dressed_branching(spec, field, excited_label, j_max=None, high_j=4):
    """Spontaneous-decay branching between field-dressed states.

    Both vibrational levels share the rotational constants of ``spec``.
    Returns fractions keyed by the adiabatic zero-field label of each dressed
    v=0 state, and the summed fraction into dressed states that connect to
    ``J >= high_j``.
    """
    excited_label.check()
    if excited_label.v != 1:
        raise DomainError("excited label must be a v=1 state")
    K, Mu = excited_label.K, excited_label.M
    extra = DEFAULT_J_EXTRA if j_max is None else j_max - max(abs(K), abs(Mu))
    up = follow_block(spec, K, Mu, field, max(abs(K), abs(Mu)) + extra)
    hits = [i for i, j in enumerate(up.labels) if j == excited_label.J]
    if len(hits) != 1:
        raise LabelingError("excited label not found uniquely", {"label": str(excited_label)})
    iu = hits[0]
    vec = up.eigenvectors[:, iu]

    entries = []
    energies = []
    leak = 0.0
    for Ml in (Mu - 1, Mu, Mu + 1):
        j_lo = max(abs(K), abs(Ml))
        lo = follow_block(spec, K, Ml, field, j_lo + extra)
        amp = transition_amplitudes(vec, up, lo)
        for n, a in enumerate(amp):
            w = float(a * a)
            if w < 1e-300:
                continue
            lab = RotationalState(0, lo.labels[n], K, Ml)
            entries.append((lab, w))
            energies.append(float(lo.eigenvalues[n]))
            if lab.J >= high_j:
                leak += w
    table = BranchingTable(excited_label, tuple(entries))
    return DressedBranching(float(field), table, leak, float(up.eigenvalues[iu]), tuple(energies))
