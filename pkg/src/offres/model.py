"""Level systems, drive pulses, t0 selection and the multilevel/multiqubit maps.

Conventions
-----------
* Levels are 1-based in reports and labels, 0-based in arrays.
* ``energies`` are angular frequencies with the ground level shifted to 0.
* ``couplings[i, j]`` is the drive matrix element between levels i and j; the
  applied drive is ``amplitude * couplings * cos(carrier * t + phase)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import BadDimension, CouplingUnsupported, NoValidT0

HERMITIAN_RTOL = 1e-12
RATIO_FLAG = 0.1
DELTA_MIN_FACTOR = 10.0
T0_GAMMA_MAX = 0.2
T0_OMEGA_MIN = 5.0
T0_M_MAX = 10**6

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LevelSystem:
    """N levels with a Hermitian drive-coupling matrix.

    Diagonal couplings are zeroed (with a warning) unless ``keep_diagonal``.
    """

    energies: np.ndarray
    couplings: np.ndarray
    label: str = ""
    keep_diagonal: bool = False

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).ravel()
        if e.size < 2:
            raise BadDimension(f"need at least 2 levels, got {e.size}")
        if not np.all(np.isfinite(e)):
            raise ValueError("energies must be finite")
        if np.any(np.diff(e) <= 0):
            raise ValueError("energies must be strictly increasing")
        g = np.asarray(self.couplings, dtype=complex)
        if g.shape != (e.size, e.size):
            raise ValueError(f"couplings shape {g.shape} does not match {e.size} levels")
        scale = max(float(np.abs(g).max()), 1.0)
        if np.abs(g - g.conj().T).max() > HERMITIAN_RTOL * scale:
            raise ValueError("couplings must be Hermitian")
        g = (g + g.conj().T) / 2
        if not self.keep_diagonal and np.any(np.diag(g) != 0):
            warnings.warn("diagonal couplings zeroed", stacklevel=3)
            g = g.copy()
            np.fill_diagonal(g, 0)
        object.__setattr__(self, "energies", _frozen(e - e[0]))
        object.__setattr__(self, "couplings", _frozen(g))

    @property
    def n_levels(self) -> int:
        return self.energies.size

    @property
    def gaps(self) -> np.ndarray:
        """``gaps[i, j] = energies[i] - energies[j]``."""
        return self.energies[:, None] - self.energies[None, :]

    def gap(self, i: int, j: int) -> float:
        """Gap between 1-based levels i and j."""
        return float(self.energies[i - 1] - self.energies[j - 1])

    @property
    def gamma_max(self) -> float:
        off = self.couplings - np.diag(np.diag(self.couplings))
        return float(np.abs(off).max())

    def h0(self) -> np.ndarray:
        return np.diag(self.energies).astype(complex)

    def scaled(self, s: float) -> "LevelSystem":
        """Gaps multiplied by ``s`` and couplings divided by ``s``."""
        return LevelSystem(self.energies * s, self.couplings / s, self.label,
                           self.keep_diagonal)


@dataclass(frozen=True)
class Pulse:
    amplitude: float
    carrier: float
    phase: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0 or not math.isfinite(self.duration):
            raise ValueError(f"pulse duration must be positive, got {self.duration}")
        if not self.amplitude >= 0:
            raise ValueError(f"pulse amplitude must be nonnegative, got {self.amplitude}")
        if self.carrier < 0:
            raise ValueError(f"carrier must be nonnegative, got {self.carrier}")
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))


# A segment is one pulse, or several tones of equal duration played together.
Segment = Union[Pulse, tuple]


def segment_tones(segment: Segment) -> tuple:
    if isinstance(segment, Pulse):
        return (segment,)
    tones = tuple(segment)
    if not tones:
        raise ValueError("empty segment")
    d = tones[0].duration
    if any(p.duration != d for p in tones):
        raise ValueError("simultaneous tones must share one duration")
    return tones


def segment_duration(segment: Segment) -> float:
    return segment_tones(segment)[0].duration


@dataclass(frozen=True)
class PulseSequence:
    """Ordered segments forming one block, replayed ``repeat_count`` times.

    Every replay restarts the block clock, so the sequence propagator is the
    block propagator raised to ``repeat_count``.
    """

    segments: tuple
    repeat_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("sequence needs at least one segment")
        if int(self.repeat_count) != self.repeat_count or self.repeat_count < 1:
            raise ValueError("repeat_count must be a positive integer")
        for s in self.segments:
            segment_tones(s)

    @property
    def block_duration(self) -> float:
        return float(sum(segment_duration(s) for s in self.segments))

    @property
    def total_duration(self) -> float:
        return self.repeat_count * self.block_duration

    @property
    def n_segments(self) -> int:
        return self.repeat_count * len(self.segments)


@dataclass(frozen=True, eq=False)
class TwoQubitSpec:
    dims: tuple
    local_hamiltonians: tuple
    coupling_Jz: float = 0.0
    coupling_Jx: float = 0.0
    drive: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        n1, n2 = (int(d) for d in self.dims)
        if n1 < 2 or n2 < 2:
            raise BadDimension(f"subsystem dimensions must be >= 2, got {self.dims}")
        hs = tuple(np.asarray(h, dtype=complex) for h in self.local_hamiltonians)
        if len(hs) != 2:
            raise ValueError("need exactly two local Hamiltonians")
        for h, n in zip(hs, (n1, n2)):
            if h.shape != (n, n):
                raise ValueError(f"local Hamiltonian shape {h.shape} != ({n}, {n})")
            if np.abs(h - h.conj().T).max() > HERMITIAN_RTOL * max(np.abs(h).max(), 1.0):
                raise ValueError("local Hamiltonians must be Hermitian")
        object.__setattr__(self, "dims", (n1, n2))
        object.__setattr__(self, "local_hamiltonians", tuple(_frozen(h) for h in hs))
        if self.drive is not None:
            d = np.asarray(self.drive, dtype=complex)
            if d.shape != (n1 * n2, n1 * n2):
                raise ValueError("drive must act on the product space")
            object.__setattr__(self, "drive", _frozen(d))


# ----------------------------------------------------------------------------
# validation and t0


@dataclass
class ValidationReport:
    delta_min: float
    drive_carrier: float
    ratios: dict = field(default_factory=dict)
    large_ratios: list = field(default_factory=list)
    resonance_collisions: list = field(default_factory=list)
    degenerate_tones: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.large_ratios or self.resonance_collisions or self.degenerate_tones)

    def lines(self):
        yield f"drive carrier {self.drive_carrier:.6g}, delta_min {self.delta_min:.6g}"
        for (i, j), r in sorted(self.ratios.items()):
            flag = "  FLAG" if r >= RATIO_FLAG else ""
            yield f"|gamma_{i}{j}/omega_{j}{i}| = {r:.6g}{flag}"
        for i, j in self.resonance_collisions:
            yield f"resonance collision: omega_{i}{j} within delta_min of the drive"
        for a, b in self.degenerate_tones:
            yield f"degenerate correction tones: {a} ~ {b}"


def default_delta_min(system: LevelSystem) -> float:
    return DELTA_MIN_FACTOR * system.gamma_max


def correction_tones(system: LevelSystem) -> list:
    """Needed tones as (label, frequency): the qubit carrier, then ω_k1, ω_k2."""
    tones = [("21", system.gap(2, 1))]
    for k in range(3, system.n_levels + 1):
        tones.append((f"{k}1", system.gap(k, 1)))
        tones.append((f"{k}2", system.gap(k, 2)))
    return tones


def validate_system(system: LevelSystem, drive_carrier: float | None = None,
                    delta_min: float | None = None) -> ValidationReport:
    if drive_carrier is None:
        drive_carrier = system.gap(2, 1)
    if delta_min is None:
        delta_min = default_delta_min(system)
    rep = ValidationReport(delta_min=delta_min, drive_carrier=drive_carrier)
    n = system.n_levels
    g = system.couplings
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            r = abs(g[i - 1, j - 1]) / abs(system.gap(j, i))
            rep.ratios[(i, j)] = r
            if r >= RATIO_FLAG:
                rep.large_ratios.append((i, j))
            if (j, i) != (2, 1) and abs(system.gap(j, i) - drive_carrier) < delta_min:
                rep.resonance_collisions.append((j, i))
    tones = correction_tones(system)
    for a, (la, fa) in enumerate(tones):
        if fa < delta_min:
            rep.degenerate_tones.append((la, "0"))
        for lb, fb in tones[a + 1:]:
            if abs(fa - fb) < delta_min:
                rep.degenerate_tones.append((la, lb))
    return rep


def choose_t0_multiple(system: LevelSystem, even: bool = False, m_max: int = T0_M_MAX) -> int:
    """Integer m for ``t0 = m*pi/omega_21``.

    Balances the two small parameters ``gamma_max*t0`` and ``1/(omega_21*t0)``
    over the feasible window. ``even=True`` restricts to even m, which also
    makes ``exp(i*omega_21*t0) = 1``.
    """
    w21 = system.gap(2, 1)
    gmax = system.gamma_max
    if not w21 > 0:
        raise NoValidT0("omega_21 must be positive")
    if not gmax > 0:
        raise NoValidT0("no coupling to balance against")
    m = np.arange(2 if even else 1, m_max + 1, 2 if even else 1, dtype=np.int64)
    t = m * math.pi / w21
    ok = (gmax * t < T0_GAMMA_MAX) & (w21 * t > T0_OMEGA_MIN)
    if not ok.any():
        raise NoValidT0(
            f"gamma_max/omega_21 = {gmax / w21:.3g}: no t0 with gamma*t0 < {T0_GAMMA_MAX} "
            f"and omega_21*t0 > {T0_OMEGA_MIN}"
        )
    obj = np.abs(gmax * t - 1.0 / (w21 * t))
    obj[~ok] = np.inf
    return int(m[int(np.argmin(obj))])


def select_t0(system: LevelSystem, even: bool = False) -> float:
    m = choose_t0_multiple(system, even=even)
    return m * math.pi / system.gap(2, 1)


# ----------------------------------------------------------------------------
# multiqubit <-> multilevel


@dataclass(frozen=True, eq=False)
class TwoQubitMapping:
    """Result of :func:`map_two_qubits`.

    ``basis_change`` has the eigenvectors as columns, in the product basis
    ordered ``|i>|j> -> (i-1)*N2 + j``.
    """

    hamiltonian: np.ndarray
    spectrum: np.ndarray
    basis_change: np.ndarray
    labels: tuple
    drive: np.ndarray

    def level_system(self, perturbation=None, label="two-qubit") -> LevelSystem:
        """The equivalent multilevel system in the eigenbasis.

        Needs a non-degenerate spectrum.
        """
        if np.any(np.diff(self.spectrum) <= 0):
            raise ValueError("spectrum is degenerate; no strictly ordered level system")
        p = self.drive if perturbation is None else np.asarray(perturbation, dtype=complex)
        v = self.basis_change
        g = v.conj().T @ p @ v
        np.fill_diagonal(g, 0)
        return LevelSystem(self.spectrum, (g + g.conj().T) / 2, label)


def product_label(i: int, j: int, n2: int) -> int:
    """1-based multilevel index of product state |b_i>|b_j>."""
    return (i - 1) * n2 + j


def map_two_qubits(spec: TwoQubitSpec) -> TwoQubitMapping:
    n1, n2 = spec.dims
    if (spec.coupling_Jz or spec.coupling_Jx) and (n1, n2) != (2, 2):
        raise CouplingUnsupported("Jz/Jx coupling is defined for two 2-level qubits only")
    h1, h2 = spec.local_hamiltonians
    h = np.kron(h1, np.eye(n2)) + np.kron(np.eye(n1), h2)
    if (n1, n2) == (2, 2):
        h = h + spec.coupling_Jz * np.kron(SIGMA_Z, SIGMA_Z)
        h = h + spec.coupling_Jx * (np.kron(SIGMA_Z, SIGMA_X) + np.kron(SIGMA_X, SIGMA_Z))
    evals, evecs = np.linalg.eigh(h)
    labels = tuple((i, j) for i in range(1, n1 + 1) for j in range(1, n2 + 1))
    drive = (np.zeros_like(h) if spec.drive is None else np.asarray(spec.drive))
    return TwoQubitMapping(_frozen(h), _frozen(evals), _frozen(evecs), labels, _frozen(drive))


@dataclass(frozen=True)
class IndexMap:
    """Embedding of N levels into ``{V1,1,2} x {V2,3..N}``.

    Product basis index of ``(a, b)`` is ``a*(N-1) + b`` with ``a`` in
    ``(V1, 1, 2)`` and ``b`` in ``(V2, 3, ..., N)``, both 0-based.
    """

    n_levels: int
    product_dim: int
    image: tuple
    unphysical: tuple
    labels: tuple

    def embed_state(self, psi):
        psi = np.asarray(psi, dtype=complex)
        out = np.zeros(self.product_dim, dtype=complex)
        out[list(self.image)] = psi
        return out

    def embed_operator(self, op):
        op = np.asarray(op, dtype=complex)
        out = np.zeros((self.product_dim, self.product_dim), dtype=complex)
        idx = np.array(self.image)
        out[np.ix_(idx, idx)] = op
        return out


def embed_bipartite_index_map(n: int) -> IndexMap:
    if n < 3:
        raise BadDimension(f"bipartite embedding needs N >= 3, got {n}")
    n2 = n - 1
    sp1 = ("V1", "1", "2")
    sp2 = ("V2",) + tuple(str(k) for k in range(3, n + 1))
    labels = tuple(f"|{a}>|{b}>" for a in sp1 for b in sp2)
    image = [1 * n2 + 0, 2 * n2 + 0] + [0 * n2 + (k - 2) for k in range(3, n + 1)]
    unphysical = tuple(i for i in range(3 * n2) if i not in set(image))
    return IndexMap(n, 3 * n2, tuple(image), unphysical, labels)
