"""Interaction-picture propagation of a driven level system.

In the frame rotating with H0 the drive reads

    H_int(t)[i, j] = amplitude * gamma[i, j] * exp(1j * omega_ij * t) * cos(carrier * t + phase)

with ``omega_ij = E_i - E_j`` and ``t`` measured from the start of the block.
Propagators solve ``i dU/dt = H_int U``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import OrderUnsupported, UnitarityLost
from .model import LevelSystem, PulseSequence, segment_duration, segment_tones

SCHEMES = ("rk4_fixed", "midpoint_exponential", "magnus4")
NORM_TOL = 1e-9


@dataclass(frozen=True)
class IntegratorConfig:
    """Step density and scheme.

    ``rk4_fixed`` is the two-stage Gauss-Legendre Runge-Kutta method (order 4,
    fixed step); ``magnus4`` and ``midpoint_exponential`` exponentiate the
    Hamiltonian per step.
    """

    steps_per_carrier_period: int = 64
    scheme: str = "rk4_fixed"
    unitarity_tolerance: float = 1e-9
    project: bool = False  # polar-project the final propagator onto U(N)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.steps_per_carrier_period < 1:
            raise ValueError("steps_per_carrier_period must be positive")
        if self.scheme == "rk4_fixed" and self.steps_per_carrier_period < 16:
            raise ValueError("rk4_fixed needs at least 16 steps per carrier period")
        if not self.unitarity_tolerance > 0:
            raise ValueError("unitarity_tolerance must be positive")


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        nrm = np.linalg.norm(a)
        if abs(nrm - 1) > NORM_TOL:
            raise ValueError(f"state norm {nrm:.12g} is not 1")
        object.__setattr__(self, "amplitudes", a)

    @property
    def u(self):
        return self.amplitudes[0]

    @property
    def v(self):
        return self.amplitudes[1]

    @property
    def w(self):
        return self.amplitudes[2]

    def evolved(self, U: "PropagatorMatrix") -> "StateVector":
        return StateVector(U.entries @ self.amplitudes)


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    entries: np.ndarray
    frame: str = "interaction"
    t_start: float = 0.0
    t_end: float = 0.0

    @property
    def unitarity_defect(self) -> float:
        return unitarity_defect(self.entries)

    def to_lab(self, system: LevelSystem) -> "PropagatorMatrix":
        if self.frame == "lab":
            return self
        e = system.energies
        u = np.exp(-1j * e * self.t_end)[:, None] * self.entries * np.exp(1j * e * self.t_start)[None, :]
        return PropagatorMatrix(u, "lab", self.t_start, self.t_end)

    def then(self, later: "PropagatorMatrix") -> "PropagatorMatrix":
        """``later`` applied after ``self``."""
        return PropagatorMatrix(later.entries @ self.entries, self.frame, self.t_start, later.t_end)


def unitarity_defect(u) -> float:
    u = np.asarray(u)
    return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())


def polar_project(u):
    w, _, vh = np.linalg.svd(u)
    return w @ vh


# ----------------------------------------------------------------------------
# Hamiltonian


def _drive_factor(tones, ts):
    f = np.zeros_like(ts)
    for p in tones:
        f = f + p.amplitude * np.cos(p.carrier * ts + p.phase)
    return f


def _hamiltonians(system: LevelSystem, tones, ts):
    ts = np.asarray(ts, dtype=float)
    phase = np.exp(1j * system.gaps[None, :, :] * ts[:, None, None])
    return system.couplings[None] * phase * _drive_factor(tones, ts)[:, None, None]


def interaction_hamiltonian(system: LevelSystem, pulse, t: float) -> np.ndarray:
    return _hamiltonians(system, segment_tones(pulse), np.array([t]))[0]


# ----------------------------------------------------------------------------
# integrators


def step_size(system: LevelSystem, pulse, config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """Nominal step: shortest of the carrier and omega_N1 periods over the step density."""
    fastest = max([p.carrier for p in segment_tones(pulse)] + [system.gap(system.n_levels, 1)])
    if fastest <= 0:
        return segment_duration(pulse) / config.steps_per_carrier_period
    return 2 * math.pi / fastest / config.steps_per_carrier_period


def _n_steps(duration, h):
    return max(1, math.ceil(duration / h * (1 - 1e-12)))


def _ordered_product(mats):
    """``mats[-1] @ ... @ mats[0]`` by pairwise reduction (fixed order)."""
    while len(mats) > 1:
        n = len(mats)
        paired = np.matmul(mats[1:n - n % 2:2], mats[0:n - n % 2:2])
        if n % 2:
            paired = np.concatenate([paired, mats[-1:]])
        mats = paired
    return mats[0]


_GAUSS_OFFSET = math.sqrt(3) / 6


def _rk4_step_matrices(gen, ts, h):
    """One classical RK4 step matrix per step for ``Y' = A(t) Y``.

    ``gen(t_array)`` returns the generator stack ``A(t)``.
    """
    a1, a2, a3 = gen(ts), gen(ts + h / 2), gen(ts + h)
    eye = np.eye(a1.shape[-1])
    k1 = a1
    k2 = a2 @ (eye + (h / 2) * k1)
    k3 = a2 @ (eye + (h / 2) * k2)
    k4 = a3 @ (eye + h * k3)
    return eye + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _gauss_rk4_step_matrices(gen, ts, h):
    """Two-stage Gauss-Legendre Runge-Kutta step matrices (order 4).

    Gauss collocation conserves quadratic invariants, so for an anti-Hermitian
    generator each step is unitary up to rounding and the defect does not grow
    with sequence length the way classical RK4's truncation defect does.
    """
    a1, a2 = gen(ts + (0.5 - _GAUSS_OFFSET) * h), gen(ts + (0.5 + _GAUSS_OFFSET) * h)
    m, n = a1.shape[0], a1.shape[-1]
    eye = np.eye(n)
    lhs = np.empty((m, 2 * n, 2 * n), dtype=complex)
    lhs[:, :n, :n] = eye - (h / 4) * a1
    lhs[:, :n, n:] = -h * (0.25 - _GAUSS_OFFSET) * a1
    lhs[:, n:, :n] = -h * (0.25 + _GAUSS_OFFSET) * a2
    lhs[:, n:, n:] = eye - (h / 4) * a2
    k = np.linalg.solve(lhs, np.concatenate([a1, a2], axis=1))
    return eye + (h / 2) * (k[:, :n] + k[:, n:])


def _expm_hermitian(k):
    """``exp(-1j*k)`` for a stack of Hermitian matrices.

    Built as ``I + V (exp(-1j*lam) - 1) V^dag`` so rounding in the
    eigenvectors only touches the small part of a near-identity step.
    """
    lam, v = np.linalg.eigh(k)
    d = -2 * np.sin(lam / 2) ** 2 - 1j * np.sin(lam)
    return np.eye(k.shape[-1]) + (v * d[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _exponential_step_matrices(ham, ts, h, scheme):
    if scheme == "midpoint_exponential":
        return _expm_hermitian(h * ham(ts + h / 2))
    h1 = ham(ts + (0.5 - _GAUSS_OFFSET) * h)
    h2 = ham(ts + (0.5 + _GAUSS_OFFSET) * h)
    comm = h2 @ h1 - h1 @ h2
    k = (h / 2) * (h1 + h2) - 1j * (math.sqrt(3) / 12) * h * h * comm
    return _expm_hermitian((k + np.conj(np.swapaxes(k, -1, -2))) / 2)


def _propagate(system, tones, t_start, duration, h_nominal, scheme):
    n = _n_steps(duration, h_nominal)
    h = duration / n
    ts = t_start + h * np.arange(n)

    def ham(t):
        return _hamiltonians(system, tones, t)

    if scheme == "rk4_fixed":
        steps = _gauss_rk4_step_matrices(lambda t: -1j * ham(t), ts, h)
    else:
        steps = _exponential_step_matrices(ham, ts, h, scheme)
    return _ordered_product(steps)


def _finish(u, config, t_start, t_end):
    if config.project:
        u = polar_project(u)
    defect = unitarity_defect(u)
    if defect > config.unitarity_tolerance:
        raise UnitarityLost(defect, config.unitarity_tolerance)
    return PropagatorMatrix(u, "interaction", t_start, t_end)


def evolve(system: LevelSystem, pulse, config: IntegratorConfig = DEFAULT_CONFIG,
           t_start: float = 0.0) -> PropagatorMatrix:
    """Propagator of one segment (a pulse or simultaneous tones) from ``t_start``."""
    tones = segment_tones(pulse)
    duration = segment_duration(pulse)
    u = _propagate(system, tones, t_start, duration, step_size(system, pulse, config), config.scheme)
    return _finish(u, config, t_start, t_start + duration)


def oracle_scheme(config: IntegratorConfig) -> str:
    return "magnus4" if config.scheme == "rk4_fixed" else "rk4_fixed"


def oracle_evolve(system: LevelSystem, pulse, density_multiplier: int = 8,
                  config: IntegratorConfig = DEFAULT_CONFIG, t_start: float = 0.0) -> PropagatorMatrix:
    """Independent check of :func:`evolve`: the other scheme on a denser grid."""
    if density_multiplier < 2:
        raise ValueError("density_multiplier must be >= 2")
    scheme = oracle_scheme(config)
    dense = IntegratorConfig(config.steps_per_carrier_period * density_multiplier, scheme,
                             config.unitarity_tolerance, config.project)
    return evolve(system, pulse, dense, t_start)


def segment_propagators(system: LevelSystem, sequence: PulseSequence,
                        config: IntegratorConfig = DEFAULT_CONFIG, evolver=None):
    """One propagator per segment of a single block, block clock starting at 0."""
    evolver = evolver or evolve
    out, t = [], 0.0
    for seg in sequence.segments:
        out.append(evolver(system, seg, config=config, t_start=t))
        t += segment_duration(seg)
    return out


def compose(props, repeat_count=1, config: IntegratorConfig = DEFAULT_CONFIG) -> PropagatorMatrix:
    block = props[0].entries
    for p in props[1:]:
        block = p.entries @ block
    u = np.linalg.matrix_power(block, repeat_count) if repeat_count > 1 else block
    t_end = props[-1].t_end * repeat_count
    return _finish(u, config, 0.0, t_end)


def evolve_sequence(system: LevelSystem, sequence: PulseSequence,
                    config: IntegratorConfig = DEFAULT_CONFIG, oracle_density: int | None = None
                    ) -> PropagatorMatrix:
    """Propagator of the whole sequence; ``oracle_density`` switches to the oracle."""
    if oracle_density is None:
        props = segment_propagators(system, sequence, config)
    else:
        def ev(s, p, config, t_start):
            return oracle_evolve(s, p, oracle_density, config, t_start)
        props = segment_propagators(system, sequence, config, evolver=ev)
    return compose(props, sequence.repeat_count, config)


# ----------------------------------------------------------------------------
# Dyson series


def _exp_integral(nu, a, b):
    """``∫_a^b exp(1j*nu*t) dt``, stable for nu -> 0."""
    d = b - a
    x = nu * d / 2
    return np.exp(1j * nu * (a + b) / 2) * d * np.sinc(x / np.pi)


def first_order_closed_form(system: LevelSystem, pulse, t: float, t_start: float = 0.0):
    """First Dyson term ``-i ∫ H_int`` over ``[t_start, t_start + t]`` in closed form."""
    a, b = t_start, t_start + t
    w = system.gaps
    acc = np.zeros_like(system.couplings)
    for p in segment_tones(pulse):
        up = np.exp(1j * p.phase) * _exp_integral(w + p.carrier, a, b)
        down = np.exp(-1j * p.phase) * _exp_integral(w - p.carrier, a, b)
        acc = acc + p.amplitude * (up + down) / 2
    return -1j * system.couplings * acc


def _first_order_adaptive(system, pulse, t, t_start):
    tones = segment_tones(pulse)
    n = system.n_levels

    def f(tau):
        h = _hamiltonians(system, tones, np.array([tau]))[0]
        return np.concatenate([h.real.ravel(), h.imag.ravel()])

    val, _ = integrate.quad_vec(f, t_start, t_start + t, epsabs=1e-15, epsrel=1e-13, limit=20000)
    h_int = val[: n * n].reshape(n, n) + 1j * val[n * n:].reshape(n, n)
    return -1j * h_int


def _nested_grid(system, pulse, order, t, t_start, config, density):
    """All Dyson terms through ``order`` on a fixed grid.

    The nested integrals ``D_k(t) = -i ∫ H D_{k-1}`` are the lower-left blocks of
    the propagator of the block-bidiagonal generator ``[[0], [-iH, 0], ...]``,
    which is integrated with classical RK4 on the step grid of :func:`evolve`.
    """
    tones = segment_tones(pulse)
    n = system.n_levels
    dim = (order + 1) * n

    def gen(ts):
        h = -1j * _hamiltonians(system, tones, ts)
        out = np.zeros((len(ts), dim, dim), dtype=complex)
        for k in range(order):
            out[:, (k + 1) * n:(k + 2) * n, k * n:(k + 1) * n] = h
        return out

    hnom = step_size(system, pulse, config) / density
    steps = _n_steps(t, hnom)
    h = t / steps
    ts = t_start + h * np.arange(steps)
    p = _ordered_product(_rk4_step_matrices(gen, ts, h))
    return [p[k * n:(k + 1) * n, 0:n] for k in range(order + 1)]


def dyson_term(system: LevelSystem, pulse, order: int, t: float, *, t_start: float = 0.0,
               method: str = "auto", config: IntegratorConfig = DEFAULT_CONFIG, density: int = 4):
    """Order-``order`` term of the time-ordered expansion of the propagator.

    ``method``: ``"closed_form"`` (order 1 only), ``"adaptive"`` (order 1 only,
    adaptive Gauss-Kronrod), ``"grid"`` (nested fixed-grid integration), or
    ``"auto"`` (closed form at order 1, grid above).
    """
    if order < 0 or order > 3:
        raise OrderUnsupported(f"Dyson order {order} not supported (0..3)")
    if order == 0:
        return np.eye(system.n_levels, dtype=complex)
    if method == "auto":
        method = "closed_form" if order == 1 else "grid"
    if method in ("closed_form", "adaptive") and order != 1:
        raise OrderUnsupported(f"method {method!r} is only available at order 1")
    if method == "closed_form":
        return first_order_closed_form(system, pulse, t, t_start)
    if method == "adaptive":
        return _first_order_adaptive(system, pulse, t, t_start)
    if method == "grid":
        return _nested_grid(system, pulse, order, t, t_start, config, density)[order]
    raise ValueError(f"unknown method {method!r}")


def dyson_partial_sum(system, pulse, order, t, *, t_start=0.0,
                      config: IntegratorConfig = DEFAULT_CONFIG, density=4):
    return sum(_nested_grid(system, pulse, order, t, t_start, config, density))


# ----------------------------------------------------------------------------
# leakage


@dataclass
class LeakageReport:
    amplitudes: dict = field(default_factory=dict)
    max_leakage_population: float = 0.0
    residual_norm: float = 0.0
    constraint_count: int = 0

    @property
    def max_amplitude(self) -> float:
        return math.sqrt(self.max_leakage_population)

    def per_level(self):
        """``{k: (|U_1k|, |U_2k|)}``."""
        levels = sorted({c for _, c in self.amplitudes})
        return {k: (abs(self.amplitudes[(1, k)]), abs(self.amplitudes[(2, k)])) for k in levels}


def leakage_of(U) -> LeakageReport:
    """Entries ``U[r, k]`` for qubit rows r in {1, 2} and higher columns k >= 3."""
    u = U.entries if isinstance(U, PropagatorMatrix) else np.asarray(U)
    n = u.shape[0]
    block = u[:2, 2:]
    amps = {(r + 1, k + 3): complex(block[r, k]) for r in range(2) for k in range(n - 2)}
    pop = float((np.abs(block) ** 2).max()) if block.size else 0.0
    return LeakageReport(amps, min(pop, 1.0), float(np.linalg.norm(block)), 4 * (n - 2))
