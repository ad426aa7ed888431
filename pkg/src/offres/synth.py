"""Corrective pulse synthesis for off-resonant leakage.

A block is the qubit pulse at omega_21 for t0 followed by one corrective
pulse per leakage channel (k, source), k = 3..N and source in {1, 2}, each at
tone omega_k,source and lasting t0. The first-order coefficients have a closed
form; higher orders come from Newton iteration on the block propagator.

Coefficient convention: a complex coefficient ``c`` is played as
``|c| * H_I * cos(tone * t - arg(c))``, i.e. ``c = amplitude * exp(-1j * phase)``.
With that reading the closed-form first-order value cancels the second-order
leakage directly, with no extra factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import logm

from .errors import BlockNotUnitary, DegenerateDenominator, NoConvergence
from .model import (SIGMA_X, SIGMA_Y, SIGMA_Z, LevelSystem, Pulse, PulseSequence,
                    default_delta_min, validate_system)
from .propagate import (DEFAULT_CONFIG, IntegratorConfig, LeakageReport, compose, evolve,
                        PropagatorMatrix, evolve_sequence, leakage_of, polar_project,
                        unitarity_defect)
from .workers import ordered_map

# Rotation per unit gamma_12 * t0 of a resonant cosine drive; measured by
# measure_convention_factor.
CONVENTION_FACTOR = 0.5

FD_REL_STEP = 1e-6
FD_ABS_FLOOR = 1e-9
MAX_HALVINGS = 12


def _bracket(system: LevelSystem, t0: float, k: int, src: int) -> complex:
    w21 = system.gap(2, 1)
    wk = system.gap(k, src)
    minus, plus = w21 - wk, w21 + wk
    return ((np.exp(-1j * minus * t0) - 1) / minus
            - (np.exp(1j * plus * t0) - 1) / plus)


def _check_denominators(system, k, delta_min):
    if delta_min is None:
        delta_min = default_delta_min(system)
    w21 = system.gap(2, 1)
    for src in (1, 2):
        if abs(w21 - system.gap(k, src)) < delta_min:
            raise DegenerateDenominator(
                f"|omega_21 - omega_{k}{src}| = {abs(w21 - system.gap(k, src)):.3g} "
                f"below delta_min {delta_min:.3g}"
            )


def first_order_leakage(system: LevelSystem, t0: float, u0: complex, v0: complex, *,
                        level: int = 3, convention: float = CONVENTION_FACTOR,
                        delta_min: float | None = None) -> complex:
    """Second-order leakage amplitude into ``level`` after the qubit pulse.

    ``convention=1`` gives the bare bracket expression; the default scales it
    to the amplitude produced by the ``cos`` drive used throughout.
    """
    if system.n_levels < 3:
        raise ValueError("leakage needs at least 3 levels")
    _check_denominators(system, level, delta_min)
    g = system.couplings
    k = level - 1
    w = u0 * g[k, 0] * _bracket(system, t0, level, 1) + v0 * g[k, 1] * _bracket(system, t0, level, 2)
    return convention * w


def corrective_first_order(system: LevelSystem, t0: float, *, level: int = 3,
                           delta_min: float | None = None):
    """First-order coefficients ``(c_k1, c_k2)`` for target ``level``."""
    _check_denominators(system, level, delta_min)
    return tuple(_bracket(system, t0, level, src) / (1j * t0) for src in (1, 2))


@dataclass
class CorrectiveCoefficientSeries:
    target_level: int
    source_level: int
    tone: float
    coefficients: list = field(default_factory=list)

    @property
    def accumulated(self) -> complex:
        return complex(sum(self.coefficients, 0j))

    def pulse(self, t0: float) -> Pulse:
        return coefficient_pulse(self.accumulated, self.tone, t0)


def coefficient_pulse(c: complex, tone: float, t0: float) -> Pulse:
    return Pulse(abs(c), tone, -np.angle(c) if c != 0 else 0.0, t0)


@dataclass
class SynthesisResult:
    t0: float
    base_pulse: Pulse
    series: list
    final_leakage: LeakageReport
    order_achieved: int = 1
    convention_factor: float = CONVENTION_FACTOR
    status: str = "first_order"
    iterations: int = 0
    simultaneous: bool = False
    first_step_relative_change: float | None = None

    @property
    def corrective_pulses(self) -> list:
        return [s.pulse(self.t0) for s in self.series]

    def coefficients(self) -> np.ndarray:
        return np.array([s.accumulated for s in self.series], dtype=complex)

    def sequence(self, repeat_count: int = 1) -> PulseSequence:
        return _sequence(self.base_pulse, self.corrective_pulses, self.simultaneous, repeat_count)


def _sequence(base, correctives, simultaneous, repeat_count=1):
    if simultaneous:
        return PulseSequence([(base, *correctives)], repeat_count)
    return PulseSequence([base, *correctives], repeat_count)


def synthesize_sequence(system: LevelSystem, t0: float, *,
                        config: IntegratorConfig = DEFAULT_CONFIG,
                        simultaneous: bool = False,
                        delta_min: float | None = None) -> SynthesisResult:
    """Qubit pulse plus 2(N-2) corrective pulses at first order.

    ``simultaneous=True`` plays all tones together over a single t0 window
    instead of one after another.
    """
    report = validate_system(system, delta_min=delta_min)
    if report.degenerate_tones:
        pairs = ", ".join(f"{a}~{b}" for a, b in report.degenerate_tones)
        raise DegenerateDenominator(f"degenerate correction tones: {pairs}")
    base = Pulse(1.0, system.gap(2, 1), 0.0, t0)
    g = system.couplings
    series = []
    for k in range(3, system.n_levels + 1):
        c = corrective_first_order(system, t0, level=k, delta_min=report.delta_min)
        for src, ck in zip((1, 2), c):
            # Zero coupling means nothing leaks on this channel.
            ck = complex(ck) if g[k - 1, src - 1] != 0 else 0j
            series.append(CorrectiveCoefficientSeries(k, src, system.gap(k, src), [ck]))
    result = SynthesisResult(t0, base, series, LeakageReport(), simultaneous=simultaneous)
    result.final_leakage = leakage_of(evolve_sequence(system, result.sequence(), config))
    return result


# ----------------------------------------------------------------------------
# refinement


class _BlockModel:
    """Block propagator as a function of the corrective coefficients.

    Sequential blocks cache the qubit-pulse propagator and re-evolve only the
    segment whose coefficient changed.
    """

    def __init__(self, system, result, config):
        self.system = system
        self.result = result
        self.config = config
        self.t0 = result.t0
        self.tones = [s.tone for s in result.series]
        if not result.simultaneous:
            self.base = evolve(system, result.base_pulse, config, 0.0).entries

    def segment(self, j, c):
        p = coefficient_pulse(c, self.tones[j], self.t0)
        return evolve(self.system, p, self.config, t_start=(j + 1) * self.t0).entries

    def block(self, coeffs, segs=None):
        if self.result.simultaneous:
            pulses = [coefficient_pulse(c, w, self.t0) for c, w in zip(coeffs, self.tones)]
            seg = (self.result.base_pulse, *pulses)
            return evolve(self.system, seg, self.config, 0.0).entries
        if segs is None:
            segs = [self.segment(j, c) for j, c in enumerate(coeffs)]
        u = self.base
        for s in segs:
            u = s @ u
        return u

    def residual(self, u):
        rows = [s.target_level - 1 for s in self.result.series]
        cols = [s.source_level - 1 for s in self.result.series]
        r = u[rows, cols]
        return np.concatenate([r.real, r.imag])


def _fd_steps(coeffs):
    mags = np.abs(np.concatenate([coeffs, coeffs]))
    return np.maximum(FD_REL_STEP * mags, FD_ABS_FLOOR)


def _jacobian(model: _BlockModel, coeffs, r0, segs):
    m = len(coeffs)
    steps = _fd_steps(coeffs)

    def column(idx):
        dc = steps[idx] * (1 if idx < m else 1j)
        j = idx % m
        c = coeffs.copy()
        c[j] += dc
        if model.result.simultaneous:
            u = model.block(c)
        else:
            trial = list(segs)
            trial[j] = model.segment(j, c[j])
            u = model.block(c, trial)
        return (model.residual(u) - r0) / steps[idx]

    cols = ordered_map(column, range(2 * m))
    return np.stack(cols, axis=1)


def _order_from_residual(system, t0, amp):
    eps = max(system.gamma_max * t0, 1.0 / (system.gap(2, 1) * t0))
    if amp <= 0 or not 0 < eps < 1:
        return 16
    return max(1, min(16, int(math.floor(math.log(amp) / math.log(eps))) - 1))


def refine(system: LevelSystem, result: SynthesisResult, tolerance: float = 1e-10, *,
           max_iterations: int = 50, config: IntegratorConfig = DEFAULT_CONFIG) -> SynthesisResult:
    """Newton iteration on the leakage entries ``U[k, source]`` of the block.

    Each accepted update is appended to the coefficient series as the next
    order. The unknowns parametrize the propagator, so the result never
    depends on any particular initial state.
    """
    series = [replace(s, coefficients=list(s.coefficients)) for s in result.series]
    out = replace(result, series=series)
    if not series:
        out.status, out.iterations = "converged", 0
        return out
    model = _BlockModel(system, out, config)
    coeffs = out.coefficients()
    m = len(coeffs)
    segs = None if out.simultaneous else [model.segment(j, c) for j, c in enumerate(coeffs)]
    u = model.block(coeffs, segs)
    r = model.residual(u)
    first_change = None
    it = 0
    while np.abs(r[:m] + 1j * r[m:]).max() > tolerance:
        if it >= max_iterations:
            out.final_leakage = leakage_of(u)
            out.iterations = it
            out.status = "not_converged"
            raise NoConvergence(
                f"leakage {np.abs(r).max():.3e} above {tolerance:.1e} after {it} Newton steps",
                out,
            )
        jac = _jacobian(model, coeffs, r, segs)
        dx = np.linalg.lstsq(jac, -r, rcond=None)[0]
        dc = dx[:m] + 1j * dx[m:]
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            trial = coeffs + scale * dc
            tsegs = None if out.simultaneous else [model.segment(j, c) for j, c in enumerate(trial)]
            tu = model.block(trial, tsegs)
            tr = model.residual(tu)
            if np.linalg.norm(tr) <= np.linalg.norm(r):
                break
            scale *= 0.5
        step = scale * dc
        if first_change is None:
            first_change = float(np.linalg.norm(step) / max(np.linalg.norm(coeffs), 1e-300))
        for s, d in zip(series, step):
            s.coefficients.append(complex(d))
        coeffs, segs, u, r = trial, tsegs, tu, tr
        it += 1
    out.final_leakage = leakage_of(compose([PropagatorMatrix(u)], 1, config))
    out.iterations = it
    out.status = "converged"
    out.first_step_relative_change = first_change
    if it:
        out.order_achieved = _order_from_residual(system, out.t0, out.final_leakage.max_amplitude)
    return out


# ----------------------------------------------------------------------------
# effective qubit map


@dataclass
class EffectiveMapReport:
    block: np.ndarray
    unitarity_defect: float
    determinant_modulus: float
    rotation_angle: float
    delta_0: float
    delta_x: float
    delta_y: float
    delta_z: float
    deviation_norm: float
    repeats: int = 1

    @property
    def generator_decomposition(self):
        return (self.delta_0, self.delta_x, self.delta_y, self.delta_z)


def _drive_axis(system):
    g12 = system.couplings[0, 1]
    # gamma_12 * sigma_+ + h.c. = Re(g) sigma_x - Im(g) sigma_y
    if abs(g12) == 0:
        return SIGMA_X, 0.0, 0.0
    gx, gy = g12.real, -g12.imag
    n = (gx * SIGMA_X + gy * SIGMA_Y) / abs(g12)
    return n, gx, gy


def _rotation(n_sigma, angle):
    return math.cos(angle) * np.eye(2) - 1j * math.sin(angle) * n_sigma


def effective_two_level_map(system: LevelSystem, result: SynthesisResult, repeats: int = 1, *,
                            config: IntegratorConfig = DEFAULT_CONFIG,
                            oracle_density: int | None = None,
                            leakage_tolerance: float = 1e-5) -> EffectiveMapReport:
    """Qubit block of the repeated sequence and its generator.

    The generator ``i*log(block)/(repeats*t0)`` is split as
    ``delta_0 + g_x sx + g_y sy + g_z sz``; ``delta_x``/``delta_y`` are what is
    left after removing the ideal ``convention * gamma_12`` drive term.
    """
    seq = result.sequence(1)
    if oracle_density is None:
        ub = evolve_sequence(system, seq, config).entries
    else:
        ub = evolve_sequence(system, seq, config, oracle_density=oracle_density).entries
    u = np.linalg.matrix_power(ub, repeats)
    leak = leakage_of(u)
    if leak.max_amplitude > leakage_tolerance:
        raise BlockNotUnitary(
            f"leakage amplitude {leak.max_amplitude:.3e} exceeds {leakage_tolerance:.1e}"
        )
    b = u[:2, :2]
    w = polar_project(b)
    n_sigma, gx_ideal, gy_ideal = _drive_axis(system)
    c = result.convention_factor
    theta = math.atan2(-np.trace(n_sigma @ w).imag, np.trace(w).real)
    gen = 1j * logm(w) / (repeats * result.t0)
    gen = (gen + gen.conj().T) / 2
    d0 = float(np.trace(gen).real / 2)
    gx, gy, gz = (float(np.trace(s @ gen).real / 2) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z))
    ideal = _rotation(n_sigma, repeats * c * abs(system.couplings[0, 1]) * result.t0)
    return EffectiveMapReport(
        block=b,
        unitarity_defect=unitarity_defect(b),
        determinant_modulus=float(abs(np.linalg.det(b))),
        rotation_angle=theta / repeats,
        delta_0=d0,
        delta_x=gx - c * gx_ideal,
        delta_y=gy - c * gy_ideal,
        delta_z=gz,
        deviation_norm=float(np.linalg.norm(b - ideal) / repeats),
        repeats=repeats,
    )


def measure_convention_factor(omega: float = 1.0, gamma: float = 0.01, m: int = 4,
                              config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """Rotation angle per ``gamma * t0`` of a resonantly driven two-level system."""
    system = LevelSystem([0.0, omega], [[0, gamma], [gamma, 0]], "two-level probe")
    t0 = m * math.pi / omega
    u = evolve(system, Pulse(1.0, omega, 0.0, t0), config).entries
    w = polar_project(u)
    theta = math.atan2(-np.trace(SIGMA_X @ w).imag, np.trace(w).real)
    return theta / (gamma * t0)


# ----------------------------------------------------------------------------
# epsilon scaling


@dataclass
class ScalingRow:
    s: float
    epsilon: float
    uncorrected_amp: float
    corrected_amp: float


def small_parameter(system: LevelSystem, t0: float) -> float:
    return max(system.gamma_max * t0, 1.0 / (system.gap(2, 1) * t0))


def epsilon_scaling(system: LevelSystem, t0: float, scales, *,
                    config: IntegratorConfig = DEFAULT_CONFIG) -> list:
    """Leakage before and after first-order correction as gaps grow by ``s``.

    Gaps scale by ``s``, couplings by ``1/s``, and t0 stays fixed in absolute
    time; for integer ``s`` it remains a whole number of half periods of the
    scaled omega_21, and both small parameters shrink as ``1/s``.
    """
    rows = []
    for s in scales:
        scaled = system.scaled(s)
        base = evolve(scaled, Pulse(1.0, scaled.gap(2, 1), 0.0, t0), config)
        corrected = synthesize_sequence(scaled, t0, config=config)
        rows.append(ScalingRow(float(s), small_parameter(scaled, t0),
                               leakage_of(base).max_amplitude,
                               corrected.final_leakage.max_amplitude))
    return rows


def fit_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])
