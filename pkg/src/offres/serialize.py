"""JSON/CSV encoding and scenario loading.

Complex numbers are ``[re, im]`` pairs; floats keep full round-trip precision
(JSON) or 17 significant digits (CSV).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import LevelSystem, Pulse, TwoQubitSpec, map_two_qubits, select_t0
from .propagate import IntegratorConfig, LeakageReport, PropagatorMatrix
from .seeding import named_rng, phase_pattern_couplings
from .synth import CorrectiveCoefficientSeries, SynthesisResult


class ScenarioError(ValueError):
    """Scenario file could not be parsed or is inconsistent."""


def cnum(z):
    z = complex(z)
    return [z.real, z.imag]


def cmat(a):
    a = np.asarray(a, dtype=complex)
    return [[cnum(z) for z in row] for row in a]


def parse_cmat(data):
    """Matrix of ``[re, im]`` pairs or plain reals."""
    rows = []
    for row in data:
        out = []
        for z in row:
            if isinstance(z, (list, tuple)):
                if len(z) != 2:
                    raise ScenarioError(f"complex entry must be [re, im], got {z!r}")
                out.append(complex(float(z[0]), float(z[1])))
            else:
                out.append(complex(float(z)))
        rows.append(out)
    return np.array(rows, dtype=complex)


def fmt17(x) -> str:
    return format(float(x), ".17g")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt17(v) if isinstance(v, float) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ----------------------------------------------------------------------------
# model types


def level_system_to_dict(s: LevelSystem) -> dict:
    return {
        "kind": "levels",
        "label": s.label,
        "energies": [float(e) for e in s.energies],
        "couplings": cmat(s.couplings),
        "keep_diagonal": s.keep_diagonal,
    }


def level_system_from_dict(d: dict, seed: int = 42) -> LevelSystem:
    energies = [float(e) for e in d["energies"]]
    n = len(energies)
    cp = d.get("couplings")
    if cp is None:
        g = np.zeros((n, n), dtype=complex)
    elif isinstance(cp, dict):
        g = _pattern_couplings(cp, n, seed)
    else:
        g = parse_cmat(cp)
    return LevelSystem(energies, g, d.get("label", ""), bool(d.get("keep_diagonal", False)))


def _pattern_couplings(cp, n, seed):
    """``{"magnitude": m, "real_pairs": [[1, 2]], "zero_pairs": [[1, 3]]}`` (1-based)."""
    mag = float(cp["magnitude"])
    real_pairs = tuple((a - 1, b - 1) for a, b in cp.get("real_pairs", [[1, 2]]))
    g = phase_pattern_couplings(named_rng(seed, "couplings"), n, mag, real_pairs)
    for a, b in cp.get("zero_pairs", []):
        g[a - 1, b - 1] = g[b - 1, a - 1] = 0
    if cp.get("zero_higher", False):
        g[2:, :2] = 0
        g[:2, 2:] = 0
    return g


def two_qubit_to_dict(spec: TwoQubitSpec) -> dict:
    d = {
        "kind": "two_qubit",
        "label": spec.label,
        "dims": list(spec.dims),
        "local_hamiltonians": [cmat(h) for h in spec.local_hamiltonians],
        "coupling_Jz": spec.coupling_Jz,
        "coupling_Jx": spec.coupling_Jx,
    }
    if spec.drive is not None:
        d["drive"] = cmat(spec.drive)
    return d


def two_qubit_from_dict(d: dict) -> TwoQubitSpec:
    drive = d.get("drive")
    return TwoQubitSpec(
        tuple(d["dims"]),
        tuple(parse_cmat(h) for h in d["local_hamiltonians"]),
        float(d.get("coupling_Jz", 0.0)),
        float(d.get("coupling_Jx", 0.0)),
        None if drive is None else parse_cmat(drive),
        d.get("label", ""),
    )


def pulse_to_dict(p: Pulse) -> dict:
    return {"amplitude": p.amplitude, "carrier": p.carrier, "phase": p.phase, "duration": p.duration}


def pulse_from_dict(d: dict) -> Pulse:
    return Pulse(float(d["amplitude"]), float(d["carrier"]), float(d["phase"]), float(d["duration"]))


def propagator_to_dict(u: PropagatorMatrix) -> dict:
    return {"frame": u.frame, "t_start": u.t_start, "t_end": u.t_end, "entries": cmat(u.entries)}


def leakage_to_dict(rep: LeakageReport) -> dict:
    return {
        "amplitudes": [{"row": r, "col": c, "value": cnum(v)} for (r, c), v in sorted(rep.amplitudes.items())],
        "max_leakage_population": rep.max_leakage_population,
        "residual_norm": rep.residual_norm,
        "constraint_count": rep.constraint_count,
    }


def leakage_from_dict(d: dict) -> LeakageReport:
    amps = {(a["row"], a["col"]): complex(*a["value"]) for a in d["amplitudes"]}
    return LeakageReport(amps, d["max_leakage_population"], d["residual_norm"], d["constraint_count"])


def synthesis_to_dict(result) -> dict:
    seq = result.sequence()
    segments = []
    for seg in seq.segments:
        segments.append([pulse_to_dict(p) for p in seg] if isinstance(seg, tuple) else pulse_to_dict(seg))
    return {
        "t0": result.t0,
        "status": result.status,
        "order_achieved": result.order_achieved,
        "iterations": result.iterations,
        "convention_factor": result.convention_factor,
        "simultaneous": result.simultaneous,
        "pulses_per_block": 1 + len(result.series),
        "base_pulse": pulse_to_dict(result.base_pulse),
        "corrective_pulses": [pulse_to_dict(p) for p in result.corrective_pulses],
        "segments": segments,
        "series": [
            {
                "target_level": s.target_level,
                "source_level": s.source_level,
                "tone": s.tone,
                "coefficients": [cnum(c) for c in s.coefficients],
                "accumulated": cnum(s.accumulated),
            }
            for s in result.series
        ],
        "final_leakage": leakage_to_dict(result.final_leakage),
    }


def synthesis_from_dict(d: dict):
    series = [
        CorrectiveCoefficientSeries(s["target_level"], s["source_level"], s["tone"],
                                    [complex(*c) for c in s["coefficients"]])
        for s in d["series"]
    ]
    return SynthesisResult(
        t0=d["t0"],
        base_pulse=pulse_from_dict(d["base_pulse"]),
        series=series,
        final_leakage=leakage_from_dict(d["final_leakage"]),
        order_achieved=d["order_achieved"],
        convention_factor=d["convention_factor"],
        status=d["status"],
        iterations=d["iterations"],
        simultaneous=d["simultaneous"],
    )


def effective_to_dict(rep) -> dict:
    return {
        "rotation_angle": rep.rotation_angle,
        "delta_0": rep.delta_0,
        "delta_x": rep.delta_x,
        "delta_y": rep.delta_y,
        "delta_z": rep.delta_z,
        "deviation_norm": rep.deviation_norm,
        "unitarity_defect": rep.unitarity_defect,
        "determinant_modulus": rep.determinant_modulus,
        "repeats": rep.repeats,
        "block": cmat(rep.block),
    }


def closure_to_dict(res) -> dict:
    return {
        "dimension": res.dimension,
        "is_full": res.is_full,
        "generations": res.generations,
        "basis_matrices": [cmat(b) for b in res.basis_matrices],
    }


def schedule_to_dict(s) -> dict:
    return {
        "durations": list(s.durations),
        "which_generator": list(s.which_generator),
        "scale": s.scale,
        "total_time": s.total_time,
    }


def integrator_to_dict(c: IntegratorConfig) -> dict:
    return {"steps_per_carrier_period": c.steps_per_carrier_period, "scheme": c.scheme,
            "unitarity_tolerance": c.unitarity_tolerance, "project": c.project}


# ----------------------------------------------------------------------------
# scenarios


@dataclass
class Scenario:
    system: LevelSystem | None
    two_qubit: TwoQubitSpec | None
    drive: dict = field(default_factory=dict)
    synthesis: dict = field(default_factory=dict)
    sweep: dict | None = None
    algebra: dict = field(default_factory=dict)
    embed: dict = field(default_factory=dict)
    integrator: IntegratorConfig = IntegratorConfig()
    seed: int = 42
    output: str = "offres_out"

    def level_system(self) -> LevelSystem:
        if self.system is not None:
            return self.system
        return map_two_qubits(self.two_qubit).level_system(label=self.two_qubit.label or "two-qubit")

    def to_dict(self) -> dict:
        d = {
            "system": (level_system_to_dict(self.system) if self.system is not None
                       else two_qubit_to_dict(self.two_qubit)),
            "drive": self.drive,
            "synthesis": self.synthesis,
            "algebra": self.algebra,
            "embed": self.embed,
            "integrator": integrator_to_dict(self.integrator),
            "seed": self.seed,
            "output": self.output,
        }
        if self.sweep is not None:
            d["sweep"] = self.sweep
        return d


def scenario_from_dict(d: dict, seed: int | None = None) -> Scenario:
    if not isinstance(d, dict) or "system" not in d:
        raise ScenarioError("scenario needs a 'system' object")
    seed = int(d.get("seed", 42) if seed is None else seed)
    if seed < 0:
        raise ScenarioError("seed must be unsigned")
    sd = d["system"]
    kind = sd.get("kind", "levels")
    try:
        if kind == "levels":
            system, tq = level_system_from_dict(sd, seed), None
        elif kind == "two_qubit":
            system, tq = None, two_qubit_from_dict(sd)
        else:
            raise ScenarioError(f"unknown system kind {kind!r}")
        integ = IntegratorConfig(**d.get("integrator", {}))
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"bad scenario field: {exc}") from exc
    return Scenario(
        system=system,
        two_qubit=tq,
        drive=dict(d.get("drive", {})),
        synthesis=dict(d.get("synthesis", {})),
        sweep=d.get("sweep"),
        algebra=dict(d.get("algebra", {})),
        embed=dict(d.get("embed", {})),
        integrator=integ,
        seed=seed,
        output=d.get("output", "offres_out"),
    )


def load_scenario(path, seed: int | None = None) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(d, seed)


def resolve_t0(system: LevelSystem, synthesis: dict) -> float:
    if synthesis.get("t0") is not None:
        return float(synthesis["t0"])
    if synthesis.get("t0_multiple") is not None:
        return int(synthesis["t0_multiple"]) * math.pi / system.gap(2, 1)
    return select_t0(system, even=bool(synthesis.get("even_t0", False)))
