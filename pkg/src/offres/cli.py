"""Command-line front end.

Exit codes: 0 ok, 1 bad input, 2 degenerate tones, 3 no convergence
(refinement or alternating search), 4 scaling slopes outside their band.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import serialize as ser
from .algebra import alternating_search, constraint_count, lie_closure
from .errors import (BlockNotUnitary, DegenerateDenominator, NoConvergence, OffresError,
                     SearchFailed)
from .model import embed_bipartite_index_map, map_two_qubits, product_label, validate_system
from .propagate import evolve, leakage_of
from .synth import (effective_two_level_map, epsilon_scaling, fit_slope, refine,
                    synthesize_sequence)

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NOCONV, EXIT_SLOPE = 0, 1, 2, 3, 4
DEFAULT_EXPECTED_SLOPES = (-2.0, -3.0)
DEFAULT_SLOPE_BAND = 0.3


class _Out:
    def __init__(self, quiet):
        self.quiet = quiet

    def __call__(self, *args):
        if not self.quiet:
            print(*args)


def _prefix(args, scenario):
    prefix = Path(args.out or scenario.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    return str(prefix)


# ----------------------------------------------------------------------------


def cmd_check(args, scenario, out) -> int:
    system = scenario.level_system()
    carrier = scenario.drive.get("carrier")
    report = validate_system(system, drive_carrier=carrier)
    out(f"system {system.label or '(unnamed)'}: N = {system.n_levels}")
    for line in report.lines():
        out("  " + line)
    closure = lie_closure(system.h0(), system.couplings)
    out(f"lie closure dimension {closure.dimension} of {system.n_levels ** 2}"
        f" (full: {closure.is_full}, generations {closure.generations})")
    if system.n_levels >= 3:
        out(f"real constraints 4(N-2) = {constraint_count(system.n_levels)}")
    return EXIT_DEGENERATE if report.degenerate_tones else EXIT_OK


def _leakage_rows(stage, rep):
    rows = []
    for k, (a1, a2) in rep.per_level().items():
        rows.append([stage, k, a1, a2, max(a1, a2) ** 2])
    return rows


def cmd_synth(args, scenario, out) -> int:
    system = scenario.level_system()
    cfg = scenario.integrator
    syn = scenario.synthesis
    t0 = ser.resolve_t0(system, syn)
    prefix = _prefix(args, scenario)
    out(f"t0 = {t0:.17g} ({t0 * system.gap(2, 1) / math.pi:.6g} pi/omega_21)")
    base = synthesize_sequence(system, t0, config=cfg, simultaneous=bool(syn.get("simultaneous", False)))
    uncorrected = leakage_of(evolve(system, base.base_pulse, cfg))
    code = EXIT_OK
    try:
        result = refine(system, base, float(syn.get("tolerance", 1e-10)),
                        max_iterations=int(syn.get("max_iterations", 50)), config=cfg)
    except NoConvergence as exc:
        out(f"refinement did not converge: {exc}")
        result, code = exc.result, EXIT_NOCONV
    ser.write_json(prefix + ".sequence.json", ser.synthesis_to_dict(result))
    rows = (_leakage_rows("uncorrected", uncorrected)
            + _leakage_rows("first_order", base.final_leakage)
            + _leakage_rows("refined", result.final_leakage))
    ser.write_csv(prefix + ".leakage.csv", ["stage", "k", "abs_U1k", "abs_U2k", "max_population"], rows)
    out(f"pulses per block: {1 + len(result.series)}; Newton iterations {result.iterations}")
    out(f"max leakage population: uncorrected {uncorrected.max_leakage_population:.3e}, "
        f"first order {base.final_leakage.max_leakage_population:.3e}, "
        f"refined {result.final_leakage.max_leakage_population:.3e}")
    try:
        eff = effective_two_level_map(system, result, int(syn.get("repeats", 1)), config=cfg)
        ser.write_json(prefix + ".effective.json", ser.effective_to_dict(eff))
        out(f"rotation per block {eff.rotation_angle:.12g}; deltas "
            + " ".join(f"{d:.3e}" for d in eff.generator_decomposition)
            + f"; deviation {eff.deviation_norm:.3e}")
    except BlockNotUnitary as exc:
        ser.write_json(prefix + ".effective.json", {"error": str(exc)})
        out(f"effective map skipped: {exc}")
    return code


def cmd_sweep(args, scenario, out) -> int:
    if not scenario.sweep:
        out("scenario has no 'sweep' section")
        return EXIT_INPUT
    scales = [float(s) for s in scenario.sweep.get("scales", [])]
    if len(scales) < 3:
        out(f"slope fit needs at least 3 scale factors, got {len(scales)}")
        return EXIT_INPUT
    system = scenario.level_system()
    t0 = ser.resolve_t0(system, scenario.synthesis)
    rows = epsilon_scaling(system, t0, scales, config=scenario.integrator)
    prefix = _prefix(args, scenario)
    ser.write_csv(prefix + ".scaling.csv", ["s", "epsilon", "uncorrected_amp", "corrected_amp"],
                  [[r.s, r.epsilon, r.uncorrected_amp, r.corrected_amp] for r in rows])
    unc = [r.uncorrected_amp for r in rows]
    cor = [r.corrected_amp for r in rows]
    if min(unc + cor) <= 0.0:
        out("degenerate fit: leakage amplitudes vanish")
        return EXIT_OK
    slopes = (fit_slope(scales, unc), fit_slope(scales, cor))
    expected = tuple(scenario.sweep.get("expected_slopes", DEFAULT_EXPECTED_SLOPES))
    band = float(scenario.sweep.get("slope_band", DEFAULT_SLOPE_BAND))
    ok = all(abs(s - e) <= band for s, e in zip(slopes, expected))
    out(f"uncorrected slope {slopes[0]:.4f} (expected {expected[0]} +- {band})")
    out(f"corrected slope   {slopes[1]:.4f} (expected {expected[1]} +- {band})")
    return EXIT_OK if ok else EXIT_SLOPE


def cmd_map2q(args, scenario, out) -> int:
    if scenario.two_qubit is None:
        out("map2q needs a two_qubit system")
        return EXIT_INPUT
    spec = scenario.two_qubit
    mapping = map_two_qubits(spec)
    prefix = _prefix(args, scenario)
    n1, n2 = spec.dims
    doc = {
        "dims": [n1, n2],
        "hamiltonian": ser.cmat(mapping.hamiltonian),
        "spectrum": [float(e) for e in mapping.spectrum],
        "basis_change": ser.cmat(mapping.basis_change),
    }
    if np.all(np.diff(mapping.spectrum) > 0):
        doc["level_system"] = ser.level_system_to_dict(mapping.level_system(label=spec.label))
    ser.write_json(prefix + ".mapped.json", doc)
    index = {"product_labels": [{"i": i, "j": j, "level": product_label(i, j, n2)}
                                for i, j in mapping.labels]}
    n_embed = scenario.embed.get("n")
    if n_embed is not None:
        imap = embed_bipartite_index_map(int(n_embed))
        index["bipartite"] = {"n_levels": imap.n_levels, "product_dim": imap.product_dim,
                              "image": list(imap.image), "unphysical": list(imap.unphysical),
                              "labels": list(imap.labels)}
        out(f"embedding N = {imap.n_levels}: product dimension {imap.product_dim}")
    ser.write_json(prefix + ".indexmap.json", index)
    out("spectrum: " + " ".join(f"{e:.12g}" for e in mapping.spectrum))
    return EXIT_OK


def cmd_algebra(args, scenario, out) -> int:
    system = scenario.level_system()
    n = system.n_levels
    closure = lie_closure(system.h0(), system.couplings)
    out(f"{'N':>3} {'dim':>5} {'N^2':>5} {'full':>6} {'gens':>5}")
    out(f"{n:>3} {closure.dimension:>5} {n * n:>5} {str(closure.is_full):>6} {closure.generations:>5}")
    doc = {"closure": ser.closure_to_dict(closure)}
    code = EXIT_OK
    if n >= 3:
        doc["constraint_count"] = constraint_count(n)
        out(f"real constraints 4(N-2) = {doc['constraint_count']}")
    if n in (3, 4):
        alg = scenario.algebra
        total = float(alg.get("total_time", 10 * 2 * math.pi / system.gap(2, 1)))
        budget = args.budget if args.budget is not None else int(alg.get("budget", 2000))
        restarts = args.restarts if args.restarts is not None else int(alg.get("restarts", 20))
        try:
            sched, leak = alternating_search(system, system.couplings, total, scenario.seed,
                                             budget, restarts)
        except SearchFailed as exc:
            sched, leak, code = exc.schedule, exc.leakage, EXIT_NOCONV
        doc["schedule"] = ser.schedule_to_dict(sched)
        doc["leakage"] = ser.leakage_to_dict(leak)
        out(f"alternating search: leakage norm {leak.residual_norm:.3e} with "
            f"{len(sched.durations)} factors, scale {sched.scale:.6g}")
    prefix = _prefix(args, scenario)
    ser.write_json(prefix + ".algebra.json", doc)
    return code


COMMANDS = {
    "check": cmd_check,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
    "map2q": cmd_map2q,
    "algebra": cmd_algebra,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default=argparse.SUPPRESS, help="scenario JSON file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path prefix")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override scenario seed")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="offres", parents=[common],
                                description="Leakage-cancelling pulse synthesis for multilevel qubits")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("check", "synth", "sweep", "map2q"):
        sub.add_parser(name, parents=[common])
    alg = sub.add_parser("algebra", parents=[common])
    alg.add_argument("--budget", type=int, default=None, help="objective evaluations per restart")
    alg.add_argument("--restarts", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("scenario", None), ("out", None), ("seed", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    for name in ("budget", "restarts"):
        if not hasattr(args, name):
            setattr(args, name, None)
    out = _Out(args.quiet)
    if args.scenario is None:
        print("error: --scenario is required", file=sys.stderr)
        return EXIT_INPUT
    try:
        scenario = ser.load_scenario(args.scenario, args.seed)
        return COMMANDS[args.command](args, scenario, out)
    except DegenerateDenominator as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ser.ScenarioError, OffresError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
