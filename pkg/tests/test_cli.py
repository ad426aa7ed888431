import json

import numpy as np
import pytest

from offres import serialize as ser
from offres.cli import main
from offres.model import LevelSystem
from offres.synth import refine, synthesize_sequence

from conftest import SCENARIOS, reference_system


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def write_scenario(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def reference_doc(**synthesis):
    doc = json.loads((SCENARIOS / "reference_3level.json").read_text())
    doc["synthesis"].update(synthesis)
    return doc


class TestCheck:
    def test_reference(self, capsys):
        code, cap = run(capsys, "check", "--scenario", SCENARIOS / "reference_3level.json")
        assert code == 0
        assert "4(N-2) = 4" in cap.out
        assert "9 of 9" in cap.out

    def test_degenerate(self, capsys):
        code, _ = run(capsys, "check", "--scenario", SCENARIOS / "degenerate_tones.json")
        assert code == 2

    def test_flags_before_subcommand(self, capsys):
        code, cap = run(capsys, "--quiet", "--scenario", SCENARIOS / "reference_3level.json", "check")
        assert code == 0 and cap.out == ""


class TestSynth:
    def test_outputs(self, tmp_path, capsys):
        prefix = tmp_path / "ref"
        code, _ = run(capsys, "synth", "--scenario", SCENARIOS / "reference_3level.json",
                      "--out", prefix, "--quiet")
        assert code == 0
        seq = json.loads((tmp_path / "ref.sequence.json").read_text())
        assert seq["status"] == "converged"
        assert seq["pulses_per_block"] == 3
        rows = ser.read_csv(tmp_path / "ref.leakage.csv")
        assert [r["stage"] for r in rows] == ["uncorrected", "first_order", "refined"]
        assert float(rows[2]["max_population"]) < 1e-10
        eff = json.loads((tmp_path / "ref.effective.json").read_text())
        assert eff["repeats"] == 10

    def test_sequence_round_trip(self, tmp_path, capsys):
        prefix = tmp_path / "ref"
        run(capsys, "synth", "--scenario", SCENARIOS / "reference_3level.json", "--out", prefix, "--quiet")
        doc = json.loads((tmp_path / "ref.sequence.json").read_text())
        back = ser.synthesis_from_dict(doc)
        assert ser.synthesis_to_dict(back) == doc
        direct = refine(reference_system(), synthesize_sequence(reference_system(), back.t0))
        assert np.array_equal(direct.coefficients(), back.coefficients())

    def test_no_convergence_exit(self, tmp_path, capsys):
        p = write_scenario(tmp_path, reference_doc(max_iterations=0))
        code, cap = run(capsys, "synth", "--scenario", p, "--out", tmp_path / "nc")
        assert code == 3
        assert "did not converge" in cap.out
        assert json.loads((tmp_path / "nc.sequence.json").read_text())["status"] == "not_converged"

    def test_degenerate_exit(self, tmp_path, capsys):
        code, _ = run(capsys, "synth", "--scenario", SCENARIOS / "degenerate_tones.json",
                      "--out", tmp_path / "d")
        assert code == 2

    def test_seed_override_changes_couplings(self, tmp_path, capsys):
        for seed in (42, 43):
            run(capsys, "synth", "--scenario", SCENARIOS / "reference_3level.json",
                "--out", tmp_path / f"s{seed}", "--seed", seed, "--quiet")
        a = (tmp_path / "s42.sequence.json").read_bytes()
        b = (tmp_path / "s43.sequence.json").read_bytes()
        assert a != b


class TestSweep:
    def test_slopes(self, tmp_path, capsys):
        code, cap = run(capsys, "sweep", "--scenario", SCENARIOS / "sweep_3level.json",
                        "--out", tmp_path / "sw")
        assert code == 0
        rows = ser.read_csv(tmp_path / "sw.scaling.csv")
        assert [float(r["s"]) for r in rows] == [1, 2, 4, 8]

    def test_no_leakage_is_degenerate_fit(self, tmp_path, capsys):
        code, cap = run(capsys, "sweep", "--scenario", SCENARIOS / "no_leakage_3level.json",
                        "--out", tmp_path / "nl")
        assert code == 0
        assert "degenerate fit" in cap.out

    def test_too_few_scales(self, tmp_path, capsys):
        doc = json.loads((SCENARIOS / "sweep_3level.json").read_text())
        doc["sweep"]["scales"] = [1, 2]
        code, _ = run(capsys, "sweep", "--scenario", write_scenario(tmp_path, doc), "--out", tmp_path / "x")
        assert code == 1

    def test_slope_band_miss(self, tmp_path, capsys):
        doc = json.loads((SCENARIOS / "sweep_3level.json").read_text())
        doc["sweep"]["expected_slopes"] = [-1.0, -1.0]
        doc["sweep"]["scales"] = [1, 2, 4]
        code, _ = run(capsys, "sweep", "--scenario", write_scenario(tmp_path, doc), "--out", tmp_path / "x")
        assert code == 4


class TestMapAndAlgebra:
    def test_map2q(self, tmp_path, capsys):
        code, cap = run(capsys, "map2q", "--scenario", SCENARIOS / "pc_qubits.json", "--out", tmp_path / "m")
        assert code == 0
        mapped = json.loads((tmp_path / "m.mapped.json").read_text())
        assert len(mapped["spectrum"]) == 4
        assert "level_system" in mapped
        index = json.loads((tmp_path / "m.indexmap.json").read_text())
        assert index["bipartite"]["product_dim"] == 6

    def test_map2q_needs_two_qubits(self, tmp_path, capsys):
        code, _ = run(capsys, "map2q", "--scenario", SCENARIOS / "reference_3level.json",
                      "--out", tmp_path / "m")
        assert code == 1

    def test_algebra(self, tmp_path, capsys):
        code, cap = run(capsys, "algebra", "--scenario", SCENARIOS / "reference_3level.json",
                        "--out", tmp_path / "a")
        assert code == 0
        doc = json.loads((tmp_path / "a.algebra.json").read_text())
        assert doc["closure"]["dimension"] == 9
        assert doc["constraint_count"] == 4
        assert doc["leakage"]["residual_norm"] < 1e-6

    def test_algebra_search_failure(self, tmp_path, capsys):
        code, _ = run(capsys, "algebra", "--scenario", SCENARIOS / "reference_3level.json",
                      "--out", tmp_path / "a", "--budget", "3", "--restarts", "1")
        assert code == 3


class TestInputErrors:
    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"system": {"energies": [0, 1,,]}}')
        code, cap = run(capsys, "check", "--scenario", p)
        assert code == 1
        assert "line 1" in cap.err

    def test_missing_scenario_flag(self, capsys):
        code, _ = run(capsys, "check")
        assert code == 1

    def test_missing_file(self, tmp_path, capsys):
        code, _ = run(capsys, "check", "--scenario", tmp_path / "nope.json")
        assert code == 1

    def test_unsorted_energies(self, tmp_path, capsys):
        doc = reference_doc()
        doc["system"]["energies"] = [0, 10, 1]
        code, _ = run(capsys, "check", "--scenario", write_scenario(tmp_path, doc))
        assert code == 1


class TestSerialize:
    def test_scenario_round_trip(self):
        sc = ser.load_scenario(SCENARIOS / "reference_3level.json")
        again = ser.scenario_from_dict(json.loads(ser.dumps(sc.to_dict())))
        assert np.array_equal(again.system.couplings, sc.system.couplings)
        assert again.integrator == sc.integrator

    def test_pattern_couplings_match_seeded_stream(self):
        sc = ser.load_scenario(SCENARIOS / "reference_3level.json")
        assert np.array_equal(sc.system.couplings, reference_system().couplings)
        g = sc.system.couplings
        assert g[0, 1] == 0.01
        assert abs(g[0, 2] - (-0.009218783876683038 - 0.003874793392557707j)) < 1e-17
        assert abs(g[1, 2] - (-0.005132986005668071 - 0.008582100830543518j)) < 1e-17

    def test_floats_round_trip(self):
        xs = [0.1, 1 / 3, 2.0 ** -1074, 1e308, -0.0]
        assert json.loads(ser.dumps(xs)) == xs
        assert [float(ser.fmt17(x)) for x in xs] == xs

    def test_level_system_dict(self):
        s = reference_system()
        back = ser.level_system_from_dict(json.loads(ser.dumps(ser.level_system_to_dict(s))))
        assert isinstance(back, LevelSystem)
        assert np.array_equal(back.energies, s.energies)
        assert np.array_equal(back.couplings, s.couplings)

    def test_bad_complex_entry(self):
        with pytest.raises(ser.ScenarioError):
            ser.parse_cmat([[[1, 2, 3]]])

    def test_t0_resolution(self):
        s = reference_system()
        assert ser.resolve_t0(s, {"t0": 2.5}) == 2.5
        assert ser.resolve_t0(s, {"t0_multiple": 4}) == pytest.approx(4 * np.pi)
        assert ser.resolve_t0(s, {}) == pytest.approx(3 * np.pi)
        assert ser.resolve_t0(s, {"even_t0": True}) == pytest.approx(4 * np.pi)
