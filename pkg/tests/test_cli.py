"""Command-line client: file handling, exit codes, and determinism."""

from __future__ import annotations

import json
import subprocess

import numpy as np
import pytest

from vesselpose.cli import main
from vesselpose.config import PipelineConfig, profile_config
from vesselpose.grid import PixelGrid, load_mask, save_mask
from vesselpose.phantom import DEFAULT_PROFILE, sample_phantom, write_corpus
from vesselpose.pipeline import aggregate_corpus_stats, perceive_frame
from vesselpose.serialize import canonical_json


@pytest.fixture(scope="module")
def mask_pair(tmp_path_factory):
    root = tmp_path_factory.mktemp("masks")
    rng = np.random.default_rng(7321)
    _, vessel, robot, truth = sample_phantom(rng, "D", DEFAULT_PROFILE, seed=2)
    save_mask(vessel, root / "vessel.pgm")
    save_mask(robot, root / "robot.pgm")
    save_mask(PixelGrid(np.zeros_like(vessel.cells)), root / "empty.pgm")
    return root, vessel, robot, truth


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus") / "c"
    code = main(["generate", "--count", "3", "--seed", "17", "--states", "AD", "--out", str(root)])
    assert code == 0
    return root


def tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


class TestConfigInit:
    def test_stdout_document(self, capsys):
        assert main(["config", "init"]) == 0
        out = capsys.readouterr().out
        assert out == canonical_json(PipelineConfig().to_dict())

    def test_profile_and_out_file(self, tmp_path, capsys):
        path = tmp_path / "small.json"
        assert main(["config", "init", "--profile", "small", "--out", str(path)]) == 0
        assert capsys.readouterr().out == ""
        doc = path.read_text()
        assert doc == canonical_json(profile_config("small").to_dict())
        assert json.loads(doc)["pose"]["window"] == 24

    def test_unknown_profile(self, capsys):
        assert main(["config", "init", "--profile", "huge"]) == 1


class TestGenerate:
    def test_matches_library_writer_exactly(self, tmp_path, corpus_dir):
        lib_dir = tmp_path / "lib"
        write_corpus(lib_dir, 3, seed=17, states="AD")
        assert tree_bytes(corpus_dir) == tree_bytes(lib_dir)

    def test_reruns_are_byte_identical(self, tmp_path, corpus_dir):
        again = tmp_path / "again"
        assert main(["generate", "--count", "3", "--seed", "17", "--states", "AD", "--out", str(again)]) == 0
        assert tree_bytes(again) == tree_bytes(corpus_dir)

    def test_recipe_with_flag_override(self, tmp_path, capsys):
        recipe = tmp_path / "recipe.json"
        recipe.write_text(json.dumps({"states": "AB", "defects": ["speckle"], "frames": False}))
        out = tmp_path / "corpus"
        code = main(
            ["generate", "--count", "2", "--seed", "4", "--spec", str(recipe), "--states", "AD",
             "--out", str(out)]
        )
        assert code == 0
        records = [json.loads(line) for line in (out / "manifest.jsonl").read_text().splitlines()]
        assert [r["truth"]["state_true"] for r in records] == ["A", "D"]
        assert [r["defects_applied"][0]["kind"] for r in records] == ["speckle", "speckle"]

    def test_unknown_recipe_key(self, tmp_path, capsys):
        recipe = tmp_path / "recipe.json"
        recipe.write_text(json.dumps({"states": "A", "count": 5}))
        code = main(["generate", "--count", "1", "--spec", str(recipe), "--out", str(tmp_path / "x")])
        assert code == 1
        assert "unknown recipe keys: count" in capsys.readouterr().err

    def test_unknown_defect_kind(self, tmp_path, capsys):
        code = main(["generate", "--count", "1", "--defects", "gap,blur", "--out", str(tmp_path / "x")])
        assert code == 1
        assert "blur" in capsys.readouterr().err

    def test_bad_states(self, tmp_path, capsys):
        code = main(["generate", "--count", "1", "--states", "AX", "--out", str(tmp_path / "x")])
        assert code == 1
        assert "service returned 400" in capsys.readouterr().err


class TestPerceivePair:
    def test_stdout_report(self, mask_pair, capsys):
        root, vessel, robot, truth = mask_pair
        code = main(["perceive", str(root / "vessel.pgm"), str(root / "robot.pgm")])
        assert code == 0
        out = capsys.readouterr().out
        assert out == canonical_json(perceive_frame(vessel, robot).report)
        assert json.loads(out)["state"] == truth.state_true

    def test_out_file_and_rerun_identical(self, mask_pair, tmp_path):
        root, *_ = mask_pair
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for path in (a, b):
            code = main(
                ["perceive", str(root / "vessel.pgm"), str(root / "robot.pgm"), "--out", str(path)]
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_debug_overlay_written(self, mask_pair, tmp_path):
        root, *_ = mask_pair
        png = tmp_path / "overlay.png"
        code = main(
            ["perceive", str(root / "vessel.pgm"), str(root / "robot.pgm"),
             "--out", str(tmp_path / "r.json"), "--debug-out", str(png)]
        )
        assert code == 0
        assert png.read_bytes().startswith(b"\x89PNG\r\n\x1a\n")

    def test_no_trajectory_exit_code(self, mask_pair, capsys):
        root, *_ = mask_pair
        code = main(["perceive", str(root / "vessel.pgm"), str(root / "empty.pgm")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_file(self, mask_pair, capsys):
        root, *_ = mask_pair
        assert main(["perceive", str(root / "vessel.pgm"), str(root / "nope.pgm")]) == 1

    def test_no_arguments(self, capsys):
        assert main(["perceive"]) == 1
        assert "provide VESSEL and ROBOT" in capsys.readouterr().err

    def test_config_option(self, mask_pair, tmp_path, capsys):
        root, vessel, robot, _ = mask_pair
        cfg_path = tmp_path / "cfg.json"
        assert main(["config", "init", "--out", str(cfg_path)]) == 0
        code = main(
            ["perceive", str(root / "vessel.pgm"), str(root / "robot.pgm"), "--config", str(cfg_path)]
        )
        assert code == 0
        assert capsys.readouterr().out == canonical_json(perceive_frame(vessel, robot).report)

    def test_invalid_config_file(self, mask_pair, tmp_path, capsys):
        root, *_ = mask_pair
        bad = tmp_path / "bad.json"
        bad.write_text('{"pose": {"bogus": 1}}')
        code = main(
            ["perceive", str(root / "vessel.pgm"), str(root / "robot.pgm"), "--config", str(bad)]
        )
        assert code == 1


class TestPerceiveBatch:
    def test_reports_match_pair_mode(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "reports"
        code = main(["perceive", "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(out)])
        assert code == 0
        records = [json.loads(l) for l in (corpus_dir / "manifest.jsonl").read_text().splitlines()]
        assert sorted(p.name for p in out.iterdir()) == [f"{r['id']:04d}.json" for r in records]
        for rec in records:
            vessel = load_mask(corpus_dir / rec["vessel_mask_path"])
            robot = load_mask(corpus_dir / rec["robot_mask_path"])
            expected = canonical_json(perceive_frame(vessel, robot).report)
            assert (out / f"{rec['id']:04d}.json").read_text() == expected

    def test_parallel_jobs_identical(self, corpus_dir, tmp_path):
        serial = tmp_path / "serial"
        parallel = tmp_path / "parallel"
        assert main(["perceive", "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(serial)]) == 0
        assert (
            main(["perceive", "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(parallel),
                  "--jobs", "3"])
            == 0
        )
        assert tree_bytes(serial) == tree_bytes(parallel)

    def test_batch_rejects_positional_masks(self, corpus_dir, mask_pair, capsys):
        root, *_ = mask_pair
        code = main(
            ["perceive", str(root / "vessel.pgm"), "--manifest", str(corpus_dir / "manifest.jsonl"),
             "--out", "x"]
        )
        assert code == 1

    def test_batch_requires_out(self, corpus_dir, capsys):
        assert main(["perceive", "--manifest", str(corpus_dir / "manifest.jsonl")]) == 1

    def test_empty_robot_in_batch_exits_two(self, corpus_dir, tmp_path, capsys):
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(corpus_dir, broken)
        records = [json.loads(l) for l in (broken / "manifest.jsonl").read_text().splitlines()]
        first = records[0]
        vessel = load_mask(broken / first["vessel_mask_path"])
        save_mask(PixelGrid(np.zeros_like(vessel.cells)), broken / first["robot_mask_path"])
        code = main(["perceive", "--manifest", str(broken / "manifest.jsonl"), "--out", str(tmp_path / "r")])
        assert code == 2
        assert "0000" in capsys.readouterr().err


@pytest.fixture(scope="module")
def evaluated(corpus_dir, tmp_path_factory):
    root = tmp_path_factory.mktemp("eval")
    reports = root / "reports"
    assert main(["perceive", "--manifest", str(corpus_dir / "manifest.jsonl"), "--out", str(reports)]) == 0
    out = root / "aggregate.json"
    code = main(
        ["evaluate", "--manifest", str(corpus_dir / "manifest.jsonl"), "--reports", str(reports),
         "--out", str(out)]
    )
    assert code == 0
    return reports, out


class TestEvaluate:
    def test_aggregate_matches_library(self, corpus_dir, evaluated):
        reports, out = evaluated
        records = [json.loads(l) for l in (corpus_dir / "manifest.jsonl").read_text().splitlines()]
        theta_pairs, state_pairs = [], []
        for rec in records:
            report = json.loads((reports / f"{rec['id']:04d}.json").read_text())
            theta_pairs.append((report["theta_deg"], rec["truth"]["theta_true"]))
            state_pairs.append((rec["truth"]["state_true"], report["state"]))
        expected = canonical_json(aggregate_corpus_stats(theta_pairs, state_pairs))
        assert out.read_text() == expected

    def test_csv_sidecars(self, evaluated):
        _, out = evaluated
        ba = out.with_name("aggregate_bland_altman.csv")
        er = out.with_name("aggregate_error_ranges.csv")
        assert ba.read_text().splitlines()[0] == "mean,difference"
        assert er.read_text().splitlines()[0] == "lower_pct,upper_pct,count,fraction"

    def test_rerun_identical(self, corpus_dir, evaluated, tmp_path):
        reports, out = evaluated
        again = tmp_path / "again.json"
        code = main(
            ["evaluate", "--manifest", str(corpus_dir / "manifest.jsonl"), "--reports", str(reports),
             "--out", str(again)]
        )
        assert code == 0
        assert again.read_bytes() == out.read_bytes()

    def test_missing_report_listed(self, corpus_dir, evaluated, tmp_path, capsys):
        import shutil

        reports, _ = evaluated
        partial = tmp_path / "partial"
        shutil.copytree(reports, partial)
        (partial / "0001.json").unlink()
        code = main(
            ["evaluate", "--manifest", str(corpus_dir / "manifest.jsonl"), "--reports", str(partial),
             "--out", str(tmp_path / "x.json")]
        )
        assert code == 1
        assert "0001" in capsys.readouterr().err


class TestEntryPoint:
    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0
        assert "vesselpose" in capsys.readouterr().out

    def test_unknown_command(self, capsys):
        assert main(["transmogrify"]) == 1

    def test_console_script(self):
        proc = subprocess.run(["vesselpose", "--version"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "vesselpose" in proc.stdout
