"""Release acceptance gate.

Each test checks one pinned acceptance criterion on seeded corpora against
independent oracles and prints a single [PASS]/[FAIL] line with the measured
values, so the test output doubles as a release report. Thresholds are stated
inline next to the measurements.
"""

from __future__ import annotations

import json
import math
import statistics
import time

import numpy as np
import pytest
import scipy.stats
from scipy import ndimage

from vesselpose.cli import main
from vesselpose.errors import TrajectoryNotFoundError
from vesselpose.evalstats import (
    ConfusionMatrix,
    PairedMeasurements,
    bland_altman,
    classification_report,
    error_stats,
    pearson,
    spearman,
)
from vesselpose.grid import PixelGrid
from vesselpose.phantom import PhantomSpec, generate
from vesselpose.pipeline import perceive_frame
from vesselpose.skeleton import GapRepairConfig, bresenham_line, connect_gaps, detect_endpoints, skeletonize

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@pytest.fixture
def gate(capsys):
    """Print one summary line past pytest's capture, then assert."""

    def emit(name: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
        assert ok, f"{name}: {detail}"

    return emit


def test_angle_perception(clean_corpus, clean_results, gate):
    """Angle error and correlation against analytic truth on 200 clean phantoms."""
    reports, elapsed = clean_results
    pairs = PairedMeasurements(
        [report["theta_deg"] for report in reports],
        [meta["truth"]["theta_true"] for meta, _, _, _ in clean_corpus],
    )
    mae = error_stats(pairs)["mean"]
    r = pearson(pairs)
    ok = mae <= 3.0 and r >= 0.95 and elapsed < 60.0
    gate(
        "angle perception",
        ok,
        f"MAE {mae:.3f} deg (<= 3.0), Pearson {r:.4f} (>= 0.95), "
        f"{len(reports)} frames in {elapsed:.1f} s (< 60)",
    )


def test_state_classification(clean_corpus, clean_results, gate):
    """State accuracy and kappa against analytic truth on 200 clean phantoms."""
    reports, _ = clean_results
    actual = [meta["truth"]["state_true"] for meta, _, _, _ in clean_corpus]
    predicted = [report["state"] for report in reports]
    spanned = "".join(sorted(set(actual)))
    report = classification_report(ConfusionMatrix.from_pairs(actual, predicted, classes="ABCD"))
    ok = report["accuracy"] >= 0.95 and report["kappa"] >= 0.9 and spanned == "ABCD"
    gate(
        "state classification",
        ok,
        f"accuracy {report['accuracy']:.3f} (>= 0.95), kappa {report['kappa']:.3f} (>= 0.9), "
        f"truth states {spanned}",
    )


def test_head_localization_under_defects(defect_corpus, gate):
    """Head pixel within 3 px of truth on 200 phantoms with injected defects."""
    hits = 0
    failures = 0
    for meta, vessel, robot, _ in defect_corpus:
        tx, ty = meta["truth"]["head"]
        try:
            hx, hy = perceive_frame(vessel, robot).report["head"]
        except TrajectoryNotFoundError:
            failures += 1
            continue
        if math.hypot(hx - tx, hy - ty) <= 3.0:
            hits += 1
    fraction = hits / len(defect_corpus)
    gate(
        "head localization under defects",
        fraction >= 0.95,
        f"{hits}/{len(defect_corpus)} within 3 px ({fraction:.1%}, >= 95%), "
        f"{failures} frames without a trajectory",
    )


def _cut_line(rng: np.random.Generator, want_repair: bool, threshold: float):
    """A straight skeleton with a mid-line cut whose measured endpoint gap is
    below (repair expected) or at/above (no repair expected) the threshold."""
    size = 96
    while True:
        x0, y0 = (int(v) for v in rng.integers(4, size - 4, size=2))
        x1, y1 = (int(v) for v in rng.integers(4, size - 4, size=2))
        points = bresenham_line((x0, y0), (x1, y1))
        if len(points) < 40:
            continue
        removed = int(rng.integers(1, 9)) if want_repair else int(rng.integers(8, 22))
        start = (len(points) - removed) // 2
        head, tail = points[:start], points[start + removed :]
        if len(head) < 3 or len(tail) < 3:
            continue
        gap = math.dist(head[-1], tail[0])
        if (gap < threshold) if want_repair else (gap >= threshold):
            cells = np.zeros((size, size), dtype=bool)
            for x, y in head + tail:
                cells[y, x] = True
            return PixelGrid(cells), gap


def test_gap_repair(gate):
    """Sub-threshold cuts are always rejoined; wider cuts never are."""
    rng = np.random.default_rng(411)
    cfg = GapRepairConfig()
    outcomes = {True: [0, 0], False: [0, 0]}  # want_repair -> [ok, total]
    for want_repair, cases in ((True, 100), (False, 40)):
        for _ in range(cases):
            grid, _ = _cut_line(rng, want_repair, cfg.gap_threshold)
            components = ndimage.label(connect_gaps(grid, cfg).cells, structure=EIGHT_CONNECTED)[1]
            outcomes[want_repair][0] += components == (1 if want_repair else 2)
            outcomes[want_repair][1] += 1
    ok = outcomes[True][0] == outcomes[True][1] and outcomes[False][0] == outcomes[False][1]
    gate(
        "gap repair",
        ok,
        f"{outcomes[True][0]}/{outcomes[True][1]} sub-threshold cuts rejoined, "
        f"{outcomes[False][0]}/{outcomes[False][1]} at/above-threshold cuts left disconnected",
    )


def _endpoint_oracle(cells: np.ndarray) -> list[tuple[int, int]]:
    """Brute-force scan: foreground pixels with exactly one foreground 8-neighbor."""
    h, w = cells.shape
    out = []
    for y in range(h):
        for x in range(w):
            if not cells[y, x]:
                continue
            neighbors = sum(
                1
                for dy in (-1, 0, 1)
                for dx in (-1, 0, 1)
                if (dy or dx) and 0 <= y + dy < h and 0 <= x + dx < w and cells[y + dy, x + dx]
            )
            if neighbors == 1:
                out.append((x, y))
    return out


def test_skeleton_properties(blob_factory, gate):
    """Thinness, component preservation and exact endpoint detection on 100 blobs."""
    rng = np.random.default_rng(505)
    problems = []
    for i in range(100):
        blob = blob_factory(rng)
        skeleton = skeletonize(blob)
        cells = skeleton.grid.cells
        if (cells[:-1, :-1] & cells[1:, :-1] & cells[:-1, 1:] & cells[1:, 1:]).any():
            problems.append(f"blob {i}: 2x2 block survives")
        n_mask = ndimage.label(blob.cells, structure=EIGHT_CONNECTED)[1]
        n_skel = ndimage.label(cells, structure=EIGHT_CONNECTED)[1]
        if n_mask != n_skel:
            problems.append(f"blob {i}: components {n_mask} -> {n_skel}")
        if list(skeleton.endpoints) != _endpoint_oracle(cells):
            problems.append(f"blob {i}: skeleton endpoints differ from oracle")
        if detect_endpoints(blob) != _endpoint_oracle(blob.cells):
            problems.append(f"blob {i}: raw-mask endpoints differ from oracle")
    gate(
        "skeleton properties",
        not problems,
        "100 random blobs: thin, component counts preserved, endpoints match "
        "brute-force oracle exactly" if not problems else "; ".join(problems[:4]),
    )


def _report_oracle(counts: np.ndarray) -> dict:
    """Direct-formula accuracy/kappa/per-class metrics for a count matrix."""
    total = counts.sum()
    rows, cols, diag = counts.sum(axis=1), counts.sum(axis=0), np.diag(counts)
    p_o = diag.sum() / total
    p_e = float(rows @ cols) / (total * total)
    kappa = 1.0 if p_e == 1.0 else (p_o - p_e) / (1.0 - p_e)
    per = []
    for i in range(len(counts)):
        p = diag[i] / cols[i] if cols[i] else 0.0
        r = diag[i] / rows[i] if rows[i] else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        per.append((p, r, f1))
    return {
        "accuracy": p_o,
        "kappa": kappa,
        "per": per,
        "fm": statistics.fmean(math.sqrt(p * r) for p, r, _ in per),
    }


def test_statistics_oracle_equivalence(gate):
    """Every statistic matches an independent direct-formula oracle on 1000 instances."""
    rng = np.random.default_rng(606)
    worst = 0.0

    def check(ours: float, oracle: float):
        nonlocal worst
        worst = max(worst, abs(ours - oracle))

    for _ in range(1000):
        n = int(rng.integers(3, 40))
        x = rng.normal(size=n) * rng.uniform(0.5, 20.0) + rng.uniform(-50.0, 50.0)
        y = rng.normal(size=n) * rng.uniform(0.5, 20.0) + rng.uniform(-50.0, 50.0)
        if rng.random() < 0.3:  # force rank ties
            x, y = np.round(x, 0), np.round(y, 0)
            x[0] += 0.5  # keep the series non-constant
            y[0] += 0.5
        m = PairedMeasurements(x, y)

        check(pearson(m), scipy.stats.pearsonr(x, y).statistic)
        check(spearman(m), scipy.stats.spearmanr(x, y).statistic)

        errors = [abs(a - b) for a, b in zip(x, y)]
        stats = error_stats(m)
        check(stats["mean"], statistics.fmean(errors))
        check(stats["std"], statistics.stdev(errors))
        check(stats["median"], statistics.median(errors))

        diffs = [a - b for a, b in zip(x, y)]
        ba = bland_altman(m)
        mean_diff, std_diff = statistics.fmean(diffs), statistics.stdev(diffs)
        check(ba["mean_diff"], mean_diff)
        check(ba["upper_loa"], mean_diff + 1.96 * std_diff)
        check(ba["lower_loa"], mean_diff - 1.96 * std_diff)

    for _ in range(1000):
        k = int(rng.integers(2, 6))
        counts = rng.integers(0, 21, size=(k, k))
        if counts.sum() == 0:
            counts[0, 0] = 1
        report = classification_report(ConfusionMatrix([str(i) for i in range(k)], counts))
        oracle = _report_oracle(counts)
        check(report["accuracy"], oracle["accuracy"])
        check(report["kappa"], oracle["kappa"])
        check(report["fm"], oracle["fm"])
        for label, (p, r, f1) in zip(sorted(report["per_class"]), oracle["per"]):
            check(report["per_class"][label]["precision"], p)
            check(report["per_class"][label]["recall"], r)
            check(report["per_class"][label]["f1"], f1)

    # Published reference point: differences with mean 2.25 and spread 5.68
    # must bracket to limits of agreement (13.38, -8.88).
    reference = bland_altman(
        PairedMeasurements([2.25 - 5.68, 2.25, 2.25 + 5.68], [0.0, 0.0, 0.0])
    )
    loa_ok = abs(reference["upper_loa"] - 13.38) <= 0.01 and abs(
        reference["lower_loa"] - (-8.88)
    ) <= 0.01
    gate(
        "statistics oracle equivalence",
        worst <= 1e-9 and loa_ok,
        f"max |ours - oracle| {worst:.2e} over 1000 paired series + 1000 confusion "
        f"matrices (<= 1e-9); reference LoA ({reference['upper_loa']:.2f}, "
        f"{reference['lower_loa']:.2f}) vs (13.38, -8.88) +- 0.01",
    )


def _tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_cli_determinism(tmp_path, gate):
    """generate, perceive and evaluate are byte-identical across reruns."""
    recipe = [
        "generate", "--count", "6", "--seed", "99", "--states", "ABCD",
        "--defects", "gap,branch,outlier,speckle", "--frames",
    ]
    corpora = [tmp_path / "corpus1", tmp_path / "corpus2"]
    for corpus in corpora:
        assert main(recipe + ["--out", str(corpus)]) == 0
    generate_ok = _tree_bytes(corpora[0]) == _tree_bytes(corpora[1])

    manifest = corpora[0] / "manifest.jsonl"
    report_dirs = [tmp_path / "reports1", tmp_path / "reports2"]
    for reports in report_dirs:
        assert main(["perceive", "--manifest", str(manifest), "--out", str(reports)]) == 0
    perceive_ok = _tree_bytes(report_dirs[0]) == _tree_bytes(report_dirs[1])

    eval_dirs = [tmp_path / "eval1", tmp_path / "eval2"]
    for out_dir in eval_dirs:
        out_dir.mkdir()
        assert main(
            ["evaluate", "--manifest", str(manifest), "--reports", str(report_dirs[0]),
             "--out", str(out_dir / "aggregate.json")]
        ) == 0
    evaluate_ok = _tree_bytes(eval_dirs[0]) == _tree_bytes(eval_dirs[1])

    gate(
        "command determinism",
        generate_ok and perceive_ok and evaluate_ok,
        f"byte-identical reruns: generate {generate_ok}, perceive {perceive_ok}, "
        f"evaluate {evaluate_ok}",
    )


def test_perceive_latency(gate):
    """Median single-frame latency on a 640x480 mask pair."""
    spec = PhantomSpec(
        image_size=(640, 480),
        vessel_control_points=((-30.0, 120.0), (213.0, 190.0), (426.0, 260.0), (640.0, 330.0)),
        vessel_radius=28.0,
        robot_offset=2.0,
        robot_angle=6.0,
        robot_length=380.0,
    )
    vessel, robot, _ = generate(spec)
    perceive_frame(vessel, robot)  # warm-up outside the timed runs
    samples = []
    for _ in range(21):
        t0 = time.perf_counter()
        perceive_frame(vessel, robot)
        samples.append((time.perf_counter() - t0) * 1000.0)
    median = statistics.median(samples)
    gate(
        "perceive latency",
        median <= 50.0,
        f"640x480 median {median:.1f} ms over 21 runs (<= 50), max {max(samples):.1f} ms",
    )
