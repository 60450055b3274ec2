"""Shared fixtures: seeded corpora for the acceptance suite and a random
blob factory for skeleton property tests."""

from __future__ import annotations

import time

import numpy as np
import pytest

from vesselpose.grid import PixelGrid
from vesselpose.phantom import build_corpus
from vesselpose.pipeline import perceive_frame

DEFECT_CYCLE = ("gap", "branch", "outlier", "speckle")


@pytest.fixture(scope="session")
def clean_corpus():
    """200 defect-free phantoms cycling states A-D."""
    return list(build_corpus(200, seed=20260815))


@pytest.fixture(scope="session")
def defect_corpus():
    """200 phantoms cycling the four defect kinds."""
    return list(build_corpus(200, seed=60301, defect_kinds=DEFECT_CYCLE))


@pytest.fixture(scope="session")
def clean_results(clean_corpus):
    """Pose reports over the defect-free corpus plus perception wall time."""
    t0 = time.perf_counter()
    reports = [perceive_frame(vessel, robot).report for _, vessel, robot, _ in clean_corpus]
    elapsed = time.perf_counter() - t0
    return reports, elapsed


@pytest.fixture(scope="session")
def sample_records():
    """A small mixed corpus for unit-level pipeline tests."""
    return list(build_corpus(6, seed=7))


@pytest.fixture(scope="session")
def blob_factory():
    """Random unions of disks and rectangles, as cleanup/thinning inputs."""

    def make(rng: np.random.Generator, size: int = 64) -> PixelGrid:
        cells = np.zeros((size, size), dtype=bool)
        yy, xx = np.mgrid[0:size, 0:size]
        for _ in range(int(rng.integers(2, 6))):
            cx, cy = rng.uniform(8.0, size - 8.0, size=2)
            r = rng.uniform(3.0, 9.0)
            cells |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        for _ in range(int(rng.integers(0, 3))):
            x0, y0 = rng.integers(4, size - 18, size=2)
            w, h = rng.integers(4, 14, size=2)
            cells[y0 : y0 + h, x0 : x0 + w] = True
        return PixelGrid(cells)

    return make
