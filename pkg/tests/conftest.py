"""Shared fixtures: the fixed point is computed once per session."""
import time
from pathlib import Path

import numpy as np
import pytest

from aprenorm.fixedpoint import find_fixed_point, save_record

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fp_timed():
    t0 = time.perf_counter()
    fp = find_fixed_point()
    return fp, time.perf_counter() - t0


@pytest.fixture(scope="session")
def fp(fp_timed):
    return fp_timed[0]


@pytest.fixture(scope="session")
def cache_dir(fp, tmp_path_factory):
    d = tmp_path_factory.mktemp("cache")
    save_record(fp, d / f"fixed_point_d{fp.degree}_rho{fp.rho:g}.txt")
    return d


@pytest.fixture(scope="session")
def table_eigs():
    rows = np.genfromtxt(DATA / "eigenvalues_n20.csv", delimiter=",", names=True, dtype=None, encoding="utf-8")
    return {int(r["rank"]): (complex(r["re"], r["im"]), r["product"] == "Y") for r in rows}


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
