from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tprod_mor.bench import ExperimentConfig, random_stable_tpds  # noqa: E402
from tprod_mor.tensor3 import Tensor3  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rand_tensor(rng, n, m, s) -> Tensor3:
    return Tensor3(rng.standard_normal((n, m, s)))


def stable_tpds(n, m, l, s, rho=0.8, seed=0):
    return random_stable_tpds(ExperimentConfig(n=n, m=m, l=l, s=s, rho=rho, seed=seed))


def rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
