import sys
import os
# テスト実行時にプロジェクトルートを sys.path に追加して `hybridsem` パッケージを見つけられるようにする
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

import numpy as np
import pytest

from hybridsem.services.link_model import SubcarrierProblem
from hybridsem.services.similarity_model import default_curve


def make_problem(rng: np.random.Generator, L: int, semantic: bool = True,
                 infeasible_share: float = 0.2) -> SubcarrierProblem:
    """Small random instance with delays of both modes in the same range.

    W=1 kHz, ~48 bits per word, k=16: Shannon beats semantic above x ≈ 7.
    """
    c = rng.uniform(0.2, 5.0, size=L)
    bits = rng.uniform(500.0, 3000.0, size=L)
    words = np.round(bits / rng.uniform(40.0, 56.0, size=L))
    if semantic:
        gamma = rng.uniform(0.5, 20.0, size=L)
        gamma[rng.random(L) < infeasible_share] = np.inf
    else:
        gamma = np.full(L, np.inf)
    p_tot = float(c.sum() * rng.uniform(1.0, 15.0))
    return SubcarrierProblem(c=c, bits=bits, words=words, gamma_max=gamma, p_tot=p_tot,
                             bandwidth=1000.0, k=16, gap=1.0)


@pytest.fixture
def problem_factory():
    return make_problem


@pytest.fixture
def curve16():
    return default_curve(16)


@pytest.fixture
def log_dir(tmp_path, monkeypatch):
    d = tmp_path / "logs"
    monkeypatch.setenv("HYBRIDSEM_LOG_DIR", str(d))
    return d
