"""Shared fixtures"""

import numpy as np
import pytest

from app.config import get_settings
from app.models.schemas import EncoderConfig, FunctionSetName
from app.services.expr_core import make_alphabet

PAPER_GENE = "√ + − * * x x sin x y y y x y x x y"
PAPER_EXPRESSION = "sqrt(((x*y)-x)+(x*sin(y)))"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def alphabet_b2():
    """Eight-function set over x1, x2"""
    return make_alphabet(FunctionSetName.B, 2)


@pytest.fixture
def alphabet_xy():
    return make_alphabet(FunctionSetName.C, terminal_names=["x", "y"])


@pytest.fixture
def small_encoder():
    return EncoderConfig(n_hidden=8, time_steps=3, head_len=5)


@pytest.fixture
def single_worker_settings(monkeypatch):
    """Settings with one worker and no data directory"""
    monkeypatch.setenv("NEEP_WORKERS", "1")
    monkeypatch.delenv("NEEP_DATA_DIR", raising=False)
    get_settings.cache_clear()
    yield get_settings()
    get_settings.cache_clear()
