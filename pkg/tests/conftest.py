"""Shared pytest fixtures and options for overlap-bounds tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from linalg import DenseSymmetricMatrix, StateVector
from spectrum import SpectralModel


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run the randomized acceptance suites.",
    )


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="use --run-slow to execute randomized suites")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def fixtures_path() -> Path:
    return Path(__file__).parent / "fixtures"


@pytest.fixture
def s3() -> SpectralModel:
    """Three levels at -1, 0, 1 with overlaps 0.5, 0.3, 0.2."""
    return SpectralModel(eigenvalues=[-1.0, 0.0, 1.0], overlaps=[0.5, 0.3, 0.2])


@pytest.fixture
def two_level() -> tuple[DenseSymmetricMatrix, StateVector]:
    """diag(0, 1) with ground overlap 0.75."""
    return (
        DenseSymmetricMatrix.diagonal([0.0, 1.0]),
        StateVector.from_amplitudes([np.sqrt(0.75), 0.5]),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def random_model(rng: np.random.Generator, levels: int, gap: float = 0.05) -> SpectralModel:
    """Levels on [-1, 1] separated by at least ``gap`` with Dirichlet overlaps."""
    steps = gap + rng.random(levels - 1)
    energies = np.concatenate([[0.0], np.cumsum(steps)])
    energies = -1.0 + 2.0 * energies / energies[-1]
    overlaps = rng.dirichlet(np.ones(levels))
    overlaps = np.maximum(overlaps, 1e-3)
    return SpectralModel(eigenvalues=energies, overlaps=overlaps / overlaps.sum())


def random_symmetric(rng: np.random.Generator, n: int) -> DenseSymmetricMatrix:
    raw = rng.standard_normal((n, n))
    return DenseSymmetricMatrix((raw + raw.T) / 2.0)


def random_state(rng: np.random.Generator, n: int) -> StateVector:
    return StateVector.from_amplitudes(rng.standard_normal(n), normalize=True)
