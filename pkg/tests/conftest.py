import math

import numpy as np
import pytest

from imcf.flow import FlowConfig, evolve
from imcf.geometry import GraphState, Grid

TWO_PI = 2 * math.pi


def sine_state(N: int, a: float = 0.1, c: float = 1.0, L: float = TWO_PI) -> GraphState:
    grid = Grid(1, N, L)
    (x,) = grid.coords()
    return GraphState(grid, 0.0, c + a * np.sin(2 * np.pi * x / L))


def horosphere(n: int, N: int, y0: float = 1.0, L: float = TWO_PI) -> GraphState:
    grid = Grid(n, N, L)
    return GraphState(grid, 0.0, np.full(grid.shape, y0))


@pytest.fixture(scope="session")
def perturbed_run_3():
    """n = 1, y = 1 + 0.1 sin x, N = 256, t_end = 3."""
    state = sine_state(256)
    return state, evolve(state, FlowConfig(t_end=3.0))


@pytest.fixture(scope="session")
def perturbed_run_4():
    state = sine_state(256)
    return state, evolve(state, FlowConfig(t_end=4.0))


@pytest.fixture(scope="session")
def horosphere_run():
    state = horosphere(2, 64)
    return state, evolve(state, FlowConfig(t_end=2.0))
