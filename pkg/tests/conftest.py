import numpy as np
import pytest

from privfair import (
    Alphabet,
    DecisionPolicy,
    Prior,
    TabularWorld,
    UtilityTable,
    counterexample_world,
)


@pytest.fixture
def binary():
    return Alphabet(("0", "1"))


@pytest.fixture
def counterexample():
    return counterexample_world()


@pytest.fixture
def simple_world(binary):
    """One context, two groups, two decisions; expected utilities 0.6 and 0.3."""
    x = Alphabet(("x0",))
    table = np.array([[[0.4, 0.6], [0.7, 0.3]]])  # [x][a][u], g(u)=u picks column 1
    world = TabularWorld(
        DecisionPolicy(binary, x, binary, table),
        Prior.uniform(x),
        Prior.uniform(binary),
    )
    return world


def u_value_utility(world):
    return UtilityTable.u_value(world)
