import numpy as np
import pytest

from carvesim import TwoAtomState


def random_density(rng, rank: int = 4) -> TwoAtomState:
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return TwoAtomState(rho / np.trace(rho).real)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def make_state(rng):
    def make(rank: int = 4) -> TwoAtomState:
        return random_density(rng, rank)

    return make
