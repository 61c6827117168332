import numpy as np
import pytest

from pathbridge.chain import ChainModel
from pathbridge.quantum import spectral_decompose, pauli

SYM = np.array([[0.75, 0.25], [0.25, 0.75]])


def sym_chain(T=1, p0=(0.5, 0.5)):
    return ChainModel.homogeneous(np.array(p0, float), SYM, T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def z_obs():
    return spectral_decompose(pauli()["Z"])
