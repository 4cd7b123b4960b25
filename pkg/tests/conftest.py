import math

import numpy as np
import pytest

from ghostsim.fields import GridSpec
from ghostsim.geometry import OpticalGeometry
from ghostsim.sources import SpdcParams

K = 2 * math.pi / 810e-9
K_PUMP = 2 * math.pi / 405e-9
OMEGA0 = 2 * math.pi * 299_792_458.0 / 810e-9


def thin_spdc(M=1e-5, n_nu=9):
    L, D = 1e-4, 1.9e-10
    return SpdcParams(L=L, D=D, M=M, k_pump=K_PUMP, omega0=OMEGA0,
                      bandwidth=2 * math.pi / (L * D), n_nu=n_nu)


def thick_spdc(M=0.07):
    L, D = 1e-3, 1.9e-10
    return SpdcParams(L=L, D=D, M=M, k_pump=K_PUMP, omega0=OMEGA0,
                      bandwidth=2 * math.pi / (L * D), n_nu=9)


def rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b)))


@pytest.fixture(scope="session")
def spec32():
    # same physical extent as the 128-pixel desk grid
    return GridSpec(32, 40e-6)


@pytest.fixture(scope="session")
def geom():
    return OpticalGeometry(f=0.5, f_D=0.5, k=K)


@pytest.fixture(scope="session")
def spdc():
    return thin_spdc()
