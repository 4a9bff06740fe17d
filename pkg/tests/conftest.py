import numpy as np
import pytest

from fedokg import scalars as sc
from fedokg.tensors import constant_tensor
from fedokg.wick import FiberForm


def std_sigma_upper(d):
    """Block-diagonal standard symplectic inverse, entries of sigma^{ij}."""
    m = [[0] * (2 * d) for _ in range(2 * d)]
    for b in range(d):
        m[2 * b][2 * b + 1] = 1
        m[2 * b + 1][2 * b] = -1
    return m


def std_sigma_lower(d):
    m = [[0] * (2 * d) for _ in range(2 * d)]
    for b in range(d):
        m[2 * b][2 * b + 1] = -1
        m[2 * b + 1][2 * b] = 1
    return m


def std_fiber_form(d, order, mode):
    """omega^{ij} = (delta^{ij} + i sigma_std^{ij}) / 2 with constant jets."""
    dim = 2 * d
    su = std_sigma_upper(d)
    if mode == sc.EXACT:
        half = sc.QQ(sc.mpq(1, 2))
        half_i = sc.QQ(0, sc.mpq(1, 2))
        om = [[half * sc.QQ(1 if i == j else 0)
               + half_i * sc.QQ(su[i][j]) for j in range(dim)]
              for i in range(dim)]
    else:
        om = [[0.5 * (1 if i == j else 0) + 0.5j * su[i][j]
               for j in range(dim)] for i in range(dim)]
    omega = constant_tensor(dim, ("u", "u"), om, order, mode)
    return FiberForm(omega)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
