import numpy as np
import pytest

from localfractal.functions import constant, polynomial
from localfractal.geometry import Box, Partition, Piece, Similitude, halving_partition
from localfractal.rb import LocalFractalSystem


def takagi2(x, terms=60):
    """2 * sum_k 2^-k dist(2^k x, Z): independent closed form of the affine example."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k in range(terms):
        y = (2.0**k) * x
        out += 2.0**-k * np.abs(y - np.rint(y))
    return 2 * out


def make_system(lams, scales, partition=None):
    p = partition or halving_partition()
    lam = tuple(l if not np.isscalar(l) else constant(l, pc.subdomain) for l, pc in zip(lams, p.pieces))
    sc = tuple(s if not np.isscalar(s) else constant(s, pc.subdomain) for s, pc in zip(scales, p.pieces))
    return LocalFractalSystem(p, lam, sc)


@pytest.fixture
def affine_system():
    return make_system((polynomial([0.0, 1.0]), polynomial([1.0, -1.0])), (0.5, 0.5))


@pytest.fixture
def constant_system():
    return make_system((1.0, 1.0), (0.5, 0.5))


@pytest.fixture
def local_partition():
    """X1 = [0,1) by x/2, X2 = [0,1/2) by x + 1/2."""
    return Partition(
        Box.unit(1),
        (Piece(Box.unit(1), Similitude(0.5, None, [0.0])),
         Piece(Box((0.0,), (0.5,)), Similitude(1.0, None, [0.5]))),
    )
