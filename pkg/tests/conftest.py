"""Shared helpers for the test suite."""

import numpy as np
import pytest

from cosseratpd.constitutive import ElasticModuli
from cosseratpd.grid import build_grid, find_neighbors


def make_field(nx=9, ny=9, dx=1.0, thickness=1.0, rho=2000.0, **kw):
    kw.setdefault("length_scale", dx)
    return build_grid(nx, ny, dx, thickness, rho, **kw)


def make_table(nx=9, ny=9, dx=1.0, factor=2.05, **kw):
    pts = make_field(nx, ny, dx, **kw)
    return pts, find_neighbors(pts, factor * dx)


def make_moduli(E=50e6, nu=0.2, mu_c=None, l=1e-3):
    if mu_c is None:
        mu_c = E / (2.0 * (1.0 + nu))
    return ElasticModuli(E=E, nu=nu, mu_c=mu_c, l=l)


def fullest_points(nt):
    """Indices whose neighbor count equals the interior maximum."""
    counts = np.bincount(nt.i, minlength=nt.n_points)
    return np.nonzero(counts == counts.max())[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
