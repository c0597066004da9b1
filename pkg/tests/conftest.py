"""Shared helpers: synthetic well-scaled scenarios and state construction."""

import numpy as np
import pytest

from bdris.channel import Scenario
from bdris.ris import make_architecture


def toy_scenario(m=6, n=3, k=2, seed=0, mask_kind="fully", group_size=None,
                 sigma2=0.5, p_t=None, gamma_db=2.0, z0=50.0):
    """Unit-scale random scenario for update-rule oracle tests."""
    rng = np.random.default_rng(seed)
    g = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2)
    h = (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))) / np.sqrt(2)
    gamma = np.full(k, 10.0 ** (np.float64(gamma_db) / 10.0))
    return Scenario(g=g, h=h, p_t=float(p_t if p_t is not None else k),
                    sigma2=sigma2, gamma=gamma, z0=z0,
                    mask=make_architecture(mask_kind, m, group_size))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
