from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import settings

from vexpa.signal_model import ExponentialTerm, SignalModel

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_model(rng: np.random.Generator, n: int, rate: float, u: int = 1,
                 min_sep: float = 0.05, damping: bool = False) -> SignalModel:
    """Random model whose eigenvalues at stride ``u`` are at least ``min_sep`` apart
    on the unit circle, with frequencies below the full-rate Nyquist bound."""
    delta = 1.0 / rate
    while True:
        f = rng.uniform(-0.45 * rate, 0.45 * rate, n)
        lam = np.exp(2j * np.pi * f * delta)
        ok = True
        for stride in {1, u}:
            z = lam ** stride
            d = np.abs(z[:, None] - z[None, :])
            np.fill_diagonal(d, np.inf)
            ok &= bool(d.min() >= min_sep) if n > 1 else True
        if ok:
            break
    beta = rng.uniform(0.5, 2.0, n)
    gamma = rng.uniform(-math.pi, math.pi, n)
    psi = rng.uniform(-0.5, 0.0, n) if damping else np.zeros(n)
    return SignalModel(tuple(ExponentialTerm(b, g, p, 2 * math.pi * fi)
                             for b, g, p, fi in zip(beta, gamma, psi, f)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
