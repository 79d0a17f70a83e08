"""Reference signal models used by the experiments."""

from __future__ import annotations

import math

from .signal_model import ExponentialTerm, SignalModel

TWO_PI = 2 * math.pi

# (beta, gamma, omega / 2pi, psi)
_OUTLIER_TABLE = [
    (1.0, 0.3342, 417.764, -0.1),
    (1.0, 0.8084, -15.8, 0.0),
    (0.5, 0.5880, -19.5, 0.0),
]

_HIGH_NOISE_TABLE = [
    (1.0, 0.0, -5.93, 0.0),
    (2.0, math.pi, -4.05, 0.0),
    (2.0, math.pi / 4, -3.10, 0.0),
    (2.0, math.pi / 8, -1.82, 0.0),
    (2.0, 3 * math.pi / 4, -1.31, 0.0),
    (1.0, math.pi / 10, 1.90, 0.0),
    (3.0, -math.pi, 2.97, 0.0),
    (1.5, -7 * math.pi / 8, 6.05, 0.0),
    (2.0, 0.0, 6.67, 0.0),
    (3.0, -78 * math.pi / 100, 38.0, 0.0),
    (1.0, 0.0, 43.0, 0.0),
    (1.0, math.pi / 5, -24.0, 0.0),
]

# sampling rates at which the experiments run; both satisfy the Nyquist bound
OUTLIER_RATE = 1000.0
HIGH_NOISE_RATE = 100.0
TOY_RATE = 100.0
COLLISION_RATE = 100.0


def _from_table(rows) -> SignalModel:
    return SignalModel(tuple(ExponentialTerm(b, g, psi, TWO_PI * f) for b, g, f, psi in rows))


def outlier_model() -> SignalModel:
    """Three-term model of the outlier experiment."""
    return _from_table(_OUTLIER_TABLE)


def high_noise_model() -> SignalModel:
    """Twelve-term model of the varying-SNR experiment."""
    return _from_table(_HIGH_NOISE_TABLE)


def toy_model(n: int = 10) -> SignalModel:
    """Unit amplitudes at integer frequencies ``0 .. n-1`` Hz."""
    return SignalModel(tuple(ExponentialTerm(1.0, 0.0, 0.0, TWO_PI * i) for i in range(n)))


def collision_model() -> SignalModel:
    """Two tones at 13 and 33 Hz that collide under decimation by 10 at 100 Hz."""
    return SignalModel((ExponentialTerm(1.0, 0.0, 0.0, TWO_PI * 13), ExponentialTerm(1.0, 0.0, 0.0, TWO_PI * 33)))


PRESETS = {
    "outlier": outlier_model,
    "high_noise": high_noise_model,
    "toy": toy_model,
    "collision": collision_model,
}
