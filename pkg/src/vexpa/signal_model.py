"""Multi-exponential signal model: synthesis, sampling and perturbation."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class ExponentialTerm:
    """One damped complex exponential ``beta * exp(i*gamma) * exp((psi + i*omega) t)``."""

    beta: float
    gamma: float
    psi: float
    omega: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not -math.pi < self.gamma <= math.pi:
            object.__setattr__(self, "gamma", wrap_phase(self.gamma))

    @property
    def alpha(self) -> complex:
        return self.beta * cmath.exp(1j * self.gamma)

    @property
    def mu(self) -> complex:
        return complex(self.psi, self.omega)

    @classmethod
    def from_complex(cls, alpha: complex, mu: complex) -> "ExponentialTerm":
        return cls(beta=abs(alpha), gamma=cmath.phase(alpha), psi=mu.real, omega=mu.imag)


def wrap_phase(gamma: float) -> float:
    """Map an angle into (-pi, pi]."""
    g = math.remainder(gamma, 2 * math.pi)
    return math.pi if g == -math.pi else g


@dataclass(frozen=True)
class SignalModel:
    terms: tuple[ExponentialTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("a signal model needs at least one term")
        mus = [t.mu for t in self.terms]
        for a in range(len(mus)):
            for b in range(a + 1, len(mus)):
                if mus[a] == mus[b]:
                    raise ValueError(f"terms {a} and {b} share the exponent {mus[a]}")

    @property
    def n(self) -> int:
        return len(self.terms)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([t.alpha for t in self.terms], dtype=complex)

    @property
    def mus(self) -> np.ndarray:
        return np.array([t.mu for t in self.terms], dtype=complex)

    def eigenvalues(self, delta: float, u: int = 1) -> np.ndarray:
        """``exp(mu_i * u * delta)`` for every term."""
        return np.exp(self.mus * u * delta)

    @classmethod
    def from_complex(cls, alphas: Iterable[complex], mus: Iterable[complex]) -> "SignalModel":
        return cls(tuple(ExponentialTerm.from_complex(a, m) for a, m in zip(alphas, mus)))

    def to_dict(self) -> dict:
        return {"terms": [
            {"beta": t.beta, "gamma": t.gamma, "psi": t.psi, "omega": t.omega}
            for t in self.terms
        ]}

    @classmethod
    def from_dict(cls, data: dict) -> "SignalModel":
        try:
            raw = data["terms"]
            terms = tuple(
                ExponentialTerm(float(t["beta"]), float(t["gamma"]), float(t["psi"]), float(t["omega"]))
                for t in raw
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed model description: {exc!r}") from exc
        return cls(terms)


@dataclass(frozen=True)
class SamplingGrid:
    delta: float
    count: int

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"sampling interval must be positive, got {self.delta}")
        if self.count < 2:
            raise ValueError(f"need at least 2 samples, got {self.count}")

    @property
    def omega_rate(self) -> float:
        return 1.0 / self.delta

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.count) * self.delta


@dataclass(frozen=True)
class SampleSet:
    """Uniform complex samples plus a record of every perturbation applied.

    ``noise`` holds ``(snr_db, seed)`` pairs in the order they were added and
    ``outliers`` holds ``(index, offset)`` pairs.
    """

    grid: SamplingGrid
    values: np.ndarray
    noise: tuple[tuple[float, int], ...] = ()
    outliers: tuple[tuple[int, complex], ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.count,):
            raise ValueError(f"expected {self.grid.count} samples, got shape {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        for idx, _ in self.outliers:
            if not 0 <= idx < self.grid.count:
                raise ValueError(f"outlier index {idx} outside [0, {self.grid.count - 1}]")

    @property
    def noise_snr_db(self) -> float | None:
        return self.noise[-1][0] if self.noise else None

    @property
    def n_samples(self) -> int:
        return self.grid.count

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (self.grid == other.grid and self.noise == other.noise
                and self.outliers == other.outliers
                and np.array_equal(self.values, other.values))

    __hash__ = None


def evaluate(model: SignalModel, t) -> complex | np.ndarray:
    """Evaluate the model at time(s) ``t``."""
    t_arr = np.asarray(t, dtype=float)
    # elementwise product and row sum, so a scalar t and a grid give identical bits
    out = np.sum(np.exp(np.multiply.outer(t_arr, model.mus)) * model.alphas, axis=-1)
    return complex(out) if t_arr.ndim == 0 else out


def sample(model: SignalModel, grid: SamplingGrid) -> SampleSet:
    return SampleSet(grid, evaluate(model, grid.times))


def signal_power(values: np.ndarray) -> float:
    return float(np.mean(np.abs(values) ** 2))


def noise_variance(values: np.ndarray, snr_db: float) -> float:
    """Total complex noise variance giving ``snr_db`` relative to the mean sample power."""
    return signal_power(values) / 10.0 ** (snr_db / 10.0)


def add_noise(samples: SampleSet, snr_db: float | None, seed: int) -> SampleSet:
    """Add white circular Gaussian noise at the requested SNR.

    ``snr_db=None`` or ``+inf`` means no noise and returns the samples unchanged.
    The generator is numpy's PCG64 seeded with ``seed``: real parts are drawn
    first, imaginary parts second.
    """
    if snr_db is None or snr_db == math.inf:
        return samples
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    sigma2 = noise_variance(samples.values, snr_db)
    rng = np.random.default_rng(seed)
    n = samples.n_samples
    scale = math.sqrt(sigma2 / 2.0)
    noise = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return replace(samples, values=samples.values + noise,
                   noise=samples.noise + ((float(snr_db), int(seed)),))


def inject_outlier(samples: SampleSet, index: int, offset: complex) -> SampleSet:
    if not 0 <= index < samples.n_samples:
        raise IndexError(f"outlier index {index} outside [0, {samples.n_samples - 1}]")
    values = samples.values.copy()
    values[index] += offset
    return replace(samples, values=values,
                   outliers=samples.outliers + ((int(index), complex(offset)),))


def with_values(samples: SampleSet, values: Sequence[complex]) -> SampleSet:
    return replace(samples, values=np.asarray(values, dtype=complex))
