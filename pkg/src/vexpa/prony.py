"""Hankel matrices, Prony-type eigenvalue solvers and Vandermonde amplitude fits.

Two eigenvalue routes are provided: the square generalized eigenvalue problem
on a pair of shifted Hankel matrices, and a least-squares ESPRIT on a
rectangular Hankel matrix.  Both operate on a (possibly decimated) sample
sequence ``x_j = phi[offset + u*j]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import (
    InsufficientSamplesError,
    RankDeficiencyError,
    SingularPencilError,
    VandermondeConditioningWarning,
)
from .signal_model import SampleSet

# relative singular-value floor below which a direction carries no signal
NUMERICAL_RANK_RTOL = 1e-10
VANDERMONDE_WARN_COND = 1e10


class EigenKind(str, Enum):
    PLAIN = "plain"
    U_ALIASED = "u-aliased"
    S_ALIASED = "s-aliased"


@dataclass(frozen=True)
class HankelSpec:
    shift: int
    undersampling: int
    order: int

    def __post_init__(self):
        if self.shift < 0 or self.undersampling < 1 or self.order < 1:
            raise ValueError(f"invalid Hankel parameters {self}")

    @property
    def max_index(self) -> int:
        return self.shift + (2 * self.order - 2) * self.undersampling


@dataclass(frozen=True)
class EigenEstimate:
    value: complex
    kind: EigenKind
    term_index: int
    amplitude: complex
    decimation_index: int | None = None


def decimated(values: np.ndarray, u: int = 1, offset: int = 0) -> np.ndarray:
    return np.asarray(values)[offset::u]


def build_hankel(samples: SampleSet, spec: HankelSpec) -> np.ndarray:
    """Square Hankel matrix with entry ``(p, q) = phi[s + (p+q)*u]``."""
    if spec.max_index >= samples.n_samples:
        raise InsufficientSamplesError(
            f"Hankel {spec} reads sample {spec.max_index} but only {samples.n_samples} exist")
    n = spec.order
    idx = spec.shift + spec.undersampling * (np.arange(n)[:, None] + np.arange(n)[None, :])
    return samples.values[idx]


def rect_hankel(x: np.ndarray, cols: int) -> np.ndarray:
    """Hankel matrix with ``len(x) - cols + 1`` rows and ``cols`` columns."""
    rows = len(x) - cols + 1
    return scipy.linalg.hankel(x[:rows], x[rows - 1:])


def numerical_rank(singular_values: np.ndarray, rtol: float = NUMERICAL_RANK_RTOL) -> int:
    if len(singular_values) == 0 or singular_values[0] == 0:
        return 0
    return int(np.count_nonzero(singular_values > rtol * singular_values[0]))


def vandermonde_lstsq(x: np.ndarray, nodes: np.ndarray, powers: np.ndarray | None = None,
                      warn: bool = True) -> np.ndarray:
    """Least-squares amplitudes ``a`` with ``x[j] ~ sum_i a_i * nodes_i**powers[j]``.

    Columns are built in log space and normalised to unit peak magnitude so
    that nodes far off the unit circle neither overflow nor dominate the QR
    (column-pivoted, LAPACK ``gelsy``).
    """
    x = np.asarray(x, dtype=complex)
    nodes = np.asarray(nodes, dtype=complex)
    if powers is None:
        powers = np.arange(len(x))
    powers = np.asarray(powers, dtype=float)
    if len(nodes) == 0:
        return np.zeros(0, dtype=complex)
    if len(x) < len(nodes):
        raise InsufficientSamplesError(f"{len(x)} equations for {len(nodes)} amplitudes")

    safe = np.where(nodes == 0, np.finfo(float).tiny, nodes)
    logs = np.log(safe)
    exponent = np.outer(powers, logs)
    peak = np.max(exponent.real, axis=0)
    V = np.exp(exponent - peak)
    norms = np.linalg.norm(V, axis=0)
    Vs = V / norms
    if warn and len(nodes) > 1:
        sv = np.linalg.svd(Vs, compute_uv=False)
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        if cond > VANDERMONDE_WARN_COND:
            warnings.warn(f"Vandermonde system is ill-conditioned (cond ~ {cond:.2e}); "
                          "nodes nearly coincide", VandermondeConditioningWarning, stacklevel=2)
    coef = scipy.linalg.lstsq(Vs, x, lapack_driver="gelsy")[0]
    with np.errstate(over="ignore", under="ignore"):
        return coef / norms * np.exp(-peak)


def sort_by_amplitude(lambdas: np.ndarray, alphas: np.ndarray):
    order = np.argsort(-np.abs(alphas), kind="stable")
    return lambdas[order], alphas[order]


def gevp_eigenvalues(x: np.ndarray, n: int, stride: int = 1) -> np.ndarray:
    """Eigenvalues of the pencil ``(H1, H0)`` built from ``x`` with step ``stride``.

    ``H0[p,q] = x[(p+q)*stride]`` and ``H1[p,q] = x[stride + (p+q)*stride]``.
    """
    needed = (2 * n - 1) * stride
    if needed >= len(x):
        raise InsufficientSamplesError(f"pencil of order {n} needs sample {needed}, have {len(x)}")
    ij = np.arange(n)[:, None] + np.arange(n)[None, :]
    H0 = x[ij * stride]
    H1 = x[stride + ij * stride]
    cond = np.linalg.cond(H0)
    if not np.isfinite(cond) or cond > 1.0 / (np.finfo(float).eps * 1e2):
        raise SingularPencilError("Hankel pencil is numerically singular", float(cond))
    return scipy.linalg.eigvals(H1, H0)


def esprit(x: np.ndarray, rank: int, cols: int | None = None,
           rtol: float | None = NUMERICAL_RANK_RTOL) -> np.ndarray:
    """LS-ESPRIT eigenvalues of the sequence ``x``.

    The rectangular Hankel matrix uses ``cols = len(x) // 2`` columns unless
    given.  With ``rtol`` set, directions whose singular value falls below
    ``rtol * s_max`` are dropped, so the result may hold fewer than ``rank``
    values on exactly low-rank data.
    """
    x = np.asarray(x, dtype=complex)
    L = len(x)
    cols = L // 2 if cols is None else cols
    rows = L - cols + 1
    if rank < 1 or cols < rank or rows - 1 < rank:
        raise InsufficientSamplesError(
            f"{L} samples cannot support an ESPRIT subspace of rank {rank}")
    H = rect_hankel(x, cols)
    U, s, _ = np.linalg.svd(H, full_matrices=False)
    r = rank if rtol is None else min(rank, numerical_rank(s, rtol))
    if r == 0:
        return np.zeros(0, dtype=complex)
    Us = U[:, :r]
    psi = scipy.linalg.lstsq(Us[:-1], Us[1:])[0]
    return np.linalg.eigvals(psi)


def fit_exponentials(x: np.ndarray, order: int, rtol: float | None = NUMERICAL_RANK_RTOL,
                     warn: bool = False):
    """ESPRIT nodes plus least-squares amplitudes, sorted by decreasing ``|amplitude|``."""
    lambdas = esprit(x, order, rtol=rtol)
    alphas = vandermonde_lstsq(x, lambdas, warn=warn)
    return sort_by_amplitude(lambdas, alphas)


def _estimates(lambdas, alphas, kind, k):
    lambdas, alphas = sort_by_amplitude(np.asarray(lambdas), np.asarray(alphas))
    return [EigenEstimate(complex(l), kind, i, complex(a), k)
            for i, (l, a) in enumerate(zip(lambdas, alphas))]


def solve_gevp(samples: SampleSet, u: int, n: int) -> list[EigenEstimate]:
    """Square pencil ``(^u_u H_n, ^0_u H_n)``; noisefree output is ``exp(mu_i*u*delta)``."""
    if 2 * n * u > samples.n_samples:
        raise InsufficientSamplesError(f"2*n*u = {2 * n * u} exceeds N = {samples.n_samples}")
    lambdas = gevp_eigenvalues(samples.values, n, stride=u)
    x = decimated(samples.values, u)
    alphas = vandermonde_lstsq(x, lambdas)
    kind = EigenKind.PLAIN if u == 1 else EigenKind.U_ALIASED
    return _estimates(lambdas, alphas, kind, 0 if u > 1 else None)


def esprit_estimate(samples: SampleSet, u: int = 1, offset: int = 0, n: int | None = None,
                    nu: int | None = None) -> list[EigenEstimate]:
    """ESPRIT on the decimated sequence ``phi[offset + u*j]``.

    ``n`` fixes the subspace rank; without it the analysis is over-modelled at
    rank ``nu`` and numerically empty directions are dropped.
    """
    if n is None and nu is None:
        raise ValueError("give the model order n or an over-model order nu")
    nu = n if nu is None else nu
    if n is not None and nu < n:
        raise ValueError(f"nu={nu} must be >= n={n}")
    x = decimated(samples.values, u, offset)
    if len(x) // 2 < nu:
        raise InsufficientSamplesError(
            f"decimation holds {len(x)} samples, too few for {nu} Hankel columns")
    if n is not None:
        lambdas = esprit(x, n, rtol=None)
        s = np.linalg.svd(rect_hankel(x, len(x) // 2), compute_uv=False)
        r = numerical_rank(s)
        if r < n:
            raise RankDeficiencyError(f"data rank {r} is below the requested order {n}", r)
    else:
        lambdas = esprit(x, nu)
    alphas = vandermonde_lstsq(x, lambdas, warn=False)
    kind = EigenKind.PLAIN if u == 1 else EigenKind.U_ALIASED
    return _estimates(lambdas, alphas, kind, offset if u > 1 else None)


def solve_amplitudes(samples: SampleSet, u: int, offset: int, eigenvalues) -> np.ndarray:
    """Least-squares ``alpha`` with ``phi[offset + u*j] = sum_i alpha_i * lambda_i**j``."""
    x = decimated(samples.values, u, offset)
    return vandermonde_lstsq(x, np.asarray(eigenvalues, dtype=complex))


def hankel_singular_values(samples: SampleSet, order: int) -> np.ndarray:
    H = build_hankel(samples, HankelSpec(0, 1, order))
    return np.linalg.svd(H, compute_uv=False)


def estimate_order_svd(samples: SampleSet, nu_max: int, rel_tol: float) -> int:
    """Number of singular values of ``^0_1 H_{nu_max}`` above ``rel_tol * s_max``."""
    if 2 * nu_max > samples.n_samples:
        raise InsufficientSamplesError(f"2*nu_max = {2 * nu_max} exceeds N = {samples.n_samples}")
    return numerical_rank(hankel_singular_values(samples, nu_max), rel_tol)
