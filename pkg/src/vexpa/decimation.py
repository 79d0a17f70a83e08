"""Decimation of the samples and recovery of eigenvalues from the induced aliasing.

Decimating by ``u`` turns ``lambda`` into ``lambda**u``, which only fixes
``lambda`` up to a u-th root of unity.  Shifting the decimated grid by ``s``
samples, with ``gcd(u, s) = 1``, yields ``lambda**s`` and the two root sets
meet in exactly one point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateSequenceError, InsufficientSamplesError, NotCoprimeError
from .prony import fit_exponentials, vandermonde_lstsq
from .signal_model import SampleSet


class Strategy(str, Enum):
    DISTANCE = "distance"
    EUCLID = "euclid"
    STABILIZED = "stabilized"


@dataclass(frozen=True)
class DecimationSet:
    k: int
    u: int
    indices: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.indices)


def decimation_length(n_samples: int, u: int, k: int) -> int:
    return min(n_samples // u, (n_samples - k) // u)


def decimate(samples: SampleSet, u: int) -> list[DecimationSet]:
    """Split the samples into the ``u`` interleaved subsets ``phi[u*j + k]``.

    Every subset is cut to at most ``N // u`` samples, so later offsets hold
    the same number of samples or one less.
    """
    N = samples.n_samples
    if u < 1 or 2 * u > N:
        raise InsufficientSamplesError(f"undersampling u={u} is too large for N={N}")
    sets = []
    for k in range(u):
        idx = k + u * np.arange(decimation_length(N, u, k))
        sets.append(DecimationSet(k, u, idx, samples.values[idx]))
    return sets


@dataclass(frozen=True)
class ShiftSequence:
    """Amplitudes of one node across the shifted systems ``m = 0..M-1``."""

    term_index: int
    decimation_index: int
    values: np.ndarray
    s: int

    @property
    def M(self) -> int:
        return len(self.values)


def check_coprime(u: int, s: int):
    if math.gcd(u, s) != 1:
        raise NotCoprimeError(f"u={u} and s={s} are not coprime")


def shifted_amplitude_matrix(values: np.ndarray, k: int, u: int, s: int, M: int,
                             nodes: np.ndarray, window: int | None = None) -> np.ndarray:
    """Solve ``phi[m*s + u*j + k] = sum_i A[m, i] * nodes_i**j`` for every shift ``m``.

    Row ``m`` uses the in-range ``j < window``, the window defaulting to the
    length of the unshifted decimation.  Without a window, row 0 reproduces
    the unshifted amplitude solve.
    """
    N = len(values)
    nodes = np.asarray(nodes, dtype=complex)
    base_len = decimation_length(N, u, k)
    if window is not None:
        if window < 1:
            raise ValueError(f"shift window must be positive, got {window}")
        base_len = min(base_len, window)
    out = np.empty((M, len(nodes)), dtype=complex)
    for m in range(M):
        start = k + m * s
        count = min(base_len, (N - 1 - start) // u + 1) if start < N else 0
        if count < max(len(nodes), 1):
            raise InsufficientSamplesError(
                f"shift m={m} leaves {count} samples for {len(nodes)} nodes (k={k}, u={u}, s={s})")
        out[m] = vandermonde_lstsq(values[start:start + u * count:u], nodes, warn=False)
    return out


def shifted_amplitudes(samples: SampleSet, k: int, u: int, s: int, M: int,
                       eigenvalues, window: int | None = None) -> list[ShiftSequence]:
    check_coprime(u, s)
    if M < 2:
        raise ValueError(f"need at least two shifts, got M={M}")
    A = shifted_amplitude_matrix(samples.values, k, u, s, M, eigenvalues, window)
    return [ShiftSequence(i, k, A[:, i].copy(), s) for i in range(A.shape[1])]


def recover_shift_eigenvalues(seq: ShiftSequence, collision_order: int | None = None,
                              threshold: float = 0.0) -> list[tuple[complex, complex]]:
    """Prony fit of a shift sequence; returns ``(lambda**s, amplitude)`` pairs.

    Pairs come sorted by decreasing ``|amplitude|``.  With ``threshold > 0``
    only pairs with ``|amplitude| >= threshold * max|amplitude|`` are kept.
    """
    M = seq.M
    order = M // 2 if collision_order is None else collision_order
    if order < 1 or 2 * order > M:
        raise ValueError(f"collision order {order} needs 2*order <= M={M}")
    scale = np.max(np.abs(seq.values))
    if not np.isfinite(scale) or scale <= np.finfo(float).tiny:
        raise DegenerateSequenceError(
            f"shift sequence of term {seq.term_index} in decimation {seq.decimation_index} is zero")
    lambdas, amps = fit_exponentials(seq.values, order)
    if len(lambdas) == 0:
        raise DegenerateSequenceError("shift sequence has numerical rank zero")
    keep = np.abs(amps) >= threshold * np.abs(amps[0])
    return [(complex(l), complex(a)) for l, a in zip(lambdas[keep], amps[keep])]


def principal_roots(value: complex, order: int) -> np.ndarray:
    """All ``order``-th roots of ``value``."""
    r = abs(value) ** (1.0 / order)
    theta = (np.angle(value) + 2 * np.pi * np.arange(order)) / order
    return r * np.exp(1j * theta)


@dataclass(frozen=True)
class CandidateSets:
    U: np.ndarray
    S: np.ndarray
    matched: complex
    distance: float
    ambiguous: bool


def candidate_sets(u_lambda: complex, s_lambda: complex, u: int, s: int) -> CandidateSets:
    """Pick the u-th root of ``u_lambda`` closest to any s-th root of ``s_lambda``.

    The match is flagged ambiguous when a pair built on a different u-side
    candidate lies within twice the best distance.
    """
    if u_lambda == 0 or s_lambda == 0:
        raise ValueError("candidate sets need nonzero eigenvalues")
    U = principal_roots(u_lambda, u)
    S = principal_roots(s_lambda, s)
    D = np.abs(U[:, None] - S[None, :])
    per_u = D.min(axis=1)
    best = int(np.argmin(per_u))
    rest = np.delete(per_u, best)
    ambiguous = bool(len(rest) and rest.min() < 2 * per_u[best])
    return CandidateSets(U, S, complex(U[best]), float(per_u[best]), ambiguous)


def bezout(u: int, s: int) -> tuple[int, int]:
    """Integers ``(w, r)`` with ``w*u + r*s = 1`` and minimal ``|w| + |r|``."""
    check_coprime(u, s)
    old_r, r = u, s
    old_w, w = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_w, w = w, old_w - q * w
        old_t, t = t, old_t - q * t
    w0, r0 = old_w, old_t
    # general solution (w0 + s*j, r0 - u*j); the minimiser sits near j = -w0/s
    centre = -w0 / s
    candidates = [(w0 + s * j, r0 - u * j) for j in range(math.floor(centre) - 2, math.ceil(centre) + 3)]
    return min(candidates, key=lambda wr: (abs(wr[0]) + abs(wr[1]), -wr[0]))


def euclid_recover(u_lambda: complex, s_lambda: complex, u: int, s: int) -> complex:
    """``u_lambda**w * s_lambda**r`` with ``w*u + r*s = 1``."""
    w, r = bezout(u, s)
    return complex(u_lambda) ** w * complex(s_lambda) ** r


def ratio_shift_result(seq: ShiftSequence) -> list[tuple[complex, complex]]:
    """Single-shift estimate ``lambda**s = alpha_s / alpha`` used by the baseline strategies."""
    a0 = seq.values[0]
    if a0 == 0:
        raise DegenerateSequenceError("unshifted amplitude is zero")
    return [(complex(seq.values[1] / a0), complex(a0))]


def recover_term(u_lambda: complex, shift_results, u: int, s: int,
                 strategy: Strategy | str = Strategy.STABILIZED) -> list[tuple[complex, complex]]:
    """Recover the non-aliased eigenvalue for every shift eigenvalue in ``shift_results``.

    ``shift_results`` holds ``(lambda**s, amplitude)`` pairs; several pairs on
    one ``u_lambda`` mean a frequency collision and give several eigenvalues.
    """
    strategy = Strategy(strategy)
    out = []
    for s_lambda, amp in shift_results:
        if strategy is Strategy.EUCLID:
            lam = euclid_recover(u_lambda, s_lambda, u, s)
        else:
            lam = candidate_sets(u_lambda, s_lambda, u, s).matched
        out.append((lam, amp))
    return out
