"""Sensitivity diagnostics: eigenvalue disposedness bounds and Cramer-Rao bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CollisionError, NonIdentifiableError
from .prony import HankelSpec, build_hankel
from .signal_model import SamplingGrid, SignalModel, sample

PARAMETER_NAMES = ("beta", "gamma", "psi", "omega")


def lagrange_coefficients(nodes, i: int) -> np.ndarray:
    """Monomial coefficients (ascending powers) of the Lagrange basis polynomial ``L_i``.

    ``L_i`` vanishes at every node except ``nodes[i]`` where it equals 1.  The
    vector is zero-padded to ``len(nodes) + 1`` entries.
    """
    nodes = np.asarray(nodes, dtype=complex)
    n = len(nodes)
    if not 0 <= i < n:
        raise IndexError(f"node index {i} outside [0, {n - 1}]")
    others = np.delete(nodes, i)
    gaps = nodes[i] - others
    if np.any(gaps == 0):
        raise CollisionError(f"node {i} coincides with another node")
    coeffs = np.array([1.0 + 0j])
    for root in others:
        # multiply by (x - root) / (node_i - root), ascending order
        coeffs = np.concatenate([[0], coeffs]) - root * np.concatenate([coeffs, [0]])
    coeffs = coeffs / np.prod(gaps)
    out = np.zeros(n + 1, dtype=complex)
    out[: len(coeffs)] = coeffs
    return out


@dataclass
class DisposednessReport:
    u: int
    lambdas: np.ndarray
    bounds: np.ndarray
    lagrange_norms: np.ndarray
    hankel_norms: tuple[float, float]  # (||^u_u H_n||_2, ||^0_u H_n||_2)

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "terms": [
                {"lambda": [float(l.real), float(l.imag)], "rho": float(r), "lagrange_norm": float(g)}
                for l, r, g in zip(self.lambdas, self.bounds, self.lagrange_norms)
            ],
            "hankel_norms": list(self.hankel_norms),
        }


def disposedness(model: SignalModel, delta: float, u: int = 1) -> DisposednessReport:
    """Upper bound on ``|d lambda_i / d eps|`` for the u-undersampled pencil.

    The bound is ``(|l_i| + 1)/|alpha_i| * ||ell_i||^2 * (||^u_u H_n|| + ||^0_u H_n||)``
    with nodes ``l_i = exp(mu_i u delta)`` and Hankels from noisefree samples.
    """
    n = model.n
    lambdas = model.eigenvalues(delta, u)
    for a in range(n):
        for b in range(a + 1, n):
            if abs(lambdas[a] - lambdas[b]) <= 1e-12 * max(1.0, abs(lambdas[a])):
                raise CollisionError(
                    f"terms {a} and {b} alias to the same node at u={u}; bound undefined")
    grid = SamplingGrid(delta, (2 * n - 1) * u + 1)
    samples = sample(model, grid)
    h0 = np.linalg.norm(build_hankel(samples, HankelSpec(0, u, n)), 2)
    h1 = np.linalg.norm(build_hankel(samples, HankelSpec(u, u, n)), 2)
    alphas = model.alphas
    norms = np.array([np.linalg.norm(lagrange_coefficients(lambdas, i)) for i in range(n)])
    bounds = (np.abs(lambdas) + 1) / np.abs(alphas) * norms ** 2 * (h1 + h0)
    return DisposednessReport(u, lambdas, bounds, norms, (float(h1), float(h0)))


def model_jacobian(model: SignalModel, grid: SamplingGrid) -> np.ndarray:
    """Derivatives of the samples w.r.t. ``(beta, gamma, psi, omega)`` of every term.

    Shape ``(N, 4n)``; columns grouped per term in that parameter order.
    """
    t = grid.times
    cols = []
    for term in model.terms:
        base = np.exp(1j * term.gamma) * np.exp(term.mu * t)
        value = term.beta * base
        cols.extend([base, 1j * value, t * value, 1j * t * value])
    return np.column_stack(cols)


def fisher_information(model: SignalModel, grid: SamplingGrid, sigma2: float,
                       jacobian: np.ndarray | None = None) -> np.ndarray:
    """Fisher matrix ``(2/sigma2) Re(J^H J)`` for circular white Gaussian noise."""
    J = model_jacobian(model, grid) if jacobian is None else jacobian
    return (2.0 / sigma2) * np.real(J.conj().T @ J)


@dataclass
class CrlbReport:
    variances: np.ndarray  # shape (n, 4), columns beta, gamma, psi, omega
    n_samples: int
    delta: float
    sigma2: float
    condition: float
    model: SignalModel = field(repr=False)

    @property
    def omega_variances(self) -> np.ndarray:
        return self.variances[:, 3]

    @property
    def rms_omega(self) -> float:
        """RMS of the per-term omega standard deviations, ``sqrt(mean_i var(omega_i))``."""
        return float(np.sqrt(np.mean(self.omega_variances)))

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "delta": self.delta,
            "sigma2": self.sigma2,
            "condition": self.condition,
            "rms_omega": self.rms_omega,
            "variances": [dict(zip(PARAMETER_NAMES, map(float, row))) for row in self.variances],
        }


def crlb(model: SignalModel, grid: SamplingGrid, sigma2: float, allow_pinv: bool = False) -> CrlbReport:
    """Cramer-Rao lower bounds for all ``4n`` real parameters.

    The Fisher matrix is inverted by Cholesky factorisation.  A singular or
    indefinite matrix raises :class:`NonIdentifiableError` unless
    ``allow_pinv`` is set, in which case the pseudo-inverse is used.
    """
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    F = fisher_information(model, grid, sigma2)
    # Jacobi scaling keeps the condition estimate meaningful across parameter units
    d = np.sqrt(np.diag(F))
    if np.any(d == 0):
        raise NonIdentifiableError("a parameter has no influence on the samples")
    Fs = F / np.outer(d, d)
    ev = np.linalg.eigvalsh(Fs)
    condition = float(ev[-1] / ev[0]) if ev[0] > 0 else math.inf
    try:
        if condition > 1e14:
            raise np.linalg.LinAlgError("ill-conditioned")
        cho = scipy.linalg.cho_factor(Fs)
        cov_s = scipy.linalg.cho_solve(cho, np.eye(len(Fs)))
    except np.linalg.LinAlgError:
        if not allow_pinv:
            raise NonIdentifiableError(
                f"Fisher matrix is singular (condition {condition:.3e}); "
                "terms may collide at this sampling rate") from None
        cov_s = np.linalg.pinv(Fs, hermitian=True)
    cov = cov_s / np.outer(d, d)
    variances = np.diag(cov).reshape(model.n, 4).copy()
    return CrlbReport(variances, grid.count, grid.delta, float(sigma2), condition, model)
