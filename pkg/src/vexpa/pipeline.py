"""End-to-end validated exponential analysis.

decimate -> per-decimation Prony analysis -> shifted amplitude sequences ->
cluster detection on the pooled eigenvalues -> de-aliasing -> amplitudes
re-solved on the samples of the decimations that validated the output.
"""

from __future__ import annotations

import cmath
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum

import numpy as np
import scipy.optimize

from .clustering import (
    ClusterReport,
    EigenPoint,
    PointSet,
    Side,
    ValidationRecord,
    classify_and_validate,
    cluster_points,
    default_delta,
    link_clusters,
)
from .decimation import (
    ShiftSequence,
    Strategy,
    check_coprime,
    decimate,
    decimation_length,
    ratio_shift_result,
    recover_shift_eigenvalues,
    shifted_amplitude_matrix,
)
from .errors import InsufficientSamplesError, SingularPencilError, VexpaError
from .prony import esprit, gevp_eigenvalues, sort_by_amplitude, vandermonde_lstsq
from .signal_model import ExponentialTerm, SampleSet


class BaseMethod(str, Enum):
    ESPRIT = "esprit"
    GEVP = "gevp"


@dataclass(frozen=True)
class VexpaConfig:
    u: int = 7
    s: int = 11
    M: int = 8
    nu: int | None = None
    nu_cap: int = 20
    delta: float | None = None
    m_delta: int | None = None
    delta_s: float | None = None
    m_delta_s: int | None = None
    base_method: BaseMethod = BaseMethod.ESPRIT
    strategy: Strategy = Strategy.STABILIZED
    collision_order: int | None = None
    dominance: float = 0.1
    delta_factor: float = 3.0
    trim: float | None = 5.0
    trim_s: float | None = None
    shift_window: int | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "base_method", BaseMethod(self.base_method))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.u < 2:
            raise ValueError(f"u must be >= 2, got {self.u}")
        check_coprime(self.u, self.s)
        if self.M < 2 or self.M % 2:
            raise ValueError(f"M must be even and >= 2, got {self.M}")

    def nu_for(self, n_samples: int) -> int:
        available = decimation_length(n_samples, self.u, self.u - 1)
        return self.nu if self.nu is not None else min(available // 2, self.nu_cap)

    def shift_window_for(self, n_samples: int) -> int:
        """Samples per shifted system: twice the over-model order unless set."""
        return self.shift_window if self.shift_window is not None else 2 * self.nu_for(n_samples)

    def validate(self, n_samples: int):
        base = n_samples // self.u
        if base < 4:
            raise InsufficientSamplesError(f"u={self.u} leaves {base} samples per decimation")
        nu = self.nu_for(n_samples)
        if nu < 1 or 2 * nu > decimation_length(n_samples, self.u, self.u - 1):
            raise InsufficientSamplesError(f"nu={nu} too large for decimations of {base} samples")
        if self.shift_window is not None and self.shift_window < nu:
            raise ValueError(f"shift window {self.shift_window} is shorter than nu={nu}")
        if (self.M - 1) * self.s + self.u * nu >= n_samples:
            raise InsufficientSamplesError(
                f"shifts up to {(self.M - 1) * self.s} leave too few samples for nu={nu}")

    @property
    def m_delta_value(self) -> int:
        return self.m_delta if self.m_delta is not None else self.u - 1

    @property
    def m_delta_s_value(self) -> int:
        return self.m_delta_s if self.m_delta_s is not None else max(2, self.m_delta_value - 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base_method"] = self.base_method.value
        d["strategy"] = self.strategy.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "VexpaConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class DecimationAnalysis:
    k: int
    u_points: list[EigenPoint]
    s_points: list[EigenPoint]
    errors: list[str]
    method: str


def analyze_decimation(values: np.ndarray, k: int, config: VexpaConfig) -> DecimationAnalysis:
    """Base analysis and shift recovery for the decimation starting at offset ``k``.

    Failures are recorded in ``errors`` instead of raised, so one bad
    decimation never stops the pipeline.
    """
    u, s, M = config.u, config.s, config.M
    N = len(values)
    x = values[k:k + u * decimation_length(N, u, k):u]
    nu = config.nu_for(N)
    errors: list[str] = []
    method = config.base_method.value
    try:
        if config.base_method is BaseMethod.GEVP:
            try:
                lambdas = gevp_eigenvalues(x, nu)
            except SingularPencilError as exc:
                errors.append(f"gevp fell back to esprit: {exc}")
                method = "esprit"
                lambdas = esprit(x, nu)
        else:
            lambdas = esprit(x, nu)
        alphas = vandermonde_lstsq(x, lambdas, warn=False)
        lambdas, alphas = sort_by_amplitude(lambdas, alphas)
        A = shifted_amplitude_matrix(values, k, u, s, M, lambdas, config.shift_window_for(N))
    except (VexpaError, np.linalg.LinAlgError, ValueError) as exc:
        return DecimationAnalysis(k, [], [], [f"decimation {k}: {exc}"], method)

    u_points, s_points = [], []
    for i, (lam, alpha) in enumerate(zip(lambdas, alphas)):
        u_points.append(EigenPoint(complex(lam), k, i, Side.U, complex(alpha)))
        try:
            if config.strategy is Strategy.STABILIZED:
                pairs = recover_shift_eigenvalues(ShiftSequence(i, k, A[:, i], s),
                                                  config.collision_order, config.dominance)
            else:
                pairs = ratio_shift_result_from(A[:, i])
        except (VexpaError, np.linalg.LinAlgError, ValueError) as exc:
            errors.append(f"decimation {k}, term {i}: {exc}")
            continue
        s_points.extend(EigenPoint(sl, k, i, Side.S, amp) for sl, amp in pairs)
    return DecimationAnalysis(k, u_points, s_points, errors, method)


def ratio_shift_result_from(column: np.ndarray):
    return ratio_shift_result(ShiftSequence(0, 0, column, 1))


def analyze_all(samples: SampleSet, config: VexpaConfig, workers: int | None = None
                ) -> list[DecimationAnalysis]:
    workers = config.workers if workers is None else workers
    values = samples.values
    ks = range(config.u)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda k: analyze_decimation(values, k, config), ks))
    else:
        results = [analyze_decimation(values, k, config) for k in ks]
    return sorted(results, key=lambda a: a.k)


def final_amplitudes(samples: SampleSet, lambdas, excluded_decimations=(), u: int = 1) -> np.ndarray:
    """Least-squares amplitudes over every sample outside the excluded decimations.

    ``lambdas`` are full-rate eigenvalues, so sample ``j`` has row ``lambda**j``.
    """
    lambdas = np.asarray(lambdas, dtype=complex)
    if len(lambdas) == 0:
        raise ValueError("no eigenvalues to fit")
    excluded = set(excluded_decimations)
    idx = np.array([j for j in range(samples.n_samples) if j % u not in excluded], dtype=int)
    if len(idx) < len(lambdas):
        raise InsufficientSamplesError(
            f"{len(idx)} samples left for {len(lambdas)} amplitudes after exclusions")
    return vandermonde_lstsq(samples.values[idx], lambdas, powers=idx, warn=False)


def lambda_to_mu(lam: complex, delta: float) -> complex:
    """Principal-branch ``log(lambda) / delta``."""
    return cmath.log(lam) / delta


@dataclass
class VexpaResult:
    terms: list[tuple[ExponentialTerm, ValidationRecord]]
    excluded_decimations: tuple[int, ...]
    unvalidated: list[dict]
    errors: list[str]
    delta: float
    delta_s: float
    u_noise: int
    n_u_points: int
    n_s_points: int
    config: VexpaConfig
    clusters: ClusterReport | None = None
    metadata: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def model_order(self) -> int:
        return len(self.terms)

    @property
    def model_terms(self) -> list[ExponentialTerm]:
        return [t for t, _ in self.terms]

    def to_dict(self) -> dict:
        return {
            "model_order": self.model_order,
            "terms": [
                {"beta": t.beta, "gamma": t.gamma, "psi": t.psi, "omega": t.omega,
                 "validation": rec.to_dict()}
                for t, rec in self.terms
            ],
            "excluded_decimations": list(self.excluded_decimations),
            "unvalidated": self.unvalidated,
            "errors": self.errors,
            "delta": self.delta,
            "delta_s": self.delta_s,
            "u_noise": self.u_noise,
            "n_u_points": self.n_u_points,
            "n_s_points": self.n_s_points,
            "config": self.config.to_dict(),
            "clusters": self.clusters.to_dict() if self.clusters is not None else None,
            "metadata": self.metadata,
        }


def excluded_from(records: list[ValidationRecord], u: int) -> tuple[int, ...]:
    """Decimations missing from more than half of the validated u-side clusters."""
    if not records:
        return ()
    missing = [sum(k not in r.decimations for r in records) for k in range(u)]
    return tuple(k for k in range(u) if 2 * missing[k] > len(records))


def run_vexpa(samples: SampleSet, config: VexpaConfig | None = None,
              workers: int | None = None) -> VexpaResult:
    config = config or VexpaConfig()
    config.validate(samples.n_samples)
    t0 = time.perf_counter()
    analyses = analyze_all(samples, config, workers)
    t1 = time.perf_counter()

    u_points = [p for a in analyses for p in a.u_points]
    s_points = [p for a in analyses for p in a.s_points]
    errors = [e for a in analyses for e in a.errors]
    u_values = np.array([p.value for p in u_points], dtype=complex)
    delta = config.delta if config.delta is not None else default_delta(u_values, config.u, config.delta_factor)
    delta_s = config.delta_s if config.delta_s is not None else delta

    point_set = PointSet(u_points, s_points)
    u_clusters, u_noise = cluster_points(u_points, delta, config.m_delta_value, config.trim)
    linked = link_clusters(u_clusters, point_set, delta_s, config.m_delta_s_value, config.trim_s)
    records, unlinked = classify_and_validate(linked, u_points, config.u, config.s, config.strategy)
    t2 = time.perf_counter()

    excluded = excluded_from(records, config.u)
    terms = []
    if records:
        lambdas = np.array([r.lambda_ for r in records])
        try:
            alphas = final_amplitudes(samples, lambdas, excluded, config.u)
        except InsufficientSamplesError:
            excluded = ()
            alphas = final_amplitudes(samples, lambdas, (), config.u)
        for lam, alpha, rec in zip(lambdas, alphas, records):
            if alpha == 0:
                errors.append(f"validated eigenvalue {lam} received a zero amplitude")
                continue
            mu = lambda_to_mu(lam, samples.grid.delta)
            terms.append((ExponentialTerm.from_complex(complex(alpha), mu), rec))
        terms.sort(key=lambda tr: -tr[0].beta)

    unvalidated = [
        {"u_centroid": [lc.u_cluster.centroid.real, lc.u_cluster.centroid.imag],
         "u_cluster_count": lc.u_cluster.cardinality,
         "u_radius": lc.u_cluster.radius,
         "linked_s_points": len(lc.s_points)}
        for lc in unlinked
    ]
    return VexpaResult(
        terms=terms,
        excluded_decimations=excluded,
        unvalidated=unvalidated,
        errors=errors,
        delta=float(delta),
        delta_s=float(delta_s),
        u_noise=len(u_noise),
        n_u_points=len(u_points),
        n_s_points=len(point_set.s_points),
        config=config,
        clusters=ClusterReport.build(point_set, linked),
        metadata={"base_method_variant": "ls-esprit, balanced rectangular Hankel",
                  "nu": config.nu_for(samples.n_samples),
                  "shift_window": config.shift_window_for(samples.n_samples)},
        timings={"decimations": t1 - t0, "clustering": t2 - t1,
                 "total": time.perf_counter() - t0},
    )


def run_baseline(samples: SampleSet, n: int, method: BaseMethod | str = BaseMethod.ESPRIT
                 ) -> list[ExponentialTerm]:
    """Stand-alone full-rate analysis with known model order ``n``."""
    if n < 1:
        raise ValueError(f"model order must be >= 1, got {n}")
    if 2 * n > samples.n_samples:
        raise InsufficientSamplesError(f"2n = {2 * n} exceeds N = {samples.n_samples}")
    method = BaseMethod(method)
    x = samples.values
    if method is BaseMethod.GEVP:
        lambdas = gevp_eigenvalues(x, n)
    else:
        lambdas = esprit(x, n, rtol=None)
    alphas = vandermonde_lstsq(x, lambdas, warn=False)
    lambdas, alphas = sort_by_amplitude(lambdas, alphas)
    return [ExponentialTerm.from_complex(complex(a), lambda_to_mu(l, samples.grid.delta))
            for l, a in zip(lambdas, alphas) if a != 0]


def match_terms(estimated, truth) -> list[tuple[int, int]]:
    """Minimal-cost assignment on ``|omega_est - omega_true|``; returns (est, true) pairs."""
    if not estimated or not truth:
        return []
    cost = np.abs(np.subtract.outer([t.omega for t in estimated], [t.omega for t in truth]))
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    return list(zip(rows.tolist(), cols.tolist()))
