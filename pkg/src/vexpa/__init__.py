"""Validated exponential analysis (VEXPA).

Decimate a sampled sum of exponentials below the Nyquist rate, analyse every
decimation independently, undo the deliberate aliasing with coprime sample
shifts, and keep only the eigenvalues that cluster across decimations.
"""

from .clustering import ClusterReport, Scenario, ValidationRecord, dbscan
from .decimation import Strategy, candidate_sets, decimate, recover_term
from .diagnostics import crlb, disposedness
from .errors import (
    CollisionError,
    DegenerateSequenceError,
    InsufficientSamplesError,
    NonIdentifiableError,
    NotCoprimeError,
    RankDeficiencyError,
    SingularPencilError,
    VandermondeConditioningWarning,
    VexpaError,
)
from .pipeline import BaseMethod, VexpaConfig, VexpaResult, final_amplitudes, match_terms, run_baseline, run_vexpa
from .signal_model import (
    ExponentialTerm,
    SampleSet,
    SamplingGrid,
    SignalModel,
    add_noise,
    evaluate,
    inject_outlier,
    sample,
)

__version__ = "0.1.0"
