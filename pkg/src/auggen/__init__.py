"""Self-augmenting training for four-voice chorale generation.

A generative model's training set is continuously augmented, each epoch,
with its own outputs that pass a fixed external grading function's quality
threshold and a uniqueness test. The package ships the domain types, the
six-feature Wasserstein critic, an order-k Markov reference model, the
training loop, and an experiment harness comparing the three threshold
regimes (quantile threshold, accept-none, accept-all).
"""

from .chorale import HOLD, REST, Chorale, canonical_key, parse_chorale, realize, serialize_chorale, validate
from .corpus import Corpus, Split, load_corpus, save_corpus, split, teacher_corpus
from .features import DEFAULT_FEATURES, FeatureDistribution, extract
from .grading import GradeReport, ReferenceModel, Threshold, fit_reference, grade, grade_quantile, wasserstein1
from .loop import LoopConfig, RunResult, run, save_run
from .model import BatchPlan, GenerativeModel, MarkovModel
from .experiment import ExperimentConfig, PROFILES, RegimeSummary, compare

__version__ = "0.1.0"

__all__ = [
    "HOLD",
    "REST",
    "Chorale",
    "Corpus",
    "Split",
    "BatchPlan",
    "LoopConfig",
    "RunResult",
    "GenerativeModel",
    "MarkovModel",
    "FeatureDistribution",
    "GradeReport",
    "ReferenceModel",
    "Threshold",
    "ExperimentConfig",
    "PROFILES",
    "RegimeSummary",
    "DEFAULT_FEATURES",
    "canonical_key",
    "parse_chorale",
    "serialize_chorale",
    "realize",
    "validate",
    "load_corpus",
    "save_corpus",
    "split",
    "teacher_corpus",
    "extract",
    "fit_reference",
    "grade",
    "grade_quantile",
    "wasserstein1",
    "run",
    "save_run",
    "compare",
    "__version__",
]
