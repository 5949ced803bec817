"""Phase-type multi-state models for recurrent events.

Transition-count distributions, sojourn times and stage transition
probabilities for block-structured continuous-time Markov chains, plus the
heart-transplant and cancer-progression models built on them.
"""
from .errors import NumericalError, PhrecError, ValidationError
from .matrix import SubIntensity, expm, validate_subintensity
from .phasetype import PhaseType
from .stages import StageModel, load_model, save_model
from .counts import count_distribution, count_prob_between, count_prob_zero
from .heart import (REFERENCE_THETA, Covariates, HeartParams, PatientRecord, build_generator,
                    log_likelihood, lrt)
from .data import load_stanford, read_heart_csv
from .fitting import FitConfig, FitResult, bootstrap, bootstrap_replicate, fit, fit_restricted
from .simulate import simulate_counts, simulate_sojourn
from .cancer import CancerParams, build_cancer_generator, cancer_tables

__version__ = "0.1.0"
