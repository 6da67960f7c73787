"""Bayesian network structure learning: exact subset DP and DP-guided MCMC."""

from .errors import (ContractError, CycleError, DpmcmcError, InputError, ParseError, ResourceError,
                     UndefinedEstimateError)
from .graph import AncestorMatrix, Dag, Order, count_linear_extensions, enumerate_dags
from .data import CptSet, Dataset, ancestral_sample, load_csv, random_network, split_folds
from .scoring import FamilyScoreTable, build_score_table
from .priors import GlobalPrior, ModularPrior
from .exact import brute_force_posterior, chow_liu, dp_build, dp_edge_marginals, map_dag
from .samplers import GlobalProposal, SampleSet, SamplerConfig, run_chain
from .inference import FeatureKind, auc, feature_posterior, predictive_loglik_samples, sad

__version__ = "0.1.0"
