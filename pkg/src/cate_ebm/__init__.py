"""Partially identifiable low-dimensional covariate representations via a
partially randomized energy model, trained with a noise-contrastive ranking
loss, as a preprocessing step for CATE estimation."""

from .cate import (
    BaseSpec,
    CateModel,
    KernelRidge,
    PropensityModel,
    Ridge,
    ae_fit,
    dr_learner,
    dr_pseudo_outcome,
    fit_learner,
    median_gamma,
    pca_fit,
    propensity_fit,
    r_learner,
    t_learner,
    x_learner,
)
from .config import ExperimentConfig, load_config
from .dgp import Dataset, DgpSpec, gen_dgp, load_csv, sample, save_csv
from .ebm import EbmModel, ModelFingerprint, load_model, save_model
from .evalx import cate_std_experiment, mcc, pehe, write_table
from .nce import (
    CandidateSet,
    CorruptionSpec,
    TrainConfig,
    build_candidates,
    corrupt,
    nce_loss,
    posterior,
    train_ebm,
)
from .numerics import (
    Adam,
    Mlp,
    grad_check,
    make_rng,
    random_orthogonal,
    standardize_columns,
)
from .partition import PartitionModel, kmeans_fit

__version__ = "0.1.0"
