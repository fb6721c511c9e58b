"""Pairwise concordance-trained discrete-time competing-risks survival models."""

from .data import (
    Dataset,
    FeatureSchema,
    FeatureSpec,
    FoldSplit,
    Subject,
    TimeGrid,
    discretize,
    encode,
    impute,
    load_csv,
    load_dataset,
    stratified_split,
)
from .loss import BatchCifs, BatchLoss, LossConfig, total_loss
from .metrics import CtReport, bootstrap_ci, c_index, evaluate_report
from .model import CifMatrix, Model, ModelConfig, load_checkpoint, load_model, risk_at, save_model
from .pairs import ComparablePair, PairBatch, PairIndex, build_comparable_set, build_pair_index, ipw_weights, sample_batch
from .synthgen import SynthConfig, draw_cohort, generate, oracle_cif, oracle_risk
from .trainer import CvResult, TrainConfig, TrainHistory, lr_at, run_cv, train

__version__ = "0.1.0"
