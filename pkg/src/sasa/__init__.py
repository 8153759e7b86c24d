"""Sparse associative structure alignment for time-series domain adaptation."""

from .alignment import alpha_alignment_loss, beta_alignment_loss
from .datasets import Dataset, DatasetError, read_ndjson, write_ndjson
from .metrics import MetricReport, auc, rmse, task_metric
from .model import ModelConfig, TrainReport, evaluate, forward, init_params, predict, structure_matrix, train
from .segmenter import TimeSeriesSample, summarize
from .structure import aggregate_structure, inter_attention, intra_attention
from .synthdata import CausalGraphSpec, DomainSpec, Edge, LabelRule, generate, make_benchmark, split

__version__ = "0.1.0"
