"""Simulate irregular sampling in multichannel time series and measure how much
discrete-time and continuous-time classifiers lose when tested on it."""

from .core import ClassLabel, Dataset, SampledSeries, from_regular_grid, is_regular
from .ingest import CsvSchema, SynthConfig, generate_timestamps, load_csv, synth_generate, write_csv
from .metrics import ConfusionMatrix, confusion_matrix, macro_f1, performance_loss
from .models import (
    ModelConfig,
    build_cfc_net,
    build_conv_dense,
    build_deep_conv_lstm,
    build_model,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from .perturb import (
    PerturbationSpec,
    downsample,
    interpolate_at,
    jitter_timestamps,
    random_dropout,
    resample_to_rate,
)
from .windowing import Window, pad_to_length, sliding_windows
from .evaluation import ExperimentSpec, TrainConfig, loso_folds, run_sweep, train

__version__ = "0.1.0"
