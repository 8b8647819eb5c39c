# Copyright 2026 The robust-replay Authors

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Top level robust-replay module"""

from ._version import __version__
from .config import ExperimentConfig, SyntheticSpec, load_config
from .data import Dataset, generate_synthetic, load_dataset_csv, write_dataset_csv
from .exceptions import ConfigError, InputError, ReplayError, RunError
from .memory import (
    BalancingCoefficient,
    EpisodicMemory,
    adaptive_alpha,
    greedy_balanced_update,
    puridiver_update,
    relevant_representation,
    reservoir_update,
    sample_score,
)
from .metrics import RunRecord, evaluate_accuracy, memory_diversity, memory_purity
from .nnkit import Model, cross_entropy, forward, predictive_uncertainty, sgd_step
from .robust import (
    classification_loss,
    consistency_loss,
    fit_gmm_1d,
    memory_train_epoch,
    partition_memory,
    posterior_small,
    relabel,
    split_clean_noisy,
    split_relabel_unlabeled,
)
from .augment import strong_aug, weak_aug
from .runner import RunTracker, run_experiment, sweep_alpha, sweep_noise, write_results
from .samplers import GreedyBalancedSampler, MemorySampler, PuriDivERSampler, ReservoirSampler, load_sampler
from .stream import (
    Example,
    TaskStream,
    batches,
    inject_asymmetric_noise,
    inject_symmetric_noise,
    split_blurry_tasks,
)
