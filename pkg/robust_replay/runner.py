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
"""
This module contains the experiment runner: online training on a blurry noisy
stream with memory construction, followed by robust memory training at every task
boundary, plus the sweeps and result persistence built on top of it.
"""
# pylint: disable=too-many-arguments,too-many-locals
import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .augment import FeatureAugmenter, feature_std
from .data import generate_synthetic, load_dataset_csv
from .exceptions import ConfigError
from .metrics import (
    RunRecord,
    evaluate_accuracy,
    memory_diversity,
    memory_purity,
    summarize,
    write_metrics_csv,
)
from .nnkit import (
    apply_gradients,
    cosine_lr,
    init_model,
    load_model,
    one_hot,
    save_model,
    value_and_grad,
)
from .robust import memory_train_epoch
from .samplers import load_sampler
from .stream import (
    batches,
    inject_asymmetric_noise,
    inject_symmetric_noise,
    split_blurry_tasks,
    stratified_split,
)

log = logging.getLogger(__name__)

COMPONENTS = ("data", "noise", "split", "init", "sampler", "memory", "oracle")
"""tuple[str]: stochastic components, each drawing from its own child seed

The task shuffle draws from ``split`` and the replay augmentations from ``memory``.
"""

_ORACLE_CACHE = {}


def component_seed(seed, component):
    """The child seed of ``component`` for a run seed.

    Every component gets an independent stream, so changing how many draws one
    component makes never shifts another.
    """
    try:
        key = COMPONENTS.index(component)
    except ValueError:
        raise ConfigError(f"Unknown random component '{component}'.") from None
    return np.random.SeedSequence(seed, spawn_key=(key,))


def component_rng(seed, component):
    """numpy.random.Generator: the generator of ``component`` for a run seed"""
    return np.random.default_rng(component_seed(seed, component))


class RunTracker:
    """Collects intermediate results of runs through the :meth:`_callback` hook.

    ``intermediate_results`` maps a kind to the list of payloads reported so far:

    * ``alpha``: balancing coefficient per incoming mini-batch
    * ``memory_size``: memory size after every stream example
    * ``partition_audit``: partition sizes and purities per memory-training epoch
    * ``snapshot``: memory contents at every task boundary
    """

    KINDS = ("alpha", "memory_size", "partition_audit", "snapshot")

    def __init__(self):
        self.intermediate_results = {kind: [] for kind in self.KINDS}

    def _callback(self, kind, payload):
        if kind not in self.intermediate_results:
            raise ConfigError(f"Unknown intermediate result '{kind}'.")
        self.intermediate_results[kind].append(payload)

    def merge(self, results):
        """Append the intermediate results of another tracker."""
        for kind, payloads in results.items():
            self.intermediate_results[kind].extend(payloads)


def run_id_for(config):
    """str: a short digest identifying the setting, independent of seeds and outputs"""
    values = config.to_dict()
    for key in ("seeds", "workers", "output_dir"):
        values.pop(key, None)
    digest = hashlib.sha256(json.dumps(values, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()[:12]


def prepare_data(config, seed):
    """Load or generate the data of a run and inject label noise.

    Returns:
        tuple[list[Example], list[Example], list[Example]]: the noisy training set,
        the clean training set and the test set
    """
    if config.is_synthetic:
        train, test = generate_synthetic(config.synthetic_spec(), component_seed(seed, "data"))
    else:
        examples = load_dataset_csv(config.dataset)
        if config.test_dataset:
            train, test = examples, load_dataset_csv(config.test_dataset)
        else:
            train, test = stratified_split(examples, 0.2, seed=component_seed(seed, "data"))

        for ex in list(train) + list(test):
            if len(ex.x) != config.dim:
                raise ConfigError(f"Example {ex.id} has {len(ex.x)} features, 'dim' is {config.dim}.")
            if ex.true_label >= config.num_classes:
                raise ConfigError(
                    f"Example {ex.id} has label {ex.true_label}, 'num_classes' is {config.num_classes}."
                )

    noise_seed = component_seed(seed, "noise")
    if config.noise_type == "sym":
        noisy = inject_symmetric_noise(
            train, config.noise_ratio, seed=noise_seed, num_classes=config.num_classes
        )
    else:
        noisy = inject_asymmetric_noise(
            train,
            config.noise_ratio,
            class_map=config.class_map(),
            seed=noise_seed,
            num_classes=config.num_classes,
        )
    return noisy, train, test


def _fingerprint(dataset, config, seed):
    h = hashlib.sha256()
    for ex in dataset:
        h.update(np.asarray(ex.x, dtype=float).tobytes())
        h.update(int(ex.true_label).to_bytes(4, "little"))
    recipe = (seed, config.hidden, config.oracle_epochs, config.lr, config.batch_size)
    h.update(repr(recipe).encode("utf-8"))
    return h.hexdigest()[:16]


def train_oracle(dataset, config, seed, cache_dir=None):
    """Train the representation model used to measure memory diversity.

    The model is trained offline on the clean labels of the whole training set for
    ``config.oracle_epochs`` epochs. Results are cached per dataset, seed and recipe,
    in process and, when ``cache_dir`` is given, as ``oracle_<fingerprint>.npz``.

    Returns:
        Model: the trained model
    """
    key = _fingerprint(dataset, config, seed)
    if key in _ORACLE_CACHE:
        return _ORACLE_CACHE[key]

    path = os.path.join(cache_dir, f"oracle_{key}.npz") if cache_dir else None
    if path and os.path.exists(path):
        model = load_model(path)
        _ORACLE_CACHE[key] = model
        return model

    rng = component_rng(seed, "oracle")
    model = init_model(config.dim, config.hidden, config.num_classes, rng)
    items = [(ex.x, one_hot(ex.true_label, config.num_classes), 1.0) for ex in dataset]
    ids = [ex.id for ex in dataset]

    for _ in range(config.oracle_epochs):
        order = rng.permutation(len(items))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = value_and_grad(model, [items[i] for i in idx], ids=[ids[i] for i in idx])
            model = apply_gradients(model, grads, config.lr)

    if path:
        os.makedirs(cache_dir, exist_ok=True)
        save_model(model, path)
    _ORACLE_CACHE[key] = model
    return model


def _make_sampler(config, seed):
    sampler_kwargs = {}
    if config.sampler == "puridiver":
        sampler_kwargs["alpha_mode"] = config.coefficient
    return load_sampler(
        config.sampler, config.memory_size, rng=component_rng(seed, "sampler"), **sampler_kwargs
    )


def _run_single(config, seed, tracker, cache_dir=None):
    """Run every task of one seed; returns the per-task records."""
    run_id = run_id_for(config)
    noisy, clean_train, test = prepare_data(config, seed)
    tasks = split_blurry_tasks(
        noisy, config.num_tasks, config.blurry_ratio, seed=component_seed(seed, "split")
    )

    sampler = _make_sampler(config, seed)
    uses_alpha = sampler.capabilities()["uses_alpha"]
    model = init_model(config.dim, config.hidden, config.num_classes, component_rng(seed, "init"))
    oracle = train_oracle(clean_train, config, seed, cache_dir=cache_dir)

    memory_rng = component_rng(seed, "memory")
    augmenter = FeatureAugmenter(
        feature_std(clean_train), config.weak_sigma, config.strong_drop, config.strong_sigma
    )
    C = config.num_classes

    records = []
    for task in tasks:
        log.info(
            "run %s seed %d: task %d/%d with %d examples",
            run_id,
            seed,
            task.task_id + 1,
            len(tasks),
            len(task),
        )
        alpha_start = len(getattr(sampler, "alpha_history", ()))
        replaced_start = sampler.n_replaced

        for batch in batches(task, config.batch_size):
            items = [(ex.x, one_hot(ex.noisy_label, C), 1.0) for ex in batch]
            loss, grads = value_and_grad(model, items, ids=[ex.id for ex in batch])
            model = apply_gradients(model, grads, config.lr)

            sampler.begin_batch(loss)
            if uses_alpha:
                tracker._callback("alpha", sampler.alpha)

            for ex in batch:
                sampler.observe(ex, model)
                sampler.memory.check_invariants()
                tracker._callback("memory_size", len(sampler.memory))

        for epoch in range(config.memory_epochs):
            # warm-up epochs replay with the given labels
            mode = "none" if epoch < config.warmup_epochs else config.robust_mode
            if config.lr_schedule == "cosine":
                lr = cosine_lr(config.lr, epoch, config.memory_epochs)
            else:
                lr = config.lr
            model, audit = memory_train_epoch(
                sampler.memory,
                model,
                config.eta,
                lr,
                memory_rng,
                batch_size=config.batch_size,
                mode=mode,
                augmenter=augmenter,
                epoch=epoch,
            )
            log.debug(
                "task %d epoch %d: |C|=%d |R|=%d |U|=%d",
                task.task_id,
                epoch,
                audit.clean,
                audit.relabel,
                audit.unlabeled,
            )
            tracker._callback(
                "partition_audit",
                {"run_id": run_id, "seed": seed, "task": task.task_id, **audit.to_dict()},
            )

        alphas = sampler.alpha_history[alpha_start:] if uses_alpha else []
        record = RunRecord(
            run_id=run_id,
            task_id=task.task_id,
            sampler=config.sampler,
            robust_mode=config.robust_mode,
            noise_type=config.noise_type,
            noise_ratio=config.noise_ratio,
            alpha_mode=config.alpha_mode,
            last_accuracy=evaluate_accuracy(model, test),
            memory_purity=memory_purity(sampler.memory),
            memory_diversity=memory_diversity(sampler.memory, oracle),
            alpha_mean=float(np.mean(alphas)) if alphas else 0.0,
            seed=seed,
        )
        log.info(
            "task %d: accuracy %.4f, purity %.4f, diversity %.4f, %d replacements",
            task.task_id,
            record.last_accuracy,
            record.memory_purity,
            record.memory_diversity,
            sampler.n_replaced - replaced_start,
        )
        tracker._callback(
            "snapshot",
            {"run_id": run_id, "seed": seed, "task": task.task_id, "memory": sampler.memory.snapshot()},
        )
        records.append(record)

    return records


def _run_seed(config, seed, cache_dir):
    tracker = RunTracker()
    records = _run_single(config, seed, tracker, cache_dir)
    return records, tracker.intermediate_results


def run_experiment(config, seed=None, tracker=None, cache_dir=None):
    """Run an experiment for one seed, or for every seed of the configuration.

    Args:
        config (ExperimentConfig): the experiment
        seed (int or None): a single seed; ``None`` runs ``config.seeds``
        tracker (RunTracker or None): receives intermediate results
        cache_dir (str or None): directory for the cached diversity oracle

    Returns:
        list[RunRecord]: one record per seed and task, ordered by seed
    """
    tracker = tracker if tracker is not None else RunTracker()
    # fail on bad sampler names before any data is touched
    _make_sampler(config, 0)

    seeds = [int(seed)] if seed is not None else list(config.seeds)
    records = []
    if config.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_seed, config, s, cache_dir) for s in seeds]
            for s, future in zip(seeds, futures):
                seed_records, results = future.result()
                log.info("seed %d finished", s)
                records.extend(seed_records)
                tracker.merge(results)
    else:
        for s in seeds:
            records.extend(_run_single(config, s, tracker, cache_dir))
            log.info("seed %d finished", s)

    return sorted(records, key=lambda r: (r.seed, r.task_id))


def _parse_alpha(alpha):
    if isinstance(alpha, str) and alpha.strip() == "adaptive":
        return "adaptive"
    try:
        value = float(alpha)
    except (TypeError, ValueError):
        raise ConfigError(f"Cannot parse alpha value {alpha!r}.") from None
    if not 0 <= value <= 1:
        raise ConfigError(f"alpha values must lie in [0, 1], got {value}.")
    return f"fixed:{value}"


def sweep_alpha(config, alphas, tracker=None, cache_dir=None):
    """Run the experiment once per balancing coefficient.

    Args:
        config (ExperimentConfig): the base experiment; its sampler must be ``puridiver``
        alphas (Sequence[float or str]): static values in ``[0, 1]``, or ``"adaptive"``

    Returns:
        list[RunRecord]: records of every run
    """
    if config.sampler != "puridiver":
        raise ConfigError("An alpha sweep needs the 'puridiver' sampler.")
    modes = [_parse_alpha(a) for a in alphas]
    if not modes:
        raise ConfigError("The alpha sweep is empty.")

    records = []
    for i, mode in enumerate(modes):
        log.info("alpha sweep %d/%d: %s", i + 1, len(modes), mode)
        records.extend(run_experiment(config.replace(alpha_mode=mode), tracker=tracker, cache_dir=cache_dir))
    return records


def sweep_noise(config, ratios, tracker=None, cache_dir=None):
    """Run the experiment once per noise ratio."""
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise ConfigError("The noise sweep is empty.")

    records = []
    for i, ratio in enumerate(ratios):
        log.info("noise sweep %d/%d: ratio %s", i + 1, len(ratios), ratio)
        records.extend(run_experiment(config.replace(noise_ratio=ratio), tracker=tracker, cache_dir=cache_dir))
    return records


def _write_json(path, payload):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1)
        f.write("\n")


def write_results(records, directory, config=None, tracker=None, sweep=False):
    """Persist the outputs of runs.

    Writes ``metrics.csv``, and optionally ``config.echo``, ``memory_task{t}.json``
    snapshots, ``partition_audit.jsonl`` and, for sweeps, ``sweep.csv``. Snapshots go
    into ``<run_id>/`` and ``seed{s}/`` subdirectories when several runs or seeds are
    present.
    """
    os.makedirs(directory, exist_ok=True)
    write_metrics_csv(records, os.path.join(directory, "metrics.csv"))

    if config is not None:
        with open(os.path.join(directory, "config.echo"), "w", encoding="utf-8") as f:
            f.write(config.dumps())

    if tracker is not None:
        snapshots = tracker.intermediate_results["snapshot"]
        run_ids = {s["run_id"] for s in snapshots}
        seeds = {s["seed"] for s in snapshots}
        for snap in snapshots:
            parts = [directory]
            if len(run_ids) > 1:
                parts.append(snap["run_id"])
            if len(seeds) > 1:
                parts.append(f"seed{snap['seed']}")
            _write_json(os.path.join(*parts, f"memory_task{snap['task']}.json"), snap["memory"])

        with open(os.path.join(directory, "partition_audit.jsonl"), "w", encoding="utf-8") as f:
            for audit in tracker.intermediate_results["partition_audit"]:
                f.write(json.dumps(audit, sort_keys=True) + "\n")

    if sweep:
        rows = summarize(records)
        header = ["sampler", "robust_mode", "alpha_mode", "noise_ratio", "seeds", "accuracy", "purity", "diversity"]
        with open(os.path.join(directory, "sweep.csv"), "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in header])
