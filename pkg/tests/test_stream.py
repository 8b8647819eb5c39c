r"""
Tests for label-noise injection and blurry task splitting.
"""
from collections import Counter

import numpy as np
import pytest
from flaky import flaky
from scipy.stats import chisquare

from robust_replay.exceptions import ConfigError, InputError
from robust_replay.stream import (
    Example,
    batches,
    circular_class_map,
    inject_asymmetric_noise,
    inject_symmetric_noise,
    noise_rate,
    split_blurry_tasks,
    stratified_split,
)

from conftest import make_blobs


def _dataset(num_classes, per_class):
    return [
        Example(c * per_class + i, np.array([float(c), float(i)]), c, c)
        for c in range(num_classes)
        for i in range(per_class)
    ]


class TestExample:
    """Tests for the example container"""

    def test_with_label(self):
        """Test that relabelling keeps the id, features and true label"""
        ex = Example(3, np.ones(2), 1, 1)
        noisy = ex.with_label(4)
        assert noisy.id == 3 and noisy.true_label == 1 and noisy.noisy_label == 4
        assert ex.is_clean and not noisy.is_clean


class TestSymmetricNoise:
    """Tests for symmetric label noise"""

    def test_zero_ratio(self):
        """Test that a zero ratio leaves every label clean"""
        noisy = inject_symmetric_noise(_dataset(5, 20), 0.0, seed=0)
        assert noise_rate(noisy) == 0.0

    def test_never_maps_to_self(self):
        """Test that every flipped label differs from the true label"""
        noisy = inject_symmetric_noise(_dataset(5, 200), 0.9, seed=1)
        flipped = [ex for ex in noisy if not ex.is_clean]
        assert flipped
        assert all(0 <= ex.noisy_label < 5 for ex in flipped)

    def test_features_untouched(self):
        """Test that features and true labels are preserved"""
        data = _dataset(3, 10)
        noisy = inject_symmetric_noise(data, 0.5, seed=2)
        for a, b in zip(data, noisy):
            assert a.id == b.id and a.true_label == b.true_label
            assert np.array_equal(a.x, b.x)

    @flaky(max_runs=3, min_passes=1)
    def test_rate_and_uniform_targets(self):
        """Test the flip rate and the uniformity of the wrong labels"""
        data = _dataset(5, 2000)
        noisy = inject_symmetric_noise(data, 0.4, seed=int(np.random.randint(1 << 30)))
        rate = noise_rate(noisy)
        sd = np.sqrt(0.4 * 0.6 / len(data))
        assert abs(rate - 0.4) < 4 * sd

        offsets = Counter((ex.noisy_label - ex.true_label) % 5 for ex in noisy if not ex.is_clean)
        assert chisquare([offsets[k] for k in range(1, 5)]).pvalue > 0.001

    def test_deterministic(self):
        """Test that a fixed seed reproduces the same labels"""
        a = inject_symmetric_noise(_dataset(4, 30), 0.4, seed=5)
        b = inject_symmetric_noise(_dataset(4, 30), 0.4, seed=5)
        assert [ex.noisy_label for ex in a] == [ex.noisy_label for ex in b]

    @pytest.mark.parametrize("ratio", [-0.1, 1.0, 1.5])
    def test_invalid_ratio(self, ratio):
        """Test that ratios outside [0, 1) are rejected"""
        with pytest.raises(ConfigError):
            inject_symmetric_noise(_dataset(3, 3), ratio)


class TestAsymmetricNoise:
    """Tests for asymmetric label noise"""

    def test_default_map_is_circular(self):
        """Test that flipped labels follow the circular shift"""
        noisy = inject_asymmetric_noise(_dataset(4, 100), 0.5, seed=0)
        for ex in noisy:
            assert ex.noisy_label in (ex.true_label, (ex.true_label + 1) % 4)

    def test_circular_class_map(self):
        """Test the default map"""
        assert circular_class_map(3) == {0: 1, 1: 2, 2: 0}

    def test_unmapped_classes_untouched(self):
        """Test that classes absent from the map never flip"""
        noisy = inject_asymmetric_noise(_dataset(3, 50), 0.9, class_map={0: 2}, seed=1)
        assert all(ex.is_clean for ex in noisy if ex.true_label != 0)
        assert any(not ex.is_clean for ex in noisy if ex.true_label == 0)

    def test_self_map_rejected(self):
        """Test that a map sending a class onto itself is rejected"""
        with pytest.raises(ConfigError, match="to itself"):
            inject_asymmetric_noise(_dataset(3, 3), 0.2, class_map={1: 1})


# (C, T, L) grid with T <= C
GRID = [
    (c, t, l)
    for c in (2, 3, 5, 10)
    for t in (1, 2, 3, 5)
    for l in (0.0, 0.1, 0.3)
    if t <= c
]


@pytest.mark.parametrize("num_classes,num_tasks,blurry_ratio", GRID)
class TestBlurrySplit:
    """Structural tests of the blurry task split, by brute-force counting"""

    def test_structure(self, num_classes, num_tasks, blurry_ratio):
        """Test disjoint majors, full coverage and the minor share"""
        data = _dataset(num_classes, 60)
        tasks = split_blurry_tasks(data, num_tasks, blurry_ratio, seed=3)
        assert len(tasks) == num_tasks

        # majors are disjoint and cover every class
        majors = [c for task in tasks for c in task.major_classes]
        assert sorted(majors) == list(range(num_classes))
        assert all(task.major_classes for task in tasks)

        # every example appears in exactly one task
        ids = [ex.id for task in tasks for ex in task]
        assert sorted(ids) == [ex.id for ex in data]

        for task in tasks:
            counts = task.class_counts()
            minor = sum(n for c, n in counts.items() if c not in task.major_classes)
            assert set(counts) <= task.major_classes | task.minor_classes
            assert task.major_classes.isdisjoint(task.minor_classes)

            if num_tasks == 1 or blurry_ratio == 0:
                assert minor == 0
            else:
                assert abs(minor - blurry_ratio * len(task)) <= len(task.minor_classes)
                assert np.isclose(task.minor_fraction(), minor / len(task))
                # minor draws are balanced within the task
                minor_counts = [counts.get(c, 0) for c in task.minor_classes]
                assert max(minor_counts) - min(minor_counts) <= 1


def _sized_dataset(sizes):
    data = []
    for c, n in enumerate(sizes):
        data.extend(Example(len(data) + i, np.array([float(c), float(i)]), c, c) for i in range(n))
    return data


UNBALANCED = [
    ([4, 100, 100, 100, 100], 5, 0.1),
    ([3, 80, 120], 3, 0.2),
    ([10, 200, 60, 60, 150, 90], 3, 0.3),
    ([40, 55, 70, 90, 110, 130, 150], 2, 0.2),
    (list(np.random.default_rng(8).integers(30, 150, size=10)), 5, 0.3),
]


@pytest.mark.parametrize("sizes,num_tasks,blurry_ratio", UNBALANCED)
class TestUnbalancedBlurrySplit:
    """Tests of the blurry split when classes differ in size"""

    def test_structure(self, sizes, num_tasks, blurry_ratio):
        """Test full coverage, the minor share and that every class stays in its own task"""
        data = _sized_dataset(sizes)
        tasks = split_blurry_tasks(data, num_tasks, blurry_ratio, seed=4)

        ids = [ex.id for task in tasks for ex in task]
        assert sorted(ids) == [ex.id for ex in data]

        for task in tasks:
            counts = task.class_counts()
            assert all(counts.get(c, 0) >= 1 for c in task.major_classes)
            share = task.minor_fraction() * len(task)
            assert abs(share - blurry_ratio * len(task)) <= len(task.minor_classes)

    def test_short_class_donates_what_it_can(self, sizes, num_tasks, blurry_ratio):
        """Test that the smallest class donates at most all but one of its examples"""
        data = _sized_dataset(sizes)
        tasks = split_blurry_tasks(data, num_tasks, blurry_ratio, seed=4)
        smallest = int(np.argmin(sizes))
        donated = sum(t.class_counts().get(smallest, 0) for t in tasks if smallest not in t.major_classes)
        assert donated <= sizes[smallest] - 1


class TestBlurrySplitErrors:
    """Tests for invalid split settings"""

    def test_too_many_tasks(self):
        """Test that more tasks than classes is rejected"""
        with pytest.raises(ConfigError, match="major class"):
            split_blurry_tasks(_dataset(3, 10), 4, 0.1)

    @pytest.mark.parametrize("ratio", [1.0, -0.2])
    def test_invalid_ratio(self, ratio):
        """Test that ratios outside [0, 1) are rejected"""
        with pytest.raises(ConfigError):
            split_blurry_tasks(_dataset(3, 10), 2, ratio)

    def test_class_too_small(self):
        """Test that minor classes that together cannot donate a task's share are rejected"""
        with pytest.raises(ConfigError, match="too small"):
            split_blurry_tasks(_dataset(5, 3), 5, 0.9, seed=0)

    def test_deterministic(self):
        """Test that a fixed seed reproduces the same tasks"""
        a = split_blurry_tasks(_dataset(5, 20), 3, 0.2, seed=11)
        b = split_blurry_tasks(_dataset(5, 20), 3, 0.2, seed=11)
        assert [[ex.id for ex in t] for t in a] == [[ex.id for ex in t] for t in b]


class TestBatches:
    """Tests for mini-batching"""

    def test_sizes(self):
        """Test that batches keep order and the last one may be short"""
        task = split_blurry_tasks(_dataset(2, 5), 1, 0.0, seed=0)[0]
        chunks = list(batches(task, 4))
        assert [len(c) for c in chunks] == [4, 4, 2]
        assert [ex.id for c in chunks for ex in c] == [ex.id for ex in task]

    def test_invalid_batch_size(self):
        """Test that a zero batch size is rejected"""
        task = split_blurry_tasks(_dataset(2, 5), 1, 0.0)[0]
        with pytest.raises(InputError):
            list(batches(task, 0))


class TestStratifiedSplit:
    """Tests for the train/test split"""

    def test_proportions(self):
        """Test that each class contributes the test fraction"""
        data = make_blobs(3, 50)
        train, test = stratified_split(data, 0.2, seed=0)
        assert len(train) + len(test) == len(data)
        assert Counter(ex.true_label for ex in test) == {0: 10, 1: 10, 2: 10}
        assert not {ex.id for ex in train} & {ex.id for ex in test}
