import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irmalvq.data import Dataset, SplitSpec, gen_two_gaussians, standardize, stratified_split
from irmalvq.errors import EmptyTestClass, ShapeMismatch
from irmalvq.evaluation import (
    EvalReport, compare_pipelines, glvq_in_subspace, leading_mass_count, make_runner,
    pipeline_gmlvq_space, pipeline_irma_space, pipeline_original, repeat_seeds, repeated_validation,
)
from irmalvq.metrics import balanced_accuracy, confusion_matrix
from irmalvq.lvq import TrainConfig


def majority_runner(train, test, seed):
    majority = int(np.argmax(train.class_counts())) + 1
    return confusion_matrix(test.y, np.full(test.n_samples, majority), test.n_classes)


@pytest.fixture(scope="module")
def synthetic_split():
    d = standardize(gen_two_gaussians(100, 3))
    return stratified_split(d, SplitSpec(0.5, 4))


class TestBalancedAccuracy:
    def test_perfect(self):
        assert balanced_accuracy(np.diag([5, 3, 7])) == 1.0

    def test_binary_half(self):
        assert balanced_accuracy([[4, 0], [6, 0]]) == 0.5

    def test_three_class_hand(self):
        assert balanced_accuracy([[8, 1, 1], [2, 6, 2], [0, 0, 10]]) == pytest.approx(0.8)

    def test_empty_class(self):
        with pytest.raises(EmptyTestClass):
            balanced_accuracy([[1, 0], [0, 0]])

    def test_not_square(self):
        with pytest.raises(ShapeMismatch):
            balanced_accuracy([[1, 0, 0], [0, 1, 0]])

    def test_confusion_matrix(self):
        cm = confusion_matrix([1, 1, 2, 3, 3], [1, 2, 2, 3, 1], 3)
        np.testing.assert_array_equal(cm, [[1, 1, 0], [0, 1, 0], [1, 0, 1]])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    def test_relabel_invariance(self, seed, c):
        rng = np.random.default_rng(seed)
        cm = rng.integers(0, 10, (c, c)) + np.eye(c, dtype=int)
        perm = rng.permutation(c)
        assert balanced_accuracy(cm[perm][:, perm]) == pytest.approx(balanced_accuracy(cm), abs=1e-15)


class TestReport:
    def test_statistics(self):
        r = EvalReport("original", 1, (0.8, 0.9, 1.0), (2, 3, 2))
        assert r.mean == pytest.approx(0.9)
        assert r.std == pytest.approx(0.1)
        assert r.repeats == 3
        assert r.dim_mode == 2

    def test_mode_ties_smallest(self):
        assert EvalReport("irma_space", 1, (0.5, 0.5), (7, 6)).dim_mode == 6

    def test_single_repeat(self):
        r = EvalReport("original", 1, (0.7,))
        assert r.std == 0.0 and r.dim_mode is None


class TestRepeatedValidation:
    def test_constant_classifier(self):
        d = gen_two_gaussians(50, 0)
        r = repeated_validation(d, majority_runner, 5, SplitSpec(0.5, 0))
        assert r.mean == 0.5
        assert r.repeats == 5

    def test_matches_manual_runs(self):
        d = standardize(gen_two_gaussians(60, 1))
        spec = SplitSpec(0.5, 7)
        runner = make_runner("original", 1)
        r = repeated_validation(d, runner, 2, spec)
        manual = []
        for split_seed, model_seed in repeat_seeds(spec, 2):
            tr, te = stratified_split(d, SplitSpec(0.5, split_seed))
            manual.append(balanced_accuracy(runner(tr, te, model_seed)))
        assert list(r.bacs) == manual
        assert r.bacs == repeated_validation(d, runner, 2, spec).bacs

    def test_parallel_equals_serial(self):
        d = standardize(gen_two_gaussians(60, 1))
        runner = make_runner("gmlvq_space", 1)
        a = repeated_validation(d, runner, 3, SplitSpec(0.5, 2), jobs=1)
        b = repeated_validation(d, runner, 3, SplitSpec(0.5, 2), jobs=2)
        assert a.bacs == b.bacs and a.dims == b.dims

    def test_repeats_positive(self):
        with pytest.raises(ValueError):
            repeated_validation(gen_two_gaussians(10, 0), majority_runner, 0, SplitSpec())


class TestPipelines:
    def test_separated_clusters(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(-5, 0.3, (20, 3)), rng.normal(5, 0.3, (20, 3))])
        d = Dataset(X, np.repeat([1, 2], 20))
        tr, te = stratified_split(d, SplitSpec(0.5, 0))
        assert balanced_accuracy(pipeline_original(tr, te, 1)) == 1.0

    def test_leading_mass_count(self):
        assert leading_mass_count([1.0, 0.0, 0.0]) == 1
        assert leading_mass_count([0.5, 0.495, 0.005]) == 2
        assert leading_mass_count([0.5, 0.3, 0.2]) == 3

    def test_gmlvq_space_dimension(self, synthetic_split):
        tr, te = synthetic_split
        cm, dim = pipeline_gmlvq_space(tr, te, 1, TrainConfig(seed=1))
        assert 1 <= dim <= 4
        assert balanced_accuracy(cm) > 0.9

    def test_irma_space_synthetic(self, synthetic_split):
        tr, te = synthetic_split
        cm, dim = pipeline_irma_space(tr, te, 1, config=TrainConfig(seed=1))
        assert dim in (1, 2)
        assert balanced_accuracy(cm) > 0.9
        _, dim_rule = pipeline_irma_space(tr, te, 1, config=TrainConfig(seed=1), selection="stopping_rule")
        assert dim_rule >= dim

    def test_rotation_invariance(self, synthetic_split):
        tr, te = synthetic_split
        cfg = TrainConfig(seed=5)
        ref = balanced_accuracy(pipeline_original(tr, te, 1, cfg))
        q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((4, 4)))
        assert balanced_accuracy(glvq_in_subspace(tr, te, q.T, 1, cfg)) == ref
        # K = N: the IRMA subspace is one full orthonormal basis
        cm, dim = pipeline_irma_space(tr, te, 1, k=4, config=cfg)
        assert dim == 4
        assert balanced_accuracy(cm) == ref

    def test_compare_layout(self):
        d = standardize(gen_two_gaussians(40, 0))
        reports = compare_pipelines(d, repeats=2, name="syn", config=TrainConfig(epochs=5))
        assert len(reports) == 9
        assert [(r.prototypes_per_class, r.pipeline) for r in reports[:3]] == [
            (1, "original"), (1, "gmlvq_space"), (1, "irma_space")]
        assert all(r.dataset == "syn" and r.repeats == 2 for r in reports)
        assert reports[0].dims == () and len(reports[1].dims) == 2

    def test_unknown_pipeline(self, synthetic_split):
        tr, te = synthetic_split
        with pytest.raises(ValueError):
            make_runner("pca", 1)(tr, te, 0)
