import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irmalvq import _kernels
from irmalvq.data import Dataset, gen_two_gaussians, standardize
from irmalvq.errors import AllRelevanceRemoved, DataError, DegenerateDistance, ShapeMismatch
from irmalvq.linalg import sym_eig
from irmalvq.lvq import (
    GLVQ, GMLVQ, GmlvqModel, TrainConfig, cost, cost_terms, distance, init_model, predict,
    sample_gradient, sgd_step, train,
)


def make_model(w, labels, omega=None, frozen=None, mode=GMLVQ):
    w = np.asarray(w, dtype=float)
    n = w.shape[1]
    omega = np.eye(n) / np.sqrt(n) if omega is None else omega
    return GmlvqModel(w, labels, omega, frozen if frozen is not None else np.zeros((0, n)), mode)


def term(w, labels, omega, x, label):
    """Reference cost term by brute force over all prototypes."""
    d = np.array([np.sum((omega @ (x - wj)) ** 2) for wj in w])
    correct = labels == label
    dp = d[correct].min()
    dm = d[~correct].min()
    return (dp - dm) / (dp + dm)


def random_instance(rng, n=None, per_class=None, n_classes=None):
    n = n or int(rng.integers(2, 6))
    c = n_classes or int(rng.integers(2, 4))
    k = per_class or int(rng.integers(1, 3))
    w = rng.standard_normal((c * k, n))
    labels = np.repeat(np.arange(1, c + 1), k)
    omega = rng.standard_normal((n, n))
    return w, labels, omega


class TestDistance:
    def test_zero_at_prototype(self):
        m = make_model([[1.0, 2.0], [0.0, 0.0]], [1, 2])
        assert distance(m, [1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_euclidean(self):
        m = make_model([[0.0, 0.0], [1.0, 1.0]], [1, 2], omega=np.eye(2))
        assert distance(m, [0.0, 0.0], [3.0, 4.0]) == pytest.approx(25.0)

    def test_glvq_scaling(self):
        m = make_model([[0.0, 0.0], [1.0, 1.0]], [1, 2], mode=GLVQ)
        assert distance(m, [0.0, 0.0], [3.0, 4.0]) == pytest.approx(12.5)

    def test_quadratic_form(self):
        rng = np.random.default_rng(4)
        w, labels, omega = random_instance(rng, n=4)
        m = make_model(w, labels, omega)
        x = rng.standard_normal(4)
        diff = x - w[0]
        assert distance(m, w[0], x) == pytest.approx(diff @ omega.T @ omega @ diff, rel=1e-12)
        np.testing.assert_allclose(m.distances(x[None, :])[0, 0], np.linalg.norm(omega @ diff) ** 2)

    def test_shape_mismatch(self):
        m = make_model([[0.0, 0.0], [1.0, 1.0]], [1, 2])
        with pytest.raises(ShapeMismatch):
            distance(m, [0.0, 0.0], [1.0, 2.0, 3.0])


class TestCost:
    def toy(self):
        return make_model([[0.0, 0.0], [2.0, 0.0]], [1, 2], omega=np.eye(2))

    def test_equidistant_is_zero(self):
        d = Dataset(np.array([[1.0, 1.0], [1.0, -1.0]]), [2, 1])
        np.testing.assert_allclose(cost_terms(self.toy(), d), [0.0, 0.0])

    def test_on_correct_prototype(self):
        d = Dataset(np.array([[0.0, 0.0], [2.0, 0.0]]), [1, 2])
        np.testing.assert_allclose(cost_terms(self.toy(), d), [-1.0, -1.0])

    def test_hand_sum(self):
        # terms: (0.25-2.25)/2.5, (2-2)/4, (1-5)/6
        d = Dataset(np.array([[0.5, 0.0], [1.0, 1.0], [2.0, 1.0]]), [1, 2, 2])
        assert cost(self.toy(), d) == pytest.approx(-0.8 + 0.0 - 2.0 / 3.0, abs=1e-15)

    def test_terms_bounded(self):
        d = standardize(gen_two_gaussians(50, 2))
        t = cost_terms(init_model(d, TrainConfig()), d)
        assert np.all(t >= -1) and np.all(t <= 1)

    def test_degenerate(self):
        m = make_model([[0.0, 0.0], [0.0, 0.0]], [1, 2])
        with pytest.raises(DegenerateDistance):
            cost(m, Dataset(np.zeros((2, 2)), [1, 2]))

    def test_missing_prototype_class(self):
        m = make_model([[0.0], [1.0]], [1, 2])
        with pytest.raises(DataError):
            cost(m, Dataset(np.zeros((3, 1)), [1, 2, 3]))


class TestGradient:
    def test_finite_differences(self):
        """100 random small instances, central differences with h = 1e-5."""
        rng = np.random.default_rng(2024)
        h = 1e-5
        worst = 0.0
        checked = 0
        while checked < 100:
            w, labels, omega = random_instance(rng)
            x = rng.standard_normal(w.shape[1])
            label = int(rng.integers(1, labels.max() + 1))
            m = make_model(w, labels, omega)
            # skip near-ties where the closest prototype could switch under h
            d = np.sort(m.distances(x[None, :])[0])
            if np.min(np.diff(d)) < 1e-3:
                continue
            gw, go = sample_gradient(m, x, label)
            fw = np.zeros_like(w)
            for idx in np.ndindex(*w.shape):
                wp, wm = w.copy(), w.copy()
                wp[idx] += h
                wm[idx] -= h
                fw[idx] = (term(wp, labels, omega, x, label) - term(wm, labels, omega, x, label)) / (2 * h)
            fo = np.zeros_like(omega)
            for idx in np.ndindex(*omega.shape):
                op, om = omega.copy(), omega.copy()
                op[idx] += h
                om[idx] -= h
                fo[idx] = (term(w, labels, op, x, label) - term(w, labels, om, x, label)) / (2 * h)
            g = np.concatenate([gw.ravel(), go.ravel()])
            f = np.concatenate([fw.ravel(), fo.ravel()])
            worst = max(worst, np.linalg.norm(g - f) / np.linalg.norm(f))
            checked += 1
        assert worst <= 1e-5

    def test_glvq_has_no_omega_gradient(self):
        m = make_model([[0.0, 0.0], [2.0, 0.0]], [1, 2], mode=GLVQ)
        _, go = sample_gradient(m, np.array([0.5, 0.3]), 1)
        assert np.all(go == 0)


class TestSgdStep:
    def test_symmetric_midpoint(self):
        m = make_model([[0.0, 0.0], [2.0, 0.0]], [1, 2], mode=GLVQ)
        new = sgd_step(m, [1.0, 0.0], 1, TrainConfig())
        dp = new.prototypes[0] - m.prototypes[0]
        dm = new.prototypes[1] - m.prototypes[1]
        assert dp[0] > 0 and dm[0] > 0  # w+ towards x = (1, 0), w- away from it
        assert np.linalg.norm(dp) == pytest.approx(np.linalg.norm(dm), rel=1e-12)

    def test_prototype_update_formula(self):
        rng = np.random.default_rng(8)
        w, labels, omega = random_instance(rng, n=3, per_class=1, n_classes=2)
        omega /= np.linalg.norm(omega)
        m = make_model(w, labels, omega)
        x = rng.standard_normal(3)
        cfg = TrainConfig(step_prototype=0.05, step_omega=0.02)
        new = sgd_step(m, x, 1, cfg)
        lam = omega.T @ omega
        dp = (x - w[0]) @ lam @ (x - w[0])
        dm = (x - w[1]) @ lam @ (x - w[1])
        gp = 2 * dm / (dp + dm) ** 2
        gm = -2 * dp / (dp + dm) ** 2
        np.testing.assert_allclose(new.prototypes[0], w[0] + 0.05 * gp * 2 * lam @ (x - w[0]), rtol=1e-12)
        np.testing.assert_allclose(new.prototypes[1], w[1] + 0.05 * gm * 2 * lam @ (x - w[1]), rtol=1e-12)
        raw = omega - 0.02 * (gp * 2 * np.outer(omega @ (x - w[0]), x - w[0])
                              + gm * 2 * np.outer(omega @ (x - w[1]), x - w[1]))
        np.testing.assert_allclose(new.omega, raw / np.linalg.norm(raw), rtol=1e-10, atol=1e-14)

    def test_invariants_after_every_update(self):
        d = standardize(gen_two_gaussians(60, 5))
        rng = np.random.default_rng(1)
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        cfg = TrainConfig(step_omega=0.05)
        m = init_model(d, cfg, v[None, :])
        for i in rng.permutation(d.n_samples):
            m = sgd_step(m, d.X[i], d.y[i], cfg)
            assert abs(np.trace(m.relevance_matrix) - 1) <= 1e-9
            assert np.linalg.norm(m.omega @ v) <= 1e-8
            assert sym_eig(m.relevance_matrix).eigenvalues.min() >= -1e-10

    def test_compiled_epoch_keeps_invariants_per_step(self):
        """The fused per-step update used by ``train`` holds the constraints too."""
        d = standardize(gen_two_gaussians(60, 6))
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.standard_normal((4, 2)))
        frozen = np.ascontiguousarray(q.T)
        m = init_model(d, TrainConfig(), frozen)
        w, omega = m.prototypes.copy(), m.omega.copy()
        scratch = [np.empty_like(w) for _ in range(3)]
        for _ in range(5):
            for i in rng.permutation(d.n_samples):
                status = _kernels.step(w, m.prototype_labels, omega, frozen, d.X[i], d.y[i], 0.1, 0.05, True, *scratch)
                assert status == _kernels.OK
                assert abs(np.sum(omega * omega) - 1) <= 1e-9
                assert np.max(np.linalg.norm(omega @ frozen.T, axis=0)) <= 1e-8

    def test_degenerate_sample_skipped(self):
        m = make_model([[0.0, 0.0], [0.0, 0.0]], [1, 2])
        with pytest.warns(RuntimeWarning):
            new = sgd_step(m, [0.0, 0.0], 1, TrainConfig())
        assert new is m


class TestInit:
    def test_class_means_and_trace(self):
        d = standardize(gen_two_gaussians(100, 1))
        m = init_model(d, TrainConfig())
        for c in (1, 2):
            np.testing.assert_allclose(m.prototypes[c - 1], d.X[d.y == c].mean(axis=0), atol=1e-3)
        assert np.trace(m.relevance_matrix) == pytest.approx(1.0, abs=1e-15)

    def test_jitter_makes_prototypes_distinct(self):
        d = standardize(gen_two_gaussians(100, 1))
        m = init_model(d, TrainConfig(prototypes_per_class=3))
        for c in (1, 2):
            p = m.prototypes[m.prototype_labels == c]
            dist = np.linalg.norm(p[:, None] - p[None, :], axis=2)
            assert np.all(dist[np.triu_indices(3, 1)] > 0)

    def test_frozen_deflated(self):
        d = standardize(gen_two_gaussians(20, 1))
        v = np.array([[0.0, 1.0, 0.0, 0.0]])
        m = init_model(d, TrainConfig(), v)
        assert np.linalg.norm(m.omega @ v[0]) <= 1e-15
        assert np.trace(m.relevance_matrix) == pytest.approx(1.0)

    def test_full_basis_removes_everything(self):
        d = standardize(gen_two_gaussians(20, 1))
        with pytest.raises(AllRelevanceRemoved):
            train(d, TrainConfig(), np.eye(4))

    def test_glvq_rejects_frozen(self):
        d = standardize(gen_two_gaussians(20, 1))
        with pytest.raises(DataError):
            init_model(d, TrainConfig(mode=GLVQ), np.eye(4)[:1])


class TestTrain:
    def test_synthetic_leading_directions(self):
        d = standardize(gen_two_gaussians(300, 0))
        m0 = train(d, TrainConfig(seed=1))
        dec = sym_eig(m0.relevance_matrix)
        v0 = dec.eigenvectors[:, 0]
        assert abs(v0[1]) >= 0.9
        assert dec.eigenvalues[0] >= 0.95
        m1 = train(d, TrainConfig(seed=2), v0[None, :])
        v1 = sym_eig(m1.relevance_matrix).eigenvectors[:, 0]
        assert abs(v1[0]) >= 0.9

    def test_cost_decreases_on_separable_data(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(-2, 0.5, (30, 2)), rng.normal(2, 0.5, (30, 2))])
        d = Dataset(X, np.repeat([1, 2], 30))
        m = train(d, TrainConfig(epochs=30))
        assert len(m.cost_history) == 31
        assert m.cost_history[-1] < m.cost_history[0]

    def test_deterministic(self):
        d = standardize(gen_two_gaussians(80, 3))
        cfg = TrainConfig(seed=11, prototypes_per_class=2)
        a, b = train(d, cfg), train(d, cfg)
        assert np.array_equal(a.prototypes, b.prototypes)
        assert np.array_equal(a.omega, b.omega)
        c = train(d, TrainConfig(seed=12, prototypes_per_class=2))
        assert not np.array_equal(a.omega, c.omega)

    def test_glvq_keeps_identity_metric(self):
        d = standardize(gen_two_gaussians(50, 3))
        m = train(d, TrainConfig(mode=GLVQ))
        np.testing.assert_array_equal(m.omega, np.eye(4) / 2)

    def test_frozen_invariants_after_training(self):
        d = standardize(gen_two_gaussians(100, 4))
        frozen = np.array([[0.6, 0.8, 0.0, 0.0]])
        m = train(d, TrainConfig(), frozen)
        assert np.trace(m.relevance_matrix) == pytest.approx(1.0, abs=1e-9)
        assert frozen[0] @ m.relevance_matrix @ frozen[0] <= 1e-16


class TestPredict:
    def test_on_prototype(self):
        m = make_model([[0.0, 0.0], [3.0, 3.0]], [1, 2])
        assert predict(m, [3.0, 3.0]) == 2

    def test_tie_goes_to_lowest_index(self):
        m = make_model([[1.0], [-1.0]], [2, 1])
        assert predict(m, [0.0]) == 2

    def test_matches_brute_force(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            w, labels, omega = random_instance(rng)
            m = make_model(w, labels, omega)
            X = rng.standard_normal((15, w.shape[1]))
            brute = [labels[np.argmin([np.sum((omega @ (x - wj)) ** 2) for wj in w])] for x in X]
            np.testing.assert_array_equal(m.predict(X), brute)


class TestSerialization:
    def test_json_round_trip(self):
        d = standardize(gen_two_gaussians(40, 1))
        m = train(d, TrainConfig(prototypes_per_class=2), np.array([[1.0, 0, 0, 0]]))
        back = GmlvqModel.from_json(m.to_json())
        assert np.array_equal(back.prototypes, m.prototypes)
        assert np.array_equal(back.omega, m.omega)
        assert np.array_equal(back.frozen_directions, m.frozen_directions)
        assert back.config == m.config
        assert back.cost_history == m.cost_history
        assert back.to_json() == m.to_json()

    def test_rejects_foreign_document(self):
        with pytest.raises(DataError):
            GmlvqModel.from_dict({"format": "something", "version": 1})


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_relevance_psd_unit_trace(seed, n):
    rng = np.random.default_rng(seed)
    w, labels, omega = random_instance(rng, n=n)
    m = make_model(w, labels, omega / np.linalg.norm(omega))
    cfg = TrainConfig(step_omega=0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(20):
            x = rng.standard_normal(n)
            m = sgd_step(m, x, int(rng.integers(1, labels.max() + 1)), cfg)
    lam = m.relevance_matrix
    assert abs(np.trace(lam) - 1) <= 1e-9
    assert np.allclose(lam, lam.T, atol=1e-15)
    assert sym_eig(lam).eigenvalues.min() >= -1e-10
