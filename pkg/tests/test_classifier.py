import numpy as np
import pytest

from seivote.bispectrum import BispectrumImage
from seivote.classifier import (
    ConfusionVoter,
    ImageSet,
    SoftmaxModel,
    TrainingSettings,
    _loss_and_grads,
    confusion_from_labels,
    confusion_sample,
    estimate_confusion,
    load_model,
    save_model,
    train_softmax,
)

from oracles import runs_test_z


def _image(rng, side=56):
    return BispectrumImage(pixels=rng.integers(0, 256, (side, side, 3)).astype(np.uint8))


class TestSoftmaxModel:
    def test_zero_model_is_uniform(self):
        rng = np.random.default_rng(0)
        model = SoftmaxModel.zeros(num_classes=4, image_side=56, pooling=4)
        probs = model.class_probabilities(_image(rng))
        np.testing.assert_allclose(probs, 0.25, atol=1e-12)

    def test_zero_model_ties_break_to_class_zero(self):
        rng = np.random.default_rng(1)
        model = SoftmaxModel.zeros(num_classes=5, image_side=56, pooling=4)
        assert model.classify(_image(rng)) == 0

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(2)
        model = SoftmaxModel(
            weights=rng.standard_normal((3, 588)),
            biases=rng.standard_normal(3),
            pooling=4,
            num_classes=3,
        )
        for _ in range(50):
            assert model.class_probabilities(_image(rng)).sum() == pytest.approx(
                1.0, abs=1e-9
            )

    def test_classify_is_argmax(self):
        rng = np.random.default_rng(3)
        model = SoftmaxModel(
            weights=rng.standard_normal((4, 588)),
            biases=np.zeros(4),
            pooling=4,
            num_classes=4,
        )
        for _ in range(1000):
            image = _image(rng)
            assert model.classify(image) == int(
                np.argmax(model.class_probabilities(image))
            )

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        model = SoftmaxModel.zeros(num_classes=3, image_side=56, pooling=4)
        with pytest.raises(ValueError):
            model.class_probabilities(_image(rng, side=28))


class TestTraining:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        feats = rng.random((12, 10))
        labels = rng.integers(0, 3, 12)
        weights = rng.standard_normal((3, 10)) * 0.1
        biases = rng.standard_normal(3) * 0.1
        _, grad_w, grad_b = _loss_and_grads(weights, biases, feats, labels, 0.05)
        eps = 1e-6

        def loss_at(w, b):
            value, _, _ = _loss_and_grads(w, b, feats, labels, 0.05)
            return value

        for idx in np.ndindex(weights.shape):
            bumped = weights.copy()
            bumped[idx] += eps
            dipped = weights.copy()
            dipped[idx] -= eps
            numeric = (loss_at(bumped, biases) - loss_at(dipped, biases)) / (2 * eps)
            assert grad_w[idx] == pytest.approx(numeric, rel=1e-5, abs=1e-8)
        for i in range(3):
            bumped = biases.copy()
            bumped[i] += eps
            dipped = biases.copy()
            dipped[i] -= eps
            numeric = (loss_at(weights, bumped) - loss_at(weights, dipped)) / (2 * eps)
            assert grad_b[i] == pytest.approx(numeric, rel=1e-5, abs=1e-8)

    def test_zero_epochs_leaves_uniform_model(self):
        rng = np.random.default_rng(6)
        pixels = rng.integers(0, 256, (8, 56, 56, 3)).astype(np.uint8)
        labels = np.array([0, 1, 0, 1, 0, 1, 0, 1])
        data = ImageSet(pixels, labels)
        model, _ = train_softmax(data, data, TrainingSettings(epochs=0))
        probs = model.class_probabilities(_image(rng))
        np.testing.assert_allclose(probs, 0.5, atol=1e-12)

    def test_missing_class_rejected(self):
        rng = np.random.default_rng(7)
        pixels = rng.integers(0, 256, (6, 56, 56, 3)).astype(np.uint8)
        train = ImageSet(pixels, np.array([0, 0, 0, 2, 2, 2]))
        val = ImageSet(pixels, np.array([0, 1, 2, 0, 1, 2]))
        with pytest.raises(ValueError, match="1"):
            train_softmax(train, val, TrainingSettings(epochs=1))

    def test_loss_history_non_increasing(self, dataset_dir, desk_settings):
        from seivote.experiments import load_split

        train_set, _ = load_split(dataset_dir, "train")
        val_set, _ = load_split(dataset_dir, "val")
        _, history = train_softmax(train_set, val_set, desk_settings.training)
        losses = history["loss"]
        assert all(b <= a for a, b in zip(losses, losses[1:]))

    def test_desk_dataset_gate(self, trained):
        # viability gate: every per-class validation accuracy above 0.5
        _, history = trained
        assert all(a > 0.5 for a in history["per_class_accuracy"])

    def test_desk_dataset_confusion_diagonal(self, trained, dataset_dir):
        from seivote.experiments import load_split

        model, _ = trained
        test_set, _ = load_split(dataset_dir, "test")
        matrix = estimate_confusion(model, test_set)
        assert np.all(np.diag(matrix) > 0.5)


class TestConfusionVoter:
    def test_identity_matrix_always_correct(self):
        voter = ConfusionVoter(matrix=np.eye(4), rng_seed=0)
        assert all(voter.sample(2, i) == 2 for i in range(100))

    def test_rows_must_be_stochastic(self):
        with pytest.raises(ValueError):
            ConfusionVoter(matrix=np.array([[0.5, 0.4], [0.5, 0.5]]))
        with pytest.raises(ValueError):
            ConfusionVoter(matrix=np.array([[1.5, -0.5], [0.5, 0.5]]))

    def test_two_class_empirical_frequency(self):
        voter = ConfusionVoter(matrix=np.array([[0.6, 0.4], [0.4, 0.6]]), rng_seed=8)
        draws = 100_000
        correct = sum(voter.sample(0, i) == 0 for i in range(draws))
        assert correct / draws == pytest.approx(0.6, abs=0.005)

    def test_sixteen_class_diagonal_frequency(self):
        voter = ConfusionVoter.symmetric(16, 0.82, rng_seed=9)
        draws = 100_000
        rng_stream = voter.stream(5, "freq")
        votes = [next(rng_stream) for _ in range(draws)]
        assert np.mean(np.asarray(votes) == 5) == pytest.approx(0.82, abs=0.004)

    def test_reproducible_per_key(self):
        voter = ConfusionVoter.symmetric(4, 0.7, rng_seed=10)
        assert [voter.sample(1, i) for i in range(20)] == [
            voter.sample(1, i) for i in range(20)
        ]

    def test_draws_independent_across_index(self):
        # runs test on the correct/incorrect sequence at significance 0.001
        voter = ConfusionVoter.symmetric(4, 0.7, rng_seed=11)
        binary = np.array([voter.sample(0, i) == 0 for i in range(20_000)])
        assert abs(runs_test_z(binary)) < 3.2905

    def test_symmetric_rows(self):
        voter = ConfusionVoter.symmetric(16, 0.82)
        np.testing.assert_allclose(voter.matrix.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.diag(voter.matrix) == 0.82)
        off = voter.matrix[0, 1]
        assert off == pytest.approx(0.18 / 15)

    def test_confusion_sample_alias(self):
        voter = ConfusionVoter.symmetric(3, 0.9, rng_seed=12)
        assert confusion_sample(voter, 1, 7) == voter.sample(1, 7)

    def test_invalid_class_rejected(self):
        voter = ConfusionVoter.symmetric(3, 0.9)
        with pytest.raises(ValueError):
            voter.sample(3, 0)


class TestEstimateConfusion:
    def test_perfect_classifier_gives_identity(self):
        class Oracle:
            num_classes = 3

            def classify(self, image):
                return int(image.pixels[0, 0, 0]) % 3

            def class_probabilities(self, image):
                probs = np.zeros(3)
                probs[self.classify(image)] = 1.0
                return probs

        pixels = np.zeros((9, 4, 4, 3), dtype=np.uint8)
        labels = np.arange(9) % 3
        for i, label in enumerate(labels):
            pixels[i, 0, 0, 0] = label
        matrix = estimate_confusion(Oracle(), ImageSet(pixels, labels))
        np.testing.assert_array_equal(matrix, np.eye(3))

    def test_single_class_set_rejected(self):
        true = np.zeros(10, dtype=int)
        pred = np.zeros(10, dtype=int)
        with pytest.raises(ValueError, match="1"):
            confusion_from_labels(true, pred, num_classes=2)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(13)
        true = rng.integers(0, 4, 1000)
        pred = rng.integers(0, 4, 1000)
        matrix = confusion_from_labels(true, pred, 4)
        np.testing.assert_allclose(matrix.sum(axis=1), np.ones(4), atol=1e-12)

    def test_voter_recovers_own_matrix(self):
        voter = ConfusionVoter.symmetric(4, 0.8, rng_seed=14)
        per_class = 10_000
        true = np.repeat(np.arange(4), per_class)
        pred = np.array(
            [voter.sample(c, i) for c, i in zip(true, range(true.size))]
        )
        estimated = confusion_from_labels(true, pred, 4)
        assert np.max(np.abs(estimated - voter.matrix)) <= 0.01


class TestModelFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(15)
        model = SoftmaxModel(
            weights=rng.standard_normal((4, 588)),
            biases=rng.standard_normal(4),
            pooling=4,
            num_classes=4,
            validation_accuracy=0.81,
        )
        path = tmp_path / "model.bin"
        save_model(model, path)
        back = load_model(path)
        np.testing.assert_array_equal(back.weights, model.weights)
        np.testing.assert_array_equal(back.biases, model.biases)
        assert back.pooling == 4
        assert back.num_classes == 4
        assert back.validation_accuracy == 0.81

    def test_header_is_json_line(self, tmp_path):
        import json

        model = SoftmaxModel.zeros(num_classes=2, image_side=8, pooling=2)
        path = tmp_path / "model.bin"
        save_model(model, path)
        header = json.loads(path.read_bytes().split(b"\n", 1)[0])
        assert set(header) == {"num_classes", "pooling", "feature_dim", "validation_accuracy"}

    def test_truncated_payload_rejected(self, tmp_path):
        model = SoftmaxModel.zeros(num_classes=2, image_side=8, pooling=2)
        path = tmp_path / "model.bin"
        save_model(model, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="payload"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(tmp_path / "none.bin")
