"""
Test cases for cosine similarity, positive masks and the multi-positive loss.
"""
import math

import numpy as np
import pytest
import torch

from Cltci.contrastive.losses import (
    CandidateSet,
    LossConfig,
    Reduction,
    contrastive_loss,
    contrastive_loss_gradient,
    nt_xent_loss,
)
from Cltci.contrastive.masks import (
    PositiveMask,
    RepresentationBatch,
    build_positive_mask,
    repeat_views,
    view_pair_index,
)
from Cltci.contrastive.similarity import cosine_similarity_matrix, l2_normalize


def brute_force_loss(vectors, ids, temperature, reduction='mean'):
    """Scalar transcription of the loss for in-batch contrast with sibling positives."""
    count = len(ids)
    unit = [v / math.sqrt(sum(x * x for x in v)) for v in vectors]

    def sim(i, j):
        return sum(a * b for a, b in zip(unit[i], unit[j]))

    total = 0.0
    for i in range(count):
        others = [k for k in range(count) if k != i]
        positives = [j for j in others if ids[j] == ids[i] or j == i ^ 1]
        denominator = sum(math.exp(sim(i, k) / temperature) for k in others)
        total += -sum(
            math.log(math.exp(sim(i, j) / temperature) / denominator) for j in positives
        ) / len(positives)
    return total / count if reduction == 'mean' else total


def random_instance(rng):
    """Random interleaved two-view batch with random patient groupings."""
    images = int(rng.integers(1, 5))
    dim = int(rng.integers(2, 5))
    patients = [f'P{int(p)}' for p in rng.integers(0, max(1, images - 1), size=images)]
    ids = repeat_views(patients)
    vectors = rng.normal(size=(2 * images, dim))
    temperature = float(rng.choice([0.1, 0.5, 1.0]))
    return vectors, ids, temperature


def in_batch_mask(ids):
    return build_positive_mask(ids, sibling_map=view_pair_index(len(ids)))


class TestCosineSimilarity:
    """Test cases for the cosine similarity matrix."""

    def test_identical_vectors(self):
        """Test that identical rows have similarity 1."""
        a = torch.tensor([[3.0, 4.0]])

        assert cosine_similarity_matrix(a, a).item() == pytest.approx(1.0)

    def test_orthogonal_vectors(self):
        """Test that orthogonal rows have similarity 0."""
        result = cosine_similarity_matrix(torch.tensor([[1.0, 0.0]]), torch.tensor([[0.0, 2.0]]))

        assert result.item() == pytest.approx(0.0)

    def test_hand_computed_column(self):
        """Test A=I2 against B=[1,1]/sqrt2 gives a column of sqrt2/2."""
        a = torch.eye(2, dtype=torch.float64)
        b = torch.tensor([[1.0, 1.0]], dtype=torch.float64) / math.sqrt(2)

        result = cosine_similarity_matrix(a, b)

        assert result.shape == (2, 1)
        np.testing.assert_allclose(result.numpy().ravel(), [math.sqrt(2) / 2] * 2, atol=1e-12)

    def test_zero_row_named(self):
        """Test that a zero-norm row is an error naming the row."""
        with pytest.raises(ValueError, match='row 1'):
            l2_normalize(torch.tensor([[1.0, 0.0], [0.0, 0.0]]))

    def test_width_mismatch(self):
        """Test that matrices of different widths are rejected."""
        with pytest.raises(ValueError):
            cosine_similarity_matrix(torch.ones(2, 3), torch.ones(2, 4))


class TestPositiveMask:
    """Test cases for building positive sets."""

    def test_one_image_per_patient(self):
        """Test ids [A,A,B,B] give each anchor its sibling as the only positive."""
        mask = build_positive_mask(['A', 'A', 'B', 'B'])

        assert mask.positives_per_anchor == [1, 1, 1, 1]
        assert mask.mask[0].tolist() == [False, True, False, False]
        assert not mask.valid.diagonal().any()

    def test_two_images_per_patient(self):
        """Test ids [A]*4 + [B]*4 give every anchor 3 positives."""
        ids = ['A'] * 4 + ['B'] * 4

        mask = build_positive_mask(ids)

        assert mask.positives_per_anchor == [3] * 8
        assert mask.candidates_per_anchor == [7] * 8

    def test_queue_candidates_with_sibling(self):
        """Test candidates [sibling, A, B, A] for anchor A give 3 positives."""
        mask = build_positive_mask(['A'], ['S', 'A', 'B', 'A'], sibling_map={0: 0})

        assert mask.mask[0].tolist() == [True, True, False, True]

    def test_cold_start_single_sibling(self):
        """Test that a lone sibling key with the anchor's label stays a positive."""
        mask = build_positive_mask(['A'], ['A'], sibling_map={0: 0})

        assert mask.mask.tolist() == [[True]]
        assert mask.candidates_per_anchor == [1]

    def test_separate_keys_with_matching_labels(self):
        """Test that keys scored against queries keep the diagonal."""
        mask = build_positive_mask(['A', 'B'], ['A', 'B'], sibling_map=[0, 1])

        assert mask.valid.all()
        assert mask.mask.tolist() == [[True, False], [False, True]]

    def test_explicit_self_exclusion(self):
        """Test that exclude_self removes the diagonal from a separate candidate list."""
        mask = build_positive_mask(['A', 'A'], ['A', 'A'], exclude_self=True)

        assert mask.valid.tolist() == [[False, True], [True, False]]
        assert mask.positives_per_anchor == [1, 1]

    def test_siblings_only(self):
        """Test that without patient matching only siblings are positive."""
        ids = ['A'] * 4

        mask = build_positive_mask(ids, sibling_map=view_pair_index(4), match_patients=False)

        assert mask.positives_per_anchor == [1, 1, 1, 1]
        assert mask.mask[2].tolist() == [False, False, False, True]

    def test_anchor_without_positive(self):
        """Test that an anchor with no positives is an error naming its patient."""
        with pytest.raises(ValueError, match="patient 'C'"):
            build_positive_mask(['A', 'A', 'C'])

    def test_positive_must_be_valid(self):
        """Test that a positive outside the valid set is rejected."""
        with pytest.raises(ValueError):
            PositiveMask(torch.tensor([[True, True]]), torch.tensor([[True, False]]))

    def test_view_pair_index(self):
        """Test the interleaved sibling layout."""
        assert view_pair_index(6) == [1, 0, 3, 2, 5, 4]
        with pytest.raises(ValueError):
            view_pair_index(3)

    def test_representation_batch(self):
        """Test that batches carry one patient id per view and check unit norms."""
        vectors = torch.nn.functional.normalize(torch.randn(4, 3), dim=1)

        batch = RepresentationBatch.from_views(vectors, ['A', 'B'])

        assert batch.patient_ids == ('A', 'A', 'B', 'B')
        with pytest.raises(ValueError):
            RepresentationBatch.from_views(vectors * 2, ['A', 'B'])


class TestContrastiveLoss:
    """Test cases for the loss value and reductions."""

    def test_hand_computed_value(self):
        """Test the axis-aligned 2N=4, tau=1 instance equals log(1 + 2/e)."""
        z = torch.tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]], dtype=torch.float64)
        mask = build_positive_mask(['A', 'A', 'B', 'B'])

        total, per_anchor = contrastive_loss(z, mask, LossConfig(temperature=1.0))

        expected = math.log(1 + 2 / math.e)
        assert total.item() == pytest.approx(expected, abs=1e-6)
        np.testing.assert_allclose(per_anchor.numpy(), [expected] * 4, atol=1e-6)

    def test_identical_pair_is_zero(self):
        """Test that one image with two identical views has zero loss."""
        z = torch.tensor([[0.6, 0.8], [0.6, 0.8]], dtype=torch.float64)
        mask = build_positive_mask(['A', 'A'])

        total, _ = contrastive_loss(z, mask, LossConfig(temperature=0.1))

        assert total.item() == pytest.approx(0.0, abs=1e-12)

    def test_sum_reduction(self):
        """Test that the sum reduction is the mean times the anchor count."""
        z = torch.randn(6, 3, dtype=torch.float64)
        ids = repeat_views(['A', 'B', 'A'])
        mask = in_batch_mask(ids)

        mean, _ = contrastive_loss(z, mask, LossConfig(reduction=Reduction.MEAN))
        total, _ = contrastive_loss(z, mask, LossConfig(reduction=Reduction.SUM))

        assert total.item() == pytest.approx(6 * mean.item())

    def test_matches_brute_force(self):
        """Test the vectorized loss against the scalar transcription on 200 random instances."""
        rng = np.random.default_rng(0)

        for _ in range(200):
            vectors, ids, temperature = random_instance(rng)
            total, _ = contrastive_loss(
                torch.from_numpy(vectors), in_batch_mask(ids), LossConfig(temperature=temperature)
            )
            assert total.item() == pytest.approx(brute_force_loss(vectors.tolist(), ids, temperature), abs=1e-6)

    def test_permutation_equivariance(self):
        """Test that permuting views and ids permutes per-anchor losses and keeps the total."""
        rng = np.random.default_rng(4)

        for _ in range(20):
            vectors, ids, temperature = random_instance(rng)
            cfg = LossConfig(temperature=temperature)
            order = rng.permutation(len(ids))

            total, per_anchor = contrastive_loss(torch.from_numpy(vectors), build_positive_mask(ids), cfg)
            permuted_total, permuted = contrastive_loss(
                torch.from_numpy(vectors[order]), build_positive_mask([ids[i] for i in order]), cfg
            )

            assert permuted_total.item() == pytest.approx(total.item(), abs=1e-9)
            np.testing.assert_allclose(permuted.numpy(), per_anchor.numpy()[order], atol=1e-9)

    def test_finite_at_low_temperature(self):
        """Test that tau=0.01 gives a finite loss and gradient."""
        rng = np.random.default_rng(5)

        for _ in range(20):
            vectors, ids, _ = random_instance(rng)
            mask = in_batch_mask(ids)
            cfg = LossConfig(temperature=0.01)

            total, per_anchor = contrastive_loss(torch.from_numpy(vectors), mask, cfg)
            grad = contrastive_loss_gradient(torch.from_numpy(vectors), mask, cfg)

            assert math.isfinite(total.item())
            assert torch.isfinite(per_anchor).all()
            assert torch.isfinite(grad).all()

    def test_shape_mismatch(self):
        """Test that the mask must match the similarity matrix."""
        mask = build_positive_mask(['A', 'A'])

        with pytest.raises(ValueError):
            contrastive_loss(torch.randn(4, 3), mask)

    def test_non_positive_temperature(self):
        """Test that the temperature must be positive."""
        with pytest.raises(ValueError):
            LossConfig(temperature=0.0)

    def test_lower_temperature_at_the_optimum(self):
        """Test that with positives at 1 and negatives at -1 the loss falls as tau falls."""
        z = torch.tensor([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]], dtype=torch.float64)
        mask = build_positive_mask(['A', 'A', 'B', 'B'])

        losses = [contrastive_loss(z, mask, LossConfig(temperature=t))[0].item() for t in (1.0, 0.5, 0.1)]

        assert losses[0] > losses[1] > losses[2]
        assert losses[0] == pytest.approx(math.log(1 + 2 * math.exp(-2.0)))


class TestLossGradient:
    """Test cases for the analytic gradient."""

    @staticmethod
    def numeric_gradient(vectors, mask, cfg, h=1e-5):
        grad = np.zeros_like(vectors)
        for index in np.ndindex(vectors.shape):
            plus, minus = vectors.copy(), vectors.copy()
            plus[index] += h
            minus[index] -= h
            upper = contrastive_loss(torch.from_numpy(plus), mask, cfg)[0].item()
            lower = contrastive_loss(torch.from_numpy(minus), mask, cfg)[0].item()
            grad[index] = (upper - lower) / (2 * h)
        return grad

    def test_matches_finite_differences(self):
        """Test the gradient against central differences on 50 random instances."""
        rng = np.random.default_rng(1)

        for _ in range(50):
            vectors, ids, temperature = random_instance(rng)
            mask = in_batch_mask(ids)
            cfg = LossConfig(temperature=temperature)

            analytic = contrastive_loss_gradient(torch.from_numpy(vectors), mask, cfg).numpy()
            numeric = self.numeric_gradient(vectors, mask, cfg)

            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)

    def test_mean_gradient_is_sum_gradient_over_anchor_count(self):
        """Test that the mean-reduction gradient is the sum-reduction gradient divided by 2N."""
        rng = np.random.default_rng(6)

        for _ in range(20):
            vectors, ids, temperature = random_instance(rng)
            mask = in_batch_mask(ids)
            z = torch.from_numpy(vectors)

            mean = contrastive_loss_gradient(z, mask, LossConfig(temperature=temperature, reduction=Reduction.MEAN))
            total = contrastive_loss_gradient(z, mask, LossConfig(temperature=temperature, reduction=Reduction.SUM))

            np.testing.assert_allclose(mean.numpy(), total.numpy() / len(ids), rtol=1e-10, atol=1e-12)

    def test_zero_at_single_candidate_minimum(self):
        """Test that two identical views give an identically zero gradient."""
        z = torch.tensor([[1.0, 2.0], [1.0, 2.0]], dtype=torch.float64)
        mask = build_positive_mask(['A', 'A'])

        grad = contrastive_loss_gradient(z, mask)

        np.testing.assert_allclose(grad.numpy(), 0.0, atol=1e-12)

    def test_candidate_set_gradients(self):
        """Test that a CandidateSet yields gradients for anchors, siblings and queue."""
        anchors = torch.randn(2, 3, dtype=torch.float64)
        candidates = CandidateSet(torch.randn(2, 3, dtype=torch.float64), torch.randn(3, 3, dtype=torch.float64),
                                  ('A', 'B', 'A'))
        mask = build_positive_mask(['A', 'B'], ['S', 'A', 'B', 'A'], sibling_map={0: 0, 1: 0})

        anchor_grad, (sibling_grad, queue_grad) = contrastive_loss_gradient(anchors, mask, candidates=candidates)

        assert anchor_grad.shape == (2, 3)
        assert sibling_grad.shape == (2, 3)
        assert queue_grad.shape == (3, 3)


class TestSinglePositiveReduction:
    """Test cases for the single-positive special case."""

    def test_equals_nt_xent(self):
        """Test that sibling-only positives reproduce NT-Xent within 1e-9."""
        rng = np.random.default_rng(2)

        for images in (1, 2, 4, 8):
            z = torch.from_numpy(rng.normal(size=(2 * images, 5)))
            ids = repeat_views([f'P{i}' for i in range(images)])
            mask = build_positive_mask(ids, sibling_map=view_pair_index(len(ids)), match_patients=False)

            for temperature in (0.1, 0.5, 1.0):
                ours, _ = contrastive_loss(z, mask, LossConfig(temperature=temperature))
                reference = nt_xent_loss(z, temperature)
                assert abs(ours.item() - reference.item()) < 1e-9

    def test_candidate_set_first_column_is_sibling(self):
        """Test that CandidateSet similarities put the sibling in column 0."""
        anchors = torch.nn.functional.normalize(torch.randn(3, 4), dim=1)
        siblings = anchors.clone()
        queue = torch.nn.functional.normalize(torch.randn(5, 4), dim=1)

        similarity = CandidateSet(siblings, queue, tuple('ABCDE')).similarities(anchors)

        assert similarity.shape == (3, 6)
        np.testing.assert_allclose(similarity[:, 0].numpy(), 1.0, atol=1e-6)
