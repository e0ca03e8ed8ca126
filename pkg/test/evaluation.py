import json
import os
import tempfile
from unittest import TestCase

import numpy as np

from gaitswap.errors import DataError, ExtractorUnavailable
from gaitswap.gaitdata import (GaitSequence, IUVAFrame, WalkerSpec,
                               subject_walker_specs, synth_appearance,
                               synth_walker)
from gaitswap.evaluation import (EvalConfig, GaitEmbedder,
                                 BaselineGaitEmbedder, ExternalGaitEmbedder,
                                 get_gait_embedder, gait_distance,
                                 split_clips, DistanceMatrix,
                                 clip_distance_matrix, rank_by_votes,
                                 identify_subject, target_accuracy, ssim,
                                 l2_distance, perceptual_distance,
                                 chamfer_quality, frechet_distance, fid,
                                 inception_score, CentroidClassifier,
                                 mask_iou_matrix, retargeting_iou,
                                 write_distance_matrix, read_distance_matrix,
                                 evaluate_generation)


class MeanFrameEmbedder(GaitEmbedder):
    """Embeds a sequence as its mean IUVA frame."""
    name = 'mean_frame'

    def embed(self, seq):
        return seq.to_array().mean(axis=0).ravel().astype(np.float64)


class FixedEmbedder(GaitEmbedder):
    """Returns the same vector for every sequence."""
    name = 'fixed'

    def __init__(self, vectors):
        self.vectors = list(vectors)

    def embed(self, seq):
        return np.asarray(self.vectors.pop(0), dtype=np.float64)


def mask_frame(mask):
    alpha = np.asarray(mask, dtype=np.float32)
    return IUVAFrame(alpha.astype(np.uint8), np.zeros_like(alpha),
                     np.zeros_like(alpha), alpha)


def subjects(n_subjects=4, n_frames=40, canvas=32, view='v1'):
    specs = subject_walker_specs(n_subjects, views=(view,))
    sequences = []
    for subject_id, view_specs in specs.items():
        spec = view_specs[view]
        seq = synth_walker(spec, n_frames, canvas, subject_id=subject_id,
                           view=view)
        seq.rgb_frames = [synth_appearance(frame, spec.seed)
                          for frame in seq.frames]
        sequences.append(seq)
    return sequences


class TestEvalConfig(TestCase):
    def test(self):
        self.assertEqual(EvalConfig().clip_len, 40)
        with self.assertRaises(ValueError):
            EvalConfig(embedder='gaitset')
        with self.assertRaises(ValueError):
            EvalConfig(n_fft_bins=40, fft_length=64)


class TestGaitEmbedders(TestCase):
    def test_gait_distance(self):
        embedder = FixedEmbedder([(0.0, 3.0), (4.0, 0.0)])
        seq = subjects(1, 4)[0]
        self.assertEqual(gait_distance(embedder, seq, seq), 5.0)
        self.assertEqual(gait_distance(MeanFrameEmbedder(), seq, seq), 0.0)

    def test_baseline_deterministic(self):
        seq = subjects(1, 20)[0]
        embedder = BaselineGaitEmbedder()
        first, second = embedder.embed(seq), embedder.embed(seq)
        np.testing.assert_array_equal(first, second)
        self.assertEqual(first.shape, (embedder.output_dim,))
        self.assertLess(abs(np.linalg.norm(first) - 1.0), 1e-12)

    def test_baseline_blank(self):
        frame = mask_frame(np.zeros((16, 16)))
        embedding = BaselineGaitEmbedder().embed(
            GaitSequence('s00', 'v1', [frame] * 10))
        self.assertEqual(float(np.abs(embedding[-8:]).sum()), 0.0)

    def test_baseline_separates_subjects(self):
        specs = subject_walker_specs(2, views=('v1', 'v2'))
        sequences = {(sid, view): synth_walker(spec, 128, 64)
                     for sid, views in specs.items()
                     for view, spec in views.items()}
        embedder = BaselineGaitEmbedder()
        intra = gait_distance(embedder, sequences['s00', 'v1'],
                              sequences['s00', 'v2'])
        inter = gait_distance(embedder, sequences['s00', 'v1'],
                              sequences['s01', 'v1'])
        self.assertGreater(inter, intra)

    def test_factory(self):
        self.assertIsInstance(get_gait_embedder('baseline'),
                              BaselineGaitEmbedder)
        with self.assertRaises(ValueError):
            get_gait_embedder('gaitgl')
        with self.assertRaises(ExtractorUnavailable):
            get_gait_embedder('external:/nonexistent/model.pt')
        with self.assertRaises(ExtractorUnavailable):
            ExternalGaitEmbedder('/nonexistent/model.pt')


class TestClips(TestCase):
    def test_split(self):
        seq = subjects(1, 100)[0]
        clips = split_clips(seq, 40)
        self.assertEqual(len(clips), 4)
        self.assertIs(clips[1].frames[0], seq.frames[20])
        with self.assertRaises(ValueError):
            split_clips(seq, 101)

    def test_distance_matrix_validation(self):
        with self.assertRaises(ValueError):
            DistanceMatrix([[1.0, 2.0]], ['clip000'], ['a'])
        with self.assertRaises(ValueError):
            DistanceMatrix([[-1.0]], ['clip000'], ['a'])

    def test_csv(self):
        matrix = DistanceMatrix([[0.5, 1.25], [2.0, 0.0]],
                                ['clip000', 'clip001'], ['s00/v1', 's01/v1'])
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'matrix.csv')
            write_distance_matrix(matrix, path)
            with open(path) as handle:
                header = handle.readline().strip()
            loaded = read_distance_matrix(path)
        self.assertEqual(header, 'clip,s00/v1,s01/v1')
        np.testing.assert_array_equal(loaded.values, matrix.values)
        self.assertEqual(loaded.row_labels, matrix.row_labels)


class TestVoting(TestCase):
    def test_constructed_table(self):
        # column 1 is among the 3 closest in 5 of 6 rows
        distances = np.array([[0.1, 0.2, 0.3, 0.9],
                              [0.2, 0.1, 0.9, 0.3],
                              [0.9, 0.1, 0.2, 0.3],
                              [0.3, 0.2, 0.1, 0.9],
                              [0.1, 0.9, 0.2, 0.3],
                              [0.9, 0.3, 0.8, 0.1]])
        winner, counts = rank_by_votes(distances, 3)
        self.assertEqual(counts.tolist(), [4, 5, 5, 4])
        self.assertEqual(winner, 1)

    def test_tie(self):
        distances = np.array([[0.1, 0.2], [0.2, 0.1]])
        self.assertEqual(rank_by_votes(distances, 1)[0], 0)

    def test_mean_breaks_vote_tie(self):
        distances = np.array([[0.3, 0.2], [0.1, 0.6]])
        self.assertEqual(rank_by_votes(distances, 1)[0], 0)


class TestIdentification(TestCase):
    def setUp(self):
        self.refs = subjects()
        self.embedder = MeanFrameEmbedder()

    def test_single_reference(self):
        gen = self.refs[2]
        subject_id, _ = identify_subject(self.embedder, self.refs[:1], gen,
                                         20)
        self.assertEqual(subject_id, 's00')

    def test_exact_copy(self):
        subject_id, distance = identify_subject(self.embedder, self.refs,
                                                self.refs[1], 40)
        self.assertEqual((subject_id, distance), ('s01', 0.0))

    def test_reference_order(self):
        gen = synth_walker(WalkerSpec(gait_frequency=1.05), 60, 32)
        forward = identify_subject(self.embedder, self.refs, gen, 40)
        backward = identify_subject(self.embedder, self.refs[::-1], gen, 40)
        self.assertEqual(forward, backward)

    def test_empty_refs(self):
        with self.assertRaises(ValueError):
            identify_subject(self.embedder, [], self.refs[0], 40)

    def test_target_accuracy(self):
        target = self.refs[0]
        other = self.refs[1]
        self.assertEqual(target_accuracy(self.embedder, self.refs,
                                         [target, target], 's00', 40),
                         100.0)
        self.assertEqual(target_accuracy(self.embedder, self.refs, [other],
                                         's00', 40), 0.0)
        self.assertEqual(target_accuracy(self.embedder, self.refs,
                                         [target, other, target, target],
                                         's00', 40), 75.0)

    def test_distance_matrix(self):
        gen = subjects(1, 80)[0]
        matrix = clip_distance_matrix(self.embedder, self.refs, gen, 40)
        self.assertEqual(matrix.values.shape, (3, 4))
        self.assertEqual(matrix.col_labels[0], 's00/v1')


class TestImageMetrics(TestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.images = [rng.random((16, 16, 3)) for _ in range(5)]

    def test_ssim(self):
        image = self.images[0]
        self.assertLess(abs(ssim(image, image) - 1.0), 1e-12)
        binary = np.zeros((16, 16))
        binary[:, 8:] = 1.0
        binary[4:12, 2:6] = 1.0
        self.assertLess(ssim(binary, 1.0 - binary), 0.0)
        with self.assertRaises(ValueError):
            ssim(binary, image)

    def test_chamfer_subset(self):
        value = chamfer_quality(ssim, self.images[:2], self.images,
                                'similarity')
        self.assertLess(abs(value - 1.0), 1e-12)

    def test_chamfer_single(self):
        a, b = self.images[:2]
        self.assertEqual(chamfer_quality(l2_distance, [a], [b]),
                         l2_distance(a, b))

    def test_chamfer_oracle(self):
        generated, reference = self.images[:3], self.images[:5][::-1]
        generated = [image * 0.5 for image in generated]
        expected = 0.0
        for frame in generated:
            best = None
            for ref in reference:
                value = l2_distance(frame, ref)
                if best is None or value < best:
                    best = value
            expected += best / len(generated)
        value = chamfer_quality(l2_distance, generated, reference)
        self.assertLess(abs(value - expected), 1e-12)
        more = chamfer_quality(l2_distance, generated,
                               reference + [generated[0]])
        self.assertLessEqual(more, value)

    def test_chamfer_errors(self):
        with self.assertRaises(ValueError):
            chamfer_quality(l2_distance, [], self.images)
        with self.assertRaises(ValueError):
            chamfer_quality(l2_distance, self.images, self.images, 'cosine')

    def test_perceptual_distance(self):
        image = self.images[0]
        self.assertLess(perceptual_distance(image, image), 1e-9)
        self.assertGreater(perceptual_distance(image, self.images[1]), 0.0)


class TestDistributionMetrics(TestCase):
    def test_fid_identical(self):
        embeddings = np.random.default_rng(1).normal(size=(30, 4))
        self.assertLess(frechet_distance(embeddings, embeddings), 1e-6)

    def test_fid_shifted_gaussian(self):
        samples = np.random.default_rng(2).normal(size=200)
        samples = (samples - samples.mean()) / samples.std(ddof=1)
        self.assertLess(abs(frechet_distance(samples, samples + 1.0) - 1.0),
                        1e-9)

    def test_fid_symmetric(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(40, 3))
        b = rng.normal(size=(30, 3)) * 2.0 + 0.5
        self.assertLess(abs(frechet_distance(a, b) - frechet_distance(b, a)),
                        1e-6)

    def test_fid_needs_two(self):
        def embed(images):
            return np.asarray(images, dtype=np.float64).reshape(len(images),
                                                                -1)

        with self.assertRaises(ValueError):
            fid(embed, [np.zeros(2)], [np.zeros(2), np.ones(2)])
        self.assertLess(fid(embed, [np.zeros(2), np.ones(2)],
                            [np.zeros(2), np.ones(2)]), 1e-6)

    def test_inception_uniform(self):
        def uniform(images):
            return np.full((len(images), 10), 0.1)

        self.assertLess(abs(inception_score(uniform, [0, 1, 2]) - 1.0),
                        1e-12)

    def test_inception_confident(self):
        def one_hot(images):
            return np.eye(4)[np.arange(len(images)) % 4]

        self.assertLess(abs(inception_score(one_hot, list(range(8))) - 4.0),
                        1e-9)

    def test_centroid_classifier(self):
        images = [synth_appearance(frame, 0) for frame in
                  synth_walker(WalkerSpec(), 20, 32).frames]
        classifier = CentroidClassifier.fit(images, n_classes=4)
        probabilities = classifier(images)
        self.assertEqual(probabilities.shape, (20, 4))
        np.testing.assert_allclose(probabilities.sum(axis=1), 1.0)
        self.assertGreater(inception_score(classifier, images), 1.0 - 1e-9)


class TestRetargetingIoU(TestCase):
    def test_masks(self):
        iou = mask_iou_matrix(np.array([[[1, 1], [0, 0]]]),
                              np.array([[[1, 0], [1, 0]]]))
        self.assertLess(abs(iou[0, 0] - 1.0 / 3.0), 1e-12)
        self.assertEqual(mask_iou_matrix(np.zeros((1, 2, 2)),
                                         np.zeros((1, 2, 2)))[0, 0], 0.0)

    def test_sequences(self):
        seq_a = GaitSequence('a', 'v1', [mask_frame([[1, 1], [0, 0]])])
        seq_b = GaitSequence('b', 'v1', [mask_frame([[1, 0], [1, 0]])])
        self.assertEqual(retargeting_iou(seq_a, seq_a), 1.0)
        self.assertLess(abs(retargeting_iou(seq_a, seq_b) - 1.0 / 3.0),
                        1e-12)

    def test_oracle(self):
        rng = np.random.default_rng(5)
        masks_a = rng.integers(0, 2, (3, 6, 6))
        masks_b = rng.integers(0, 2, (4, 6, 6))
        expected = []
        for a in masks_a:
            for b in masks_b:
                union = np.logical_or(a, b).sum()
                expected.append(np.logical_and(a, b).sum() / union
                                if union else 0.0)
        np.testing.assert_allclose(mask_iou_matrix(masks_a, masks_b).ravel(),
                                   expected)

    def test_symmetric(self):
        seq_a, seq_b = subjects(2, 6)
        self.assertLess(abs(retargeting_iou(seq_a, seq_b) -
                            retargeting_iou(seq_b, seq_a)), 1e-12)


class TestEvaluateGeneration(TestCase):
    def test_report(self):
        refs = subjects(3, 48)
        generated = [refs[0].with_frames(refs[0].frames,
                                         refs[0].rgb_frames,
                                         subject_id='s01_to_s00')]
        report = evaluate_generation(generated, refs, 's00',
                                     EvalConfig(clip_len=48, is_classes=4),
                                     sources=[refs[1]],
                                     provenance={'config_hash': 'abc'})
        self.assertEqual(report.target_accuracy, {'baseline': 100.0})
        self.assertEqual(report.iou_target, retargeting_iou(generated[0],
                                                            refs[0]))
        self.assertIsNotNone(report.iou_source)
        self.assertLess(abs(report.chamfer['SSIM [CD]'] - 1.0), 1e-9)
        self.assertLess(report.chamfer['Perceptual [CD]'], 1e-9)
        self.assertLess(report.fid, 1e-3)
        self.assertGreater(report.inception_score, 1.0 - 1e-9)
        self.assertEqual(list(report.distance_matrices), ['s01_to_s00/v1'])
        content = json.loads(json.dumps(report.to_dict()))
        self.assertEqual(content['provenance'], {'config_hash': 'abc'})

    def test_iou_over_target_views(self):
        refs = subjects(2, 12) + subjects(1, 12, view='v2')
        generated = [refs[1].with_frames(refs[1].frames)]
        report = evaluate_generation(generated, refs, 's00',
                                     EvalConfig(clip_len=12))
        expected = (retargeting_iou(generated[0], refs[0]) +
                    retargeting_iou(generated[0], refs[2])) / 2.0
        self.assertLess(abs(report.iou_target - expected), 1e-12)

    def test_without_rgb(self):
        refs = subjects(2, 24)
        generated = [refs[1].with_frames(refs[1].frames)]
        report = evaluate_generation(generated, refs, 's00',
                                     EvalConfig(clip_len=12))
        self.assertEqual(report.target_accuracy, {'baseline': 0.0})
        self.assertEqual(report.chamfer, {})
        self.assertIsNone(report.fid)

    def test_missing_target(self):
        refs = subjects(2, 24)
        with self.assertRaises(DataError):
            evaluate_generation(refs[:1], refs, 's09',
                                EvalConfig(clip_len=12))
