import os
import tempfile
from unittest import TestCase, mock

import numpy as np
import torch

from gaitswap.errors import ExtractorUnavailable, KeySetError
from gaitswap.gaitdata import GaitSequence, WalkerSpec, synth_walker
from gaitswap.keys import (KeyConfig, KeySet, FeatureExtractor,
                           MomentsExtractor, get_extractor, fit_reduction,
                           extract_features, refine_centroids,
                           cluster_features, select_keys,
                           build_keyset, build_keysets, save_keyset,
                           load_keyset)


class FixedExtractor(FeatureExtractor):
    """Returns a fixed raw feature matrix, whatever the sequence."""
    name = 'fixed'

    def __init__(self, raw):
        self.raw = np.asarray(raw, dtype=np.float64)
        self.output_dim = self.raw.shape[1]

    def extract(self, seq, batch_size=64):
        return self.raw


def walker(n_frames, seed=0, canvas=32):
    return synth_walker(WalkerSpec(seed=seed), n_frames, canvas,
                        subject_id='s%02d' % seed)


class TestKeyConfig(TestCase):
    def test(self):
        config = KeyConfig()
        self.assertEqual((config.m, config.d), (18, 100))
        with self.assertRaises(ValueError):
            KeyConfig(d=0)
        with self.assertRaises(ValueError):
            KeyConfig(extractor='sift')


class TestExtractors(TestCase):
    def test_moments_shape(self):
        seq = walker(3)
        features = MomentsExtractor().extract(seq)
        self.assertEqual(features.shape, (3, 64))
        self.assertTrue(np.all(np.isfinite(features)))

    def test_moments_gradient(self):
        batch = torch.rand(2, 4, 16, 16, dtype=torch.float64,
                           requires_grad=True)
        MomentsExtractor()(batch).sum().backward()
        self.assertTrue(torch.all(torch.isfinite(batch.grad)))

    def test_rgb_input(self):
        batch = torch.rand(2, 3, 16, 16)
        self.assertEqual(tuple(MomentsExtractor()(batch).shape), (2, 64))

    def test_deep_unavailable(self):
        with mock.patch.dict('sys.modules', {'torchvision.models': None}):
            with self.assertRaises(ExtractorUnavailable):
                get_extractor('deep')


class TestExtractFeatures(TestCase):
    def test_dimension(self):
        features = extract_features(walker(20), MomentsExtractor(), 100)
        self.assertEqual(features.shape, (20, 19))

    def test_identical_frames(self):
        frame = walker(1).frames[0]
        seq = GaitSequence('s00', 'v1', [frame] * 6)
        features = extract_features(seq, MomentsExtractor(), 3)
        self.assertLess(np.abs(features).max(), 1e-9)

    def test_variance_captured(self):
        rng = np.random.default_rng(4)
        raw = rng.normal(size=(5, 4)) * [3.0, 2.0, 1.0, 0.5]
        features = extract_features(walker(5), FixedExtractor(raw), 2)

        centered = raw - raw.mean(axis=0)
        eigenvalues = np.linalg.eigh(centered.T @ centered)[0]
        captured = (features ** 2).sum()
        self.assertLess(abs(captured - eigenvalues[-2:].sum()), 1e-8)
        for _ in range(20):
            basis = np.linalg.qr(rng.normal(size=(4, 2)))[0]
            self.assertLessEqual(((centered @ basis) ** 2).sum(),
                                 captured + 1e-8)

    def test_errors(self):
        with self.assertRaises(ValueError):
            extract_features(walker(4), MomentsExtractor(), 0)
        with self.assertRaises(ValueError):
            extract_features(walker(1), MomentsExtractor(), 4)

    def test_sign_convention(self):
        raw = np.random.default_rng(0).normal(size=(8, 3))
        pca = fit_reduction(raw, 2)
        for component in pca.components_:
            self.assertGreater(component[np.argmax(np.abs(component))], 0)


class TestClusterFeatures(TestCase):
    def test_two_clusters(self):
        points = np.array([[0.0], [0.1], [0.2], [9.9], [10.0], [10.1]])
        centroids = cluster_features(points, 2, seed=0)
        np.testing.assert_allclose(centroids[:, 0], [0.1, 10.0], atol=1e-9)

    def test_one_point_per_cluster(self):
        points = np.array([[3.0, 1.0], [0.0, 2.0], [1.0, 5.0]])
        centroids = cluster_features(points, 3, seed=1)
        np.testing.assert_allclose(centroids,
                                   points[np.lexsort(points.T[::-1])])

    def test_too_few_points(self):
        with self.assertRaises(ValueError):
            cluster_features(np.zeros((2, 3)), 3)


class TestRefineCentroids(TestCase):
    def setUp(self):
        self.points = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
        self.initial = np.array([[0.0], [1.0]])

    def test_converges(self):
        centroids, inertia, iterations = refine_centroids(self.points,
                                                          self.initial)
        np.testing.assert_allclose(np.sort(centroids[:, 0]), [1.0, 11.0])
        self.assertAlmostEqual(inertia, 4.0)
        self.assertEqual(iterations, 3)

    def test_relative_inertia_stop(self):
        _, inertia, iterations = refine_centroids(self.points, self.initial,
                                                  tol=1.0)
        self.assertEqual(iterations, 2)
        self.assertAlmostEqual(inertia, 4.0)

    def test_iteration_limit(self):
        _, inertia, iterations = refine_centroids(self.points, self.initial,
                                                  max_iter=1)
        self.assertEqual(iterations, 1)
        self.assertGreater(inertia, 4.0)


class TestSelectKeys(TestCase):
    def test_exact_centroids(self):
        seq = walker(5)
        features = np.arange(10, dtype=np.float64).reshape(5, 2)
        keyset = select_keys(seq, features, features[[3, 1]])
        self.assertEqual(keyset.key_indices, [3, 1])
        self.assertIs(keyset.keys[0], seq.frames[3])

    def test_tie(self):
        seq = walker(3)
        keyset = select_keys(seq, [[0.0], [0.1], [10.0]], [[0.05]])
        self.assertEqual(keyset.key_indices, [0])

    def test_brute_force(self):
        rng = np.random.default_rng(7)
        seq = walker(20)
        features = rng.normal(size=(20, 3))
        centroids = rng.normal(size=(4, 3))
        keyset = select_keys(seq, features, centroids)
        for centroid, index in zip(centroids, keyset.key_indices):
            distances = [np.sqrt(((feature - centroid) ** 2).sum())
                         for feature in features]
            self.assertEqual(index, int(np.argmin(distances)))

    def test_misaligned_features(self):
        with self.assertRaises(ValueError):
            select_keys(walker(3), np.zeros((4, 2)), np.zeros((1, 2)))


class TestKeySet(TestCase):
    def test_validation(self):
        frame = walker(1).frames[0]
        with self.assertRaises(KeySetError):
            KeySet('s00', [], [], np.zeros((0, 2)))
        with self.assertRaises(KeySetError):
            KeySet('s00', [frame], [0, 1], np.zeros((1, 2)))

    def test_build(self):
        keyset = build_keyset(walker(30), KeyConfig(m=4, d=8))
        self.assertEqual(len(keyset), 4)
        self.assertEqual(keyset.to_array().shape, (4, 4, 32, 32))
        self.assertTrue(all(0 <= index < 30
                            for index in keyset.key_indices))

    def test_deterministic(self):
        config = KeyConfig(m=3, d=5, seed=2)
        first = build_keyset(walker(20), config)
        second = build_keyset(walker(20), config)
        self.assertEqual(first.key_indices, second.key_indices)

    def test_build_per_subject(self):
        keysets = build_keysets([walker(12, seed=0), walker(12, seed=1)],
                                KeyConfig(m=2, d=4))
        self.assertEqual(sorted(keysets), ['s00', 's01'])
        self.assertEqual(keysets['s01'].subject_id, 's01')

    def test_save_load(self):
        keyset = build_keyset(walker(10), KeyConfig(m=3, d=4))
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 's00')
            save_keyset(keyset, path)
            loaded = load_keyset(path)
            with self.assertRaises(KeySetError):
                load_keyset(directory)
        self.assertEqual(loaded.key_indices, keyset.key_indices)
        np.testing.assert_allclose(loaded.centroids, keyset.centroids)
        for a, b in zip(keyset.keys, loaded.keys):
            self.assertTrue(a.equals(b, atol=1e-4))
