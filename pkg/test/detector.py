import os
import tempfile
import warnings
from unittest import TestCase, mock, skipUnless

import numpy as np
import torch

from gaitswap.errors import DataError
from gaitswap.gaitdata import GaitSequence, WalkerSpec, synth_walker
from gaitswap.detector import (REAL, GENERATED, DetectorConfig,
                               DetectorDataset, DetectorParams,
                               SmallDetectorNet, depicted_subject,
                               split_subjects,
                               build_detector_dataset_from_sequences,
                               predict_frames, train_detector, vote, detect,
                               evaluate_detector, save_detector,
                               load_detector)

SLOW = os.environ.get('GAITSWAP_SLOW_TESTS') == '1'


def video(subject_id, level, n_frames=8, size=16, seed=0, noise=0.0):
    frames = synth_walker(WalkerSpec(), n_frames, size).frames
    rng = np.random.default_rng(seed)
    images = [np.clip(np.full((size, size, 3), level) +
                      noise * rng.normal(size=(size, size, 3)), 0, 1)
              .astype(np.float32) for _ in range(n_frames)]
    return GaitSequence(subject_id, 'v1', frames, rgb_frames=images)


def bright_dark_dataset(n_subjects=4, n_frames=8, noise=0.0):
    real = [video('s%02d' % index, 0.9, n_frames, seed=index, noise=noise)
            for index in range(n_subjects)]
    generated = [video('s%02d_to_s%02d' % ((index + 1) % n_subjects, index),
                       0.1, n_frames, seed=100 + index, noise=noise)
                 for index in range(n_subjects)]
    return build_detector_dataset_from_sequences(real, generated)


def brightness_classifier(params, images, batch_size=64):
    return np.array([float(image.mean() > 0.5) for image in images])


def params_of(**settings):
    torch.manual_seed(0)
    return DetectorParams(SmallDetectorNet(), DetectorConfig(**settings))


class TestDetectorConfig(TestCase):
    def test(self):
        self.assertEqual(DetectorConfig().threshold, 0.5)
        with self.assertRaises(ValueError):
            DetectorConfig(threshold=1.0)
        with self.assertRaises(ValueError):
            DetectorConfig(backbone='vit')
        with self.assertRaises(ValueError):
            DetectorConfig(validation_fraction=1.0)


class TestSplit(TestCase):
    def test_sizes(self):
        subjects = ['s%02d' % index for index in range(8)]
        train, test = split_subjects(subjects, split_seed=3)
        self.assertEqual((len(train), len(test)), (6, 2))
        self.assertEqual(set(train) | set(test), set(subjects))
        self.assertFalse(set(train) & set(test))

    def test_deterministic(self):
        subjects = ['s%02d' % index for index in range(10)]
        self.assertEqual(split_subjects(subjects, 5),
                         split_subjects(subjects[::-1], 5))

    def test_small(self):
        self.assertEqual([len(part) for part in
                          split_subjects(['a', 'b'])], [1, 1])
        self.assertEqual(split_subjects(['a']), (['a'], []))

    def test_depicted_subject(self):
        self.assertEqual(depicted_subject('s00_to_s01'), 's01')
        self.assertEqual(depicted_subject('s03'), 's03')


class TestDataset(TestCase):
    def test_build(self):
        ds = bright_dark_dataset(n_subjects=8)
        self.assertEqual(len(ds.train_subjects), 6)
        self.assertEqual(len(ds.test_subjects), 2)
        for name in ('train', 'test'):
            labels = [sample.label for sample in ds.split(name)]
            self.assertEqual(labels.count(REAL), labels.count(GENERATED))

    def test_generated_counts_for_depicted_subject(self):
        ds = bright_dark_dataset()
        sample = next(s for s in ds.samples if s.label == GENERATED)
        self.assertEqual(sample.video_id.split(':')[1].split('_to_')[1],
                         sample.subject_id + '/v1')

    def test_missing_class(self):
        real = [video('s00', 0.9), video('s01', 0.9)]
        generated = [video('s01_to_s00', 0.1)]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ds = build_detector_dataset_from_sequences(real, generated)
        self.assertTrue(any('s01' in str(item.message) for item in caught))
        self.assertEqual(ds.train_subjects + ds.test_subjects, ['s00'])

    def test_balance(self):
        real = [video('s00', 0.9, n_frames=12)]
        generated = [video('s01_to_s00', 0.1, n_frames=5)]
        ds = build_detector_dataset_from_sequences(real, generated)
        labels = [sample.label for sample in ds.samples]
        self.assertEqual((labels.count(REAL), labels.count(GENERATED)),
                         (5, 5))

    def test_errors(self):
        with self.assertRaises(DataError):
            build_detector_dataset_from_sequences([video('s00', 0.9)], [])
        with self.assertRaises(DataError):
            DetectorDataset([], ['s00'], ['s00'])


class TestVote(TestCase):
    def test_majority(self):
        label, confidence = vote([0.9, 0.9, 0.9])
        self.assertEqual(label, 'real')
        self.assertLess(abs(confidence - 0.9), 1e-12)
        label, confidence = vote([0.1, 0.1, 0.2])
        self.assertEqual(label, 'generated')
        self.assertLess(abs(confidence - 13.0 / 15.0), 1e-12)

    def test_tie(self):
        label, confidence = vote([0.9, 0.1])
        self.assertEqual(label, 'generated')
        self.assertLess(abs(confidence - 0.5), 1e-12)

    def test_threshold(self):
        self.assertEqual(vote([0.6, 0.6, 0.6], threshold=0.7)[0],
                         'generated')
        with self.assertRaises(ValueError):
            vote([])


class TestDetect(TestCase):
    def test(self):
        with mock.patch('gaitswap.detector.predict_frames',
                        return_value=np.full(5, 0.1)):
            label, confidence = detect(params_of(), video('s00', 0.5))
        self.assertEqual(label, 'generated')
        self.assertLess(abs(confidence - 0.9), 1e-12)

    def test_needs_rgb(self):
        seq = synth_walker(WalkerSpec(), 3, 16)
        with self.assertRaises(DataError):
            detect(params_of(), seq)

    def test_predict_frames(self):
        probabilities = predict_frames(params_of(),
                                       video('s00', 0.5).rgb_frames)
        self.assertEqual(probabilities.shape, (8,))
        self.assertTrue(np.all((probabilities > 0) & (probabilities < 1)))


class TestEvaluateDetector(TestCase):
    def test_perfect(self):
        ds = bright_dark_dataset()
        with mock.patch('gaitswap.detector.predict_frames',
                        side_effect=brightness_classifier):
            scores = evaluate_detector(params_of(), ds)
        self.assertEqual(scores.frame_accuracy, 100.0)
        self.assertEqual(scores.video_accuracy, 100.0)
        self.assertEqual(scores.n_videos, 2)

    def test_constant(self):
        ds = bright_dark_dataset()
        with mock.patch('gaitswap.detector.predict_frames',
                        side_effect=lambda params, images: np.ones(
                            len(images))):
            scores = evaluate_detector(params_of(), ds)
        self.assertEqual(scores.frame_accuracy, 50.0)
        self.assertEqual(scores.video_accuracy, 50.0)

    def test_short_videos(self):
        ds = bright_dark_dataset(n_frames=4)
        with mock.patch('gaitswap.detector.predict_frames',
                        side_effect=brightness_classifier):
            scores = evaluate_detector(params_of(), ds)
        self.assertEqual(scores.n_videos, 0)
        self.assertTrue(np.isnan(scores.video_accuracy))
        self.assertEqual(scores.frame_accuracy, 100.0)


class TestTrainDetector(TestCase):
    def test_frozen_backbone(self):
        ds = bright_dark_dataset()
        config = DetectorConfig(epochs=1, batch_size=4,
                                freeze_backbone=True, seed=2)
        params = train_detector(ds, config)
        torch.manual_seed(2)
        initial = SmallDetectorNet()
        for name, value in initial.backbone.state_dict().items():
            self.assertTrue(torch.equal(
                value, params.network.backbone.state_dict()[name]), name)
        self.assertFalse(torch.equal(initial.head.weight,
                                     params.network.head.weight))
        self.assertEqual(len(params.history), 1)

    def test_early_stop(self):
        ds = bright_dark_dataset()
        config = DetectorConfig(epochs=6, batch_size=4, patience=1)
        with mock.patch('gaitswap.detector._accuracy', return_value=0.5):
            params = train_detector(ds, config)
        self.assertEqual(len(params.history), 2)

    def test_save_load(self):
        ds = bright_dark_dataset()
        params = train_detector(ds, DetectorConfig(epochs=1, batch_size=4))
        images = ds.split('test')[0:3]
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'detector.pt')
            save_detector(params, path)
            loaded = load_detector(path)
        images = [sample.image for sample in images]
        np.testing.assert_allclose(predict_frames(loaded, images),
                                   predict_frames(params, images))
        self.assertEqual(loaded.history, params.history)

    def test_empty(self):
        with self.assertRaises(DataError):
            train_detector(DetectorDataset([], [], []))


@skipUnless(SLOW, "set GAITSWAP_SLOW_TESTS=1 to train on separable videos")
class TestSeparableVideos(TestCase):
    def test(self):
        ds = bright_dark_dataset(n_subjects=8, n_frames=16, noise=0.05)
        params = train_detector(ds, DetectorConfig(epochs=10, batch_size=8))
        scores = evaluate_detector(params, ds)
        self.assertGreaterEqual(scores.frame_accuracy, 95.0)
