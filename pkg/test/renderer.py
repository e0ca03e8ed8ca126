import os
import tempfile
from unittest import TestCase, skipUnless

import numpy as np
import torch

from gaitswap.errors import DataError
from gaitswap.gaitdata import WalkerSpec, synth_appearance, synth_walker
from gaitswap.renderer import (IdentityRenderer, NearestFrameRenderer,
                               ConvRenderer, train_renderer, render_sequence,
                               get_renderer)

SLOW = os.environ.get('GAITSWAP_SLOW_TESTS') == '1'


def footage(n_frames=10, canvas=32, seed=1):
    seq = synth_walker(WalkerSpec(gait_frequency=1.3, seed=seed), n_frames,
                       canvas, subject_id='s01')
    seq.rgb_frames = [synth_appearance(frame, seed) for frame in seq.frames]
    return seq


class TestIdentityRenderer(TestCase):
    def test(self):
        frame = footage(1).frames[0]
        image = IdentityRenderer().render(frame)
        self.assertEqual(image.shape, (32, 32, 3))
        np.testing.assert_allclose(image[..., 1], frame.u)
        np.testing.assert_allclose(image[..., 0],
                                   frame.part_index / 24.0, rtol=1e-6)


class TestNearestFrameRenderer(TestCase):
    def test_returns_footage(self):
        target = footage()
        renderer = NearestFrameRenderer(target)
        source = synth_walker(WalkerSpec(gait_frequency=0.8), 6, 32)
        for image in render_sequence(renderer, source).rgb_frames:
            self.assertTrue(any(np.array_equal(image, real)
                                for real in target.rgb_frames))

    def test_exact_frame(self):
        target = footage()
        renderer = NearestFrameRenderer(target)
        index = renderer.nearest_index(target.frames[3])
        self.assertTrue(np.array_equal(renderer.features[index],
                                       renderer.features[3]))

    def test_needs_rgb(self):
        seq = synth_walker(WalkerSpec(), 3, 32)
        with self.assertRaises(DataError):
            NearestFrameRenderer(seq)


class TestConvRenderer(TestCase):
    def test_untrained(self):
        torch.manual_seed(0)
        renderer = ConvRenderer(channels=4)
        images = renderer.render_frames(footage(3).frames)
        self.assertEqual(len(images), 3)
        self.assertEqual(images[0].shape, (32, 32, 3))
        self.assertTrue(np.all(np.isfinite(images[0])))

    def test_frame_size(self):
        frame = synth_walker(WalkerSpec(), 1, 18).frames[0]
        with self.assertRaises(ValueError):
            ConvRenderer(channels=4).render(frame)

    def test_train(self):
        renderer = train_renderer(footage(), steps=5, channels=4)
        self.assertEqual(set(renderer.report), {'train_l1', 'holdout_l1'})
        self.assertTrue(all(np.isfinite(value)
                            for value in renderer.report.values()))

    def test_needs_rgb(self):
        with self.assertRaises(DataError):
            train_renderer(synth_walker(WalkerSpec(), 4, 32), steps=1)

    def test_train_frame_size(self):
        with self.assertRaises(ValueError) as context:
            train_renderer(footage(4, canvas=18), steps=1, channels=4)
        self.assertIn('18x18', str(context.exception))

    def test_save_load(self):
        renderer = train_renderer(footage(), steps=2, channels=4)
        frame = footage(1).frames[0]
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'renderer.pt')
            renderer.save(path)
            loaded = get_renderer('conv', path=path)
            np.testing.assert_array_equal(loaded.render(frame),
                                          renderer.render(frame))
            self.assertEqual(loaded.report, renderer.report)

            other = os.path.join(directory, 'other.pt')
            torch.save({'kind': 'detector'}, other)
            with self.assertRaises(DataError):
                ConvRenderer.load(other)


class TestRenderSequence(TestCase):
    def test(self):
        seq = synth_walker(WalkerSpec(), 4, 32)
        rendered = render_sequence(IdentityRenderer(), seq)
        self.assertEqual(len(rendered.rgb_frames), 4)
        self.assertIs(rendered.frames[0], seq.frames[0])
        self.assertIsNone(seq.rgb_frames)


class TestGetRenderer(TestCase):
    def test(self):
        self.assertIsInstance(get_renderer('identity'), IdentityRenderer)
        self.assertIsInstance(get_renderer('nn', footage()),
                              NearestFrameRenderer)
        with self.assertRaises(ValueError):
            get_renderer('edn')
        with self.assertRaises(DataError):
            get_renderer('nn')
        with self.assertRaises(DataError):
            get_renderer('conv')


@skipUnless(SLOW, "set GAITSWAP_SLOW_TESTS=1 to run the renderer overfit")
class TestRendererOverfit(TestCase):
    def test(self):
        renderer = train_renderer(footage(8), steps=1500, holdout_every=0)
        self.assertLess(renderer.report['train_l1'], 0.02)
