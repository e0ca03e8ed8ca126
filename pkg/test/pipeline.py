import io
import os
import tempfile
from unittest import TestCase, mock

import numpy as np

from gaitswap.gaitdata import (WalkerSpec, load_dataset, save_sequence,
                               synth_appearance, synth_walker)
from gaitswap.evaluation import DistanceMatrix
from gaitswap.keys import KeySet
from gaitswap.model import AttentionRecord, ModelConfig
from gaitswap.training import TrainConfig, save_checkpoint, train
from gaitswap.pipeline import (GaitTransfer, write_generated,
                               plot_attention_traces, plot_distance_matrix)
from gaitswap import cli


def walkers(n_frames=10, canvas=32):
    return [synth_walker(WalkerSpec(gait_frequency=frequency, seed=index),
                         n_frames, canvas, subject_id='s%02d' % index)
            for index, frequency in enumerate((0.8, 1.2))]


def tiny_checkpoint(path):
    sequences = walkers()
    keysets = {seq.subject_id: KeySet(seq.subject_id, seq.frames[:3],
                                      [0, 1, 2], np.zeros((3, 2)))
               for seq in sequences}
    model = ModelConfig(canvas=32, token_dim=8, n_heads=2,
                        n_blocks_encoder=1, n_blocks_decoder=1,
                        base_channels=2, feature_channels=4, disc_channels=2)
    checkpoint = train(sequences, 's00', keysets,
                       TrainConfig(epochs=1, warmup_epochs=0,
                                   steps_per_epoch=1, checkpoint_every=0),
                       model)
    save_checkpoint(checkpoint, path)
    return checkpoint


class TestGaitTransfer(TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, 'final.pt')
        tiny_checkpoint(self.path)

    def tearDown(self):
        self.directory.cleanup()

    def test_translate(self):
        transfer = GaitTransfer.from_checkpoint(self.path)
        self.assertEqual(transfer.target_id, 's00')
        source = synth_walker(WalkerSpec(seed=1), 8, 32, subject_id='s01')
        generated, records = transfer.translate(source)
        self.assertEqual(len(generated), 6)
        self.assertEqual(generated.subject_id, 's01_to_s00')
        trace = GaitTransfer.attention_trace(records, 2)
        self.assertEqual(trace.shape, (6,))
        self.assertTrue(np.all((trace >= 0) & (trace <= 1)))

    def test_render(self):
        transfer = GaitTransfer.from_checkpoint(self.path)
        source = synth_walker(WalkerSpec(seed=1), 5, 32, subject_id='s01')
        generated, _ = transfer.translate(source)
        rendered = transfer.render(generated)
        self.assertEqual(len(rendered.rgb_frames), 3)

        footage = synth_walker(WalkerSpec(), 4, 32, subject_id='s00')
        footage.rgb_frames = [synth_appearance(frame, 0)
                              for frame in footage.frames]
        rendered = transfer.render(generated, 'nn', footage=footage)
        self.assertTrue(any(np.array_equal(rendered.rgb_frames[0], image)
                            for image in footage.rgb_frames))

    def test_generate_command(self):
        root = self.directory.name
        source_dir = os.path.join(root, 'source')
        save_sequence(synth_walker(WalkerSpec(seed=1), 6, 32,
                                   subject_id='s01'), source_dir)
        out = os.path.join(root, 'generated')
        with mock.patch('sys.stdout', io.StringIO()):
            code = cli.main(['generate', '--checkpoint', self.path,
                             '--source-seq', source_dir, '--traces', '0',
                             '--out', out])
        self.assertEqual(code, cli.EXIT_OK)
        generated = load_dataset(out)
        self.assertEqual([seq.name for seq in generated],
                         ['s01_to_s00/v1'])
        self.assertEqual(len(generated[0]), 4)
        self.assertTrue(os.path.isfile(os.path.join(
            out, 's01_to_s00_v1_key0.png')))


class TestOutputs(TestCase):
    def test_write_generated(self):
        sequences = [seq.with_frames(seq.frames, subject_id=seq.subject_id +
                                     '_to_s09') for seq in walkers(4)]
        with tempfile.TemporaryDirectory() as root:
            manifest = write_generated(sequences, root)
            loaded = load_dataset(root, role='test')
        self.assertEqual([entry.role for entry in manifest.entries],
                         ['test', 'test'])
        self.assertEqual(sorted(seq.subject_id for seq in loaded),
                         ['s00_to_s09', 's01_to_s09'])
        self.assertTrue(loaded[0].frames[1].equals(sequences[0].frames[1],
                                                   atol=1.0 / 255))

    def test_plots(self):
        records = [AttentionRecord(decoder_cross=[np.full((1, 3, 2), 0.5)])
                   for _ in range(4)]
        matrix = DistanceMatrix(np.ones((2, 3)), ['clip000', 'clip001'],
                                ['a/v1', 'b/v1', 'c/v1'])
        with tempfile.TemporaryDirectory() as root:
            paths = plot_attention_traces(records, [0, 1],
                                          os.path.join(root, 'run'))
            matrix_path = plot_distance_matrix(matrix,
                                               os.path.join(root, 'm.png'))
            self.assertEqual([os.path.basename(path) for path in paths],
                             ['run_key0.png', 'run_key1.png'])
            self.assertTrue(all(os.path.getsize(path) > 0
                                for path in paths + [matrix_path]))
