"""Command-line interface.

    gaitswap synth      --subjects N --frames F --canvas C --seed S --out DIR
    gaitswap preprocess --dataset DIR --canvas C --test-view V --out DIR
    gaitswap keys       --dataset DIR --subject ID --m 18 --d 100
                        --extractor {deep,moments} --out DIR
    gaitswap train      --dataset DIR --target ID --config FILE
                        --ablation {cycle_only,attention,time_attention}
                        --out runs/  (writes runs/<name>-<config hash>/)
    gaitswap generate   --checkpoint CK --source-seq DIR
                        --renderer {conv,nn,identity} --out DIR
    gaitswap eval       --generated DIR --refs DIR --target ID
                        --embedder {baseline,external:PATH} --report FILE
    gaitswap detect train --real DIR --fake DIR --out det.ck
    gaitswap detect run   --model det.ck --video DIR
    gaitswap ablate     --dataset DIR --target ID --out DIR

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from gaitswap.config import RunConfig, config_hash, describe_defaults, \
    file_hash, load_config, run_directory, save_config
from gaitswap.detector import build_detector_dataset, detect, \
    evaluate_detector, load_detector, save_detector, train_detector
from gaitswap.device import resolve_device
from gaitswap.errors import ConfigError, DataError, ExtractorUnavailable, \
    NumericalFailure
from gaitswap.evaluation import evaluate_generation, get_gait_embedder, \
    target_accuracy, write_distance_matrix
from gaitswap.gaitdata import MANIFEST_NAME, load_dataset, load_sequence, \
    preprocess_dataset, synth_dataset
from gaitswap.keys import build_keyset, build_keysets, get_extractor, \
    load_keyset, save_keyset
from gaitswap.model import ABLATIONS
from gaitswap.pipeline import GaitTransfer, plot_attention_traces, \
    plot_distance_matrix, write_generated
from gaitswap.renderer import RENDERERS, get_renderer, render_sequence, \
    train_renderer
from gaitswap.training import train

logger = logging.getLogger('gaitswap')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
REPORT_SCHEMA_VERSION = 1
ABLATION_LABELS = {'cycle_only': 'Cycle Only',
                   'attention': '+ Attention',
                   'time_attention': '+ Time-Attention'}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(self.prog + ": " + message)


def _common(parser, out_help="output directory"):
    parser.add_argument('--config', help="JSON run configuration")
    parser.add_argument('--seed', type=int, help="seed of every module")
    parser.add_argument('--out', help=out_help)
    parser.add_argument('--device', default=None,
                        help="cpu, cuda, mps or auto (default: config)")
    parser.add_argument('--verbose', action='store_true',
                        help="log progress")


def build_parser():
    """Argument parser of the `gaitswap` command."""
    formatter = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog='gaitswap', description="Gait transfer with "
                     "temporal attention generators.",
                     epilog=describe_defaults(), formatter_class=formatter)
    commands = parser.add_subparsers(dest='command', parser_class=_Parser)
    commands.required = True

    synth = commands.add_parser('synth', help="write a synthetic dataset",
                                formatter_class=formatter)
    synth.add_argument('--subjects', type=int, default=4,
                       help="number of subjects (default: 4)")
    synth.add_argument('--frames', type=int, default=200,
                       help="frames per sequence (default: 200)")
    synth.add_argument('--canvas', type=int, default=64,
                       help="canvas side in pixels (default: 64)")
    synth.add_argument('--views', nargs='+', default=['v1', 'v2'],
                       help="view tags, the first is the training view")
    synth.add_argument('--fps', type=float, default=20.0,
                       help="frame rate (default: 20)")
    _common(synth, "dataset root to create")

    preprocess = commands.add_parser('preprocess', help="crop and center "
                                     "every frame of a dataset")
    preprocess.add_argument('--dataset', help="input dataset root")
    preprocess.add_argument('--canvas', type=int, default=256,
                            help="canvas side (default: 256)")
    preprocess.add_argument('--test-view', action='append', default=[],
                            help="view given the test role when the dataset "
                            "has no manifest yet (repeatable)")
    _common(preprocess, "output dataset root")

    keys = commands.add_parser('keys', help="select the key frames of a "
                               "subject")
    keys.add_argument('--dataset', help="dataset root")
    keys.add_argument('--subject', required=True, help="subject id")
    keys.add_argument('--m', type=int, help="number of keys (default: 18)")
    keys.add_argument('--d', type=int, help="reduced dimension "
                      "(default: 100)")
    keys.add_argument('--extractor', choices=('deep', 'moments'),
                      help="frame features (default: moments)")
    _common(keys, "KeySet directory")

    training = commands.add_parser('train', help="train a gait transfer "
                                   "model", epilog=describe_defaults(),
                                   formatter_class=formatter)
    training.add_argument('--dataset', help="dataset root")
    training.add_argument('--target', help="target subject id")
    training.add_argument('--ablation', choices=ABLATIONS,
                          help="model variant (default: time_attention)")
    training.add_argument('--epochs', type=int, help="override epochs")
    training.add_argument('--steps-per-epoch', type=int,
                          help="override steps per epoch")
    _common(training, "runs root; the run goes to <name>-<config hash>/")

    generate = commands.add_parser('generate', help="translate and render "
                                   "a source sequence")
    generate.add_argument('--checkpoint', required=True,
                          help="trained checkpoint")
    generate.add_argument('--source-seq', required=True, nargs='+',
                          help="source sequence directories")
    generate.add_argument('--renderer', choices=RENDERERS,
                          default='identity',
                          help="pose-to-RGB renderer (default: identity)")
    generate.add_argument('--renderer-file', help="saved conv renderer")
    generate.add_argument('--dataset', help="dataset with the target's "
                          "footage (nn and conv renderers)")
    generate.add_argument('--traces', type=int, nargs='*', default=[],
                          help="keys whose attention traces are plotted")
    _common(generate, "output dataset root")

    evaluate = commands.add_parser('eval', help="compute the generation "
                                   "metrics")
    evaluate.add_argument('--generated', required=True,
                          help="dataset of generated sequences")
    evaluate.add_argument('--refs', help="dataset of real sequences")
    evaluate.add_argument('--target', help="target subject id")
    evaluate.add_argument('--embedder',
                          help="baseline or external:PATH (default: "
                          "baseline)")
    evaluate.add_argument('--report', required=True, help="report file")
    evaluate.add_argument('--checkpoint', help="checkpoint (provenance)")
    _common(evaluate)

    detector = commands.add_parser('detect', help="real-vs-generated "
                                   "detector")
    actions = detector.add_subparsers(dest='action', parser_class=_Parser)
    actions.required = True
    detect_train = actions.add_parser('train', help="train the detector")
    detect_train.add_argument('--real', required=True,
                              help="dataset of real footage")
    detect_train.add_argument('--fake', required=True,
                              help="dataset of generated footage")
    _common(detect_train, "detector file")
    detect_run = actions.add_parser('run', help="classify a video")
    detect_run.add_argument('--model', required=True, help="detector file")
    detect_run.add_argument('--video', required=True,
                            help="sequence directory with RGB frames")
    _common(detect_run)

    ablate = commands.add_parser('ablate', help="train and compare the "
                                 "three model variants")
    ablate.add_argument('--dataset', help="dataset root")
    ablate.add_argument('--target', help="target subject id")
    _common(ablate, "output directory")
    return parser


def configure_logging(verbose):
    """Install the package's single stream handler."""
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(
        "%(asctime)s %(name)s %(levelname)s %(message)s"))
    logger.handlers = [handler]
    logger.setLevel(logging.INFO if verbose else logging.WARNING)


def resolve_config(args):
    """RunConfig from --config plus the command-line overrides."""
    config = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.device is not None:
        config = replace(config, device=args.device)
    if getattr(args, 'dataset', None):
        config = replace(config, dataset=args.dataset)
    if getattr(args, 'target', None):
        config = replace(config, target=args.target)
    try:
        if getattr(args, 'ablation', None):
            config = replace(config, model=replace(config.model,
                                                   ablation=args.ablation))
        if getattr(args, 'epochs', None) is not None:
            epochs = args.epochs
            config = replace(config, train=replace(
                config.train, epochs=epochs,
                warmup_epochs=min(config.train.warmup_epochs, epochs)))
        if getattr(args, 'steps_per_epoch', None) is not None:
            config = replace(config, train=replace(
                config.train, steps_per_epoch=args.steps_per_epoch))
    except (TypeError, ValueError) as error:
        raise ConfigError(str(error))
    return config


def _require(value, flag):
    if value is None:
        raise UsageError(flag + " is required")
    return value


def _report_path(path):
    root, _ = os.path.splitext(path)
    return root


def emit_report(report, path, config_digest, traces=None,
                plot_matrices=False):
    """Write a metrics report and its optional plots.

    The report is canonical JSON (sorted keys), so identical inputs give
    byte-identical files.

    Args:
        report (MetricsReport): the metrics
        path (str): report file
        config_digest (str): hash of the run configuration
        traces (dict): key index -> AttentionRecord list, one plot each
        plot_matrices (bool): also plot the distance matrices

    Returns:
        list: paths of the written files (report first)
    """
    content = {'schema_version': REPORT_SCHEMA_VERSION,
               'config_hash': config_digest,
               'metrics': report.to_dict()}
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as handle:
        json.dump(content, handle, indent=2, sort_keys=True)
        handle.write("\n")

    written = [path]
    for key_index, records in sorted((traces or {}).items()):
        written += plot_attention_traces(records, [key_index],
                                         _report_path(path) + "_trace")
    if plot_matrices:
        for number, matrix in enumerate(report.distance_matrices.values()):
            written.append(plot_distance_matrix(
                matrix, _report_path(path) + "_matrix%d.png" % number))
    return written


def read_report(path):
    """Parse a report written by `emit_report`."""
    with open(path) as handle:
        return json.load(handle)


def run_synth(args, config):
    out = _require(args.out, "--out")
    seed = args.seed if args.seed is not None else 0
    manifest = synth_dataset(out, n_subjects=args.subjects,
                             n_frames=args.frames, canvas=args.canvas,
                             seed=seed, views=tuple(args.views),
                             fps=args.fps)
    print("wrote " + str(len(manifest.entries)) + " sequences to " + out)


def run_preprocess(args, config):
    dataset = _require(config.dataset, "--dataset")
    out = _require(args.out, "--out")
    manifest = preprocess_dataset(dataset, out, args.canvas,
                                  test_views=args.test_view)
    print("wrote " + str(len(manifest.entries)) + " sequences to " + out)


def run_keys(args, config):
    dataset = _require(config.dataset, "--dataset")
    out = _require(args.out, "--out")
    key_config = config.keys
    overrides = {name: getattr(args, name) for name in ('m', 'd',
                                                        'extractor')
                 if getattr(args, name) is not None}
    try:
        key_config = replace(key_config, **overrides)
    except (TypeError, ValueError) as error:
        raise ConfigError(str(error))
    sequences = load_dataset(dataset, role='train', subjects=[args.subject])
    if not sequences:
        raise DataError("No training sequence of subject " + args.subject)
    keysets = build_keysets(sequences, key_config)
    save_keyset(keysets[args.subject], out)
    print("wrote " + str(len(keysets[args.subject])) + " keys to " + out)


def _training_keysets(sequences, config, keys_dir):
    extractor = get_extractor(config.keys.extractor)
    keysets = {}
    grouped = {}
    for seq in sequences:
        grouped.setdefault(seq.subject_id, []).append(seq)
    for subject_id, subject_sequences in sorted(grouped.items()):
        path = os.path.join(keys_dir, subject_id)
        if os.path.isfile(os.path.join(path, 'keys.json')):
            keysets[subject_id] = load_keyset(path)
            continue
        keysets.update(build_keysets(subject_sequences, config.keys,
                                     extractor))
        save_keyset(keysets[subject_id], path)
    return keysets


def run_training(config, root, progress=False):
    """Train one model as configured and write its run directory.

    The run directory is `root/<name>-<config hash prefix>/` holding
    `config.json`, `keys/`, `logs/`, `checkpoints/` and `reports/`.

    Returns:
        tuple: the final Checkpoint and the run directory
    """
    dataset = _require(config.dataset, "--dataset")
    target = _require(config.target, "--target")
    out = run_directory(root, config)
    os.makedirs(os.path.join(out, 'reports'), exist_ok=True)
    save_config(config, os.path.join(out, 'config.json'))
    sequences = load_dataset(dataset, role='train')
    keysets = _training_keysets(sequences, config, os.path.join(out, 'keys'))
    embedder = None
    if config.loss.lambda_per > 0:
        embedder = get_extractor(config.train.perceptual_extractor)
    checkpoint = train(sequences, target, keysets, config.train,
                       config.model, config.loss, embedder, out_dir=out,
                       device=resolve_device(config.device),
                       progress=progress)
    return checkpoint, out


def run_train(args, config):
    root = _require(args.out, "--out")
    checkpoint, out = run_training(config, root, progress=args.verbose)
    last = checkpoint.history[-1] if checkpoint.history else {}
    print("final total loss " + str(last.get('total')) + ", checkpoint in " +
          os.path.join(out, 'checkpoints', 'final.pt'))


def _target_footage(dataset, target):
    if dataset is None:
        return None
    footage = [seq for seq in load_dataset(dataset, subjects=[target])
               if seq.rgb_frames is not None]
    return footage[0] if footage else None


def run_generate(args, config):
    out = _require(args.out, "--out")
    transfer = GaitTransfer.from_checkpoint(args.checkpoint, config.device)
    footage = _target_footage(args.dataset or config.dataset,
                              transfer.target_id)
    renderer = get_renderer(args.renderer, footage, args.renderer_file,
                            transfer.device)
    generated = []
    for path in args.source_seq:
        seq, records = transfer.translate(load_sequence(path))
        generated.append(render_sequence(renderer, seq))
        if args.traces:
            os.makedirs(out, exist_ok=True)
            plot_attention_traces(records, args.traces,
                                  os.path.join(out, seq.subject_id + "_" +
                                               seq.view))
    write_generated(generated, out)
    print("wrote " + str(len(generated)) + " generated sequences to " + out)


def run_eval(args, config):
    refs_root = _require(args.refs or config.dataset, "--refs")
    target = _require(config.target, "--target")
    eval_config = config.eval
    if args.embedder:
        try:
            eval_config = replace(eval_config, embedder=args.embedder)
        except ValueError as error:
            raise ConfigError(str(error))
    generated = load_dataset(args.generated)
    refs = load_dataset(refs_root)
    provenance = {'checkpoint': file_hash(args.checkpoint),
                  'generated': file_hash(os.path.join(args.generated,
                                                      MANIFEST_NAME)),
                  'refs': file_hash(os.path.join(refs_root, MANIFEST_NAME))}
    report = evaluate_generation(generated, refs, target, eval_config,
                                 provenance=provenance)
    digest = config_hash(config)
    emit_report(report, args.report, digest, plot_matrices=True)
    for matrix_name, matrix in report.distance_matrices.items():
        write_distance_matrix(matrix, _report_path(args.report) + "_" +
                              matrix_name.replace('/', '_') + ".csv")
    print(json.dumps(report.target_accuracy, sort_keys=True))


def run_detect(args, config):
    if args.action == 'train':
        out = _require(args.out, "--out")
        dataset = build_detector_dataset(args.real, args.fake,
                                         config.detector.seed)
        params = train_detector(dataset, config.detector)
        save_detector(params, out)
        scores = evaluate_detector(params, dataset, 'test')
        train_scores = evaluate_detector(params, dataset, 'train')
        if train_scores.video_accuracy < scores.video_accuracy:
            logger.info("detector: test accuracy above train accuracy")
        print(json.dumps({'frame_accuracy': scores.frame_accuracy,
                          'video_accuracy': scores.video_accuracy,
                          'test_subjects': dataset.test_subjects},
                         sort_keys=True))
    else:
        params = load_detector(args.model)
        label, confidence = detect(params, load_sequence(args.video))
        print(json.dumps({'video': args.video, 'label': label,
                          'confidence': confidence}, sort_keys=True))


def ablation_table(accuracies):
    """Text table of target-accuracy per model variant."""
    lines = ["%-18s %s" % ("configuration", "target_accuracy")]
    for ablation in ABLATIONS:
        lines.append("%-18s %.2f" % (ABLATION_LABELS[ablation],
                                     accuracies[ablation]))
    return "\n".join(lines)


def run_ablate(args, config):
    out = _require(args.out, "--out")
    dataset = _require(config.dataset, "--dataset")
    target = _require(config.target, "--target")
    sequences = load_dataset(dataset)
    test_sources = [seq for seq in load_dataset(dataset, role='test')
                    if seq.subject_id != target]
    if not test_sources:
        raise DataError("No test sequence of a source subject in " + dataset)
    embedder = get_gait_embedder(config.eval.embedder, config.eval)

    accuracies = {}
    for ablation in ABLATIONS:
        variant = replace(config, model=replace(config.model,
                                                ablation=ablation))
        checkpoint, _ = run_training(variant, os.path.join(out, ablation),
                                     progress=args.verbose)
        transfer = GaitTransfer(checkpoint)
        generated = [transfer.translate(seq)[0] for seq in test_sources]
        accuracies[ablation] = target_accuracy(
            embedder, sequences, generated, target, config.eval.clip_len,
            config.eval.top_k)
        logger.info("%s: target accuracy %.2f", ablation,
                    accuracies[ablation])

    table = ablation_table(accuracies)
    with open(os.path.join(out, 'ablation.txt'), 'w') as handle:
        handle.write(table + "\n")
    with open(os.path.join(out, 'ablation.json'), 'w') as handle:
        json.dump({'config_hash': config_hash(config),
                   'target_accuracy': accuracies}, handle, indent=2,
                  sort_keys=True)
        handle.write("\n")
    print(table)


COMMANDS = {'synth': run_synth,
            'preprocess': run_preprocess,
            'keys': run_keys,
            'train': run_train,
            'generate': run_generate,
            'eval': run_eval,
            'detect': run_detect,
            'ablate': run_ablate}


def dispatch(command, args):
    """Run a parsed subcommand and map failures to exit codes.

    Args:
        command (str): subcommand name
        args (argparse.Namespace): parsed arguments

    Returns:
        int: exit code
    """
    try:
        config = resolve_config(args)
        COMMANDS[command](args, config)
    except (UsageError, ConfigError) as error:
        print("error: " + str(error), file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ExtractorUnavailable, OSError) as error:
        print("data error: " + str(error), file=sys.stderr)
        return EXIT_DATA
    except NumericalFailure as error:
        print("numerical failure: " + str(error) + " " +
              json.dumps(error.components, sort_keys=True),
              file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as error:
        print("error: " + str(error), file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None):
    """Entry point of the `gaitswap` command.

    Args:
        argv (list): arguments (default: sys.argv[1:])

    Returns:
        int: exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as error:
        print(str(error), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exit_request:
        return exit_request.code or EXIT_OK
    configure_logging(getattr(args, 'verbose', False))
    return dispatch(args.command, args)


if __name__ == '__main__':
    sys.exit(main())
