"""Run configuration.

A `RunConfig` merges the settings of every module (model, training, loss
weights, keys, metrics, detector) plus the run-level fields. It is read
from a JSON file whose top level may contain the run-level keys and one
section per module:

    {"schema_version": 1, "name": "toy", "target": "s01",
     "model": {"canvas": 64, "ablation": "attention"},
     "train": {"epochs": 20}}

Unknown keys are rejected with a ConfigError naming the key.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from gaitswap.detector import DetectorConfig
from gaitswap.errors import ConfigError
from gaitswap.evaluation import EvalConfig
from gaitswap.keys import KeyConfig
from gaitswap.model import ModelConfig
from gaitswap.training import LossWeights, TrainConfig

SCHEMA_VERSION = 1
DATASET_ENV = 'GAITSWAP_DATASET'

SECTIONS = {'model': ModelConfig,
            'train': TrainConfig,
            'loss': LossWeights,
            'keys': KeyConfig,
            'eval': EvalConfig,
            'detector': DetectorConfig}


def default_dataset():
    """Dataset root from the GAITSWAP_DATASET environment variable."""
    return os.environ.get(DATASET_ENV)


@dataclass
class RunConfig:
    """Merged configuration of one run.

    Attributes:
        schema_version (int): configuration schema version
        name (str): run name
        dataset (str): dataset root (default: $GAITSWAP_DATASET)
        target (str): target subject id
        device (str): 'cpu', 'cuda', 'mps' or 'auto'
        model, train, loss, keys, eval, detector: module settings
    """
    schema_version: int = SCHEMA_VERSION
    name: str = 'run'
    dataset: str = None
    target: str = None
    device: str = 'cpu'
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    keys: KeyConfig = field(default_factory=KeyConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError("schema_version " + str(self.schema_version) +
                              " is not supported (expected " +
                              str(SCHEMA_VERSION) + ")")
        if self.dataset is None:
            self.dataset = default_dataset()

    def to_dict(self):
        return asdict(self)

    def with_seed(self, seed):
        """Copy of the configuration with every seed set to `seed`."""
        return replace(self,
                       train=replace(self.train, seed=seed),
                       keys=replace(self.keys, seed=seed),
                       eval=replace(self.eval, seed=seed),
                       detector=replace(self.detector, seed=seed))


def _build_section(name, cls, values):
    if not isinstance(values, dict):
        raise ConfigError("Section '" + name + "' must be a mapping")
    known = {item.name for item in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError("Unknown configuration key '" + name + "." +
                              key + "'")
    try:
        return cls(**values)
    except (TypeError, ValueError) as error:
        raise ConfigError("Invalid value in section '" + name + "': " +
                          str(error))


def config_from_dict(content):
    """Build a RunConfig from a (possibly partial) mapping.

    Args:
        content (dict): run-level keys and module sections

    Returns:
        RunConfig: the configuration
    """
    if not isinstance(content, dict):
        raise ConfigError("The configuration must be a mapping")
    run_level = {item.name for item in fields(RunConfig)} - set(SECTIONS)
    arguments = {}
    for key, value in content.items():
        if key in SECTIONS:
            arguments[key] = _build_section(key, SECTIONS[key], value)
        elif key in run_level:
            arguments[key] = value
        else:
            raise ConfigError("Unknown configuration key '" + key + "'")
    try:
        return RunConfig(**arguments)
    except (TypeError, ValueError) as error:
        raise ConfigError(str(error))


def load_config(path):
    """Read a RunConfig from a JSON file.

    Args:
        path (str): configuration file

    Returns:
        RunConfig: the configuration
    """
    try:
        with open(path) as handle:
            content = json.load(handle)
    except OSError as error:
        raise ConfigError("Cannot read configuration " + str(path) + ": " +
                          str(error))
    except json.JSONDecodeError as error:
        raise ConfigError("Malformed configuration " + str(path) + ": " +
                          str(error))
    return config_from_dict(content)


def save_config(config, path):
    """Write a RunConfig as canonical JSON."""
    with open(path, 'w') as handle:
        json.dump(config.to_dict(), handle, indent=2, sort_keys=True)


def canonical_json(content):
    return json.dumps(content, sort_keys=True, separators=(',', ':'))


def config_hash(config):
    """SHA-256 of the canonical JSON of a configuration."""
    return hashlib.sha256(
        canonical_json(config.to_dict()).encode('utf-8')).hexdigest()


def run_directory(root, config):
    """Run directory of a configuration: <root>/<name>-<config hash prefix>."""
    return os.path.join(root, config.name + "-" + config_hash(config)[:12])


def file_hash(path):
    """SHA-256 of a file's content, or None if it does not exist."""
    if path is None or not os.path.isfile(path):
        return None
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def describe_defaults():
    """Text listing every configuration key with its default."""
    lines = ["configuration keys (JSON file given with --config):"]
    for item in fields(RunConfig):
        if item.name in SECTIONS:
            continue
        lines.append("  " + item.name + " = " +
                     repr(getattr(RunConfig(), item.name)))
    for name, cls in SECTIONS.items():
        defaults = cls()
        for item in fields(cls):
            lines.append("  " + name + "." + item.name + " = " +
                         repr(getattr(defaults, item.name)))
    return "\n".join(lines)
