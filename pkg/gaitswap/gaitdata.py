"""Gait data model, dataset I/O, preprocessing and a synthetic walker.

A walking subject is stored as a `GaitSequence`: an ordered list of
`IUVAFrame` pose images (part index I, surface coordinates U/V, alpha A) and,
optionally, the matching RGB frames. Sequences live on disk as

    root/<subject_id>/<view>/frame_000000.png ...
    root/<subject_id>/<view>/rgb_000000.png ...      (optional)
    root/<subject_id>/<view>/sequence.json
    root/manifest.json

Real footage has to be turned into IUVA frames by an external DensePose run;
`synth_walker` and `synth_dataset` generate articulated stick/ellipse walkers
instead, so every part of the pipeline can be exercised at desk scale.

Example usage:
>>> spec = WalkerSpec(gait_frequency=1.0, stride_amplitude=0.5)
>>> seq = synth_walker(spec, n_frames=40, canvas=64)
>>> mask = silhouette_from_alpha(seq.frames[0]).mask
"""

import json
import logging
import math
import os
import re
import shutil
import threading
import warnings
from dataclasses import dataclass, field

import cv2
import numpy as np

from gaitswap.codec import read_frame_file, read_rgb_file, \
    validate_bit_depth, write_frame_file, write_rgb_file
from gaitswap.errors import DataError, SequenceGapError
from gaitswap.validation import validate_canvas, validate_choice, \
    validate_non_negative_number, validate_part_indices, \
    validate_positive_int, validate_positive_number, validate_unit_interval

logger = logging.getLogger(__name__)

MAX_PART_INDEX = 24

HEAD = 1
TORSO = 2
PELVIS = 3
LEFT_ARM = 4
RIGHT_ARM = 5
LEFT_LEG = 6
RIGHT_LEG = 7
WALKER_PARTS = (HEAD, TORSO, PELVIS, LEFT_ARM, RIGHT_ARM, LEFT_LEG, RIGHT_LEG)

ROLES = ('train', 'test')
MANIFEST_NAME = 'manifest.json'
SEQUENCE_META_NAME = 'sequence.json'
FRAME_PATTERN = re.compile(r'^frame_(\d{6})\.png$')

_path_locks = {}
_path_locks_guard = threading.Lock()


def _lock_for(path):
    key = os.path.abspath(str(path))
    with _path_locks_guard:
        return _path_locks.setdefault(key, threading.Lock())


@dataclass(eq=False)
class IUVAFrame:
    """One pose image: part index, part surface coordinates and alpha.

    Attributes:
        part_index (np.ndarray): H x W integer map, 0 = background, 1..24
        u (np.ndarray): H x W map in [0, 1]
        v (np.ndarray): H x W map in [0, 1]
        alpha (np.ndarray): H x W map in [0, 1]
    """
    part_index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        validate_part_indices(np.asarray(self.part_index), "I",
                              MAX_PART_INDEX)
        self.part_index = np.asarray(self.part_index).astype(np.uint8)

        shape = self.part_index.shape
        if len(shape) != 2:
            raise ValueError("IUVA channels must be 2-dimensional maps")
        for name in ('u', 'v', 'alpha'):
            channel = np.asarray(getattr(self, name), dtype=np.float32)
            if channel.shape != shape:
                raise ValueError("Channel " + name + " has shape " +
                                 str(channel.shape) + ", expected " +
                                 str(shape))
            validate_unit_interval(channel, name)
            setattr(self, name, channel)

    @property
    def height(self):
        return self.part_index.shape[0]

    @property
    def width(self):
        return self.part_index.shape[1]

    def to_array(self):
        """Stack the channels into the network input layout.

        Returns:
            np.ndarray: 4 x H x W float32 array (I / 24, U, V, A)
        """
        return np.stack([self.part_index.astype(np.float32) / MAX_PART_INDEX,
                         self.u, self.v, self.alpha])

    @classmethod
    def from_array(cls, array):
        """Build a frame from a 4 x H x W network output.

        The part index is rounded to the nearest integer and cleared where
        alpha is below one half, so background never carries a part.

        Args:
            array (np.ndarray): 4 x H x W real array, channels in [0, 1]

        Returns:
            IUVAFrame: the decoded frame
        """
        array = np.clip(np.asarray(array, dtype=np.float32), 0.0, 1.0)
        if array.ndim != 3 or array.shape[0] != 4:
            raise ValueError("Expected a 4 x H x W array, got shape " +
                             str(array.shape))
        alpha = array[3]
        part_index = np.rint(array[0] * MAX_PART_INDEX).astype(np.uint8)
        part_index[alpha < 0.5] = 0
        return cls(part_index, array[1], array[2], alpha)

    def equals(self, other, atol=0.0):
        """Compare two frames channel by channel.

        Args:
            other (IUVAFrame): the frame to compare with
            atol (float): tolerance on U/V/A

        Returns:
            bool: True if part indices match and U/V/A are within `atol`
        """
        if self.part_index.shape != other.part_index.shape:
            return False
        if not np.array_equal(self.part_index, other.part_index):
            return False
        return all(np.allclose(getattr(self, name), getattr(other, name),
                               rtol=0.0, atol=atol)
                   for name in ('u', 'v', 'alpha'))


@dataclass(eq=False)
class GaitSequence:
    """Ordered IUVA frames of one subject seen from one view.

    Attributes:
        subject_id (str): subject identifier
        view (str): view tag
        frames (list): IUVAFrame list, all of the same size
        rgb_frames (list): optional H x W x 3 images in [0, 1], same length
        fps (float): frames per second
    """
    subject_id: str
    view: str
    frames: list
    rgb_frames: list = None
    fps: float = 20.0

    def __post_init__(self):
        self.frames = list(self.frames)
        if not self.frames:
            raise ValueError("A gait sequence needs at least one frame")
        validate_positive_number(self.fps, "fps")

        shape = (self.frames[0].height, self.frames[0].width)
        for index, frame in enumerate(self.frames):
            if (frame.height, frame.width) != shape:
                raise ValueError("Frame " + str(index) + " of " +
                                 self.name + " has size " +
                                 str((frame.height, frame.width)) +
                                 ", expected " + str(shape))

        if self.rgb_frames is not None:
            self.rgb_frames = [np.asarray(rgb, dtype=np.float32)
                               for rgb in self.rgb_frames]
            if len(self.rgb_frames) != len(self.frames):
                raise ValueError("rgb_frames of " + self.name + " has " +
                                 str(len(self.rgb_frames)) + " frames, " +
                                 "expected " + str(len(self.frames)))

    def __len__(self):
        return len(self.frames)

    @property
    def name(self):
        return str(self.subject_id) + "/" + str(self.view)

    @property
    def height(self):
        return self.frames[0].height

    @property
    def width(self):
        return self.frames[0].width

    def to_array(self):
        """Stack all frames in the network input layout.

        Returns:
            np.ndarray: N x 4 x H x W float32 array
        """
        return np.stack([frame.to_array() for frame in self.frames])

    def with_frames(self, frames, rgb_frames=None, subject_id=None):
        """Copy the sequence metadata onto new frames.

        Args:
            frames (list): the new IUVA frames
            rgb_frames (list): optional new RGB frames
            subject_id (str): optional new subject id

        Returns:
            GaitSequence: the new sequence
        """
        return GaitSequence(subject_id=subject_id or self.subject_id,
                            view=self.view,
                            frames=frames,
                            rgb_frames=rgb_frames,
                            fps=self.fps)


@dataclass
class Silhouette:
    """Binary silhouette of a frame.

    Attributes:
        mask (np.ndarray): H x W uint8 map with values in {0, 1}
        degenerate (bool): set when the alpha map was constant
    """
    mask: np.ndarray
    degenerate: bool = False


@dataclass
class WalkerSpec:
    """Parameters of a synthetic walker.

    Two walkers count as different subjects when their gait frequency or
    stride amplitude differ by at least ten percent.

    Attributes:
        gait_frequency (float): gait cycles per second
        stride_amplitude (float): peak leg angle in radians, in (0, pi/2)
        arm_swing_ratio (float): arm angle relative to the leg angle
        bob_amplitude (float): vertical bobbing in pixels
        phase_offset (float): gait phase at frame 0, radians
        body_scale (float): figure height relative to the canvas
        seed (int): seed of the per-subject body proportions
    """
    gait_frequency: float = 1.0
    stride_amplitude: float = 0.5
    arm_swing_ratio: float = 0.6
    bob_amplitude: float = 1.0
    phase_offset: float = 0.0
    body_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        validate_positive_number(self.gait_frequency, "gait_frequency")
        validate_positive_number(self.stride_amplitude, "stride_amplitude")
        if self.stride_amplitude >= math.pi / 2:
            raise ValueError("stride_amplitude must be below pi/2")
        validate_non_negative_number(self.arm_swing_ratio, "arm_swing_ratio")
        validate_non_negative_number(self.bob_amplitude, "bob_amplitude")
        if not math.isfinite(self.phase_offset):
            raise ValueError("phase_offset must be finite")
        validate_positive_number(self.body_scale, "body_scale")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise TypeError("seed must be an integer")

    def identity(self):
        """The parameters that define the subject's gait."""
        return self.gait_frequency, self.stride_amplitude


@dataclass
class SequenceEntry:
    """One sequence listed in a dataset manifest."""
    subject_id: str
    view: str
    n_frames: int
    role: str = 'train'

    def __post_init__(self):
        validate_positive_int(self.n_frames, "n_frames")
        validate_choice(self.role, "role", ROLES)


@dataclass
class DatasetManifest:
    """Index of the sequences stored under a dataset root.

    Attributes:
        root (str): dataset root directory
        entries (list): SequenceEntry list
        bit_depth (int): quantization of U/V/A in the frame files
    """
    root: str
    entries: list = field(default_factory=list)
    bit_depth: int = 8

    def __post_init__(self):
        self.bit_depth = validate_bit_depth(self.bit_depth)
        seen = set()
        for entry in self.entries:
            key = (entry.subject_id, entry.view)
            if key in seen:
                raise DataError("Sequence " + "/".join(key) +
                                " is listed twice in the manifest of " +
                                str(self.root))
            seen.add(key)

    def subjects(self):
        """Sorted list of the subject ids in the manifest."""
        return sorted({entry.subject_id for entry in self.entries})

    def sequence_dir(self, entry):
        return os.path.join(self.root, entry.subject_id, entry.view)


def bounding_box(mask):
    """Bounding box of the non-zero pixels of a mask.

    Args:
        mask (np.ndarray): 2-dimensional map

    Returns:
        tuple: (row_start, row_stop, col_start, col_stop), stops exclusive,
            or None if the mask is empty
    """
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


def _resize_frame(frame, height, width):
    size = (int(width), int(height))
    part_index = cv2.resize(frame.part_index, size,
                            interpolation=cv2.INTER_NEAREST)
    channels = [np.clip(cv2.resize(getattr(frame, name), size,
                                   interpolation=cv2.INTER_LINEAR), 0.0, 1.0)
                for name in ('u', 'v', 'alpha')]
    return IUVAFrame(part_index, *channels)


def _paste(source, target, d_row, d_col):
    rows_in = slice(max(0, -d_row), min(source.shape[0],
                                        target.shape[0] - d_row))
    cols_in = slice(max(0, -d_col), min(source.shape[1],
                                        target.shape[1] - d_col))
    if rows_in.start >= rows_in.stop or cols_in.start >= cols_in.stop:
        return
    target[rows_in.start + d_row:rows_in.stop + d_row,
           cols_in.start + d_col:cols_in.stop + d_col] = source[rows_in,
                                                                cols_in]


def crop_and_center(frame, canvas):
    """Crop a frame to a square canvas centered on the subject.

    The subject is the set of pixels with alpha >= 0.5. Its bounding box is
    moved to the middle of a canvas x canvas frame by an integer shift; the
    frame is only rescaled (aspect ratio kept) when the subject does not fit.
    Part indices are resampled with nearest neighbour, U/V/A bilinearly.
    Padding pixels are background (I = 0, A = 0).

    Args:
        frame (IUVAFrame): input frame of any size
        canvas (int): side of the output canvas in pixels

    Returns:
        IUVAFrame: the canvas x canvas frame
    """
    validate_canvas(canvas)
    box = bounding_box(frame.alpha >= 0.5)
    if box is None:
        raise DataError("Frame has no subject pixel (alpha >= 0.5), " +
                        "cannot crop it")

    height, width = box[1] - box[0], box[3] - box[2]
    if max(height, width) > canvas:
        scale = canvas / float(max(height, width))
        frame = _resize_frame(frame,
                              max(1, int(round(frame.height * scale))),
                              max(1, int(round(frame.width * scale))))
        box = bounding_box(frame.alpha >= 0.5)
        if box is None:
            raise DataError("Subject vanished while rescaling the frame")
        height = min(box[1] - box[0], canvas)
        width = min(box[3] - box[2], canvas)

    d_row = (canvas - height) // 2 - box[0]
    d_col = (canvas - width) // 2 - box[2]

    channels = {}
    for name in ('part_index', 'u', 'v', 'alpha'):
        source = getattr(frame, name)
        target = np.zeros((canvas, canvas), dtype=source.dtype)
        _paste(source, target, d_row, d_col)
        channels[name] = target
    return IUVAFrame(**channels)


def silhouette_from_alpha(frame):
    """Binary silhouette of a frame.

    Pixels whose alpha lies above the midpoint between the smallest and the
    largest alpha value of the frame belong to the silhouette. A constant
    alpha map gives an empty silhouette, flagged as degenerate.

    Args:
        frame (IUVAFrame): the frame

    Returns:
        Silhouette: the binary mask
    """
    low = float(frame.alpha.min())
    high = float(frame.alpha.max())
    if high == low:
        warnings.warn("Constant alpha map, the silhouette is empty")
        return Silhouette(np.zeros(frame.alpha.shape, dtype=np.uint8),
                          degenerate=True)

    threshold = low + (high - low) / 2.0
    return Silhouette((frame.alpha > threshold).astype(np.uint8))


def silhouette_widths(seq):
    """Width of the silhouette in every frame.

    Args:
        seq (GaitSequence): the sequence

    Returns:
        np.ndarray: number of occupied columns per frame
    """
    widths = []
    for frame in seq.frames:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mask = silhouette_from_alpha(frame).mask
        widths.append(int(mask.any(axis=0).sum()))
    return np.asarray(widths, dtype=np.float64)


def _pixel_grid(canvas):
    rows, cols = np.mgrid[0:canvas, 0:canvas].astype(np.float64)
    return cols + 0.5, rows + 0.5


def _capsule(xs, ys, start, end, half_width):
    """Pixels within `half_width` of a segment, with along/across coords."""
    seg = np.subtract(end, start)
    length_sq = max(float(seg @ seg), 1e-12)
    rel_x = xs - start[0]
    rel_y = ys - start[1]
    along = np.clip((rel_x * seg[0] + rel_y * seg[1]) / length_sq, 0.0, 1.0)
    dist_x = rel_x - along * seg[0]
    dist_y = rel_y - along * seg[1]
    inside = dist_x ** 2 + dist_y ** 2 <= half_width ** 2
    across = (rel_x * seg[1] - rel_y * seg[0]) / math.sqrt(length_sq)
    across = np.clip((across / half_width + 1.0) / 2.0, 0.0, 1.0)
    return inside, along, across


def _ellipse(xs, ys, center, radius_x, radius_y):
    rel_x = (xs - center[0]) / radius_x
    rel_y = (ys - center[1]) / radius_y
    inside = rel_x ** 2 + rel_y ** 2 <= 1.0
    return (inside, np.clip((rel_x + 1.0) / 2.0, 0.0, 1.0),
            np.clip((rel_y + 1.0) / 2.0, 0.0, 1.0))


def _walker_pose(spec, proportions, canvas, time):
    phase = 2.0 * math.pi * spec.gait_frequency * time + spec.phase_offset
    theta = spec.stride_amplitude * math.sin(phase)
    bob = -spec.bob_amplitude * math.cos(2.0 * phase)

    figure = 0.8 * canvas * spec.body_scale
    leg = 0.45 * figure * proportions['leg']
    arm = 0.35 * figure * proportions['arm']
    torso = 0.3 * figure * proportions['torso']
    hip = np.array([canvas / 2.0, canvas / 2.0 + bob])
    neck = hip - np.array([0.0, torso])
    shoulder = neck + np.array([0.0, 0.1 * torso])

    def limb(origin, length, angle):
        return origin + length * np.array([math.sin(angle), math.cos(angle)])

    arm_angle = spec.arm_swing_ratio * theta
    return {'figure': figure, 'hip': hip, 'neck': neck,
            'shoulder': shoulder,
            'left_foot': limb(hip, leg, theta),
            'right_foot': limb(hip, leg, -theta),
            'left_hand': limb(shoulder, arm, -arm_angle),
            'right_hand': limb(shoulder, arm, arm_angle)}


def _draw_walker(spec, proportions, canvas, time, grid):
    xs, ys = grid
    pose = _walker_pose(spec, proportions, canvas, time)
    figure = pose['figure']
    limb_width = max(0.045 * figure, 0.75)
    torso_width = max(0.08 * figure, 1.0)
    head_radius = max(0.08 * figure * proportions['head'], 1.0)

    part_index = np.zeros((canvas, canvas), dtype=np.uint8)
    u = np.zeros((canvas, canvas), dtype=np.float32)
    v = np.zeros((canvas, canvas), dtype=np.float32)

    head_center = pose['neck'] - np.array([0.0, head_radius])
    # back to front
    shapes = [
        (RIGHT_ARM, _capsule(xs, ys, pose['shoulder'], pose['right_hand'],
                             limb_width)),
        (RIGHT_LEG, _capsule(xs, ys, pose['hip'], pose['right_foot'],
                             limb_width)),
        (TORSO, _capsule(xs, ys, pose['hip'], pose['neck'], torso_width)),
        (PELVIS, _ellipse(xs, ys, pose['hip'], 1.1 * torso_width,
                          0.6 * torso_width)),
        (HEAD, _ellipse(xs, ys, head_center, head_radius, head_radius)),
        (LEFT_LEG, _capsule(xs, ys, pose['hip'], pose['left_foot'],
                            limb_width)),
        (LEFT_ARM, _capsule(xs, ys, pose['shoulder'], pose['left_hand'],
                            limb_width)),
    ]
    for part, (inside, coord_u, coord_v) in shapes:
        part_index[inside] = part
        u[inside] = coord_u[inside]
        v[inside] = coord_v[inside]

    alpha = (part_index > 0).astype(np.float32)
    return IUVAFrame(part_index, u, v, alpha)


def _body_proportions(seed):
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(0.95, 1.05, size=4)
    return dict(zip(('leg', 'arm', 'torso', 'head'), jitter))


def synth_walker(spec, n_frames, canvas, fps=20.0, subject_id=None,
                 view='v1'):
    """Render a synthetic side-view walker.

    The figure has seven parts (head, torso, pelvis, two arms, two legs), each
    with its own part index; U runs along a limb and V across it. Leg angles
    follow stride_amplitude * sin(2 pi gait_frequency t + phase_offset), arms
    swing in counter-phase, and the hip bobs twice per gait cycle. The walker
    stays centered on the canvas (treadmill walk).

    Args:
        spec (WalkerSpec): the walker parameters
        n_frames (int): number of frames
        canvas (int): canvas side in pixels
        fps (float): frames per second
        subject_id (str): subject id of the sequence, default "walker<seed>"
        view (str): view tag

    Returns:
        GaitSequence: the rendered sequence
    """
    validate_positive_int(n_frames, "n_frames")
    validate_canvas(canvas)
    validate_positive_number(fps, "fps")

    proportions = _body_proportions(spec.seed)
    grid = _pixel_grid(canvas)
    frames = [_draw_walker(spec, proportions, canvas, index / float(fps),
                           grid)
              for index in range(n_frames)]
    return GaitSequence(subject_id=subject_id or "walker" + str(spec.seed),
                        view=view, frames=frames, fps=fps)


def synth_appearance(frame, seed):
    """Paint a pose frame with a subject-specific clothing palette.

    Gives the synthetic walkers paired RGB footage: every part gets a base
    colour drawn from `seed`, shaded along U and striped along V.

    Args:
        frame (IUVAFrame): the pose frame
        seed (int): palette seed (one per subject)

    Returns:
        np.ndarray: H x W x 3 float32 image in [0, 1]
    """
    palette = np.random.default_rng(seed).uniform(0.2, 0.9, size=(
        MAX_PART_INDEX + 1, 3)).astype(np.float32)
    palette[0] = 0.0
    shading = 0.7 + 0.3 * frame.u
    stripes = 0.9 + 0.1 * np.cos(4.0 * math.pi * frame.v)
    rgb = palette[frame.part_index] * (shading * stripes)[..., None]
    rgb *= frame.alpha[..., None]
    return np.clip(rgb, 0.0, 1.0).astype(np.float32)


def save_sequence(seq, path, bit_depth=8):
    """Write a sequence to a directory.

    Frames go to `frame_%06d.png` (and `rgb_%06d.png`), metadata to
    `sequence.json`. Existing frame files in the directory are replaced.

    Args:
        seq (GaitSequence): the sequence
        path (str): target directory
        bit_depth (int): quantization of U/V/A, 8 or 16

    Returns:
        None
    """
    bit_depth = validate_bit_depth(bit_depth)
    with _lock_for(path):
        os.makedirs(path, exist_ok=True)
        for name in os.listdir(path):
            if FRAME_PATTERN.match(name) or name.startswith('rgb_'):
                os.remove(os.path.join(path, name))

        for index, frame in enumerate(seq.frames):
            write_frame_file(os.path.join(path, 'frame_%06d.png' % index),
                             frame.part_index, frame.u, frame.v, frame.alpha,
                             bit_depth)
        if seq.rgb_frames is not None:
            for index, rgb in enumerate(seq.rgb_frames):
                write_rgb_file(os.path.join(path, 'rgb_%06d.png' % index),
                               rgb)

        meta = {'subject_id': seq.subject_id,
                'view': seq.view,
                'fps': seq.fps,
                'n_frames': len(seq),
                'bit_depth': bit_depth,
                'has_rgb': seq.rgb_frames is not None}
        with open(os.path.join(path, SEQUENCE_META_NAME), 'w') as handle:
            json.dump(meta, handle, indent=2, sort_keys=True)


def _frame_numbers(path):
    numbers = sorted(int(match.group(1)) for match in
                     map(FRAME_PATTERN.match, os.listdir(path)) if match)
    for expected, number in enumerate(numbers):
        if number != expected:
            missing = os.path.join(path, 'frame_%06d.png' % expected)
            raise SequenceGapError("Gap in frame numbering: " + missing +
                                   " is missing (next frame is " +
                                   'frame_%06d.png' % number + ")")
    return numbers


def load_sequence(path):
    """Read a sequence written by `save_sequence`.

    Args:
        path (str): sequence directory

    Returns:
        GaitSequence: the sequence
    """
    meta_path = os.path.join(path, SEQUENCE_META_NAME)
    if not os.path.isfile(meta_path):
        raise DataError("Missing sequence metadata " + meta_path)

    with _lock_for(path):
        with open(meta_path) as handle:
            meta = json.load(handle)
        bit_depth = validate_bit_depth(meta.get('bit_depth', 8))

        numbers = _frame_numbers(path)
        if len(numbers) != meta['n_frames']:
            raise DataError(meta_path + " lists " + str(meta['n_frames']) +
                            " frames but " + str(len(numbers)) +
                            " frame files were found")

        frames = []
        rgb_frames = [] if meta.get('has_rgb') else None
        for number in numbers:
            frame_path = os.path.join(path, 'frame_%06d.png' % number)
            frame = IUVAFrame(*read_frame_file(frame_path, bit_depth))
            if frames and (frame.height, frame.width) != \
                    (frames[0].height, frames[0].width):
                raise DataError("Frame " + frame_path + " has size " +
                                str((frame.height, frame.width)) +
                                ", expected " +
                                str((frames[0].height, frames[0].width)))
            frames.append(frame)
            if rgb_frames is not None:
                rgb_path = os.path.join(path, 'rgb_%06d.png' % number)
                rgb = read_rgb_file(rgb_path)
                if rgb.shape[:2] != (frame.height, frame.width):
                    raise DataError("RGB frame " + rgb_path +
                                    " does not match its pose frame")
                rgb_frames.append(rgb)

    return GaitSequence(subject_id=meta['subject_id'], view=meta['view'],
                        frames=frames, rgb_frames=rgb_frames,
                        fps=float(meta['fps']))


def save_manifest(manifest):
    """Write `manifest.json` at the dataset root.

    Args:
        manifest (DatasetManifest): the manifest

    Returns:
        None
    """
    content = {'bit_depth': manifest.bit_depth,
               'sequences': [{'subject_id': entry.subject_id,
                              'view': entry.view,
                              'n_frames': entry.n_frames,
                              'role': entry.role}
                             for entry in manifest.entries]}
    path = os.path.join(manifest.root, MANIFEST_NAME)
    with _lock_for(path):
        with open(path, 'w') as handle:
            json.dump(content, handle, indent=2, sort_keys=True)


def load_manifest(root):
    """Read and check the manifest of a dataset.

    Args:
        root (str): dataset root

    Returns:
        DatasetManifest: the manifest
    """
    path = os.path.join(root, MANIFEST_NAME)
    if not os.path.isfile(path):
        raise DataError("Missing dataset manifest " + path)
    with open(path) as handle:
        content = json.load(handle)

    try:
        entries = [SequenceEntry(**item) for item in content['sequences']]
    except (KeyError, TypeError) as error:
        raise DataError("Malformed manifest " + path + ": " + str(error))

    manifest = DatasetManifest(root=root, entries=entries,
                               bit_depth=content.get('bit_depth', 8))
    for entry in manifest.entries:
        meta_path = os.path.join(manifest.sequence_dir(entry),
                                 SEQUENCE_META_NAME)
        if not os.path.isfile(meta_path):
            raise DataError("Manifest " + path + " lists " + meta_path +
                            ", which does not exist")
    return manifest


def build_manifest(root, test_views=None, bit_depth=8):
    """Index the sequence directories found under a dataset root.

    Args:
        root (str): dataset root laid out as <subject>/<view>/
        test_views (iterable): views assigned the test role (default: none)
        bit_depth (int): quantization declared for the dataset

    Returns:
        DatasetManifest: the manifest (not yet written)
    """
    if not os.path.isdir(root):
        raise DataError("Dataset root " + str(root) + " is not a directory")
    test_views = set(test_views or ())
    entries = []
    for subject_id in sorted(os.listdir(root)):
        subject_dir = os.path.join(root, subject_id)
        if not os.path.isdir(subject_dir):
            continue
        for view in sorted(os.listdir(subject_dir)):
            meta_path = os.path.join(subject_dir, view, SEQUENCE_META_NAME)
            if not os.path.isfile(meta_path):
                continue
            with open(meta_path) as handle:
                meta = json.load(handle)
            role = 'test' if view in test_views else 'train'
            entries.append(SequenceEntry(subject_id, view, meta['n_frames'],
                                         role))
    return DatasetManifest(root=root, entries=entries, bit_depth=bit_depth)


def load_dataset(root, role=None, subjects=None):
    """Load the sequences of a dataset.

    Args:
        root (str): dataset root with a manifest
        role (str): only load 'train' or 'test' sequences (default: all)
        subjects (iterable): only load these subject ids (default: all)

    Returns:
        list: GaitSequence list in manifest order
    """
    manifest = load_manifest(root)
    if role is not None:
        validate_choice(role, "role", ROLES)
    wanted = set(subjects) if subjects is not None else None

    sequences = []
    for entry in manifest.entries:
        if role is not None and entry.role != role:
            continue
        if wanted is not None and entry.subject_id not in wanted:
            continue
        seq = load_sequence(manifest.sequence_dir(entry))
        if (seq.subject_id, seq.view) != (entry.subject_id, entry.view):
            raise DataError("Sequence " + manifest.sequence_dir(entry) +
                            " is labelled " + seq.name)
        sequences.append(seq)
    logger.info("Loaded %d sequences from %s", len(sequences), root)
    return sequences


def subject_walker_specs(n_subjects, seed=0, views=('v1', 'v2')):
    """Walker parameters of a synthetic dataset.

    Subjects get evenly spread gait frequencies between 0.8 and 1.2 Hz and
    three stride amplitudes; views differ in phase and body scale only.

    Args:
        n_subjects (int): number of subjects
        seed (int): dataset seed
        views (tuple): view tags

    Returns:
        dict: subject id -> {view: WalkerSpec}
    """
    validate_positive_int(n_subjects, "n_subjects")
    if n_subjects == 1:
        frequencies = [1.0]
    else:
        frequencies = np.linspace(0.8, 1.2, n_subjects).tolist()

    specs = {}
    for index, frequency in enumerate(frequencies):
        subject_id = 's%02d' % index
        specs[subject_id] = {
            view: WalkerSpec(gait_frequency=float(frequency),
                             stride_amplitude=0.4 + 0.1 * (index % 3),
                             phase_offset=view_index * math.pi / 3.0,
                             body_scale=1.0 - 0.05 * view_index,
                             seed=seed * 1000 + index)
            for view_index, view in enumerate(views)}
    return specs


def synth_dataset(out, n_subjects=4, n_frames=200, canvas=64, seed=0,
                  views=('v1', 'v2'), fps=20.0, bit_depth=8):
    """Write a synthetic multi-subject dataset with paired RGB footage.

    The first view of every subject is a training sequence, the others are
    test sequences.

    Args:
        out (str): dataset root to create
        n_subjects (int): number of subjects
        n_frames (int): frames per sequence
        canvas (int): canvas side in pixels
        seed (int): dataset seed
        views (tuple): view tags
        fps (float): frames per second
        bit_depth (int): quantization of U/V/A

    Returns:
        DatasetManifest: the written manifest
    """
    specs = subject_walker_specs(n_subjects, seed=seed, views=views)
    os.makedirs(out, exist_ok=True)
    entries = []
    for subject_id, view_specs in specs.items():
        for view_index, (view, spec) in enumerate(view_specs.items()):
            seq = synth_walker(spec, n_frames, canvas, fps=fps,
                               subject_id=subject_id, view=view)
            seq.rgb_frames = [synth_appearance(frame, spec.seed)
                              for frame in seq.frames]
            target = os.path.join(out, subject_id, view)
            if os.path.isdir(target):
                shutil.rmtree(target)
            save_sequence(seq, target, bit_depth=bit_depth)
            entries.append(SequenceEntry(subject_id, view, n_frames,
                                         'train' if view_index == 0
                                         else 'test'))
            logger.info("Wrote %s (%d frames)", seq.name, n_frames)

    manifest = DatasetManifest(root=out, entries=entries,
                               bit_depth=bit_depth)
    save_manifest(manifest)
    return manifest


def preprocess_dataset(root, out, canvas, test_views=None):
    """Crop and center every frame of a dataset onto a square canvas.

    RGB frames, when present, are shifted with the same transform by
    cropping them alongside an alpha-only proxy frame.

    Args:
        root (str): input dataset root
        out (str): output dataset root
        canvas (int): canvas side in pixels
        test_views (iterable): views given the test role when root has no
            manifest and is indexed from its sequence directories

    Returns:
        DatasetManifest: the manifest of the new dataset
    """
    if os.path.isfile(os.path.join(root, MANIFEST_NAME)):
        manifest = load_manifest(root)
    else:
        manifest = build_manifest(root, test_views)
        logger.info("Indexed %d sequences under %s", len(manifest.entries),
                    root)
    entries = []
    for entry in manifest.entries:
        seq = load_sequence(manifest.sequence_dir(entry))
        frames = [crop_and_center(frame, canvas) for frame in seq.frames]
        rgb_frames = None
        if seq.rgb_frames is not None:
            rgb_frames = [_crop_rgb_like(frame, rgb, canvas)
                          for frame, rgb in zip(seq.frames, seq.rgb_frames)]
        save_sequence(seq.with_frames(frames, rgb_frames),
                      os.path.join(out, entry.subject_id, entry.view),
                      bit_depth=manifest.bit_depth)
        entries.append(entry)

    new_manifest = DatasetManifest(root=out, entries=entries,
                                   bit_depth=manifest.bit_depth)
    save_manifest(new_manifest)
    return new_manifest


def _crop_rgb_like(frame, rgb, canvas):
    # carry each colour channel through the same crop as the pose frame
    channels = []
    for channel in range(3):
        proxy = IUVAFrame(np.zeros_like(frame.part_index),
                          np.clip(rgb[..., channel], 0.0, 1.0),
                          np.zeros_like(frame.v), frame.alpha)
        channels.append(crop_and_center(proxy, canvas).u)
    return np.stack(channels, axis=-1)
