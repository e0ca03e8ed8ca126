"""Functions to encode and decode raw IUVA frame files.

This module contains the low-level part of the dataset I/O: quantizing the
real-valued U/V/A channels to 8 or 16 bit integers, packing the four channels
into one 4-channel image, and reading/writing those images with OpenCV.

The best way to use this module is through `gaitdata.save_sequence` and
`gaitdata.load_sequence`, which take care of file naming, sequence metadata
and validation. The functions here work on plain numpy arrays.

Channel layout in the file (OpenCV stores BGRA):
- red: part index I, stored as the raw integer (0..24)
- green: U, quantized
- blue: V, quantized
- alpha: A, quantized

The (helper) functions contained in this module are the following:
- validate_bit_depth(bit_depth):
- get_max_value(bit_depth):
- quantize_channel(values, bit_depth):
- dequantize_channel(values, bit_depth):
- pack_channels(part_index, u, v, alpha, bit_depth):
- unpack_channels(raw, bit_depth):
- write_frame_file(path, part_index, u, v, alpha, bit_depth):
- read_frame_file(path, bit_depth):
- write_rgb_file(path, rgb):
- read_rgb_file(path):
"""

import os

import cv2
import numpy as np

from gaitswap.errors import DataError


def validate_bit_depth(bit_depth=None):
    """Validate the `bit_depth` parameter.

    The bit depth can be None (to use the default of 8 bit), 8 or 16.

    Args:
        bit_depth (int): None, 8 or 16

    Returns:
        int: the bit depth to use
    """
    if bit_depth is None:
        bit_depth = 8

    if isinstance(bit_depth, bool) or not isinstance(bit_depth, int):
        raise TypeError("bit_depth must be an integer")
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16, got " + str(bit_depth))

    return bit_depth


def get_max_value(bit_depth):
    """Largest integer code for a bit depth.

    Args:
        bit_depth (int): 8 or 16

    Returns:
        int: 255 or 65535
    """
    return (1 << validate_bit_depth(bit_depth)) - 1


def _dtype(bit_depth):
    return np.uint8 if bit_depth == 8 else np.uint16


def quantize_channel(values, bit_depth):
    """Quantize a map in [0, 1] to integer codes.

    Args:
        values (np.ndarray): real map in [0, 1]
        bit_depth (int): 8 or 16

    Returns:
        np.ndarray: integer codes (uint8 or uint16)
    """
    max_value = get_max_value(bit_depth)
    codes = np.rint(np.clip(values, 0.0, 1.0) * max_value)
    return codes.astype(_dtype(bit_depth))


def dequantize_channel(values, bit_depth):
    """Map integer codes back to [0, 1].

    Args:
        values (np.ndarray): integer codes
        bit_depth (int): 8 or 16

    Returns:
        np.ndarray: float32 map in [0, 1]
    """
    max_value = get_max_value(bit_depth)
    return values.astype(np.float32) / np.float32(max_value)


def pack_channels(part_index, u, v, alpha, bit_depth):
    """Pack the four IUVA channels into one BGRA array.

    Args:
        part_index (np.ndarray): integer part-index map
        u (np.ndarray): U map in [0, 1]
        v (np.ndarray): V map in [0, 1]
        alpha (np.ndarray): alpha map in [0, 1]
        bit_depth (int): 8 or 16

    Returns:
        np.ndarray: H x W x 4 integer array in OpenCV channel order
    """
    bit_depth = validate_bit_depth(bit_depth)
    raw = np.empty(part_index.shape + (4,), dtype=_dtype(bit_depth))
    raw[..., 0] = quantize_channel(v, bit_depth)
    raw[..., 1] = quantize_channel(u, bit_depth)
    raw[..., 2] = part_index
    raw[..., 3] = quantize_channel(alpha, bit_depth)
    return raw


def unpack_channels(raw, bit_depth):
    """Split a BGRA array into the four IUVA channels.

    Args:
        raw (np.ndarray): H x W x 4 integer array in OpenCV channel order
        bit_depth (int): 8 or 16

    Returns:
        tuple: part index (uint8), U, V and alpha (float32)
    """
    bit_depth = validate_bit_depth(bit_depth)
    part_index = raw[..., 2].astype(np.uint8)
    u = dequantize_channel(raw[..., 1], bit_depth)
    v = dequantize_channel(raw[..., 0], bit_depth)
    alpha = dequantize_channel(raw[..., 3], bit_depth)
    return part_index, u, v, alpha


def write_frame_file(path, part_index, u, v, alpha, bit_depth):
    """Write one IUVA frame as a 4-channel PNG.

    Args:
        path (str): destination file
        part_index (np.ndarray): integer part-index map
        u (np.ndarray): U map in [0, 1]
        v (np.ndarray): V map in [0, 1]
        alpha (np.ndarray): alpha map in [0, 1]
        bit_depth (int): 8 or 16

    Returns:
        None
    """
    raw = pack_channels(part_index, u, v, alpha, bit_depth)
    if not cv2.imwrite(str(path), raw):
        raise DataError("Could not write frame file " + str(path))


def read_frame_file(path, bit_depth):
    """Read one IUVA frame written by `write_frame_file`.

    Args:
        path (str): frame file
        bit_depth (int): 8 or 16, as declared for the sequence

    Returns:
        tuple: part index, U, V and alpha maps
    """
    if not os.path.isfile(path):
        raise DataError("Missing frame file " + str(path))

    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None or raw.ndim != 3 or raw.shape[2] != 4:
        raise DataError("Not a 4-channel frame file: " + str(path))
    if raw.dtype != _dtype(validate_bit_depth(bit_depth)):
        raise DataError("Frame file " + str(path) + " is " +
                        str(raw.dtype) + ", expected " + str(bit_depth) +
                        " bit")
    return unpack_channels(raw, bit_depth)


def write_rgb_file(path, rgb):
    """Write an RGB frame in [0, 1] as an 8-bit PNG.

    Args:
        path (str): destination file
        rgb (np.ndarray): H x W x 3 real image in [0, 1]

    Returns:
        None
    """
    codes = quantize_channel(rgb, 8)
    if not cv2.imwrite(str(path),
                       np.ascontiguousarray(codes[..., ::-1])):
        raise DataError("Could not write RGB file " + str(path))


def read_rgb_file(path):
    """Read an RGB frame written by `write_rgb_file`.

    Args:
        path (str): RGB file

    Returns:
        np.ndarray: H x W x 3 float32 image in [0, 1]
    """
    if not os.path.isfile(path):
        raise DataError("Missing RGB file " + str(path))

    raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raw is None:
        raise DataError("Unreadable RGB file " + str(path))
    return dequantize_channel(np.ascontiguousarray(raw[..., ::-1]), 8)
