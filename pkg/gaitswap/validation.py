"""Argument validation helpers.

Small checks shared by all modules. Each one raises a `TypeError` when the
argument has the wrong type and a `ValueError` when it is out of range, and
returns nothing otherwise.

The following functions are present in this module:
- validate_positive_int(value, name)
- validate_non_negative_int(value, name)
- validate_positive_number(value, name)
- validate_non_negative_number(value, name)
- validate_unit_interval(array, name)
- validate_part_indices(array, name, max_index)
- validate_canvas(canvas, multiple_of)
- validate_choice(value, name, choices)
"""

import numbers

import numpy as np


def validate_positive_int(value, name):
    """Validate a strictly positive integer.

    Args:
        value (int): the value to check
        name (str): argument name used in the error message

    Returns:
        None
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(name + " must be an integer")
    if value <= 0:
        raise ValueError(name + " must be greater than zero, got " +
                         str(value))


def validate_non_negative_int(value, name):
    """Validate an integer that may be zero.

    Args:
        value (int): the value to check
        name (str): argument name used in the error message

    Returns:
        None
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(name + " must be an integer")
    if value < 0:
        raise ValueError(name + " must not be negative, got " + str(value))


def validate_positive_number(value, name):
    """Validate a finite, strictly positive real number.

    Args:
        value (int/float): the value to check
        name (str): argument name used in the error message

    Returns:
        None
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(name + " must be int or float")
    if not np.isfinite(value) or value <= 0:
        raise ValueError(name + " must be finite and greater than zero, " +
                         "got " + str(value))


def validate_non_negative_number(value, name):
    """Validate a finite real number that may be zero.

    Args:
        value (int/float): the value to check
        name (str): argument name used in the error message

    Returns:
        None
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(name + " must be int or float")
    if not np.isfinite(value) or value < 0:
        raise ValueError(name + " must be finite and non-negative, got " +
                         str(value))


def validate_unit_interval(array, name):
    """Validate that every entry of an array lies within [0, 1].

    Args:
        array (np.ndarray): real-valued map
        name (str): channel name used in the error message

    Returns:
        None
    """
    if not isinstance(array, np.ndarray):
        raise TypeError(name + " must be a numpy array")
    if array.size and (not np.all(np.isfinite(array)) or
                       array.min() < 0 or array.max() > 1):
        raise ValueError(name + " must lie within [0, 1]")


def validate_part_indices(array, name, max_index):
    """Validate an integer part-index map.

    Args:
        array (np.ndarray): integer map
        name (str): channel name used in the error message
        max_index (int): largest allowed part index

    Returns:
        None
    """
    if not isinstance(array, np.ndarray):
        raise TypeError(name + " must be a numpy array")
    if not np.issubdtype(array.dtype, np.integer):
        raise TypeError(name + " must hold integers, got " + str(array.dtype))
    if array.size and (array.min() < 0 or array.max() > max_index):
        raise ValueError(name + " must lie within {0.." + str(max_index) +
                         "}")


def validate_canvas(canvas, multiple_of=1):
    """Validate a square canvas size.

    Args:
        canvas (int): canvas side in pixels
        multiple_of (int): the canvas must be divisible by this factor

    Returns:
        None
    """
    validate_positive_int(canvas, "canvas")
    if canvas % multiple_of:
        raise ValueError("canvas must be divisible by " + str(multiple_of) +
                         ", got " + str(canvas))


def validate_choice(value, name, choices):
    """Validate that a value is one of a fixed set of options.

    Args:
        value (object): the value to check
        name (str): argument name used in the error message
        choices (iterable): the allowed values

    Returns:
        None
    """
    choices = tuple(choices)
    if value not in choices:
        raise ValueError("Unknown " + name + ": " + repr(value) +
                         " (expected one of " + ", ".join(map(str, choices)) +
                         ")")
