"""Detect the compute device.

Contains the detect_device function, which picks the torch device the
networks run on, and resolve_device, which validates a user request.
"""
import warnings

import torch


def get_list_of_devices():
    """List of known device kinds.

    Maps the device strings accepted on the command line to the torch
    backend check that tells whether they can be used.

    Returns:
        dict: device name -> availability check (callable returning bool)
    """
    known_devices = {'cpu': lambda: True,
                     'cuda': torch.cuda.is_available,
                     'mps': _mps_available}
    return known_devices


def _mps_available():
    backend = getattr(torch.backends, "mps", None)
    return bool(backend is not None and backend.is_available())


def detect_device(prefer_accelerator=False):
    """Detect the device to run on.

    Desk-scale runs default to the CPU, since CPU kernels give bitwise
    reproducible loss curves. With `prefer_accelerator=True` the first
    available accelerator is returned instead.

    Args:
        prefer_accelerator (bool): pick CUDA/MPS when available

    Returns:
        torch.device: the device to use
    """
    if prefer_accelerator:
        known_devices = get_list_of_devices()
        for name in ('cuda', 'mps'):
            if known_devices[name]():
                return torch.device(name)
        warnings.warn("No accelerator found, falling back to the CPU")
    return torch.device('cpu')


def resolve_device(name):
    """Turn a device name into a torch device.

    Args:
        name (str): 'auto', 'cpu', 'cuda' or 'mps'

    Returns:
        torch.device: the requested device (CPU if unavailable)
    """
    if name == 'auto':
        return detect_device(prefer_accelerator=True)

    known_devices = get_list_of_devices()
    if name not in known_devices:
        raise ValueError("Unknown device: " + str(name))
    if not known_devices[name]():
        warnings.warn("Device " + name + " is not available, using the CPU")
        return torch.device('cpu')
    return torch.device(name)
