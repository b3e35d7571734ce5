""" Seed derivation """

import numpy as np
import torch

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """ One splitmix64 output for the given 64-bit state """
    z = (state + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """
    Child seed for (master, i, j, ...): splitmix64 applied along the path,
    each step mixing the previous output with the next index.
    Result fits in 63 bits so torch and numpy accept it.
    """
    state = master & _MASK
    for index in path:
        state = splitmix64(state ^ splitmix64(index & _MASK))
    return splitmix64(state) >> 1


def numpy_rng(master: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *path))


def torch_generator(master: int, *path: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(derive_seed(master, *path))
    return generator
