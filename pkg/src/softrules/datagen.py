"""Synthetic regression benchmark generators.

Both problems draw inputs uniformly from documented ranges and, when noise
is on, add Gaussian noise produced by the Marsaglia polar transform of the
same seeded uniform stream — an explicit algorithm, so outputs are
bit-stable wherever the underlying PCG64 uniforms are.
"""

from __future__ import annotations

import math

import numpy as np

from .data import Dataset


def _polar_gaussian(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals via the polar (Marsaglia) rejection method."""
    out = np.empty(size)
    filled = 0
    while filled < size:
        u = 2.0 * rng.random() - 1.0
        v = 2.0 * rng.random() - 1.0
        s = u * u + v * v
        if s >= 1.0 or s == 0.0:
            continue
        factor = math.sqrt(-2.0 * math.log(s) / s)
        out[filled] = u * factor
        filled += 1
        if filled < size:
            out[filled] = v * factor
            filled += 1
    return out


def friedman1_signal(X: np.ndarray) -> np.ndarray:
    """Noise-free response; only the first five of ten inputs matter."""
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def gen_friedman1(n: int, seed: int, noise: bool = True) -> Dataset:
    """Ten uniform(0, 1) inputs; unit-variance Gaussian noise when on.

    Inputs are drawn as one row-major block, then the noise vector, so the
    draw order is part of the contract.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.random((n, 10))
    y = friedman1_signal(X)
    if noise:
        y = y + _polar_gaussian(rng, n)
    names = tuple(f"x{i}" for i in range(1, 11))
    return Dataset(X, names, y, "continuous")


def friedman2_signal(X: np.ndarray) -> np.ndarray:
    x1, x2, x3, x4 = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
    return np.sqrt(x1 ** 2 + (x2 * x3 - 1.0 / (x2 * x4)) ** 2)


def gen_friedman2(n: int, seed: int, noise: bool = True) -> Dataset:
    """Four uniform inputs on [0,100], [40pi,560pi], [0,1], [1,11]; noise sd 125.

    Inputs are drawn column by column in order, then the noise vector.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x1 = 100.0 * rng.random(n)
    x2 = 40.0 * np.pi + (560.0 - 40.0) * np.pi * rng.random(n)
    x3 = rng.random(n)
    x4 = 1.0 + 10.0 * rng.random(n)
    X = np.column_stack([x1, x2, x3, x4])
    y = friedman2_signal(X)
    if noise:
        y = y + 125.0 * _polar_gaussian(rng, n)
    names = ("x1", "x2", "x3", "x4")
    return Dataset(X, names, y, "continuous")


def generate(problem: str, n: int, seed: int, noise: bool = True) -> Dataset:
    """Dispatch by problem name ('friedman1' or 'friedman2')."""
    if problem == "friedman1":
        return gen_friedman1(n, seed, noise)
    if problem == "friedman2":
        return gen_friedman2(n, seed, noise)
    raise ValueError(f"unknown problem {problem!r}")
