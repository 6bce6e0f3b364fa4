r"""Seeded random streams with per-trial substreams.

The master seed and the trial index jointly determine every draw, so a
campaign may be sharded across any number of workers and still produce
bit-identical results: worker layout never touches the stream derivation.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator for a 64-bit master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent substream for one Monte-Carlo trial.

    Built from ``SeedSequence(seed, spawn_key=(trial,))`` so the stream
    depends only on (seed, trial), not on which worker runs the trial.
    A nonzero ``stream`` derives a fresh substream for the same trial,
    used when a degenerate draw must be resampled.
    """
    key = (trial,) if stream == 0 else (trial, stream)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def complex_gaussian(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    r"""Circularly-symmetric complex Gaussian, per-entry variance ``var``.

    Entries are (x + 1j*y) * sqrt(var/2) with x, y standard normal, so
    E|entry|^2 = var.
    """
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(var / 2.0)
