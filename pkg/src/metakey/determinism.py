"""Seed derivation and deterministic-mode switches.

Every stochastic component draws from a numpy Generator derived from the
experiment seed plus a stream tag, so any point in training or evaluation
can be reproduced without replaying the steps before it.  Setting
``METAKEY_DETERMINISTIC=1`` additionally forces deterministic torch kernels
and a fixed reduction order.
"""

import hashlib
import os

import numpy as np
import torch

# Stream tags keep independent consumers of the master seed decorrelated.
STREAM_INIT = 1
STREAM_EPISODES = 2
STREAM_VALIDATION = 3
STREAM_EVALUATION = 4
STREAM_SYNTH_GEOMETRY = 5
STREAM_SYNTH_NOISE = 6
STREAM_BASELINE_EPOCH = 7

DETERMINISTIC_ENV = "METAKEY_DETERMINISTIC"


def stable_hash(text: str) -> int:
    """Map a string (e.g. a day id) to a stable 63-bit integer."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_for(seed: int, *tags: int) -> np.random.Generator:
    """Derive an independent generator from the master seed and stream tags."""
    return np.random.default_rng([int(seed)] + [int(t) & 0x7FFFFFFFFFFFFFFF for t in tags])


def torch_generator(seed: int, *tags: int) -> torch.Generator:
    gen = torch.Generator(device="cpu")
    # Fold the tags into one 63-bit seed via the same numpy seed sequence.
    folded = int(np.random.SeedSequence([int(seed)] + [int(t) for t in tags]).generate_state(1)[0])
    gen.manual_seed(folded)
    return gen


def deterministic_mode_requested() -> bool:
    return os.environ.get(DETERMINISTIC_ENV, "").strip() in {"1", "true", "yes"}


def apply_deterministic_mode() -> None:
    """Force deterministic kernels when METAKEY_DETERMINISTIC=1.

    On CPU the training loop is already sequential with a fixed reduction
    order; this pins the remaining torch-level sources.
    """
    if deterministic_mode_requested():
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
