# services/random_state.py

import hashlib

import numpy as np

SEED_MODULUS = 2 ** 32


def derive_seed(*parts) -> int:
    """Stable sub-seed from any mix of labels and integers (independent of PYTHONHASHSEED)"""
    digest = hashlib.sha256('\x1f'.join(str(p) for p in parts).encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big') % SEED_MODULUS


def make_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
