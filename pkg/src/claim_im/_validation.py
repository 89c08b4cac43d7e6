"""Input validation helpers shared by the estimators and functional API."""

import zlib

import numpy as np

from .exceptions import ConfigurationError, InvalidSeedError


def check_probability(p, name="p"):
    p = float(p)
    if not 0.0 <= p <= 1.0 or np.isnan(p):
        raise ConfigurationError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_positive_int(value, name, allow_zero=False):
    if isinstance(value, (bool, np.bool_)) or int(value) != value:
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    lo = 0 if allow_zero else 1
    if value < lo:
        raise ConfigurationError(f"{name} must be >= {lo}, got {value}")
    return value


def check_seed_set(graph, seeds):
    """Return ``seeds`` as a frozenset after checking membership in ``graph``."""
    seeds = frozenset(int(s) for s in seeds)
    missing = [s for s in seeds if s not in graph]
    if missing:
        raise InvalidSeedError(f"seed nodes not in graph: {sorted(missing)[:10]}")
    return seeds


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``.

    Accepts None, an int, a SeedSequence or an existing Generator (returned as is).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (int, np.integer, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ConfigurationError(f"cannot build a random generator from {seed!r}")


def child_rng(seed, name):
    """Independent named stream derived from an integer root seed.

    Streams for distinct names never overlap and do not depend on the order in
    which they are requested.
    """
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, tag]))
