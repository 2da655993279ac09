"""
civ Helper Utilities
Contains parsing, labelling and timing helpers shared by the services, the CLI and the API
"""

import functools
import logging
import time
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from .errors import PreconditionError

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]


def parse_node_list(text: Optional[str]) -> List[str]:
    """
    Parse a comma-separated node list; the empty string is the empty set

    Args:
        text: Text such as "A,B" or ""

    Returns:
        List of node names in the given order, duplicates removed
    """
    if text is None:
        return []
    names: List[str] = []
    for part in text.split(","):
        name = part.strip()
        if name and name not in names:
            names.append(name)
    return names


def parse_tuple_label(text: str) -> Tuple[List[str], List[str]]:
    """
    Parse a tuple label of the form "Z=A,B;W=C"

    Args:
        text: Tuple label; the W part may be omitted or empty

    Returns:
        (z, w) node lists

    Raises:
        PreconditionError: If the label cannot be parsed
    """
    z: List[str] = []
    w: List[str] = []
    seen = set()
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        key = key.strip().upper()
        if not sep or key not in ("Z", "W") or key in seen:
            raise PreconditionError(f"Cannot parse tuple label '{text}'; expected 'Z=A,B;W=C'")
        seen.add(key)
        if key == "Z":
            z = parse_node_list(value)
        else:
            w = parse_node_list(value)
    if "Z" not in seen:
        raise PreconditionError(f"Tuple label '{text}' has no Z part")
    return z, w


def tuple_label(z: Iterable[str], w: Iterable[str]) -> str:
    """Format an already ordered tuple as "Z=A,B;W=C" """
    return f"Z={','.join(z)};W={','.join(w)}"


def make_rng(seed: SeedLike, *keys: int) -> np.random.Generator:
    """
    Build an independent generator for the stream (seed, *keys)

    Streams for distinct key tuples never overlap, so workers can draw in any order.
    """
    if isinstance(seed, np.random.SeedSequence):
        if keys:
            seed = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(keys))
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(keys)))


def measure_execution_time(func):
    """
    Decorator to measure execution time of a function

    Args:
        func: Function to measure

    Returns:
        Wrapped function that logs execution time
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.time()
        result = func(*args, **kwargs)
        end_time = time.time()

        logger.info(f"Function {func.__name__} executed in {end_time - start_time:.4f} seconds")
        return result

    return wrapper
