"""Process-level tuning for long training runs."""

from __future__ import annotations

import ctypes
import ctypes.util
import sys

# glibc mallopt parameter ids
_M_TRIM_THRESHOLD = -1
_M_TOP_PAD = -2
_M_MMAP_THRESHOLD = -3


def tune_allocator(mmap_threshold: int = 1 << 28) -> bool:
    """Keep large numpy temporaries on the heap instead of fresh mmap pages.

    Graph evaluation allocates and frees many arrays of a few MB per step;
    with glibc defaults each one is a new mapping and pays page faults on
    first touch, which roughly doubles step time. Returns False where
    ``mallopt`` is not available (non-glibc platforms); nothing changes then.
    """
    if not sys.platform.startswith("linux"):
        return False
    name = ctypes.util.find_library("c")
    if name is None:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    ok = mallopt(_M_MMAP_THRESHOLD, mmap_threshold)
    ok &= mallopt(_M_TRIM_THRESHOLD, 4 * mmap_threshold)
    ok &= mallopt(_M_TOP_PAD, mmap_threshold)
    return bool(ok)
