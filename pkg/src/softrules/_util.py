"""Small shared helpers: seed derivation and an order-preserving parallel map."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labeled parts (ints, strings)."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map preserving input order; threaded when threads > 1.

    Workers must be pure functions of their item so results are identical
    at any thread count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
