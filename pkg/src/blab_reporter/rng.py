"""Named seeded random streams.

A report owns one `SeedStream`; each stage draws from its own substream so a
change in one stage's draw count never shifts another stage's choices.
"""
import hashlib
import random

SEED_MASK = (1 << 64) - 1


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from arbitrary parts (used when no --seed is given)"""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class SeedStream:
    def __init__(self, seed: int):
        if not 0 <= seed <= SEED_MASK:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed

    def stream(self, name: str) -> random.Random:
        """Fresh generator for a named substream"""
        return random.Random(derive_seed(self.seed, name))
