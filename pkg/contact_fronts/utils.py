"""Hashing helpers for seeds, stream keys and output digests."""

import hashlib
import json
import os
import struct

SEED_BITS = 64
SEED_LIMIT = 1 << SEED_BITS


def derive_seed(master_seed: int, *parts) -> int:
    """Derive a 64-bit child seed from a master seed and provenance parts.

    The parts are encoded as canonical JSON, so ints, floats and strings all
    hash reproducibly across platforms.

    Args:
        master_seed: Parent seed
        *parts: Labels and indices identifying the child (e.g. "trial", 17)

    Returns:
        Integer in [0, 2**64)
    """
    payload = json.dumps([int(master_seed), *parts], separators=(",", ":"))
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream_key(master_seed: int, kind: int, origin: int, target: int) -> int:
    """128-bit Philox key for one Poisson stream of the graphical construction."""
    packed = struct.pack("<QBqq", master_seed % SEED_LIMIT, kind, origin, target)
    return int.from_bytes(hashlib.blake2b(packed, digest_size=16).digest(), "little")


def calculate_file_hash(filepath):
    """Calculate SHA256 hash of a file."""
    if not os.path.exists(filepath):
        return None

    sha256 = hashlib.sha256()
    with open(filepath, "rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            sha256.update(chunk)
    return sha256.hexdigest()
