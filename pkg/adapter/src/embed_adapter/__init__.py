"""NDJSON embedding server: a stream-protocol provider for retrieval engines.

Two modes: ``model`` wraps a sentence-embedding checkpoint, ``deterministic``
serves seeded hash embeddings that are bit-reproducible across runs and
implementations (see PROTOCOL.md for the exact recipe).
"""

from .hashing import det_embed, fnv1a64
from .server import AdapterConfig, serve

__version__ = "0.1.0"
__all__ = ["AdapterConfig", "serve", "det_embed", "fnv1a64"]
