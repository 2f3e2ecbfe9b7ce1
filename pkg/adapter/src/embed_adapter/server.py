"""The request loop: one JSON object per line on stdin, one reply per line.

Requests:
    {"op": "info"}                              -> {"dim": int, "name": str}
    {"op": "embed", "id": int, "texts": [...]}  -> {"id": int, "vectors": [[...], ...]}

A malformed or unsupported request produces {"id": ..., "error": str} on the
same stream (id null when it could not be parsed) and the loop keeps serving.
The process exits cleanly when stdin closes. Single-threaded, one request in
flight, responses strictly in request order.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from .hashing import det_embed


@dataclass(frozen=True)
class AdapterConfig:
    mode: str = "deterministic"
    dim: int = 64
    seed: int = 0
    model_name: str = "sentence-transformers/all-MiniLM-L6-v2"

    def __post_init__(self):
        if self.mode not in ("deterministic", "model"):
            raise ValueError(f"mode must be deterministic or model, got {self.mode!r}")
        if self.mode == "deterministic" and self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


class _DeterministicBackend:
    def __init__(self, config: AdapterConfig):
        self.dim = config.dim
        self.seed = config.seed
        self.name = f"deterministic-fnv1a64(seed={config.seed})"

    def embed(self, texts):
        return [det_embed(t, self.seed, self.dim) for t in texts]


class _ModelBackend:
    def __init__(self, config: AdapterConfig):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(config.model_name)
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.name = config.model_name

    def embed(self, texts):
        vectors = self._model.encode(list(texts), normalize_embeddings=True)
        return [[float(x) for x in vec] for vec in vectors]


def _make_backend(config: AdapterConfig):
    if config.mode == "model":
        return _ModelBackend(config)
    return _DeterministicBackend(config)


def _reply(out, payload: dict) -> None:
    out.write(json.dumps(payload) + "\n")
    out.flush()


def _handle(backend, request: dict) -> dict:
    op = request.get("op")
    if op == "info":
        return {"dim": backend.dim, "name": backend.name}
    if op == "embed":
        request_id = request.get("id")
        texts = request.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            return {"id": request_id, "error": "embed needs 'texts': [str, ...]"}
        return {"id": request_id, "vectors": backend.embed(texts)}
    return {"id": request.get("id"), "error": f"unknown op {op!r}"}


def serve(config: AdapterConfig, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    backend = _make_backend(config)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request is not a JSON object")
        except ValueError as exc:
            _reply(stdout, {"id": None, "error": f"bad request: {exc}"})
            continue
        _reply(stdout, _handle(backend, request))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="embed-adapter", description=__doc__)
    parser.add_argument("--mode", choices=["deterministic", "model"], default="deterministic")
    parser.add_argument("--dim", type=int, default=64, help="vector size (deterministic mode)")
    parser.add_argument("--seed", type=int, default=0, help="hash seed (deterministic mode)")
    parser.add_argument("--model-name", default="sentence-transformers/all-MiniLM-L6-v2")
    args = parser.parse_args(argv)
    config = AdapterConfig(mode=args.mode, dim=args.dim, seed=args.seed, model_name=args.model_name)
    try:
        serve(config)
    except ImportError as exc:
        print(f"embed-adapter: model mode unavailable: {exc}", file=sys.stderr)
        return 1
    except (BrokenPipeError, KeyboardInterrupt):
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
