"""Embedding backends.

A backend turns texts and image identifiers into unit-norm embedding vectors
in a joint space. The exporter is backend-agnostic: any object satisfying
:class:`EmbeddingBackend` works. The shipped :class:`DeterministicBackend`
derives embeddings from a seeded hash of the input, so exports are
bit-reproducible without model downloads — it is the backend used by the test
suite and a stand-in wherever real checkpoints are unavailable. Real model
backends (CLIP, BLIP-2, MPNet, ...) plug in by implementing the same protocol
and reporting their checkpoint id and revision for the provenance side-file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

__all__ = ["EmbeddingBackend", "DeterministicBackend", "resolve_backend"]


@runtime_checkable
class EmbeddingBackend(Protocol):
    model_id: str
    revision: str

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        """(len(texts), dim) array of unit-norm embeddings."""
        ...

    def embed_images(self, image_ids: Sequence[str]) -> np.ndarray:
        """(len(image_ids), dim) array of unit-norm embeddings."""
        ...


@dataclass
class DeterministicBackend:
    """Hash-seeded pseudo-embeddings; identical input -> identical vector."""

    dim: int = 64
    seed: int = 0
    model_id: str = "deterministic-hash"
    revision: str = "v1"

    def _embed_one(self, kind: str, text: str) -> np.ndarray:
        digest = hashlib.sha256(
            f"{self.seed}:{kind}:{text}".encode("utf-8")
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._embed_one("text", t) for t in texts]) \
            if texts else np.zeros((0, self.dim))

    def embed_images(self, image_ids: Sequence[str]) -> np.ndarray:
        return np.stack([self._embed_one("image", i) for i in image_ids]) \
            if image_ids else np.zeros((0, self.dim))


_BACKENDS = {
    "deterministic": DeterministicBackend,
}


def resolve_backend(name: str, **kwargs) -> EmbeddingBackend:
    try:
        factory = _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None
    return factory(**kwargs)
