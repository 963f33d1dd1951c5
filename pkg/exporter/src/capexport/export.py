"""Score export: embedding-based caption metrics in the wide-CSV score schema.

The exporter is a leaf component: it reads caption datasets (the normalized
JSONL schema) and writes score files that the evaluation toolkit ingests
verbatim — wide CSV with provenance header comments, plus a
``<out>.meta.json`` side-file recording model identifiers, revisions and the
dataset hash. Files are written atomically (temp + rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .backends import EmbeddingBackend

__all__ = [
    "ExportError",
    "ExportJob",
    "ExportResult",
    "SUPPORTED_METRICS",
    "REFERENCE_FREE_METRICS",
    "export_scores",
]


class ExportError(ValueError):
    pass


# metric name -> (declared range, weight for clipped-cosine scaling)
SUPPORTED_METRICS: dict[str, tuple[float, float]] = {
    "CLIPScore": (0.0, 2.5),
    "RefCLIPScore": (0.0, 2.5),
    "PACScore": (0.0, 2.5),
    "RefPACScore": (0.0, 2.5),
    "BLIP2Score": (-1.0, 1.0),
    "MPNetScore": (-1.0, 1.0),
    "Polos": (0.0, 1.0),
}

# metrics whose value depends only on the candidate and the image
REFERENCE_FREE_METRICS = frozenset({"CLIPScore", "PACScore", "BLIP2Score"})

_CLIP_WEIGHT = 2.5
_PAC_WEIGHT = 2.0


@dataclass(frozen=True)
class ExportJob:
    dataset_path: str | Path
    metrics: tuple[str, ...]
    output_path: str | Path
    device: str = "cpu"
    batch_size: int = 32

    def __post_init__(self):
        unknown = [m for m in self.metrics if m not in SUPPORTED_METRICS]
        if unknown:
            raise ExportError(
                f"unsupported metric(s) {unknown}; "
                f"supported: {sorted(SUPPORTED_METRICS)}"
            )
        if not self.metrics:
            raise ExportError("at least one metric is required")


@dataclass(frozen=True)
class ExportResult:
    output_path: Path
    meta_path: Path
    instance_ids: tuple[str, ...]
    # metric -> instance_id -> value
    scores: dict = field(default_factory=dict)
    # RefCLIPScore/RefPACScore components: metric -> instance_id ->
    # (image_component, reference_component)
    intermediates: dict = field(default_factory=dict)


def _read_dataset(path: Path) -> list[dict]:
    records = []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("instance_id", "image_id", "candidate"):
                if key not in rec:
                    raise ExportError(f"{path}:{lineno}: missing field {key!r}")
            if rec["instance_id"] in seen:
                raise ExportError(
                    f"{path}:{lineno}: duplicate instance_id {rec['instance_id']!r}"
                )
            seen.add(rec["instance_id"])
            records.append(rec)
    if not records:
        raise ExportError(f"{path}: no records")
    return records


def _harmonic(a: float, b: float) -> float:
    return 0.0 if a + b == 0.0 else 2.0 * a * b / (a + b)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_scores(
    job: ExportJob,
    backends: Mapping[str, EmbeddingBackend],
) -> ExportResult:
    """Compute the requested metrics and write the score file + meta side-file.

    ``backends`` maps each requested metric to its embedding backend; every
    requested metric must be configured.
    """
    missing = [m for m in job.metrics if m not in backends]
    if missing:
        raise ExportError(f"no backend configured for metric(s) {missing}")

    dataset_path = Path(job.dataset_path)
    records = _read_dataset(dataset_path)
    ref_based = [m for m in job.metrics if m not in REFERENCE_FREE_METRICS]
    if ref_based:
        for rec in records:
            if not rec.get("references"):
                raise ExportError(
                    f"instance {rec['instance_id']!r} has no references but "
                    f"reference-based metric(s) {ref_based} were requested"
                )

    ids = tuple(rec["instance_id"] for rec in records)
    scores: dict[str, dict[str, float]] = {m: {} for m in job.metrics}
    intermediates: dict[str, dict[str, tuple[float, float]]] = {}

    for metric in job.metrics:
        backend = backends[metric]
        cand_emb = backend.embed_texts([r["candidate"] for r in records])
        image_emb = backend.embed_images([r["image_id"] for r in records])
        image_sim = np.sum(cand_emb * image_emb, axis=1)

        ref_max = None
        if metric not in REFERENCE_FREE_METRICS:
            ref_max = np.empty(len(records))
            for k, rec in enumerate(records):
                refs = backend.embed_texts(list(rec["references"]))
                ref_max[k] = float(np.max(refs @ cand_emb[k]))

        for k, rec in enumerate(records):
            iid = rec["instance_id"]
            img = float(image_sim[k])
            if metric == "CLIPScore":
                value = _CLIP_WEIGHT * max(img, 0.0)
            elif metric == "PACScore":
                value = _PAC_WEIGHT * max(img, 0.0)
            elif metric == "BLIP2Score":
                value = img
            elif metric == "MPNetScore":
                value = float(ref_max[k])
            elif metric == "Polos":
                value = min(1.0, max(0.0, (1.0 + (img + float(ref_max[k])) / 2.0) / 2.0))
            else:  # RefCLIPScore / RefPACScore
                w = _CLIP_WEIGHT if metric == "RefCLIPScore" else _PAC_WEIGHT
                img_component = w * max(img, 0.0)
                ref_component = w * max(float(ref_max[k]), 0.0)
                value = _harmonic(img_component, ref_component)
                intermediates.setdefault(metric, {})[iid] = (
                    img_component, ref_component)
            lo, hi = SUPPORTED_METRICS[metric]
            scores[metric][iid] = min(hi, max(lo, value))

    out = Path(job.output_path)
    lines = [f"# exporter: capexport; device: {job.device}; "
             f"batch_size: {job.batch_size}"]
    for metric in job.metrics:
        lo, hi = SUPPORTED_METRICS[metric]
        b = backends[metric]
        lines.append(f"# metric: {metric}; model: {b.model_id}; "
                     f"revision: {b.revision}; range: [{lo}, {hi}]")
    lines.append(",".join(["instance_id", *job.metrics]))
    for iid in ids:
        row = [iid] + [format(scores[m][iid], ".17g") for m in job.metrics]
        lines.append(",".join(row))
    _atomic_write(out, "\n".join(lines) + "\n")

    meta_path = out.with_name(out.name + ".meta.json")
    meta = {
        "dataset": str(dataset_path),
        "dataset_sha256": hashlib.sha256(dataset_path.read_bytes()).hexdigest(),
        "n_instances": len(ids),
        "metrics": list(job.metrics),
        "models": {
            m: {"model_id": backends[m].model_id,
                "revision": backends[m].revision}
            for m in job.metrics
        },
        "device": job.device,
        "batch_size": job.batch_size,
    }
    _atomic_write(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")

    return ExportResult(
        output_path=out,
        meta_path=meta_path,
        instance_ids=ids,
        scores=scores,
        intermediates=intermediates,
    )
