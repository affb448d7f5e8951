"""Versioned checkpoint container shared by the three training stages."""

from __future__ import annotations

import hashlib
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import torch

from tryon.errors import DataError

FORMAT_VERSION = 1
STAGES = ("ae", "ac", "vton")


def weights_digest(state_dict: dict[str, torch.Tensor]) -> str:
    """sha256 over parameter names, dtypes, shapes and raw bytes in key order."""
    h = hashlib.sha256()
    for key in sorted(state_dict):
        t = state_dict[key].detach().cpu().contiguous()
        h.update(key.encode())
        h.update(str(t.dtype).encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.numpy().tobytes() if t.dtype != torch.bfloat16 else t.float().numpy().tobytes())
    return h.hexdigest()


@dataclass
class Checkpoint:
    stage: str
    state_dict: dict[str, torch.Tensor]
    config: dict[str, Any]
    seed: int
    history: list[dict[str, float]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)
    # frozen sub-networks carried along for inference, e.g. {"ae": state_dict}
    frozen: dict[str, dict[str, torch.Tensor]] = field(default_factory=dict)
    created: float = field(default_factory=time.time)
    format_version: int = FORMAT_VERSION

    @property
    def epochs(self) -> int:
        return len(self.history)

    def weights_digest(self) -> str:
        return weights_digest(self.state_dict)

    def digest(self) -> str:
        """Content digest; the creation timestamp is deliberately excluded."""
        h = hashlib.sha256()
        meta = {"stage": self.stage, "config": self.config, "seed": self.seed, "history": self.history,
                "metadata": self.metadata, "format_version": self.format_version}
        h.update(json.dumps(meta, sort_keys=True, default=str).encode())
        h.update(self.weights_digest().encode())
        for name in sorted(self.frozen):
            h.update(name.encode())
            h.update(weights_digest(self.frozen[name]).encode())
        return h.hexdigest()

    def save(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        payload = {
            "format_version": self.format_version,
            "stage": self.stage,
            "state_dict": self.state_dict,
            "config": self.config,
            "seed": self.seed,
            "history": self.history,
            "metadata": self.metadata,
            "frozen": self.frozen,
            "created": self.created,
        }
        buf = io.BytesIO()
        torch.save(payload, buf)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(buf.getvalue())
        except OSError as exc:
            raise DataError(f"cannot write checkpoint {path}: {exc}") from exc
        return path

    @classmethod
    def load(cls, path: str | os.PathLike, expect_stage: str | None = None) -> "Checkpoint":
        path = Path(path)
        try:
            payload = torch.load(path, map_location="cpu", weights_only=True)
        except FileNotFoundError:
            raise DataError(f"checkpoint not found: {path}") from None
        except Exception as exc:  # torch raises a variety of unpickling errors
            raise DataError(f"unreadable checkpoint {path}: {exc}") from exc
        if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
            raise DataError(f"unreadable checkpoint {path}: unsupported format")
        if payload["stage"] not in STAGES:
            raise DataError(f"unreadable checkpoint {path}: unknown stage {payload['stage']!r}")
        if expect_stage is not None and payload["stage"] != expect_stage:
            raise DataError(f"{path} is a {payload['stage']!r} checkpoint, expected {expect_stage!r}")
        return cls(
            stage=payload["stage"],
            state_dict=payload["state_dict"],
            config=payload["config"],
            seed=payload["seed"],
            history=payload["history"],
            metadata=payload["metadata"],
            frozen=payload.get("frozen", {}),
            created=payload["created"],
        )
