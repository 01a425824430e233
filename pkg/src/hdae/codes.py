"""Latent code containers and their on-disk formats."""

import json
import struct
from dataclasses import dataclass, field

import torch


@dataclass
class HierarchicalCode:
    """Ordered per-level semantic vectors. Level 1 = highest resolution."""

    levels: list  # list of 1-D float tensors, all of dimension d

    def __post_init__(self):
        if len(self.levels) < 1:
            raise ValueError("need at least one level")
        dims = {int(v.numel()) for v in self.levels}
        if len(dims) != 1:
            raise ValueError(f"all levels must share one dimension, got {sorted(dims)}")
        self.levels = [v.reshape(-1).float() for v in self.levels]

    @property
    def L(self) -> int:
        return len(self.levels)

    @property
    def d(self) -> int:
        return int(self.levels[0].numel())

    def flatten(self) -> torch.Tensor:
        return torch.cat(self.levels)

    @classmethod
    def from_flat(cls, flat: torch.Tensor, L: int, d: int) -> "HierarchicalCode":
        flat = flat.reshape(-1)
        if flat.numel() != L * d:
            raise ValueError(f"flat length {flat.numel()} != L*d = {L * d}")
        return cls(levels=[flat[i * d:(i + 1) * d].clone() for i in range(L)])

    def to_json(self, model_hash: str = "") -> str:
        return json.dumps({
            "levels": [v.tolist() for v in self.levels],
            "L": self.L,
            "d": self.d,
            "model_hash": model_hash,
        })

    @classmethod
    def from_json(cls, text: str) -> "HierarchicalCode":
        obj = json.loads(text)
        return cls(levels=[torch.tensor(v, dtype=torch.float32) for v in obj["levels"]])


@dataclass
class EncodedImage:
    """The (semantic code, noise map) pair produced by a full encode."""

    code: HierarchicalCode
    xT: torch.Tensor               # (C, H, W)
    fingerprint: str = ""          # content hash of the source image

    def __post_init__(self):
        if self.xT.ndim != 3:
            raise ValueError(f"xT must be (C, H, W), got shape {tuple(self.xT.shape)}")


_MAGIC = b"HDNM"  # raw noise-map container


def save_noise_map(xT: torch.Tensor, path):
    """Raw float32 container with a fixed-size header {C, H, W}."""
    x = xT.detach().float().contiguous()
    if x.ndim != 3:
        raise ValueError("noise map must be (C, H, W)")
    c, h, w = x.shape
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<III", c, h, w))
        f.write(x.numpy().tobytes())


def load_noise_map(path) -> torch.Tensor:
    import numpy as np
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a noise-map container")
        c, h, w = struct.unpack("<III", f.read(12))
        buf = f.read(4 * c * h * w)
    arr = np.frombuffer(buf, dtype="<f4").reshape(c, h, w)
    return torch.from_numpy(arr.copy())
