"""Datasets: a synthetic attributed-shapes generator and an image-folder loader.

The shapes generator records every ground-truth factor per image, so the
editing experiments have labels without any external annotation source.
"""

import colorsys
import math
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image


FACTOR_NAMES = ("shape", "hue", "bg_brightness", "size", "pos_x", "pos_y", "rotation")


@dataclass
class SyntheticShapesSpec:
    canvas: int = 32
    count: int = 1000
    seed: int = 0
    num_shape_classes: int = 3              # 0=circle, 1=square, 2=triangle
    hue_range: tuple = (0.0, 0.66)          # avoids the circular wrap at red
    bg_brightness_range: tuple = (0.1, 0.9)
    size_range: tuple = (0.25, 0.45)        # as a fraction of the half-canvas
    pos_range: tuple = (0.35, 0.65)         # center position, canvas fraction
    rotation_range: tuple = (0.0, 2.0 * math.pi)
    constant_factors: tuple = ()            # names allowed to have min == max

    def __post_init__(self):
        if self.canvas < 4 or self.count < 0:
            raise ValueError("canvas must be >= 4 and count >= 0")
        ranges = {
            "hue": self.hue_range, "bg_brightness": self.bg_brightness_range,
            "size": self.size_range, "pos_x": self.pos_range,
            "pos_y": self.pos_range, "rotation": self.rotation_range,
        }
        for name, (lo, hi) in ranges.items():
            if hi < lo:
                raise ValueError(f"{name}: range max < min")
            if hi == lo and name not in self.constant_factors:
                raise ValueError(f"{name}: degenerate range requires constant_factors flag")


def _shape_mask(shape_cls, cx, cy, r, rot, canvas, supersample=4):
    """Antialiased occupancy mask in [0,1], rendered on a supersampled grid."""
    n = canvas * supersample
    coords = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(coords, coords)
    dx, dy = X - cx, Y - cy
    # rotate into the shape frame
    c, s = math.cos(rot), math.sin(rot)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    if shape_cls == 0:          # circle
        inside = u * u + v * v <= r * r
    elif shape_cls == 1:        # square
        inside = np.maximum(np.abs(u), np.abs(v)) <= r
    else:                       # equilateral triangle, vertex up, circumradius r
        angles = [math.pi / 2 + k * 2 * math.pi / 3 for k in range(3)]
        verts = [(r * math.cos(a), r * math.sin(a)) for a in angles]
        inside = np.ones_like(u, dtype=bool)
        for i in range(3):
            x1, y1 = verts[i]
            x2, y2 = verts[(i + 1) % 3]
            inside &= (x2 - x1) * (v - y1) - (y2 - y1) * (u - x1) >= 0
    mask = inside.astype(np.float32).reshape(canvas, supersample, canvas, supersample)
    return mask.mean(axis=(1, 3))


def generate_shapes(spec: SyntheticShapesSpec):
    """Render shapes and return (images, factors).

    images: (N, 3, canvas, canvas) float32 in [-1, 1].
    factors: dict of name -> (N,) float64 array, aligned by index.
    Deterministic in (spec, seed).
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.count
    factors = {
        "shape": rng.integers(0, spec.num_shape_classes, size=n).astype(np.float64),
        "hue": rng.uniform(*spec.hue_range, size=n),
        "bg_brightness": rng.uniform(*spec.bg_brightness_range, size=n),
        "size": rng.uniform(*spec.size_range, size=n),
        "pos_x": rng.uniform(*spec.pos_range, size=n),
        "pos_y": rng.uniform(*spec.pos_range, size=n),
        "rotation": rng.uniform(*spec.rotation_range, size=n),
    }
    images = np.zeros((n, 3, spec.canvas, spec.canvas), dtype=np.float32)
    for i in range(n):
        fg = np.array(colorsys.hsv_to_rgb(factors["hue"][i], 0.9, 0.9), dtype=np.float32)
        bg = np.full(3, factors["bg_brightness"][i], dtype=np.float32)
        mask = _shape_mask(
            int(factors["shape"][i]), factors["pos_x"][i], factors["pos_y"][i],
            factors["size"][i] / 2.0, factors["rotation"][i], spec.canvas)
        img = bg[:, None, None] + mask[None] * (fg - bg)[:, None, None]
        images[i] = img * 2.0 - 1.0
    return torch.from_numpy(images), factors


def binarize_factors(factors: dict) -> dict:
    """Per-factor binary labels via median split (value > median)."""
    out = {}
    for name, vals in factors.items():
        vals = np.asarray(vals)
        out[name] = (vals > np.median(vals)).astype(np.int64)
    return out


def save_factor_table(factors: dict, path):
    import csv
    names = list(factors.keys())
    n = len(next(iter(factors.values()))) if factors else 0
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index"] + names)
        for i in range(n):
            w.writerow([i] + [repr(float(factors[k][i])) for k in names])


def load_factor_table(path) -> dict:
    import csv
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    names = rows[0][1:]
    cols = {k: [] for k in names}
    for row in rows[1:]:
        for k, v in zip(names, row[1:]):
            cols[k].append(float(v))
    return {k: np.array(v) for k, v in cols.items()}


def tensor_to_image(x: torch.Tensor) -> Image.Image:
    """(C, H, W) in [-1, 1] -> PIL image."""
    arr = ((x.detach().float().clamp(-1, 1) + 1.0) * 127.5).round().byte()
    return Image.fromarray(arr.permute(1, 2, 0).numpy(), mode="RGB")


def image_to_tensor(img: Image.Image, size: int) -> torch.Tensor:
    """Center-crop to square, resize, scale to [-1, 1]; returns (3, size, size)."""
    img = img.convert("RGB")
    w, h = img.size
    side = min(w, h)
    left, top = (w - side) // 2, (h - side) // 2
    img = img.crop((left, top, left + side, top + side))
    if side != size:
        img = img.resize((size, size), Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float32) / 127.5 - 1.0
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")


def load_image_folder(path, size: int) -> torch.Tensor:
    """Load every image under `path` (sorted by name) as a (N, 3, size, size) batch."""
    import pathlib
    root = pathlib.Path(path)
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_EXTS) \
        if root.is_dir() else []
    if not files:
        raise FileNotFoundError(f"no images found in {path}")
    out = []
    for p in files:
        try:
            with Image.open(p) as img:
                out.append(image_to_tensor(img, size))
        except Exception as e:
            raise IOError(f"unreadable image {p}: {e}") from e
    return torch.stack(out)
