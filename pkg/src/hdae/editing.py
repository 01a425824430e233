"""Attribute directions over flattened codes: linear classifiers, min-max
weight normalization, top-k truncation, manipulation, and the analytics used
to attribute directions to latent levels."""

import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .codes import HierarchicalCode


def _as_flat_matrix(codes) -> np.ndarray:
    """list of HierarchicalCode | (N, D) array-like -> (N, D) float64."""
    if isinstance(codes, np.ndarray):
        return codes.astype(np.float64)
    if torch.is_tensor(codes):
        return codes.detach().double().numpy()
    return np.stack([c.flatten().double().numpy() for c in codes])


def normalize_direction(n: np.ndarray) -> np.ndarray:
    """Min-max normalization of |n| into [0, 1]; all-equal magnitudes -> zeros."""
    n = np.asarray(n, dtype=np.float64)
    if n.size == 0:
        raise ValueError("empty direction vector")
    mag = np.abs(n)
    lo, hi = mag.min(), mag.max()
    if hi == lo:
        return np.zeros_like(mag)
    return (mag - lo) / (hi - lo)


@dataclass
class AttributeDirection:
    """Linear classifier weights over the flattened code, plus bookkeeping."""

    name: str
    n: np.ndarray
    bias: float
    L: int
    d: int
    train_accuracy: float = float("nan")
    _n_hat: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.float64).reshape(-1)
        if self.n.size != self.L * self.d:
            raise ValueError(f"direction length {self.n.size} != L*d = {self.L * self.d}")
        if not np.all(np.isfinite(self.n)):
            raise ValueError("direction must be finite")

    @property
    def n_hat(self) -> np.ndarray:
        if self._n_hat is None:
            self._n_hat = normalize_direction(self.n)
        return self._n_hat

    def logit(self, code) -> float:
        flat = code.flatten().double().numpy() if isinstance(code, HierarchicalCode) \
            else np.asarray(code, dtype=np.float64).reshape(-1)
        return float(self.n @ flat + self.bias)


@dataclass
class TruncatedDirection:
    """Direction restricted to the top-k channels ranked by n_hat."""

    base: AttributeDirection
    k: int
    n_prime: np.ndarray

    @property
    def name(self) -> str:
        return self.base.name


def _holdout_split(n: int, seed: int = 0, val_fraction: float = 0.25):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction)))
    return perm[n_val:], perm[:n_val]


def train_classifier(codes, labels, L: int = None, d: int = None,
                     name: str = "attribute", seed: int = 0) -> AttributeDirection:
    """Fit a logistic-regression direction; held-out accuracy is recorded."""
    from sklearn.linear_model import LogisticRegression

    X = _as_flat_matrix(codes)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if X.shape[0] != y.size:
        raise ValueError("codes/labels length mismatch")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size != 2 or counts.min() < 2:
        raise ValueError("need two classes with at least 2 examples each")
    if L is None or d is None:
        if not isinstance(codes, np.ndarray) and not torch.is_tensor(codes):
            L, d = codes[0].L, codes[0].d
        else:
            raise ValueError("L and d are required for raw code matrices")
    tr, va = _holdout_split(X.shape[0], seed=seed)
    clf = LogisticRegression(max_iter=2000, random_state=seed)
    clf.fit(X[tr], y[tr])
    acc = float(clf.score(X[va], y[va]))
    return AttributeDirection(name=name, n=clf.coef_[0], bias=float(clf.intercept_[0]),
                              L=L, d=d, train_accuracy=acc)


def topk_support(n_hat: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest n_hat values; ties break toward lower index."""
    if not 0 <= k <= n_hat.size:
        raise ValueError(f"k must be in [0, {n_hat.size}], got {k}")
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-n_hat, kind="stable")  # stable: equal values keep ascending index
    return np.sort(order[:k])


def truncate_direction(direction: AttributeDirection, k: int) -> TruncatedDirection:
    """Zero every channel outside the top-k of the normalized weights."""
    support = topk_support(direction.n_hat, k)
    n_prime = np.zeros_like(direction.n)
    n_prime[support] = direction.n[support]
    return TruncatedDirection(base=direction, k=int(k), n_prime=n_prime)


def manipulate(code: HierarchicalCode, direction: TruncatedDirection,
               alpha: float) -> HierarchicalCode:
    """Step the flattened code by alpha along the unit truncated direction."""
    L, d = code.L, code.d
    if direction.n_prime.size != L * d:
        raise ValueError("direction/code dimension mismatch")
    norm = np.linalg.norm(direction.n_prime)
    flat = code.flatten().double().numpy()
    if norm > 0:
        flat = flat + alpha * direction.n_prime / norm
    return HierarchicalCode.from_flat(torch.from_numpy(flat).float(), L, d)


def level_attribution(direction: AttributeDirection):
    """Per-level share of normalized weight mass; returns (mass, argmax level).

    Mass sums to 1 unless n_hat is degenerate (all zeros). Levels are 1-based.
    """
    per_level = direction.n_hat.reshape(direction.L, direction.d).sum(axis=1)
    total = per_level.sum()
    mass = per_level / total if total > 0 else per_level
    return mass, int(np.argmax(per_level)) + 1


def ecdf(values: np.ndarray):
    """Right-continuous ECDF support points: sorted (value, cumulative fraction)."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ValueError("empty input")
    xs, counts = np.unique(values, return_counts=True)
    fracs = np.cumsum(counts) / values.size
    return list(zip(xs.tolist(), fracs.tolist()))


def fidelity(original: torch.Tensor, edited: torch.Tensor,
             mask: torch.Tensor) -> float:
    """Mean squared difference over pixels the mask marks as preserved (0).

    A pixel is excluded wherever mask = 1 in any channel; an all-ones mask
    yields 0 by convention.
    """
    if original.shape != edited.shape:
        raise ValueError("image shape mismatch")
    m = mask.float()
    if m.ndim == original.ndim - 1:
        m = m.unsqueeze(0).expand_as(original)
    if m.shape != original.shape:
        raise ValueError("mask shape mismatch")
    keep = (m == 0).float()
    denom = keep.sum()
    if denom == 0:
        return 0.0
    return float((keep * (original - edited) ** 2).sum() / denom)


def linear_probe(codes, labels, level_subset, L: int = None, d: int = None,
                 seed: int = 0) -> float:
    """Held-out accuracy of a classifier restricted to the given levels' slots.

    Non-selected slots are zeroed; an empty subset degrades to the majority
    class (chance) by construction.
    """
    X = _as_flat_matrix(codes)
    if L is None or d is None:
        if not isinstance(codes, np.ndarray) and not torch.is_tensor(codes):
            L, d = codes[0].L, codes[0].d
        else:
            raise ValueError("L and d are required for raw code matrices")
    masked = np.zeros_like(X)
    for lvl in level_subset:
        if not 1 <= lvl <= L:
            raise ValueError(f"level {lvl} out of range [1, {L}]")
        masked[:, (lvl - 1) * d: lvl * d] = X[:, (lvl - 1) * d: lvl * d]
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    tr, va = _holdout_split(X.shape[0], seed=seed)
    from sklearn.linear_model import LogisticRegression
    clf = LogisticRegression(max_iter=2000, random_state=seed)
    clf.fit(masked[tr], y[tr])
    return float(clf.score(masked[va], y[va]))


def save_registry(directions: list, path):
    payload = [{
        "name": a.name, "n": a.n.tolist(), "bias": a.bias,
        "L": a.L, "d": a.d, "train_accuracy": a.train_accuracy,
    } for a in directions]
    with open(path, "w") as f:
        json.dump(payload, f)


def load_registry(path) -> list:
    with open(path) as f:
        payload = json.load(f)
    return [AttributeDirection(name=o["name"], n=np.array(o["n"]), bias=o["bias"],
                               L=o["L"], d=o["d"],
                               train_accuracy=o.get("train_accuracy", float("nan")))
            for o in payload]
