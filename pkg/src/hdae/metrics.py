"""Image-quality metrics, the reconstruction benchmark, and the multi-variant
ablation harness. Perceptual metrics are a plug-in slot only."""

import json
import platform
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .nets import Autoencoder, ModelConfig, Variant, config_hash
from .schedule import NoiseSchedule, StepPlan
from .training import TrainConfig, reconstruct_batch, train


def mse(a: torch.Tensor, b: torch.Tensor) -> float:
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    return float(torch.mean((a.double() - b.double()) ** 2))


def ssim(a: torch.Tensor, b: torch.Tensor, window: int = 7,
         dynamic_range: float = 2.0) -> float:
    """Mean local SSIM with a uniform window (valid positions only)."""
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    if a.ndim == 3:
        a, b = a.unsqueeze(0), b.unsqueeze(0)
    if a.shape[-1] < window or a.shape[-2] < window:
        raise ValueError(f"image smaller than {window}x{window} window")
    a, b = a.double(), b.double()
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    mu_a = F.avg_pool2d(a, window, stride=1)
    mu_b = F.avg_pool2d(b, window, stride=1)
    var_a = F.avg_pool2d(a * a, window, stride=1) - mu_a ** 2
    var_b = F.avg_pool2d(b * b, window, stride=1) - mu_b ** 2
    cov = F.avg_pool2d(a * b, window, stride=1) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(torch.mean(num / den))


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)   # {variant, steps_trained, xT_mode, mse, ssim, ...}
    environment: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.environment:
            self.environment = {
                "torch": torch.__version__,
                "python": platform.python_version(),
                "platform": platform.platform(),
                "ssim_window": 7,
            }

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "environment": self.environment}, indent=1)

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        cols = list(self.rows[0].keys())
        lines = [",".join(cols)]
        lines += [",".join(str(r[c]) for c in cols) for r in self.rows]
        return "\n".join(lines) + "\n"


@torch.no_grad()
def _reconstruct_with_mode(model: Autoencoder, x: torch.Tensor, plan: StepPlan,
                           schedule: NoiseSchedule, mode: str, seed: int):
    from .diffusion import generate, encode_stochastic
    codes = model.encode_codes(x)
    if mode == "encoded_xT":
        xT = encode_stochastic(model, x, codes, plan, schedule)
    elif mode == "random_xT":
        gen = torch.Generator().manual_seed(seed)
        xT = torch.randn(x.shape, generator=gen)
    else:
        raise ValueError(f"unknown xT mode {mode!r}")
    return generate(model, codes, xT, plan, schedule)


def reconstruction_benchmark(models: dict, dataset: torch.Tensor, plan: StepPlan,
                             schedule: NoiseSchedule,
                             modes=("encoded_xT", "random_xT"),
                             seed: int = 0, steps_trained: dict = None,
                             perceptual_fn=None) -> BenchReport:
    """Aggregate MSE/SSIM per (model, xT mode) on a fixed seeded subset.

    `perceptual_fn(recon, target) -> float` is an optional plug-in for
    metrics that need external pretrained networks; none ships here.
    """
    report = BenchReport()
    for name, model in models.items():
        for mode in modes:
            recon = _reconstruct_with_mode(model, dataset, plan, schedule, mode, seed)
            row = {
                "variant": name,
                "steps_trained": (steps_trained or {}).get(name, -1),
                "xT_mode": mode,
                "mse": mse(recon, dataset),
                "ssim": ssim(recon, dataset),
                "model_hash": config_hash(model.cfg),
            }
            if perceptual_fn is not None:
                row["perceptual"] = float(perceptual_fn(recon, dataset))
            report.rows.append(row)
    return report


def ablation_harness(variants, train_images: torch.Tensor, val_images: torch.Tensor,
                     config: TrainConfig, base_cfg: ModelConfig = None,
                     seed: int = 0, log=None) -> dict:
    """Train each variant under an identical seed/budget and collect MSE curves.

    Checkpoint ticks follow config.eval_every; the budget must yield at least
    three shared checkpoints.
    """
    if config.total_steps // config.eval_every < 3:
        raise ValueError("budget too small: need >= 3 validation checkpoints")
    if base_cfg is None:
        base_cfg = ModelConfig()
    curves = {}
    final = {}
    for v in variants:
        v = Variant(v)
        torch.manual_seed(seed)
        cfg = ModelConfig(**{**base_cfg.to_dict(), "variant": v})
        model = Autoencoder(cfg)
        run_cfg = TrainConfig(**{**config.__dict__, "seed": seed})
        history, _ = train(model, train_images, run_cfg, val_images=val_images, log=log)
        curve = [(h["step"], h["val_mse"]) for h in history if "val_mse" in h]
        curves[v.value] = curve
        final[v.value] = curve[-1][1]
    ordering = sorted(final, key=final.get)
    return {"curves": curves, "final": final, "ordering": ordering, "seed": seed}


def curves_to_csv(curves: dict) -> str:
    """Curve CSV: step column plus one MSE column per variant."""
    variants = list(curves.keys())
    steps = [s for s, _ in curves[variants[0]]]
    lines = ["step," + ",".join(variants)]
    for i, s in enumerate(steps):
        lines.append(str(s) + "," + ",".join(repr(curves[v][i][1]) for v in variants))
    return "\n".join(lines) + "\n"
