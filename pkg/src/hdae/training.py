"""Training loop with EMA weights, validation probes, and atomic checkpoints."""

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, asdict

import torch

from .diffusion import q_sample, noise_loss, generate, encode_stochastic
from .nets import Autoencoder, save_checkpoint
from .schedule import make_linear_schedule, make_step_plan, NoiseSchedule, StepPlan


class DivergenceError(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass
class TrainConfig:
    total_steps: int = 20000
    batch_size: int = 16
    lr: float = 1e-4
    adam_betas: tuple = (0.9, 0.999)
    ema_decay: float = 0.999
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    checkpoint_every: int = 2000
    eval_every: int = 2000
    probe_size: int = 32
    plan_steps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.total_steps < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("counts and lr must be positive")
        if not (0.0 <= self.ema_decay < 1.0):
            raise ValueError("ema_decay must lie in [0, 1)")


class EMA:
    """Exponential moving average of model parameters."""

    def __init__(self, model: torch.nn.Module, decay: float):
        self.decay = decay
        self.shadow = {k: v.detach().clone().float()
                       for k, v in model.state_dict().items()}

    @torch.no_grad()
    def update(self, model: torch.nn.Module):
        for k, v in model.state_dict().items():
            if v.dtype.is_floating_point:
                self.shadow[k].mul_(self.decay).add_(v.float(), alpha=1.0 - self.decay)
            else:
                self.shadow[k] = v.detach().clone()

    def state_dict(self):
        return {k: v.clone() for k, v in self.shadow.items()}

    def apply_to(self, model: torch.nn.Module) -> torch.nn.Module:
        """Return a copy of `model` carrying the averaged weights."""
        avg = copy.deepcopy(model)
        avg.load_state_dict(self.shadow)
        avg.eval()
        return avg


def split_train_val(n: int, train_parts: int = 65, val_parts: int = 5):
    """Deterministic index-hash split (train indices, val indices)."""
    total = train_parts + val_parts
    train, val = [], []
    for i in range(n):
        h = int(hashlib.sha1(str(i).encode()).hexdigest(), 16) % total
        (train if h < train_parts else val).append(i)
    return train, val


@torch.no_grad()
def reconstruct_batch(model: Autoencoder, x: torch.Tensor, plan: StepPlan,
                      schedule: NoiseSchedule) -> torch.Tensor:
    """Full round trip: semantic codes + DDIM inversion, then regeneration."""
    codes = model.encode_codes(x)
    xT = encode_stochastic(model, x, codes, plan, schedule)
    return generate(model, codes, xT, plan, schedule)


def train(model: Autoencoder, images: torch.Tensor, config: TrainConfig,
          out_dir=None, val_images: torch.Tensor = None, log=None):
    """Train the autoencoder; returns (history, ema).

    Per step: uniform t in [1, T], Gaussian eps, joint encoder/decoder update
    on the noise-prediction loss. Validation probes reconstruct held-out
    images with the EMA weights and the default inference plan.
    """
    if images.numel() == 0:
        raise ValueError("empty dataset")
    schedule = make_linear_schedule(config.T, config.beta_start, config.beta_end)
    plan = make_step_plan(config.T, min(config.plan_steps, config.T))
    gen = torch.Generator().manual_seed(config.seed)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr, betas=config.adam_betas)
    ema = EMA(model, config.ema_decay)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    history = []
    model.train()
    n = images.shape[0]
    for step in range(1, config.total_steps + 1):
        idx = torch.randint(0, n, (config.batch_size,), generator=gen)
        x0 = images[idx]
        t = int(torch.randint(1, config.T + 1, (1,), generator=gen))
        eps = torch.randn(x0.shape, generator=gen)
        codes = model.encode_codes(x0)
        x_t = q_sample(x0, t, eps, schedule)
        loss = noise_loss(eps, model.predict_noise(x_t, t, codes))
        if not torch.isfinite(loss):
            raise DivergenceError(f"non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        ema.update(model)

        rec = {"step": step, "loss": float(loss.detach())}
        if val_images is not None and (step % config.eval_every == 0
                                       or step == config.total_steps):
            probe = val_images[:config.probe_size]
            avg = ema.apply_to(model)
            recon = reconstruct_batch(avg, probe, plan, schedule)
            rec["val_mse"] = float(torch.mean((recon - probe) ** 2))
            model.train()
        history.append(rec)
        if log is not None and (step % 100 == 0 or "val_mse" in rec):
            log(rec)
        if out_dir is not None and (step % config.checkpoint_every == 0
                                    or step == config.total_steps):
            save_checkpoint(
                os.path.join(out_dir, f"ckpt_{step:07d}.pt"), model,
                ema_state=ema.state_dict(),
                extra={"step": step, "train_config": asdict(config)})
            with open(os.path.join(out_dir, "history.json"), "w") as f:
                json.dump(history, f)
    return history, ema
