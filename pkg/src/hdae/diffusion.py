"""Forward noising, deterministic DDIM stepping/inversion, and the noise loss.

All functions are pure given a schedule. Images are (C, H, W) or (B, C, H, W)
float tensors; no shape is assumed beyond "x and eps match".
"""

import math

import torch

from .schedule import NoiseSchedule, StepPlan


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str):
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def q_sample(x0: torch.Tensor, t: int, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """Closed-form noisy image: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps."""
    _check_same_shape(x0, eps, "q_sample")
    abar = schedule.alpha_bar(t)
    return math.sqrt(abar) * x0 + math.sqrt(1.0 - abar) * eps


def ddim_step(x_t: torch.Tensor, eps_pred: torch.Tensor, t: int, t_prev: int,
              schedule: NoiseSchedule) -> torch.Tensor:
    """One deterministic denoising step t -> t_prev for a fixed noise prediction."""
    _check_same_shape(x_t, eps_pred, "ddim_step")
    if t_prev >= t:
        raise ValueError(f"ddim_step needs t_prev < t, got t={t}, t_prev={t_prev}")
    a_t = schedule.alpha_bar(t)
    a_p = schedule.alpha_bar(t_prev)
    x0_hat = (x_t - math.sqrt(1.0 - a_t) * eps_pred) / math.sqrt(a_t)
    return math.sqrt(a_p) * x0_hat + math.sqrt(1.0 - a_p) * eps_pred


def ddim_invert_step(x_tprev: torch.Tensor, eps_pred: torch.Tensor, t_prev: int, t: int,
                     schedule: NoiseSchedule) -> torch.Tensor:
    """Exact algebraic inverse of ddim_step given the same eps_pred."""
    _check_same_shape(x_tprev, eps_pred, "ddim_invert_step")
    if t <= t_prev:
        raise ValueError(f"ddim_invert_step needs t > t_prev, got t={t}, t_prev={t_prev}")
    a_t = schedule.alpha_bar(t)
    a_p = schedule.alpha_bar(t_prev)
    x0_hat = (x_tprev - math.sqrt(1.0 - a_p) * eps_pred) / math.sqrt(a_p)
    return math.sqrt(a_t) * x0_hat + math.sqrt(1.0 - a_t) * eps_pred


def noise_loss(eps: torch.Tensor, eps_pred: torch.Tensor) -> torch.Tensor:
    """Per-element mean squared error between actual and predicted noise."""
    _check_same_shape(eps, eps_pred, "noise_loss")
    return torch.mean((eps - eps_pred) ** 2)


@torch.no_grad()
def generate(model, code, xT: torch.Tensor, plan: StepPlan,
             schedule: NoiseSchedule, clip: bool = True) -> torch.Tensor:
    """Decode an image from (code, xT) by walking the plan down to t=0.

    `model(x, t, code)` predicts noise; eps at each transition is evaluated
    at the source state. Output is clipped to [-1, 1] only at the end.
    """
    x = xT
    for t, t_prev in plan.transitions():
        eps = model(x, t, code)
        x = ddim_step(x, eps, t, t_prev, schedule)
    return x.clamp(-1.0, 1.0) if clip else x


@torch.no_grad()
def encode_stochastic(model, x0: torch.Tensor, code, plan: StepPlan,
                      schedule: NoiseSchedule) -> torch.Tensor:
    """DDIM inversion: run the plan backward from x0 to the noise map x_T."""
    x = x0
    for t, t_prev in reversed(plan.transitions()):
        eps = model(x, t_prev, code)
        x = ddim_invert_step(x, eps, t_prev, t, schedule)
    return x
