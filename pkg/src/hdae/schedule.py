"""Noise schedules and inference step plans.

Convention: discrete timesteps t = 0..T, where t=0 is the clean image.
betas[i] is the noise rate of step i+1; alpha_bars has T+1 entries with
alpha_bars[0] = 1, so alpha_bars[t] can be indexed directly by t.
"""

from dataclasses import dataclass, field

import torch


@dataclass(frozen=True)
class NoiseSchedule:
    """Beta / cumulative-alpha tables for a discrete diffusion process."""

    betas: torch.Tensor       # (T,), float64
    alpha_bars: torch.Tensor  # (T+1,), float64, alpha_bars[0] == 1

    def __post_init__(self):
        if self.betas.ndim != 1 or self.betas.numel() < 1:
            raise ValueError("betas must be a nonempty 1-D tensor")
        if self.alpha_bars.numel() != self.betas.numel() + 1:
            raise ValueError("alpha_bars must have T+1 entries")
        if not torch.all((self.betas > 0) & (self.betas < 1)):
            raise ValueError("every beta must lie in (0, 1)")

    @property
    def T(self) -> int:
        return self.betas.numel()

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise ValueError(f"t={t} out of range [0, {self.T}]")
        return float(self.alpha_bars[t])


def make_linear_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linearly spaced betas (inclusive endpoints) with cumulative alpha products."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    if T == 1:
        betas = torch.tensor([beta_start], dtype=torch.float64)
    else:
        betas = torch.linspace(beta_start, beta_end, T, dtype=torch.float64)
    alphas = 1.0 - betas
    alpha_bars = torch.cat([torch.ones(1, dtype=torch.float64), torch.cumprod(alphas, dim=0)])
    return NoiseSchedule(betas=betas, alpha_bars=alpha_bars)


@dataclass(frozen=True)
class StepPlan:
    """Strictly decreasing subsequence of {T, ..., 1} used at inference."""

    timesteps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ts = tuple(int(t) for t in self.timesteps)
        object.__setattr__(self, "timesteps", ts)
        if len(ts) == 0:
            raise ValueError("plan must contain at least one timestep")
        if ts[-1] < 1:
            raise ValueError("last timestep must be >= 1")
        if any(b >= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timesteps must be strictly decreasing")

    def __len__(self) -> int:
        return len(self.timesteps)

    def transitions(self):
        """(t, t_prev) pairs in generation order, ending at t_prev = 0."""
        ts = list(self.timesteps) + [0]
        return list(zip(ts[:-1], ts[1:]))


def make_step_plan(T: int, n_steps: int = 100) -> StepPlan:
    """Evenly strided plan of length n_steps ending at T.

    Stride = T // n_steps; ties from non-divisible T resolve toward larger t
    because the sequence is anchored at T and walks down.
    """
    if n_steps < 1 or n_steps > T:
        raise ValueError(f"n_steps must be in [1, {T}], got {n_steps}")
    stride = T // n_steps
    timesteps = tuple(T - i * stride for i in range(n_steps))
    return StepPlan(timesteps=timesteps)
