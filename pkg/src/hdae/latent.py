"""End-to-end latent operations: encode/reconstruct, style mixing, controllable
interpolation, and unconditional sampling through a latent denoiser."""

import hashlib
import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .codes import HierarchicalCode, EncodedImage
from .diffusion import generate, encode_stochastic
from .nets import Autoencoder, code_to_slots, timestep_embedding
from .schedule import NoiseSchedule, StepPlan, make_linear_schedule, make_step_plan
from .training import train as _train_loop  # noqa: F401  (re-exported convenience)


def fingerprint(x: torch.Tensor) -> str:
    return hashlib.sha256(x.detach().float().contiguous().numpy().tobytes()).hexdigest()[:16]


def encode(model: Autoencoder, x0: torch.Tensor, plan: StepPlan,
           schedule: NoiseSchedule) -> EncodedImage:
    """Encode one (C, H, W) image into its (semantic code, noise map) pair."""
    with torch.no_grad():
        codes = model.encode_codes(x0.unsqueeze(0))
        xT = encode_stochastic(model, x0.unsqueeze(0), codes, plan, schedule)[0]
    code = HierarchicalCode(levels=[c[0].detach().clone() for c in codes])
    return EncodedImage(code=code, xT=xT, fingerprint=fingerprint(x0))


def reconstruct(model: Autoencoder, encoded: EncodedImage, plan: StepPlan,
                schedule: NoiseSchedule, randomize_xT: bool = False,
                seed: int = 0) -> torch.Tensor:
    """Decode an encoded image; optionally swap the stored xT for seeded noise."""
    if randomize_xT:
        gen = torch.Generator().manual_seed(seed)
        xT = torch.randn(encoded.xT.shape, generator=gen)
    else:
        xT = encoded.xT
    slots = code_to_slots(encoded.code)
    return generate(model, slots, xT.unsqueeze(0), plan, schedule)[0]


def decode_code(model: Autoencoder, code: HierarchicalCode, xT: torch.Tensor,
                plan: StepPlan, schedule: NoiseSchedule) -> torch.Tensor:
    slots = code_to_slots(code)
    return generate(model, slots, xT.unsqueeze(0), plan, schedule)[0]


def style_mix(codeA: HierarchicalCode, codeB: HierarchicalCode,
              split: int) -> HierarchicalCode:
    """Levels 1..split from B (low), split+1..L from A (high)."""
    if codeA.L != codeB.L or codeA.d != codeB.d:
        raise ValueError("codes must share (L, d)")
    if not 0 <= split <= codeA.L:
        raise ValueError(f"split must be in [0, {codeA.L}], got {split}")
    levels = [codeB.levels[i].clone() if i < split else codeA.levels[i].clone()
              for i in range(codeA.L)]
    return HierarchicalCode(levels=levels)


@dataclass(frozen=True)
class InterpolationPath:
    """Per-level blend weights plus a separate weight for the noise maps."""

    lambdas: tuple
    xT_weight: float = 0.0

    def __post_init__(self):
        lams = tuple(float(v) for v in self.lambdas)
        object.__setattr__(self, "lambdas", lams)
        if any(not 0.0 <= v <= 1.0 for v in lams) or not 0.0 <= self.xT_weight <= 1.0:
            raise ValueError("interpolation weights must lie in [0, 1]")


def slerp(a: torch.Tensor, b: torch.Tensor, w: float) -> torch.Tensor:
    """Spherical interpolation; falls back to lerp for (near-)parallel inputs."""
    af, bf = a.reshape(-1).double(), b.reshape(-1).double()
    cos = torch.clamp(torch.dot(af, bf) / (af.norm() * bf.norm() + 1e-12), -1.0, 1.0)
    omega = torch.acos(cos)
    if float(omega) < 1e-6:
        out = (1.0 - w) * af + w * bf
    else:
        so = torch.sin(omega)
        out = torch.sin((1.0 - w) * omega) / so * af + torch.sin(w * omega) / so * bf
    return out.reshape(a.shape).to(a.dtype)


def interpolate(encA: EncodedImage, encB: EncodedImage, path: InterpolationPath):
    """Blend per-level codes linearly and noise maps spherically."""
    if encA.code.L != encB.code.L or encA.code.d != encB.code.d:
        raise ValueError("codes must share (L, d)")
    if len(path.lambdas) != encA.code.L:
        raise ValueError(f"expected {encA.code.L} lambdas, got {len(path.lambdas)}")
    if encA.xT.shape != encB.xT.shape:
        raise ValueError("noise maps must share shape")
    levels = [(1.0 - lam) * a + lam * b
              for lam, a, b in zip(path.lambdas, encA.code.levels, encB.code.levels)]
    xT = slerp(encA.xT, encB.xT, path.xT_weight)
    return HierarchicalCode(levels=levels), xT


def _staged_path(L: int, steps: int, order: list) -> list:
    """Saturate lambdas one level at a time following `order`."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    out = []
    for i in range(steps):
        p = i / (steps - 1) * L
        lams = [0.0] * L
        for rank, lvl in enumerate(order):
            lams[lvl] = min(1.0, max(0.0, p - rank))
        out.append(InterpolationPath(lambdas=tuple(lams),
                                     xT_weight=sum(lams) / L))
    return out


def low_first_path(L: int, steps: int) -> list:
    """Interpolation schedule that moves low levels (high resolution) first."""
    return _staged_path(L, steps, list(range(L)))


def high_first_path(L: int, steps: int) -> list:
    return _staged_path(L, steps, list(reversed(range(L))))


class LatentDenoiser(nn.Module):
    """MLP noise predictor over flattened, whitened code vectors."""

    def __init__(self, dim: int, hidden: int = 256, time_dim: int = 64):
        super().__init__()
        self.time_dim = time_dim
        self.time_mlp = nn.Sequential(nn.Linear(time_dim, hidden), nn.SiLU(),
                                      nn.Linear(hidden, hidden))
        self.net = nn.Sequential(
            nn.Linear(dim + hidden, hidden), nn.SiLU(),
            nn.Linear(hidden, hidden), nn.SiLU(),
            nn.Linear(hidden, dim))

    def forward(self, x, t, code=None):
        if not torch.is_tensor(t):
            t = torch.full((x.shape[0],), int(t), dtype=torch.long)
        emb = self.time_mlp(timestep_embedding(t, self.time_dim).to(x.dtype))
        return self.net(torch.cat([x, emb], dim=-1))


@dataclass
class LatentDiffusion:
    """Trained latent denoiser plus the whitening statistics of its corpus."""

    model: LatentDenoiser
    mean: torch.Tensor   # (D,)
    std: torch.Tensor    # (D,)
    L: int
    d: int
    T: int = 1000

    def __post_init__(self):
        if self.mean.numel() == 0 or self.std.numel() == 0:
            raise ValueError("missing whitening statistics")

    def schedule(self) -> NoiseSchedule:
        return make_linear_schedule(self.T)


def train_latent_ddim(flat_codes: torch.Tensor, L: int, d: int, steps: int = 3000,
                      batch_size: int = 64, lr: float = 1e-3, seed: int = 0,
                      T: int = 1000, hidden: int = 256, log=None) -> LatentDiffusion:
    """Fit a latent denoiser on whitened flattened codes."""
    from .diffusion import q_sample, noise_loss
    mean = flat_codes.mean(dim=0)
    std = flat_codes.std(dim=0).clamp_min(1e-6)
    white = (flat_codes - mean) / std
    schedule = make_linear_schedule(T)
    gen = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    model = LatentDenoiser(white.shape[1], hidden=hidden)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    n = white.shape[0]
    for step in range(1, steps + 1):
        idx = torch.randint(0, n, (batch_size,), generator=gen)
        x0 = white[idx]
        t = int(torch.randint(1, T + 1, (1,), generator=gen))
        eps = torch.randn(x0.shape, generator=gen)
        loss = noise_loss(eps, model(q_sample(x0, t, eps, schedule), t))
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log is not None and step % 500 == 0:
            log({"step": step, "loss": float(loss.detach())})
    model.eval()
    return LatentDiffusion(model=model, mean=mean, std=std, L=L, d=d, T=T)


@torch.no_grad()
def sample_codes(latent: LatentDiffusion, count: int, seed: int = 0,
                 plan_steps: int = 100) -> torch.Tensor:
    """Sample flattened (un-whitened) codes from the latent denoiser."""
    if count == 0:
        return torch.zeros(0, latent.mean.numel())
    schedule = latent.schedule()
    plan = make_step_plan(latent.T, plan_steps)
    gen = torch.Generator().manual_seed(seed)
    z = torch.randn(count, latent.mean.numel(), generator=gen)
    out = generate(latent.model, None, z, plan, schedule, clip=False)
    return out * latent.std + latent.mean


@torch.no_grad()
def sample_unconditional(latent: LatentDiffusion, decoder: Autoencoder, count: int,
                         seed: int = 0, plan: StepPlan = None,
                         schedule: NoiseSchedule = None) -> torch.Tensor:
    """Unconditional images: sampled codes decoded with fresh Gaussian noise maps."""
    cfg = decoder.cfg
    if schedule is None:
        schedule = make_linear_schedule(1000)
    if plan is None:
        plan = make_step_plan(schedule.T, min(100, schedule.T))
    if count == 0:
        return torch.zeros(0, cfg.in_channels, cfg.image_size, cfg.image_size)
    flats = sample_codes(latent, count, seed=seed)
    gen = torch.Generator().manual_seed(seed + 1)
    xT = torch.randn(count, cfg.in_channels, cfg.image_size, cfg.image_size,
                     generator=gen)
    dims = cfg.code_dims()
    slots = list(torch.split(flats, dims, dim=1))
    return generate(decoder, slots, xT, plan, schedule)
