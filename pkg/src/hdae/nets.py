"""Encoder/decoder networks for all latent-space variants.

The decoder is a U-Net noise predictor conditioned per resolution level by
adaptive group normalization. The semantic encoder comes in two families
(plain downsampling stack, or a full U-Net) with per-level taps feeding
global-average-pool + linear projection heads.
"""

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, asdict
from enum import Enum

import torch
import torch.nn as nn
import torch.nn.functional as F

from .codes import HierarchicalCode


class Variant(str, Enum):
    DAE = "DAE"                 # downsampling encoder, one d-dim code
    DAE_WIDE = "DAE_WIDE"       # same, widened to L*d for capacity parity
    DAE_U = "DAE_U"             # U-Net encoder, one d-dim code from the last up feature
    HDAE_E = "HDAE_E"           # downsampling encoder, L per-level codes
    HDAE_U = "HDAE_U"           # U-Net encoder, L per-level codes from the up path
    HDAE_UPLUS = "HDAE_UPLUS"   # U-Net encoder, 2L codes (down path + up path)


FLAT_VARIANTS = (Variant.DAE, Variant.DAE_WIDE, Variant.DAE_U)


@dataclass
class ModelConfig:
    image_size: int = 32
    in_channels: int = 3
    base_width: int = 32
    channel_mults: tuple = (1, 2, 2, 2)
    num_res_blocks: int = 1
    attn_levels: tuple = ()      # 1-based resolution levels with self-attention
    groups: int = 8
    L: int = 4
    d: int = 128
    variant: Variant = Variant.HDAE_U

    def __post_init__(self):
        self.variant = Variant(self.variant)
        self.channel_mults = tuple(self.channel_mults)
        self.attn_levels = tuple(self.attn_levels)
        if self.L < 1 or self.d < 1:
            raise ValueError("L and d must be positive")
        if self.L > self.num_levels:
            raise ValueError(f"L={self.L} exceeds resolution levels {self.num_levels}")
        for ch in self.channels:
            if ch % self.groups != 0:
                raise ValueError(f"group count {self.groups} must divide width {ch}")

    @property
    def num_levels(self) -> int:
        return len(self.channel_mults)

    @property
    def channels(self) -> tuple:
        return tuple(self.base_width * m for m in self.channel_mults)

    @property
    def time_dim(self) -> int:
        return self.base_width * 4

    def code_dims(self) -> list:
        """Dimension of each code slot emitted by the encoder, in slot order."""
        v = self.variant
        if v == Variant.DAE or v == Variant.DAE_U:
            return [self.d]
        if v == Variant.DAE_WIDE:
            return [self.L * self.d]
        if v in (Variant.HDAE_E, Variant.HDAE_U):
            return [self.d] * self.L
        return [self.d] * (2 * self.L)  # HDAE_UPLUS

    def flat_code_len(self) -> int:
        return sum(self.code_dims())

    def down_slot(self, level: int) -> int:
        """Code slot consumed by decoder down-path blocks at 1-based `level`."""
        if self.variant in FLAT_VARIANTS:
            return 0
        return min(level, self.L) - 1

    def up_slot(self, level: int) -> int:
        """Code slot consumed by decoder up-path blocks at 1-based `level`."""
        if self.variant in FLAT_VARIANTS:
            return 0
        base = self.L if self.variant == Variant.HDAE_UPLUS else 0
        return base + min(level, self.L) - 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


def config_hash(config: ModelConfig) -> str:
    canon = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps, (B,) -> (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half)
    args = t.double().reshape(-1, 1) * freqs.reshape(1, -1)
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


class AdaGN(nn.Module):
    """Group norm modulated by a timestep embedding and a semantic code.

    out = z_scale * (t_scale * GN(h) + t_shift), with all modulation heads
    zero-initialized so the block starts as plain group normalization.
    """

    def __init__(self, channels: int, time_dim: int, z_dim: int, groups: int):
        super().__init__()
        if channels % groups != 0:
            raise ValueError(f"groups={groups} must divide channels={channels}")
        self.norm = nn.GroupNorm(groups, channels, affine=False)
        self.to_t = nn.Linear(time_dim, 2 * channels)
        self.to_z = nn.Linear(z_dim, channels)
        nn.init.zeros_(self.to_t.weight)
        nn.init.zeros_(self.to_t.bias)
        nn.init.zeros_(self.to_z.weight)
        nn.init.zeros_(self.to_z.bias)

    def forward(self, h, t_emb, z):
        g = self.norm(h)
        t_scale, t_shift = self.to_t(t_emb).chunk(2, dim=-1)
        z_scale = 1.0 + self.to_z(z)
        t_scale = (1.0 + t_scale)[:, :, None, None]
        t_shift = t_shift[:, :, None, None]
        return z_scale[:, :, None, None] * (t_scale * g + t_shift)


class CondResBlock(nn.Module):
    """Residual block with AdaGN conditioning on (t, z)."""

    def __init__(self, in_ch, out_ch, time_dim, z_dim, groups):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.adagn = AdaGN(out_ch, time_dim, z_dim, groups)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        nn.init.zeros_(self.conv2.weight)
        nn.init.zeros_(self.conv2.bias)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x, t_emb, z):
        h = self.conv1(F.silu(self.norm1(x)))
        h = self.adagn(h, t_emb, z)
        h = self.conv2(F.silu(h))
        return h + self.skip(x)


class PlainResBlock(nn.Module):
    """Unconditioned residual block used inside the semantic encoders."""

    def __init__(self, in_ch, out_ch, groups):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm2 = nn.GroupNorm(groups, out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x):
        h = self.conv1(F.silu(self.norm1(x)))
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class SelfAttention(nn.Module):
    def __init__(self, channels, groups):
        super().__init__()
        self.norm = nn.GroupNorm(groups, channels)
        self.qkv = nn.Conv2d(channels, channels * 3, 1)
        self.proj = nn.Conv2d(channels, channels, 1)
        nn.init.zeros_(self.proj.weight)
        nn.init.zeros_(self.proj.bias)

    def forward(self, x):
        b, c, h, w = x.shape
        q, k, v = self.qkv(self.norm(x)).reshape(b, 3, c, h * w).unbind(1)
        attn = torch.softmax(q.transpose(1, 2) @ k / math.sqrt(c), dim=-1)
        out = (v @ attn.transpose(1, 2)).reshape(b, c, h, w)
        return x + self.proj(out)


def _downsample(ch):
    return nn.Conv2d(ch, ch, 3, stride=2, padding=1)


class _Upsample(nn.Module):
    def __init__(self, ch):
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, padding=1)

    def forward(self, x):
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class DecoderUNet(nn.Module):
    """Noise predictor conditioned per resolution level on the code slots."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        chs = cfg.channels
        code_dims = cfg.code_dims()
        td = cfg.time_dim

        self.time_mlp = nn.Sequential(
            nn.Linear(cfg.base_width, td), nn.SiLU(), nn.Linear(td, td))
        self.conv_in = nn.Conv2d(cfg.in_channels, chs[0], 3, padding=1)

        def res(in_ch, out_ch, slot):
            return CondResBlock(in_ch, out_ch, td, code_dims[slot], cfg.groups)

        # Down path; skip connections recorded after every block.
        self.down_blocks = nn.ModuleList()
        self.down_slots = []
        self.down_attn = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        skip_chs = [chs[0]]
        ch = chs[0]
        for i, out_ch in enumerate(chs):
            level = i + 1
            slot = cfg.down_slot(level)
            for _ in range(cfg.num_res_blocks):
                self.down_blocks.append(res(ch, out_ch, slot))
                self.down_slots.append(slot)
                self.down_attn.append(
                    SelfAttention(out_ch, cfg.groups) if level in cfg.attn_levels else nn.Identity())
                ch = out_ch
                skip_chs.append(ch)
            if i < len(chs) - 1:
                self.downsamplers.append(_downsample(ch))
                skip_chs.append(ch)

        mid_slot = cfg.down_slot(cfg.num_levels)
        self.mid1 = res(ch, ch, mid_slot)
        self.mid2 = res(ch, ch, mid_slot)
        self.mid_slot = mid_slot

        # Up path mirrors the down path and consumes the recorded skips.
        self.up_blocks = nn.ModuleList()
        self.up_slots = []
        self.up_attn = nn.ModuleList()
        self.upsamplers = nn.ModuleList()
        for i in reversed(range(len(chs))):
            level = i + 1
            out_ch = chs[i]
            slot = cfg.up_slot(level)
            for _ in range(cfg.num_res_blocks + 1):
                self.up_blocks.append(res(ch + skip_chs.pop(), out_ch, slot))
                self.up_slots.append(slot)
                self.up_attn.append(
                    SelfAttention(out_ch, cfg.groups) if level in cfg.attn_levels else nn.Identity())
                ch = out_ch
            if i > 0:
                self.upsamplers.append(_Upsample(ch))

        self.norm_out = nn.GroupNorm(cfg.groups, ch)
        self.conv_out = nn.Conv2d(ch, cfg.in_channels, 3, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def forward(self, x, t_emb, codes):
        cfg = self.cfg
        h = self.conv_in(x)
        skips = [h]
        bi = 0
        di = 0
        for i in range(cfg.num_levels):
            for _ in range(cfg.num_res_blocks):
                h = self.down_blocks[bi](h, t_emb, codes[self.down_slots[bi]])
                h = self.down_attn[bi](h)
                skips.append(h)
                bi += 1
            if i < cfg.num_levels - 1:
                h = self.downsamplers[di](h)
                skips.append(h)
                di += 1

        h = self.mid1(h, t_emb, codes[self.mid_slot])
        h = self.mid2(h, t_emb, codes[self.mid_slot])

        bi = 0
        ui = 0
        for i in reversed(range(cfg.num_levels)):
            for _ in range(cfg.num_res_blocks + 1):
                h = torch.cat([h, skips.pop()], dim=1)
                h = self.up_blocks[bi](h, t_emb, codes[self.up_slots[bi]])
                h = self.up_attn[bi](h)
                bi += 1
            if i > 0:
                h = self.upsamplers[ui](h)
                ui += 1

        return self.conv_out(F.silu(self.norm_out(h)))


class _TapHead(nn.Module):
    """Global average pool followed by one affine projection."""

    def __init__(self, in_ch, out_dim):
        super().__init__()
        self.fc = nn.Linear(in_ch, out_dim)

    def forward(self, feat):
        return self.fc(feat.mean(dim=(2, 3)))


class DownEncoder(nn.Module):
    """Downsampling stack; exposes the feature map at the end of each level."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        chs = cfg.channels
        self.num_levels = cfg.num_levels
        self.num_res_blocks = cfg.num_res_blocks
        self.conv_in = nn.Conv2d(cfg.in_channels, chs[0], 3, padding=1)
        self.blocks = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        ch = chs[0]
        for i, out_ch in enumerate(chs):
            for _ in range(cfg.num_res_blocks):
                self.blocks.append(PlainResBlock(ch, out_ch, cfg.groups))
                ch = out_ch
            if i < len(chs) - 1:
                self.downsamplers.append(_downsample(ch))
        self.out_channels = list(chs)

    def forward(self, x):
        h = self.conv_in(x)
        feats = []
        bi = 0
        for i in range(self.num_levels):
            for _ in range(self.num_res_blocks):
                h = self.blocks[bi](h)
                bi += 1
            feats.append(h)
            if i < self.num_levels - 1:
                h = self.downsamplers[i](h)
        return feats  # per-level, level 1 (highest res) first


class UNetEncoder(nn.Module):
    """Full U-Net; exposes per-level features on both the down and up paths."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        chs = cfg.channels
        self.num_levels = cfg.num_levels
        self.num_res_blocks = cfg.num_res_blocks
        self.conv_in = nn.Conv2d(cfg.in_channels, chs[0], 3, padding=1)
        self.down_blocks = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        ch = chs[0]
        for i, out_ch in enumerate(chs):
            for _ in range(cfg.num_res_blocks):
                self.down_blocks.append(PlainResBlock(ch, out_ch, cfg.groups))
                ch = out_ch
            if i < len(chs) - 1:
                self.downsamplers.append(_downsample(ch))
        self.mid = PlainResBlock(ch, ch, cfg.groups)
        self.up_blocks = nn.ModuleList()
        self.upsamplers = nn.ModuleList()
        for i in reversed(range(len(chs))):
            out_ch = chs[i]
            skip_ch = chs[i]
            self.up_blocks.append(PlainResBlock(ch + skip_ch, out_ch, cfg.groups))
            ch = out_ch
            if i > 0:
                self.upsamplers.append(_Upsample(ch))
        self.out_channels = list(chs)

    def forward(self, x):
        h = self.conv_in(x)
        down_feats = []
        for i in range(self.num_levels):
            for j in range(self.num_res_blocks):
                h = self.down_blocks[i * self.num_res_blocks + j](h)
            down_feats.append(h)
            if i < self.num_levels - 1:
                h = self.downsamplers[i](h)
        h = self.mid(h)
        up_feats = [None] * self.num_levels
        for bi, i in enumerate(reversed(range(self.num_levels))):
            h = torch.cat([h, down_feats[i]], dim=1)
            h = self.up_blocks[bi](h)
            up_feats[i] = h
            if i > 0:
                h = self.upsamplers[bi](h)
        return down_feats, up_feats


class SemanticEncoder(nn.Module):
    """Variant-specific taps + projection heads over an encoder backbone."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        v = cfg.variant
        chs = cfg.channels
        if v in (Variant.DAE, Variant.DAE_WIDE, Variant.HDAE_E):
            self.backbone = DownEncoder(cfg)
        else:
            self.backbone = UNetEncoder(cfg)

        if v == Variant.DAE:
            self.heads = nn.ModuleList([_TapHead(chs[-1], cfg.d)])
        elif v == Variant.DAE_WIDE:
            self.heads = nn.ModuleList([_TapHead(chs[-1], cfg.L * cfg.d)])
        elif v == Variant.DAE_U:
            self.heads = nn.ModuleList([_TapHead(chs[0], cfg.d)])
        elif v == Variant.HDAE_E:
            self.heads = nn.ModuleList([_TapHead(chs[l], cfg.d) for l in range(cfg.L)])
        elif v == Variant.HDAE_U:
            self.heads = nn.ModuleList([_TapHead(chs[l], cfg.d) for l in range(cfg.L)])
        else:  # HDAE_UPLUS: L down-path taps then L up-path taps
            self.heads = nn.ModuleList(
                [_TapHead(chs[l], cfg.d) for l in range(cfg.L)]
                + [_TapHead(chs[l], cfg.d) for l in range(cfg.L)])

    def forward(self, x):
        v = self.cfg.variant
        L = self.cfg.L
        if v in (Variant.DAE, Variant.DAE_WIDE):
            feats = self.backbone(x)
            return [self.heads[0](feats[-1])]
        if v == Variant.HDAE_E:
            feats = self.backbone(x)
            return [self.heads[l](feats[l]) for l in range(L)]
        down_feats, up_feats = self.backbone(x)
        if v == Variant.DAE_U:
            return [self.heads[0](up_feats[0])]
        if v == Variant.HDAE_U:
            return [self.heads[l](up_feats[l]) for l in range(L)]
        # HDAE_UPLUS
        down = [self.heads[l](down_feats[l]) for l in range(L)]
        up = [self.heads[L + l](up_feats[l]) for l in range(L)]
        return down + up


class Autoencoder(nn.Module):
    """Semantic encoder + conditioned U-Net noise predictor."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = SemanticEncoder(cfg)
        self.decoder = DecoderUNet(cfg)

    def encode_codes(self, x):
        """Batched semantic encoding: (B, C, H, W) -> list of (B, dim)."""
        if x.shape[-1] != self.cfg.image_size or x.shape[-2] != self.cfg.image_size:
            raise ValueError(
                f"input resolution {tuple(x.shape[-2:])} != configured {self.cfg.image_size}")
        return self.encoder(x)

    def predict_noise(self, x_t, t, codes):
        expected = len(self.cfg.code_dims())
        if len(codes) != expected:
            raise ValueError(f"variant {self.cfg.variant.value} expects {expected} code "
                             f"slots, got {len(codes)}")
        if not torch.is_tensor(t):
            t = torch.full((x_t.shape[0],), int(t), dtype=torch.long, device=x_t.device)
        emb = timestep_embedding(t, self.cfg.base_width).to(x_t.dtype)
        t_emb = self.decoder.time_mlp(emb)
        return self.decoder(x_t, t_emb, codes)

    def forward(self, x_t, t, codes):
        return self.predict_noise(x_t, t, codes)


def encode_semantic(model: Autoencoder, x0: torch.Tensor) -> HierarchicalCode:
    """Encode one (C, H, W) image to its hierarchical code."""
    with torch.no_grad():
        codes = model.encode_codes(x0.unsqueeze(0))
    return HierarchicalCode(levels=[c[0].detach().clone() for c in codes])


def code_to_slots(code: HierarchicalCode, batch: int = 1) -> list:
    """HierarchicalCode -> batched code-slot list for predict_noise."""
    return [v.unsqueeze(0).expand(batch, -1) for v in code.levels]


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: Autoencoder, ema_state=None, extra=None):
    """Atomic (write-then-rename) versioned checkpoint."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": model.cfg.to_dict(),
        "config_hash": config_hash(model.cfg),
        "state_dict": model.state_dict(),
        "ema_state_dict": ema_state,
        "extra": extra or {},
    }
    path = str(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            torch.save(payload, f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path, use_ema: bool = True):
    """Load a checkpoint, validating its stored config hash."""
    payload = torch.load(str(path), map_location="cpu", weights_only=False)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    cfg = ModelConfig.from_dict(payload["config"])
    if config_hash(cfg) != payload["config_hash"]:
        raise ValueError("checkpoint config hash mismatch")
    model = Autoencoder(cfg)
    state = payload["ema_state_dict"] if (use_ema and payload.get("ema_state_dict")) else payload["state_dict"]
    model.load_state_dict(state)
    model.eval()
    return model, payload
