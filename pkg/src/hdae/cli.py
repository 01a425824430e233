"""Command-line entry points. Every command validates its flags up front,
writes outputs under --out, and records a manifest for reproducibility."""

import hashlib
import json
import os
import sys

import click
import numpy as np
import torch

from . import editing as ed
from .codes import HierarchicalCode, save_noise_map, load_noise_map
from .data import (SyntheticShapesSpec, generate_shapes, binarize_factors,
                   load_image_folder, image_to_tensor, tensor_to_image,
                   save_factor_table)
from .latent import (encode, reconstruct as reconstruct_op, style_mix, interpolate,
                     InterpolationPath, low_first_path, high_first_path,
                     train_latent_ddim, sample_unconditional, LatentDiffusion,
                     LatentDenoiser, decode_code)
from .metrics import reconstruction_benchmark, ablation_harness, curves_to_csv
from .nets import ModelConfig, Autoencoder, Variant, load_checkpoint, config_hash
from .schedule import make_linear_schedule, make_step_plan
from .training import TrainConfig, train as train_loop, split_train_val


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _write_manifest(out_dir, command, params, inputs=None, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "params": params,
        "inputs": {str(p): _sha256_file(p) for p in (inputs or [])},
        "extra": extra or {},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)


def _load_model(checkpoint):
    model, payload = load_checkpoint(checkpoint, use_ema=True)
    return model, payload


def _inference_pair(T=1000, steps=100):
    schedule = make_linear_schedule(T)
    return schedule, make_step_plan(T, min(steps, T))


def _parse_k(value, flat_len):
    if value == "full":
        return flat_len
    k = int(value)
    if not 0 <= k <= flat_len:
        raise click.BadParameter(f"k must be in [0, {flat_len}] or 'full'")
    return k


@click.group()
def main():
    """Train, probe, and serve hierarchical diffusion autoencoders."""


@main.command()
@click.option("--data", default="shapes", help="'shapes' or a directory of images")
@click.option("--count", default=8000, help="synthetic sample count")
@click.option("--variant", default="HDAE_U",
              type=click.Choice([v.value for v in Variant]))
@click.option("--steps", default=20000)
@click.option("--batch-size", default=16)
@click.option("--lr", default=1e-4)
@click.option("--image-size", default=32)
@click.option("--base-width", default=16)
@click.option("--levels", "L", default=4)
@click.option("--dim", "d", default=64)
@click.option("--seed", default=0)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file whose keys override model/training fields")
@click.option("--out", required=True, type=click.Path())
def train(data, count, variant, steps, batch_size, lr, image_size, base_width,
          L, d, seed, config_path, out):
    """Train an autoencoder variant and write its checkpoint series."""
    overrides = {}
    if config_path:
        with open(config_path) as f:
            overrides = json.load(f)
        if not isinstance(overrides, dict):
            raise click.BadParameter("--config must contain a JSON object")
    if data == "shapes":
        spec = SyntheticShapesSpec(canvas=image_size, count=count, seed=seed)
        images, factors = generate_shapes(spec)
        os.makedirs(out, exist_ok=True)
        save_factor_table(factors, os.path.join(out, "factors.csv"))
    else:
        images = load_image_folder(data, image_size)
    tr, va = split_train_val(images.shape[0])
    torch.manual_seed(seed)
    model_kw = dict(image_size=image_size, base_width=base_width, L=L, d=d,
                    variant=variant)
    train_kw = dict(total_steps=steps, batch_size=batch_size, lr=lr, seed=seed)
    model_fields = set(ModelConfig.__dataclass_fields__)
    train_fields = set(TrainConfig.__dataclass_fields__)
    for key, value in overrides.items():
        if key in model_fields:
            model_kw[key] = tuple(value) if isinstance(value, list) else value
        elif key in train_fields:
            train_kw[key] = value
        else:
            raise click.BadParameter(f"unknown config key {key!r}")
    cfg = ModelConfig(**model_kw)
    model = Autoencoder(cfg)
    tc = TrainConfig(**train_kw)
    _write_manifest(out, "train", {
        "data": data, "count": count, "variant": variant, "steps": steps,
        "batch_size": batch_size, "lr": lr, "seed": seed,
        "model_config": cfg.to_dict(), "config_hash": config_hash(cfg)})
    train_loop(model, images[tr], tc, out_dir=out, val_images=images[va],
               log=lambda r: click.echo(json.dumps(r)))


@main.command("encode")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--image", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def encode_cmd(checkpoint, image, seed, out):
    """Encode an image to code JSON + raw noise-map container."""
    model, _ = _load_model(checkpoint)
    schedule, plan = _inference_pair()
    from PIL import Image as PILImage
    x0 = image_to_tensor(PILImage.open(image), model.cfg.image_size)
    enc = encode(model, x0, plan, schedule)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "code.json"), "w") as f:
        f.write(enc.code.to_json(config_hash(model.cfg)))
    save_noise_map(enc.xT, os.path.join(out, "noise_map.bin"))
    _write_manifest(out, "encode", {"checkpoint": checkpoint, "image": image,
                                    "seed": seed},
                    inputs=[checkpoint, image],
                    extra={"fingerprint": enc.fingerprint})


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--image", required=True, type=click.Path(exists=True))
@click.option("--randomize-xt", is_flag=True, default=False)
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def reconstruct(checkpoint, image, randomize_xt, seed, out):
    """Round-trip an image through the latent pair."""
    model, _ = _load_model(checkpoint)
    schedule, plan = _inference_pair()
    from PIL import Image as PILImage
    x0 = image_to_tensor(PILImage.open(image), model.cfg.image_size)
    enc = encode(model, x0, plan, schedule)
    recon = reconstruct_op(model, enc, plan, schedule,
                           randomize_xT=randomize_xt, seed=seed)
    os.makedirs(out, exist_ok=True)
    tensor_to_image(recon).save(os.path.join(out, "reconstruction.png"))
    _write_manifest(out, "reconstruct", {
        "checkpoint": checkpoint, "image": image,
        "randomize_xt": randomize_xt, "seed": seed}, inputs=[checkpoint, image])


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--registry", required=True, type=click.Path(exists=True))
@click.option("--image", required=True, type=click.Path(exists=True))
@click.option("--attribute", required=True)
@click.option("--alpha", required=True, type=float)
@click.option("--k", "k_value", default="full")
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def edit(checkpoint, registry, image, attribute, alpha, k_value, seed, out):
    """Apply a truncated attribute direction to an image's code and decode."""
    model, _ = _load_model(checkpoint)
    schedule, plan = _inference_pair()
    directions = {a.name: a for a in ed.load_registry(registry)}
    if attribute not in directions:
        raise click.BadParameter(f"unknown attribute {attribute!r}; "
                                 f"registry has {sorted(directions)}")
    direction = directions[attribute]
    k = _parse_k(k_value, direction.n.size)
    from PIL import Image as PILImage
    x0 = image_to_tensor(PILImage.open(image), model.cfg.image_size)
    enc = encode(model, x0, plan, schedule)
    edited = ed.manipulate(enc.code, ed.truncate_direction(direction, k), alpha)
    img = decode_code(model, edited, enc.xT, plan, schedule)
    os.makedirs(out, exist_ok=True)
    tensor_to_image(img).save(os.path.join(out, "edit.png"))
    _write_manifest(out, "edit", {
        "checkpoint": checkpoint, "registry": registry, "image": image,
        "attribute": attribute, "alpha": alpha, "k": k, "seed": seed},
        inputs=[checkpoint, registry, image],
        extra={"logit_before": direction.logit(enc.code),
               "logit_after": direction.logit(edited)})


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--image-a", required=True, type=click.Path(exists=True))
@click.option("--image-b", required=True, type=click.Path(exists=True))
@click.option("--split", required=True, type=int)
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def mix(checkpoint, image_a, image_b, split, seed, out):
    """Style mixing: low levels from B, high levels from A."""
    model, _ = _load_model(checkpoint)
    schedule, plan = _inference_pair()
    from PIL import Image as PILImage
    encA = encode(model, image_to_tensor(PILImage.open(image_a), model.cfg.image_size),
                  plan, schedule)
    encB = encode(model, image_to_tensor(PILImage.open(image_b), model.cfg.image_size),
                  plan, schedule)
    mixed = style_mix(encA.code, encB.code, split)
    img = decode_code(model, mixed, encA.xT, plan, schedule)
    os.makedirs(out, exist_ok=True)
    tensor_to_image(img).save(os.path.join(out, "mix.png"))
    _write_manifest(out, "mix", {"checkpoint": checkpoint, "image_a": image_a,
                                 "image_b": image_b, "split": split, "seed": seed},
                    inputs=[checkpoint, image_a, image_b])


@main.command("interpolate")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--image-a", required=True, type=click.Path(exists=True))
@click.option("--image-b", required=True, type=click.Path(exists=True))
@click.option("--frames", default=5)
@click.option("--mode", default="low_first",
              type=click.Choice(["low_first", "high_first"]))
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def interpolate_cmd(checkpoint, image_a, image_b, frames, mode, seed, out):
    """Controllable interpolation frames along a staged level schedule."""
    model, _ = _load_model(checkpoint)
    schedule, plan = _inference_pair()
    from PIL import Image as PILImage
    encA = encode(model, image_to_tensor(PILImage.open(image_a), model.cfg.image_size),
                  plan, schedule)
    encB = encode(model, image_to_tensor(PILImage.open(image_b), model.cfg.image_size),
                  plan, schedule)
    maker = low_first_path if mode == "low_first" else high_first_path
    os.makedirs(out, exist_ok=True)
    for i, path in enumerate(maker(encA.code.L, frames)):
        code, xT = interpolate(encA, encB, path)
        img = decode_code(model, code, xT, plan, schedule)
        tensor_to_image(img).save(os.path.join(out, f"frame_{i:03d}.png"))
    _write_manifest(out, "interpolate", {
        "checkpoint": checkpoint, "image_a": image_a, "image_b": image_b,
        "frames": frames, "mode": mode, "seed": seed},
        inputs=[checkpoint, image_a, image_b])


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--count", default=8, help="images to sample")
@click.option("--fit-count", default=2000, help="codes used to fit the latent model")
@click.option("--fit-steps", default=3000)
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def sample(checkpoint, count, fit_count, fit_steps, seed, out):
    """Unconditional sampling via a latent denoiser fit on encoder codes."""
    model, _ = _load_model(checkpoint)
    spec = SyntheticShapesSpec(canvas=model.cfg.image_size, count=fit_count, seed=seed)
    images, _ = generate_shapes(spec)
    with torch.no_grad():
        slots = model.encode_codes(images)
    flats = torch.cat(slots, dim=1)
    latent = train_latent_ddim(flats, model.cfg.L, model.cfg.d,
                               steps=fit_steps, seed=seed)
    schedule, plan = _inference_pair()
    out_imgs = sample_unconditional(latent, model, count, seed=seed,
                                    plan=plan, schedule=schedule)
    os.makedirs(out, exist_ok=True)
    for i in range(out_imgs.shape[0]):
        tensor_to_image(out_imgs[i]).save(os.path.join(out, f"sample_{i:03d}.png"))
    _write_manifest(out, "sample", {
        "checkpoint": checkpoint, "count": count, "fit_count": fit_count,
        "fit_steps": fit_steps, "seed": seed}, inputs=[checkpoint])


@main.command("eval")
@click.option("--checkpoints", required=True,
              help="comma-separated name=path checkpoint list")
@click.option("--count", default=64)
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def eval_cmd(checkpoints, count, seed, out):
    """Reconstruction benchmark with encoded and random noise maps."""
    models, trained = {}, {}
    paths = []
    for item in checkpoints.split(","):
        name, _, path = item.partition("=")
        if not path:
            name, path = os.path.basename(item), item
        model, payload = _load_model(path)
        models[name] = model
        trained[name] = payload.get("extra", {}).get("step", -1)
        paths.append(path)
    size = next(iter(models.values())).cfg.image_size
    spec = SyntheticShapesSpec(canvas=size, count=count, seed=seed + 10_000)
    images, _ = generate_shapes(spec)
    schedule, plan = _inference_pair()
    report = reconstruction_benchmark(models, images, plan, schedule,
                                      seed=seed, steps_trained=trained)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "benchmark.json"), "w") as f:
        f.write(report.to_json())
    with open(os.path.join(out, "benchmark.csv"), "w") as f:
        f.write(report.to_csv())
    _write_manifest(out, "eval", {"checkpoints": checkpoints, "count": count,
                                  "seed": seed}, inputs=paths)


@main.command()
@click.option("--variants", required=True, help="comma-separated variant names")
@click.option("--steps", default=1500)
@click.option("--count", default=2000)
@click.option("--eval-every", default=500)
@click.option("--seeds", default="0")
@click.option("--base-width", default=16)
@click.option("--dim", "d", default=64)
@click.option("--out", required=True, type=click.Path())
def ablate(variants, steps, count, eval_every, seeds, base_width, d, out):
    """Train every variant under a shared budget; emit MSE curves as CSV."""
    names = [v.strip() for v in variants.split(",")]
    for v in names:
        Variant(v)
    seed_list = [int(s) for s in seeds.split(",")]
    spec = SyntheticShapesSpec(count=count, seed=7)
    images, _ = generate_shapes(spec)
    tr, va = split_train_val(count)
    os.makedirs(out, exist_ok=True)
    results = {}
    for seed in seed_list:
        tc = TrainConfig(total_steps=steps, eval_every=eval_every,
                         checkpoint_every=10 ** 9, seed=seed)
        base_cfg = ModelConfig(base_width=base_width, d=d)
        res = ablation_harness(names, images[tr], images[va], tc,
                               base_cfg=base_cfg, seed=seed,
                               log=lambda r: click.echo(json.dumps(r)))
        results[str(seed)] = res
        with open(os.path.join(out, f"curves_seed{seed}.csv"), "w") as f:
            f.write(curves_to_csv(res["curves"]))
    with open(os.path.join(out, "ablation.json"), "w") as f:
        json.dump(results, f, indent=1)
    _write_manifest(out, "ablate", {
        "variants": names, "steps": steps, "count": count,
        "eval_every": eval_every, "seeds": seed_list})


@main.command("classifier-train")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--count", default=2000)
@click.option("--factors", default="hue,shape,bg_brightness,size")
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def classifier_train(checkpoint, count, factors, seed, out):
    """Train per-factor linear attribute classifiers on encoder codes."""
    model, _ = _load_model(checkpoint)
    spec = SyntheticShapesSpec(canvas=model.cfg.image_size, count=count, seed=seed)
    images, factor_table = generate_shapes(spec)
    labels = binarize_factors(factor_table)
    with torch.no_grad():
        slots = model.encode_codes(images)
    flats = torch.cat(slots, dim=1).double().numpy()
    L = len(slots)
    d = slots[0].shape[1]
    directions = []
    for name in [f.strip() for f in factors.split(",")]:
        if name not in labels:
            raise click.BadParameter(f"unknown factor {name!r}")
        direction = ed.train_classifier(flats, labels[name], L=L, d=d,
                                        name=name, seed=seed)
        click.echo(f"{name}: held-out accuracy {direction.train_accuracy:.3f}")
        directions.append(direction)
    os.makedirs(out, exist_ok=True)
    ed.save_registry(directions, os.path.join(out, "attributes.json"))
    _write_manifest(out, "classifier-train", {
        "checkpoint": checkpoint, "count": count, "factors": factors,
        "seed": seed}, inputs=[checkpoint])


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--count", default=2000)
@click.option("--factors", default="hue,shape")
@click.option("--seed", default=0)
@click.option("--out", required=True, type=click.Path())
def probe(checkpoint, count, factors, seed, out):
    """Per-level linear probing accuracies (low-only, high-only, full)."""
    model, _ = _load_model(checkpoint)
    spec = SyntheticShapesSpec(canvas=model.cfg.image_size, count=count, seed=seed)
    images, factor_table = generate_shapes(spec)
    labels = binarize_factors(factor_table)
    with torch.no_grad():
        slots = model.encode_codes(images)
    flats = torch.cat(slots, dim=1).double().numpy()
    L = len(slots)
    d = slots[0].shape[1]
    half = L // 2
    subsets = {"low": list(range(1, half + 1)),
               "high": list(range(half + 1, L + 1)),
               "full": list(range(1, L + 1))}
    results = {}
    for name in [f.strip() for f in factors.split(",")]:
        results[name] = {sub: ed.linear_probe(flats, labels[name], lv, L=L, d=d,
                                              seed=seed)
                         for sub, lv in subsets.items()}
        click.echo(f"{name}: {results[name]}")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "probe.json"), "w") as f:
        json.dump(results, f, indent=1)
    _write_manifest(out, "probe", {"checkpoint": checkpoint, "count": count,
                                   "factors": factors, "seed": seed},
                    inputs=[checkpoint])


@main.command()
@click.option("--checkpoint", envvar="HDAE_CHECKPOINT", required=True,
              type=click.Path(exists=True))
@click.option("--registry", type=click.Path(exists=True), default=None)
@click.option("--port", default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--seed", default=0)
def serve(checkpoint, registry, port, host, seed):
    """Run the HTTP inference service."""
    import uvicorn
    from .service import ServiceBundle, create_app
    torch.manual_seed(seed)
    model, _ = _load_model(checkpoint)
    attributes = ed.load_registry(registry) if registry else []
    bundle = ServiceBundle(model=model, attributes=attributes)
    app = create_app(bundle)
    uvicorn.run(app, host=host, port=port)


def entrypoint():
    try:
        main(standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        sys.exit(2)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except Exception as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    entrypoint()
