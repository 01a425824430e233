"""Produce the long-running training artifacts the acceptance suite loads.

Outputs under runs/acceptance/:
  a1/checkpoint.pt + history.json      HDAE_U, 20k steps, 8k shapes 32x32
  a2/seed{0,1}/{VARIANT}_history.json  4 variants, shared budget per seed
  a2/seed0/{DAE,HDAE_U}_final.pt       reused for the random-xT asymmetry check
  status.json                          progress heartbeat
"""

import json
import os
import time

import torch

torch.set_num_threads(1)

from hdae.data import SyntheticShapesSpec, generate_shapes
from hdae.nets import Autoencoder, ModelConfig, save_checkpoint
from hdae.training import TrainConfig, train, split_train_val

ROOT = os.path.join(os.path.dirname(__file__), "acceptance")
A2_STEPS = 1500
A2_EVAL_EVERY = 500
A2_VARIANTS = ["DAE", "DAE_WIDE", "HDAE_E", "HDAE_U"]
A2_SEEDS = [0, 1]


def status(**kw):
    kw["time"] = time.strftime("%H:%M:%S")
    with open(os.path.join(ROOT, "status.json"), "w") as f:
        json.dump(kw, f)
    print(kw, flush=True)


def main():
    os.makedirs(ROOT, exist_ok=True)

    spec = SyntheticShapesSpec(canvas=32, count=8000, seed=0)
    images, _ = generate_shapes(spec)
    tr, va = split_train_val(8000)
    train_x, val_x = images[tr], images[va]
    status(phase="dataset", n_train=len(tr), n_val=len(va))

    # A1: the main 20k-step HDAE_U run.
    a1_dir = os.path.join(ROOT, "a1")
    if not os.path.exists(os.path.join(a1_dir, "checkpoint.pt")):
        torch.manual_seed(0)
        cfg = ModelConfig(variant="HDAE_U", base_width=16, d=64)
        model = Autoencoder(cfg)
        tc = TrainConfig(total_steps=20000, eval_every=2000, checkpoint_every=5000,
                         probe_size=32, seed=0)
        t0 = time.time()
        history, ema = train(model, train_x, tc, out_dir=a1_dir, val_images=val_x,
                             log=lambda r: status(phase="a1", **r))
        save_checkpoint(os.path.join(a1_dir, "checkpoint.pt"), model,
                        ema_state=ema.state_dict(),
                        extra={"step": tc.total_steps, "secs": time.time() - t0})
        with open(os.path.join(a1_dir, "history.json"), "w") as f:
            json.dump(history, f)
    status(phase="a1_done")

    # A2: shared-budget ablation, two seeds.
    for seed in A2_SEEDS:
        seed_dir = os.path.join(ROOT, "a2", f"seed{seed}")
        os.makedirs(seed_dir, exist_ok=True)
        for v in A2_VARIANTS:
            hist_path = os.path.join(seed_dir, f"{v}_history.json")
            if os.path.exists(hist_path):
                continue
            torch.manual_seed(seed)
            cfg = ModelConfig(variant=v, base_width=16, d=64)
            model = Autoencoder(cfg)
            tc = TrainConfig(total_steps=A2_STEPS, eval_every=A2_EVAL_EVERY,
                             checkpoint_every=10 ** 9, probe_size=32, seed=seed)
            history, ema = train(model, train_x, tc, val_images=val_x,
                                 log=lambda r: status(phase=f"a2_s{seed}_{v}", **r))
            if seed == 0 and v in ("DAE", "HDAE_U"):
                save_checkpoint(os.path.join(seed_dir, f"{v}_final.pt"), model,
                                ema_state=ema.state_dict(),
                                extra={"step": A2_STEPS})
            with open(hist_path, "w") as f:
                json.dump(history, f)
    status(phase="done")


if __name__ == "__main__":
    main()
