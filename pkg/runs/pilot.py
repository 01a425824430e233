import json, time, torch
torch.set_num_threads(1)
from hdae.data import SyntheticShapesSpec, generate_shapes
from hdae.training import TrainConfig, train, split_train_val
from hdae.nets import ModelConfig, Autoencoder, Variant

imgs, factors = generate_shapes(SyntheticShapesSpec(count=2000, seed=7))
tr, va = split_train_val(2000)
train_x, val_x = imgs[tr], imgs[va]
out = {}
for v in ["DAE", "DAE_WIDE", "HDAE_E", "HDAE_U"]:
    torch.manual_seed(0)
    cfg = ModelConfig(base_width=16, d=64, variant=v)
    m = Autoencoder(cfg)
    tc = TrainConfig(total_steps=600, eval_every=200, probe_size=32, checkpoint_every=10**9, seed=0)
    t0 = time.time()
    hist, _ = train(m, train_x, tc, val_images=val_x)
    vals = [(h["step"], h["val_mse"]) for h in hist if "val_mse" in h]
    out[v] = {"vals": vals, "final_loss": hist[-1]["loss"], "secs": time.time()-t0}
    print(v, out[v], flush=True)
    with open("runs/pilot_result.json", "w") as f:
        json.dump(out, f, indent=1)
