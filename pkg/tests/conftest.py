import pytest
import torch

torch.set_num_threads(1)

from hdae.data import SyntheticShapesSpec, generate_shapes
from hdae.nets import Autoencoder, ModelConfig, Variant
from hdae.schedule import make_linear_schedule, make_step_plan
from hdae.training import TrainConfig, train


def tiny_config(variant=Variant.HDAE_U, **kw):
    """Small enough to train in seconds inside unit tests."""
    base = dict(image_size=16, base_width=8, channel_mults=(1, 2), groups=4,
                L=2, d=8, variant=variant)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def tiny_dataset():
    spec = SyntheticShapesSpec(canvas=16, count=128, seed=3)
    return generate_shapes(spec)


@pytest.fixture(scope="session")
def tiny_trained(tiny_dataset):
    """A briefly trained tiny model with its schedule/plan; shared across tests."""
    images, factors = tiny_dataset
    torch.manual_seed(0)
    model = Autoencoder(tiny_config())
    cfg = TrainConfig(total_steps=300, batch_size=16, T=100, plan_steps=20,
                      eval_every=10 ** 9, checkpoint_every=10 ** 9, seed=0)
    train(model, images, cfg)
    model.eval()
    schedule = make_linear_schedule(100)
    plan = make_step_plan(100, 20)
    return model, schedule, plan, images, factors
