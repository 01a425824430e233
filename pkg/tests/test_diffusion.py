import math

import pytest
import torch

from hdae.diffusion import (q_sample, ddim_step, ddim_invert_step, noise_loss,
                            generate, encode_stochastic)
from hdae.schedule import StepPlan, make_linear_schedule, make_step_plan


@pytest.fixture(scope="module")
def sched():
    return make_linear_schedule(100, 1e-3, 0.1)


def test_q_sample_t0_identity(sched):
    x0 = torch.randn(3, 8, 8)
    eps = torch.randn(3, 8, 8)
    assert torch.equal(q_sample(x0, 0, eps, sched), x0)


def test_q_sample_quarter_alpha():
    # single-step schedule with beta = 0.75 gives alpha_bar_1 = 0.25
    s = make_linear_schedule(1, 0.75, 0.75)
    x0 = torch.ones(2, 4, 4)
    out = q_sample(x0, 1, torch.zeros_like(x0), s)
    assert torch.allclose(out, torch.full_like(x0, 0.5))


def test_q_sample_scalar_loop_oracle(sched):
    torch.manual_seed(1)
    x0 = torch.randn(2, 3, 4)
    eps = torch.randn(2, 3, 4)
    t = 37
    out = q_sample(x0, t, eps, sched)
    ab = sched.alpha_bar(t)
    for idx in range(x0.numel()):
        expect = math.sqrt(ab) * x0.reshape(-1)[idx] + math.sqrt(1 - ab) * eps.reshape(-1)[idx]
        assert abs(float(out.reshape(-1)[idx]) - float(expect)) < 1e-6


def test_q_sample_errors(sched):
    with pytest.raises(ValueError):
        q_sample(torch.zeros(2, 2), 1, torch.zeros(3, 2), sched)
    with pytest.raises(ValueError):
        q_sample(torch.zeros(2, 2), 101, torch.zeros(2, 2), sched)


def test_q_sample_noise_monotone(sched):
    torch.manual_seed(2)
    x0 = torch.randn(3, 8, 8)
    eps = torch.randn(3, 8, 8)
    dists = [float(torch.norm(q_sample(x0, t, eps, sched) - x0))
             for t in range(0, 101, 10)]
    assert all(b >= a - 1e-6 for a, b in zip(dists, dists[1:]))


def test_ddim_step_zero_eps_scaling(sched):
    x = torch.randn(3, 8, 8)
    out = ddim_step(x, torch.zeros_like(x), 50, 20, sched)
    ratio = math.sqrt(sched.alpha_bar(20) / sched.alpha_bar(50))
    assert torch.allclose(out, ratio * x, atol=1e-6)


def test_ddim_step_to_clean_endpoint(sched):
    torch.manual_seed(3)
    x0 = torch.randn(3, 8, 8)
    eps = torch.randn(3, 8, 8)
    x_t = q_sample(x0, 60, eps, sched)
    out = ddim_step(x_t, eps, 60, 0, sched)  # alpha_bar_0 = 1
    assert torch.allclose(out, x0, atol=1e-5)


def test_ddim_invert_zero_eps(sched):
    x = torch.randn(3, 8, 8)
    out = ddim_invert_step(x, torch.zeros_like(x), 20, 50, sched)
    ratio = math.sqrt(sched.alpha_bar(50) / sched.alpha_bar(20))
    assert torch.allclose(out, ratio * x, atol=1e-6)
    zero = torch.zeros(3, 8, 8)
    assert torch.equal(ddim_invert_step(zero, zero, 20, 50, sched), zero)


def test_ddim_round_trip(sched):
    torch.manual_seed(4)
    x = torch.randn(3, 16, 16)
    eps = torch.randn(3, 16, 16)
    for t, t_prev in [(100, 50), (50, 10), (10, 0), (73, 72)]:
        down = ddim_step(x, eps, t, t_prev, sched)
        back = ddim_invert_step(down, eps, t_prev, t, sched)
        assert torch.max(torch.abs(back - x)) < 1e-5
        up = ddim_invert_step(x, eps, t_prev, t, sched)
        down2 = ddim_step(up, eps, t, t_prev, sched)
        assert torch.max(torch.abs(down2 - x)) < 1e-5


def test_ddim_step_order_errors(sched):
    x = torch.zeros(2, 2)
    with pytest.raises(ValueError):
        ddim_step(x, x, 10, 10, sched)
    with pytest.raises(ValueError):
        ddim_invert_step(x, x, 10, 5, sched)


def test_noise_loss_values():
    a = torch.ones(4, 4)
    assert float(noise_loss(a, a)) == 0.0
    assert float(noise_loss(a, torch.zeros_like(a))) == pytest.approx(1.0)
    torch.manual_seed(5)
    x = torch.randn(3, 5)
    y = torch.randn(3, 5)
    acc = 0.0
    for i in range(15):
        acc += (float(x.reshape(-1)[i]) - float(y.reshape(-1)[i])) ** 2
    assert float(noise_loss(x, y)) == pytest.approx(acc / 15, abs=1e-7)
    with pytest.raises(ValueError):
        noise_loss(torch.zeros(2), torch.zeros(3))


class ZeroModel:
    def __call__(self, x, t, code):
        return torch.zeros_like(x)


def test_generate_zero_model_closed_form(sched):
    torch.manual_seed(6)
    xT = 0.3 * torch.randn(1, 3, 8, 8)
    plan = make_step_plan(100, 10)
    out = generate(ZeroModel(), None, xT, plan, sched, clip=False)
    # eps = 0 collapses the whole chain to a single rescaling
    expect = math.sqrt(1.0 / sched.alpha_bar(100)) * xT
    assert torch.allclose(out, expect, atol=1e-5)


def test_generate_single_step_plan(sched):
    xT = torch.randn(1, 3, 8, 8)
    plan = StepPlan(timesteps=(100,))
    out = generate(ZeroModel(), None, xT, plan, sched, clip=False)
    assert torch.allclose(out, ddim_step(xT, torch.zeros_like(xT), 100, 0, sched))


def test_encode_stochastic_trivials(sched):
    plan = make_step_plan(100, 10)
    zeros = torch.zeros(1, 3, 8, 8)
    assert torch.equal(encode_stochastic(ZeroModel(), zeros, None, plan, sched), zeros)
    x0 = torch.randn(1, 3, 8, 8)
    one_step = StepPlan(timesteps=(100,))
    out = encode_stochastic(ZeroModel(), x0, None, one_step, sched)
    assert torch.allclose(out, ddim_invert_step(x0, torch.zeros_like(x0), 0, 100, sched))


def test_generate_deterministic(tiny_trained):
    model, schedule, plan, images, _ = tiny_trained
    x = images[:2]
    codes = model.encode_codes(x)
    xT = encode_stochastic(model, x, codes, plan, schedule)
    a = generate(model, codes, xT, plan, schedule)
    b = generate(model, codes, xT, plan, schedule)
    assert torch.equal(a, b)


def test_round_trip_on_trained_toy(tiny_trained):
    model, schedule, plan, images, _ = tiny_trained
    x = images[:4]
    codes = model.encode_codes(x)
    xT = encode_stochastic(model, x, codes, plan, schedule)
    recon = generate(model, codes, xT, plan, schedule)
    assert float(torch.mean((recon - x) ** 2)) < 2e-2
