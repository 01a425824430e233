import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from hdae.codes import HierarchicalCode
from hdae.editing import (AttributeDirection, ecdf, fidelity,
                          level_attribution, linear_probe, load_registry,
                          manipulate, normalize_direction, save_registry,
                          topk_support, train_classifier, truncate_direction)


def make_direction(n, L=1, d=None, bias=0.0):
    n = np.asarray(n, dtype=np.float64)
    return AttributeDirection(name="a", n=n, bias=bias, L=L, d=d or n.size // L)


class TestNormalize:
    def test_known_values(self):
        # |n| = [1, 2, 3] -> (mag - 1) / 2
        out = normalize_direction(np.array([1.0, -2.0, 3.0]))
        assert np.allclose(out, [0.0, 0.5, 1.0])

    def test_degenerate_all_equal(self):
        assert np.all(normalize_direction(np.array([2.0, -2.0, 2.0])) == 0.0)
        assert np.all(normalize_direction(np.zeros(4)) == 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50),
           st.floats(1e-3, 1e3))
    def test_scale_invariant(self, vals, scale):
        n = np.array(vals)
        a = normalize_direction(n)
        b = normalize_direction(scale * n)
        assert np.allclose(a, b, atol=1e-9)
        assert a.min() >= 0.0 and a.max() <= 1.0 + 1e-12


class TestTopK:
    def test_known_ranking(self):
        n_hat = np.array([0.1, 0.9, 0.5, 0.9])
        assert topk_support(n_hat, 1).tolist() == [1]  # stable tie-break
        assert topk_support(n_hat, 2).tolist() == [1, 3]
        assert topk_support(n_hat, 3).tolist() == [1, 2, 3]

    def test_bounds(self):
        with pytest.raises(ValueError):
            topk_support(np.zeros(3), 4)
        assert topk_support(np.zeros(3), 0).size == 0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=40),
           st.data())
    def test_nesting(self, vals, data):
        """Support sets for increasing k are nested."""
        n = np.array(vals)
        d = make_direction(n)
        k1 = data.draw(st.integers(0, n.size))
        k2 = data.draw(st.integers(k1, n.size))
        s1 = set(topk_support(d.n_hat, k1).tolist())
        s2 = set(topk_support(d.n_hat, k2).tolist())
        assert s1 <= s2
        assert len(s1) == k1 and len(s2) == k2


class TestManipulate:
    def test_unit_step_size(self):
        torch.manual_seed(0)
        code = HierarchicalCode(levels=[torch.randn(4), torch.randn(4)])
        d = make_direction(np.arange(8.0) + 1, L=2, d=4)
        trunc = truncate_direction(d, 8)
        out = manipulate(code, trunc, alpha=2.5)
        delta = (out.flatten() - code.flatten()).double().numpy()
        assert np.isclose(np.linalg.norm(delta), 2.5, atol=1e-5)

    def test_alpha_zero_identity(self):
        code = HierarchicalCode(levels=[torch.randn(6)])
        d = make_direction(np.random.randn(6))
        out = manipulate(code, truncate_direction(d, 3), alpha=0.0)
        assert torch.allclose(out.flatten(), code.flatten())

    def test_degenerate_direction_is_noop(self):
        code = HierarchicalCode(levels=[torch.randn(4)])
        d = make_direction(np.ones(4))  # n_hat all zero, k=0 support empty
        out = manipulate(code, truncate_direction(d, 0), alpha=5.0)
        assert torch.allclose(out.flatten(), code.flatten())

    def test_logit_monotone_in_alpha(self):
        """The classifier logit is linear (hence monotone) in the step size."""
        rng = np.random.default_rng(0)
        d = make_direction(rng.normal(size=12), L=3, d=4, bias=0.3)
        trunc = truncate_direction(d, 5)
        code = HierarchicalCode(levels=[torch.randn(4) for _ in range(3)])
        logits = [d.logit(manipulate(code, trunc, a)) for a in (-1.0, 0.0, 1.0, 2.0)]
        assert all(b > a for a, b in zip(logits, logits[1:]))
        # linear: equal spacing in alpha gives equal logit increments
        incs = np.diff(logits)
        assert np.allclose(incs[1:], incs[0] * np.array([1.0, 1.0]), rtol=1e-4)


def test_classifier_recovers_plane():
    """Labels defined by a known hyperplane should be recoverable to high
    held-out accuracy, with the direction roughly parallel to the plane
    normal."""
    rng = np.random.default_rng(7)
    X = rng.normal(size=(400, 16))
    w = rng.normal(size=16)
    y = (X @ w > 0).astype(int)
    d = train_classifier(X, y, L=2, d=8, name="plane")
    assert d.train_accuracy > 0.9
    cos = abs(d.n @ w) / (np.linalg.norm(d.n) * np.linalg.norm(w))
    assert cos > 0.8


def test_classifier_rejects_single_class():
    X = np.random.default_rng(0).normal(size=(10, 4))
    with pytest.raises(ValueError):
        train_classifier(X, np.zeros(10), L=1, d=4)


def test_level_attribution():
    n = np.array([0.0, 0.0, 3.0, 4.0])  # all mass on level 2
    d = make_direction(n, L=2, d=2)
    mass, arg = level_attribution(d)
    assert arg == 2
    assert np.isclose(mass.sum(), 1.0)
    assert mass[1] > mass[0]


def test_linear_probe_level_restriction():
    """A label carried only by level-2 slots is learnable from level 2 but
    not from level 1."""
    rng = np.random.default_rng(1)
    X = rng.normal(size=(300, 8))
    y = (X[:, 4] > 0).astype(int)
    hi = linear_probe(X, y, level_subset=[2], L=2, d=4)
    lo = linear_probe(X, y, level_subset=[1], L=2, d=4)
    assert hi > 0.9
    assert lo < 0.75


def test_ecdf_known():
    pts = ecdf(np.array([3.0, 1.0, 3.0, 2.0]))
    assert pts == [(1.0, 0.25), (2.0, 0.5), (3.0, 1.0)]


def test_fidelity():
    a = torch.zeros(1, 4, 4)
    b = torch.ones(1, 4, 4)
    mask = torch.zeros(4, 4)
    mask[:2] = 1.0  # top half excluded
    assert fidelity(a, b, mask) == pytest.approx(1.0)
    assert fidelity(a, a, mask) == 0.0
    assert fidelity(a, b, torch.ones(4, 4)) == 0.0


def test_registry_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    dirs = [make_direction(rng.normal(size=8), L=2, d=4, bias=0.1)]
    dirs[0].train_accuracy = 0.95
    path = tmp_path / "reg.json"
    save_registry(dirs, path)
    back = load_registry(path)
    assert back[0].name == "a"
    assert np.allclose(back[0].n, dirs[0].n)
    assert back[0].bias == pytest.approx(0.1)
    assert back[0].train_accuracy == pytest.approx(0.95)
