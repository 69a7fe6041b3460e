import numpy as np
import pytest
import torch

from bappolicy.features import (
    MAX_OBJECTS,
    MAX_SOCKETS,
    OBJ_FEAT,
    SOCK_FEAT,
    frame_features,
    instruction_features,
)
from bappolicy.model import (
    PolicyConfig,
    batch_to_tensors,
    build_policy,
    losses,
    train_step,
)


def random_samples(n, seed=0, with_targets=True):
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        n_obj = int(rng.integers(1, 8))
        obj = np.zeros((MAX_OBJECTS, OBJ_FEAT))
        obj[:n_obj] = rng.normal(0, 0.5, size=(n_obj, OBJ_FEAT))
        obj_mask = np.ones(MAX_OBJECTS, dtype=bool)
        obj_mask[:n_obj] = False
        sock = np.zeros((MAX_SOCKETS, SOCK_FEAT))
        sock_mask = np.ones(MAX_SOCKETS, dtype=bool)
        s = {
            "objects": obj,
            "objects_mask": obj_mask,
            "sockets": sock,
            "sockets_mask": sock_mask,
            "state": rng.normal(0, 0.4, size=16),
            "instruction": rng.integers(0, 2, size=9).astype(float),
            "wrench": rng.normal(0, 2, size=6),
        }
        if with_targets:
            s["action_target"] = rng.normal(0, 0.3, size=(8, 16))
            s["force_target"] = rng.normal(0, 2, size=(8, 6))
            s["pad_mask"] = np.zeros(8, dtype=bool)
        samples.append(s)
    return samples


class TestShapes:
    def test_forward_shapes_finite(self):
        model = build_policy(PolicyConfig(seed=1))
        batch = batch_to_tensors(random_samples(3, with_targets=False))
        out = model(batch)
        assert out["action_chunk"].shape == (3, 8, 16)
        assert out["force_chunk"].shape == (3, 8, 6)
        assert torch.isfinite(out["action_chunk"]).all()
        assert torch.isfinite(out["force_chunk"]).all()

    def test_branch_off_drops_force_output(self):
        on = build_policy(PolicyConfig(seed=1, force_branch=True))
        off = build_policy(PolicyConfig(seed=1, force_branch=False))
        batch = batch_to_tensors(random_samples(2, with_targets=False))
        assert "force_chunk" not in off(batch)
        assert off.parameter_count() < on.parameter_count()

    def test_same_seed_identical_parameters(self):
        a = build_policy(PolicyConfig(seed=5))
        b = build_policy(PolicyConfig(seed=5))
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            assert torch.equal(pa, pb)

    def test_parameter_budget(self):
        assert build_policy(PolicyConfig()).parameter_count() <= 2_000_000


class TestForceBranchIsolation:
    def test_action_outputs_bit_identical(self):
        # Same seed: shared parameters initialize identically because the
        # force modules are constructed after them; masked attention keeps
        # the force/query tokens out of the action path entirely.
        on = build_policy(PolicyConfig(seed=3, force_branch=True))
        off = build_policy(PolicyConfig(seed=3, force_branch=False))
        for name, p_off in off.named_parameters():
            p_on = dict(on.named_parameters())[name]
            assert torch.equal(p_on, p_off), name
        batch = batch_to_tensors(random_samples(4, seed=9, with_targets=False))
        a_on = on(batch)["action_chunk"]
        a_off = off(batch)["action_chunk"]
        assert torch.equal(a_on, a_off)

    def test_lambda_zero_decouples_force_gradients(self):
        model = build_policy(PolicyConfig(seed=2))
        batch = batch_to_tensors(random_samples(4, seed=4))
        action_loss, force_loss = losses(model, batch)
        total = action_loss + 0.0 * force_loss
        total.backward()
        for name, p in model.named_parameters():
            if "force_head" in name or "force_proj" in name or "query_slot" in name:
                assert p.grad is None or torch.all(p.grad == 0), name

    def test_lambda_positive_reaches_force_encoder(self):
        model = build_policy(PolicyConfig(seed=2))
        batch = batch_to_tensors(random_samples(4, seed=4))
        action_loss, force_loss = losses(model, batch)
        (action_loss + 0.5 * force_loss).backward()
        grad = model.force_proj.weight.grad
        assert grad is not None and float(grad.abs().sum()) > 0


class TestGradients:
    def test_finite_difference_check(self):
        # Central differences on a probe set of parameters, float64.
        torch.set_default_dtype(torch.float64)
        try:
            model = build_policy(PolicyConfig(seed=7, d_model=32, depth=1, heads=2))
            batch = batch_to_tensors(random_samples(2, seed=5), dtype=torch.float64)

            def total_loss():
                a, f = losses(model, batch)
                return a + model.config.force_loss_weight * f

            loss = total_loss()
            model.zero_grad()
            loss.backward()
            rng = np.random.default_rng(0)
            params = [p for p in model.parameters() if p.requires_grad and p.grad is not None]
            checked = 0
            eps = 1e-6
            for p in rng.permutation(len(params))[:10]:
                param = params[int(p)]
                flat = param.data.view(-1)
                idx = int(rng.integers(len(flat)))
                analytic = float(param.grad.view(-1)[idx])
                old = float(flat[idx])
                with torch.no_grad():
                    flat[idx] = old + eps
                    up = float(total_loss())
                    flat[idx] = old - eps
                    down = float(total_loss())
                    flat[idx] = old
                numeric = (up - down) / (2 * eps)
                scale = max(abs(analytic), abs(numeric), 1e-8)
                assert abs(analytic - numeric) / scale < 1e-3, (analytic, numeric)
                checked += 1
            assert checked == 10
        finally:
            torch.set_default_dtype(torch.float32)

    def test_one_batch_overfit(self):
        model = build_policy(PolicyConfig(seed=11))
        batch = batch_to_tensors(random_samples(8, seed=3))
        optim = torch.optim.Adam(model.parameters(), lr=2e-3)
        first = train_step(model, batch, optim)["total"]
        last = None
        for _ in range(500):
            last = train_step(model, batch, optim)["total"]
        assert last < 0.01 * first, (first, last)


class TestFeatures:
    def test_instruction_bag(self):
        v = instruction_features("Pick a red toy from one of the compartments")
        assert v[0] == 1.0 and v[1:4].sum() == 0

    def test_frame_features_shapes(self):
        symbolic = {
            "head": {
                "objects": [
                    {"id": "b", "shape": "box", "color": "red",
                     "pos": [0.1, 0, 0.3], "quat": [1, 0, 0, 0], "frac": 1.0}
                ],
                "sockets": [{"id": "s:p", "kind": "socket", "pos": [0, 0, 0.2]}],
            }
        }
        f = frame_features(symbolic, np.zeros(16), np.zeros(6), np.ones(6), "Plug it", "right")
        assert f["objects"].shape == (MAX_OBJECTS, OBJ_FEAT)
        assert not f["objects_mask"][0] and f["objects_mask"][1]
        assert not f["sockets_mask"][0]
        assert np.array_equal(f["wrench"], np.ones(6))
