import math

import numpy as np
import pytest

import cfassign as cf


def test_presets_and_dataset():
    small = cf.small_scenario()
    assert (small.n_aps, small.n_users) == (5, 4)
    assert cf.large_scenario().n_aps == 20
    ds = cf.generate_dataset(small, 3, seed=7, split="test")
    again = cf.generate_dataset(small, 3, seed=7, split="test")
    assert len(ds) == 3
    assert ds.split == "test"
    g = ds.gains(0)
    assert g.shape == (4, 5)
    assert np.array_equal(g, again.gains(0))
    assert (g >= 0).all()


def test_problem_functions():
    g = np.array([[3.0]])
    assert cf.sum_rate(g, np.ones((1, 1)), 1.0) == pytest.approx(2.0)
    per_user, total = cf.connection_violation(np.array([[0.5, 1.0], [0.0, 0.0]]), 2)
    assert total == pytest.approx(2.5)
    assert per_user[1] == pytest.approx(2.0)
    _, entropy = cf.discreteness_penalty([np.full((4, 1), 0.25)])
    assert entropy == pytest.approx(math.log(4))
    s = cf.binarize([np.array([[0.9, 0.5], [0.1, 0.5]])])
    assert s.tolist() == [[1.0, 1.0], [0.0, 0.0]]


def test_baselines():
    small = cf.small_scenario()
    g = cf.generate_dataset(small, 1, seed=3).gains(0)
    best = cf.exhaustive(g, 2, 2, small.noise_power)
    assert best["enumerated_count"] == 7776
    assert best["feasible"]
    greedy = cf.gsd(g, 2, 2, small.noise_power)
    rnd = cf.random_assignment(g, 2, 2, small.noise_power, seed=1)
    assert greedy["sum_rate"] <= best["sum_rate"] + 1e-12
    assert rnd["sum_rate"] <= best["sum_rate"] + 1e-12
    assert cf.is_feasible(rnd["S"], 2, 2)
    with pytest.raises(cf.Error):
        cf.gsd(np.ones((4, 1)), 1, 2, 1.0)


def test_train_and_assign(tmp_path):
    small = cf.small_scenario()
    train_set = cf.generate_dataset(small, 32, seed=1)
    test_set = cf.generate_dataset(small, 8, seed=2, split="test")
    mc = cf.ModelConfig()
    mc.layers = 1
    mc.hidden_width = 6
    mc.message_width = 4
    tc = cf.TrainConfig()
    tc.batch_size = 8
    tc.convergence_window = 3
    tc.max_inner_iters = 6
    tc.max_outer_iters = 1
    tc.eval_batch_size = 8
    model, rows = cf.train(train_set, test_set, mc, tc)
    phases = [r["phase"] for r in rows]
    assert phases[0] == "unconstrained"
    assert phases[-1] == "discreteness"
    assert all(r["lambda1"] == 0 for r in rows if r["phase"] == "unconstrained")

    runs, combined = model.assign(test_set.gains(0), small)
    assert len(runs) == 2
    for r in runs:
        assert np.allclose(r.sum(axis=0), 1.0, atol=1e-9)
    assert np.allclose(1.0 - (1.0 - runs[0]) * (1.0 - runs[1]), combined)
    assert cf.parameter_count(mc) == cf.parameter_count(model.config)

    path = tmp_path / "model.ckpt"
    model.save(path)
    loaded = cf.load_model(path)
    runs2, _ = loaded.assign(test_set.gains(0), small)
    assert np.array_equal(runs[0], runs2[0])
    summary = loaded.evaluate(test_set)
    assert summary["samples"] == 8
    assert 0.0 <= summary["feasible_fraction"] <= 1.0
