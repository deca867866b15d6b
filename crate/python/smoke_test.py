"""Smoke test for the vrirl Python bindings.

Build and install first, e.g. ``maturin develop --release -m crates/python/Cargo.toml``.
"""

import json
import math

import vrirl


def main():
    world = vrirl.GridWorld.random(2, 6, 2, seed=3)
    assert world.num_states == 36 and world.num_actions == 9
    v, q = world.value_iteration()
    assert len(v) == 36 and len(q[0]) == 9

    feats = world.features()
    model = vrirl.Model(len(feats[0]), [16], seed=1, features=feats)
    sol = vrirl.solve_vr(model, world)
    for s in range(world.num_states):
        assert abs(sol["v"][s] - max(sol["q"][s])) < 1e-12

    before = vrirl.mean_q_error(sol["q"], q)
    rl_model, hist = vrirl.train_rl(world, model, learning_rate=3e-3, epochs=200, oracle_q=q)
    after = vrirl.mean_q_error(vrirl.solve_vr(rl_model, world, k=50.0)["q"], q)
    assert after < before, (before, after)
    assert hist[0][0] == 0 and len(hist) == 201

    demos = world.sample(q, count=300, length=10, b=5.0, seed=7)
    assert len(demos) == 300 and len(demos[0]) == 10
    irl_model, hist = vrirl.train_irl(world, model, demos, learning_rate=1e-3, epochs=20)
    assert hist[-1][1] > hist[0][1]
    corr = hist[-1][2]
    assert corr is not None and -1.0 <= corr <= 1.0

    flat = vrirl.trajectory_nll(irl_model, world, demos, 0.0)
    assert abs(flat - math.log(9)) < 1e-12
    rate = vrirl.disagreement_rate(irl_model, world, demos)
    assert 0.0 <= rate <= 1.0

    ck = irl_model.checkpoint_json(world.gamma, b=1.0)
    again = vrirl.Model.from_checkpoint(ck)
    assert again.params == irl_model.params
    assert json.loads(ck)["b"] == 1.0

    row = [0.5, 2.0, -1.0]
    assert vrirl.backup_max(row) == 2.0
    assert 0.0 <= vrirl.backup_softmax(row, 10.0) - 2.0 <= math.log(3) / 10.0
    assert abs(sum(vrirl.boltzmann_probs(row, 2.0)) - 1.0) < 1e-12
    assert abs(vrirl.reward_correlation([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]) - 1.0) < 1e-12

    try:
        vrirl.GridWorld.random(0, 6, 2, seed=1)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid spec accepted")

    print(f"ok: RL mean Q error {before:.3f} -> {after:.3f}, IRL correlation {corr:.3f}")


if __name__ == "__main__":
    main()
