import json
import math
import pathlib

import pytest

import hippo

ROOT = pathlib.Path(__file__).resolve().parents[2]


def tube(length=90.0, **extra):
    cfg = {
        "colon": {
            "seed": 1,
            "segments": [
                {"name": "Tube", "length": length, "radius_min": 20.0, "radius_max": 20.0,
                 "bend_radius": 50.0, "turns": []}
            ],
        },
        "total_steps": 2048,
        "episode_step_cap": 200,
    }
    cfg.update(extra)
    return cfg


def test_actions_and_defaults():
    assert hippo.ACTIONS == ["BendUp", "BendDown", "BendLeft", "BendRight", "Advance", "Withdraw"]
    cfg = hippo.default_config()
    assert cfg["algorithm"] == "hi-ppo"
    shipped = json.loads((ROOT / "configs" / "default.json").read_text())
    assert cfg == shipped
    assert len(hippo.config_hash(cfg)) == 64


def test_unknown_key_is_rejected():
    with pytest.raises(ValueError, match="bogus"):
        hippo.config_hash(tube(bogus=1))


def test_mechanism_examples():
    assert hippo.adjust_reward(0.5, 1, 0, -1.0) == -0.5
    assert hippo.adjust_reward(0.5, 1, 1, -1.0) == 0.5
    assert hippo.bc_similarity([0.0] * 6, 2) == pytest.approx(math.log(6.0), abs=1e-15)
    assert hippo.security(100, 10, 2) == pytest.approx(0.956, abs=1e-15)
    adv, ret = hippo.gae([1.0, 1.0], [0.0, 0.0], [False, True], 0.0, 0.5, 1.0)
    assert adv == pytest.approx([1.5, 1.0])
    assert ret == pytest.approx([1.5, 1.0])


def test_env_straight_tube_advance_reaches_goal():
    env = hippo.Env(tube(90.0))
    obs = env.reset()
    assert len(obs) == env.observation_size
    steps = 0
    done = False
    while not done:
        obs, reward, done, info = env.step(4)
        steps += 1
    assert info["reached_goal"]
    assert steps == math.ceil(90.0 / 3.0)
    with pytest.raises(ValueError):
        env.step(4)


def test_train_evaluate_replay_report():
    cfg = tube()
    result = hippo.train(cfg)
    assert result["env_steps"] == 2048
    assert result["updates"] == 1
    assert not result["aborted"]
    assert all(hippo.replay(log)["ok"] for log in result["logs"])
    again = hippo.train(cfg)
    assert again["checkpoint"] == result["checkpoint"]

    logs = hippo.evaluate(result["checkpoint"], episodes=1)
    parsed = hippo.parse_log(logs[0])
    assert parsed["header"]["mode"] == "evaluate"
    assert parsed["summary"]["steps"] == len(parsed["steps"])
    assert hippo.replay(logs[0])["ok"]
    assert "Tube" in hippo.report(logs)


def test_expert_on_shipped_colon():
    log = hippo.expert_episode(ROOT / "configs" / "default.json")
    parsed = hippo.parse_log(log)
    assert parsed["summary"]["reached_goal"]
    assert hippo.replay(log)["ok"]
