import json

import numpy as np
import pytest

from qsg.errors import InvalidIndexError, InvalidInstanceError, SizeError
from qsg.model import (
    apply_fairness_scenario,
    feasible_subset,
    generate_instance,
    instance_to_dict,
    read_instance,
    without_fsa,
    write_instance,
)


def test_generate_defaults(inst20):
    assert inst20.cap_C == 13
    assert inst20.min_NP == 10
    assert inst20.m == pytest.approx(2.0)
    np.testing.assert_allclose(inst20.beta, [0.8] * 5)
    assert inst20.n_partitions == 5
    assert all(len(p) == 4 for p in inst20.partitions)


def test_generate_payoff_ranges(inst20):
    assert np.all((inst20.reward_def >= 1) & (inst20.reward_def <= 10))
    assert np.all((inst20.loss_def >= -10) & (inst20.loss_def <= -1))
    assert np.all(inst20.w_def > 0) and np.all(inst20.w_att > 0)


def test_generate_deterministic():
    assert generate_instance(7, 30) == generate_instance(7, 30)
    assert generate_instance(7, 30) != generate_instance(8, 30)


def test_generate_lambda_override(inst20):
    zero = generate_instance(1, 20, {"lam": 0})
    assert zero.lam == 0
    assert zero.replace(lam=inst20.lam) == inst20
    assert generate_instance(1, 20, {"lambda": 0}).lam == 0


def test_generate_rejects_unknown_override():
    with pytest.raises(InvalidInstanceError):
        generate_instance(0, 20, {"gamma": 1})


def test_generate_too_small():
    with pytest.raises(SizeError):
        generate_instance(0, 3)


def test_fairness_scenario(inst20):
    fair = apply_fairness_scenario(inst20)
    p0 = list(inst20.partitions[0])
    assert np.all((fair.reward_att[p0] >= 6) & (fair.reward_att[p0] <= 15))
    np.testing.assert_allclose(fair.reward_att[p0], inst20.reward_att[p0] + 5)
    rest = [j for j in range(20) if j not in p0]
    np.testing.assert_array_equal(fair.reward_att[rest], inst20.reward_att[rest])
    np.testing.assert_allclose(fair.beta, 0.48)


def test_fairness_not_idempotent(inst20):
    twice = apply_fairness_scenario(apply_fairness_scenario(inst20))
    p0 = list(inst20.partitions[0])
    np.testing.assert_allclose(twice.reward_att[p0], inst20.reward_att[p0] + 10)


def test_fairness_beta_m5():
    inst = generate_instance(2, 50)
    assert inst.m == 5
    np.testing.assert_allclose(apply_fairness_scenario(inst).beta, 1.2)


def test_without_fsa(inst20):
    np.testing.assert_allclose(without_fsa(inst20).beta, inst20.m)


def test_feasible_subset():
    inst = generate_instance(0, 20, {"cap_C": 20})
    assert feasible_subset(inst, range(20))
    assert not feasible_subset(inst, range(inst.min_NP - 1))
    missing_3 = [j for j in range(20) if j not in inst.partitions[3]]
    assert not feasible_subset(inst, missing_3[: inst.cap_C])


def test_feasible_subset_bad_index(inst20):
    with pytest.raises(InvalidIndexError):
        feasible_subset(inst20, [0, 25])


def test_round_trip(tmp_path, inst20):
    path = tmp_path / "inst.json"
    write_instance(inst20, path)
    assert read_instance(path) == inst20


def _write_doc(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    return path


def test_read_rejects_reward_below_loss(tmp_path, inst20):
    doc = instance_to_dict(inst20)
    doc["reward_def"][4] = doc["loss_def"][4] - 1
    with pytest.raises(InvalidInstanceError, match="4"):
        read_instance(_write_doc(tmp_path, doc))


def test_read_rejects_overlapping_partitions(tmp_path, inst20):
    doc = instance_to_dict(inst20)
    doc["partitions"][1] = list(doc["partitions"][1]) + [0]
    with pytest.raises(InvalidInstanceError):
        read_instance(_write_doc(tmp_path, doc))


def test_read_rejects_garbage(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{not json")
    with pytest.raises(InvalidInstanceError):
        read_instance(path)
