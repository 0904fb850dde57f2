import json
import math

import pytest

import mergelab


def test_default_plan_parses_and_digests():
    plan = mergelab.default_toy_plan()
    parsed = json.loads(plan)
    assert parsed["source_domains"]
    d1 = mergelab.plan_digest(plan)
    assert d1 == mergelab.plan_digest(plan)
    assert len(d1) == 64
    mergelab.validate_plan(plan)


def test_bad_plan_raises_plan_error():
    plan = json.loads(mergelab.default_toy_plan())
    plan["mystery_option"] = True
    with pytest.raises(mergelab.PlanError):
        mergelab.validate_plan(json.dumps(plan))


def test_levenshtein():
    assert mergelab.levenshtein([1, 2], [2]) == 1
    assert mergelab.levenshtein([], [1, 2, 3]) == 3
    assert mergelab.levenshtein([5, 6, 7], [5, 6, 7]) == 0


def test_ctc_loss_single_frame():
    # one frame, uniform logits over {blank, a, b}: p(label=[1]) = 1/3
    loss, grad = mergelab.ctc_loss([[0.0, 0.0, 0.0]], [1])
    assert loss == pytest.approx(math.log(3.0))
    assert len(grad) == 3


def test_greedy_decode_collapses_repeats_and_blanks():
    logits = [
        [0.0, 5.0, 0.0],  # a
        [0.0, 5.0, 0.0],  # a (repeat, collapsed)
        [5.0, 0.0, 0.0],  # blank
        [0.0, 0.0, 5.0],  # b
    ]
    assert mergelab.greedy_decode(logits) == [1, 2]


def test_tiny_regime_run(tmp_path):
    plan = json.loads(mergelab.default_toy_plan())
    plan["world_seed"] = 7
    plan["budgets"] = {"pretrain_epochs": 1, "tk_product": 1, "transfer_epochs": 1}
    plan["distributed_rounds"] = 1
    plan["tk_rounds"] = [1]
    plan["subsample_fractions"] = [1.0]
    for bucket in ("pretrain", "source_domains", "ood_sets", "transfer_targets"):
        plan[bucket] = plan[bucket][:2]
        for recipe in plan[bucket]:
            if recipe["n_train"] > 0:
                recipe["n_train"] = 8
            recipe["n_test"] = 4
            recipe["max_label_len"] = 2
    plan["group_masks"] = {}
    plan_json = json.dumps(plan)

    csv_one = mergelab.run_regime(plan_json, "transfer", str(tmp_path), workers=1)
    csv_two = mergelab.run_regime(plan_json, "transfer", workers=2)
    assert csv_one == csv_two
    assert csv_one.splitlines()[0] == "table,row,col,metric,value,model_digest,dataset_digest"

    mergelab.verify_provenance(str(tmp_path / "transfer"))
    with pytest.raises(mergelab.PlanError):
        mergelab.run_regime(plan_json, "no_such_regime")
