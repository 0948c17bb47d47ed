import json

import numpy as np
import pytest

from capacitylab.handles import SubmeasureHandle
from capacitylab.join import join_handle
from capacitylab.potential import DiscretePotentialSpace, ExplicitMatrix, PotentialProblem, potential_handle
from capacitylab.space import PointSet, ProductTreeSpace
from capacitylab.steprans import DerivedCapacity, MaxNorm, NormTower, WeightedP
from capacitylab.verify import NAMES, PropertySpec, default_specs, replay_witness, run_suite


def tower_handle(arities, *norms, label="t"):
    S = ProductTreeSpace(tuple(arities))
    return SubmeasureHandle.from_capacity(DerivedCapacity(NormTower(S, tuple(norms))), label)


def planted():
    S = ProductTreeSpace((2,))
    return SubmeasureHandle.from_table(S, {1: 0.8, 2: 0.3, 3: 0.5}, "planted")


def test_uniform_tower_full_suite():
    h = tower_handle((2, 2, 2), *(WeightedP.uniform(2) for _ in range(3)))
    rep = run_suite(h, h.space, default_specs())
    assert [v.name for v in rep.verdicts] == list(NAMES)
    assert rep.ok
    for name in ("monotone", "subadditive", "strongly_subadditive", "normalized", "chain_continuity", "ratio_claim", "gamelemma"):
        assert rep.verdict(name).status == "pass", name
    # these need a potential or a join behind the handle
    assert rep.verdict("stability_biconditional").status == "skipped"
    assert rep.verdict("join_consistency").status == "skipped"


def test_planted_monotone_violation():
    h = planted()
    rep = run_suite(h, h.space, [PropertySpec("monotone")])
    v = rep.verdict("monotone")
    assert v.status == "fail"
    assert v.witness["masks"] == {"A": 0b01, "B": 0b11}
    assert replay_witness(h, v)
    js = v.to_json(h.space)
    assert js["witness"]["sets"]["A"] == ["0"]
    assert not rep.ok


def test_planted_violation_randomized_mode():
    h = planted()
    v = run_suite(h, h.space, [PropertySpec("monotone", mode="randomized", trials=200, seed=1)]).verdict("monotone")
    assert v.status == "fail" and replay_witness(h, v)


def test_empty_spec_list():
    h = planted()
    rep = run_suite(h, h.space, [])
    assert rep.verdicts == [] and rep.ok
    assert rep.totals == {"pass": 0, "fail": 0, "unknown": 0, "skipped": 0}


def test_strong_subadditivity_failure_witness():
    h = tower_handle((2, 3), MaxNorm(2), WeightedP.uniform(3, 2.0))
    v = run_suite(h, h.space, [PropertySpec("strongly_subadditive")]).verdict("strongly_subadditive")
    assert v.status == "fail" and replay_witness(h, v)


def test_randomized_strong_subadditivity_is_unknown():
    h = tower_handle((2, 2), WeightedP.uniform(2), WeightedP.uniform(2))
    specs = [PropertySpec("strongly_subadditive", mode="randomized", trials=50), PropertySpec("subadditive", mode="randomized", trials=50)]
    rep = run_suite(h, h.space, specs)
    assert rep.verdict("strongly_subadditive").status == "unknown"
    assert rep.verdict("subadditive").status == "pass"


def test_exhaustive_skipped_beyond_bound():
    big = SubmeasureHandle.uniform(ProductTreeSpace((3, 4)))
    rep = run_suite(big, big.space, [PropertySpec("monotone"), PropertySpec("monotone", mode="randomized", trials=20)])
    assert rep.verdicts[0].status == "skipped" and "exhaustive bound" in rep.verdicts[0].reason
    assert rep.verdicts[1].status == "pass"


def test_normalized_only_checks_full_set_for_probabilities():
    S = ProductTreeSpace((2,))
    half = SubmeasureHandle.measure(S, [0.25, 0.25])
    assert run_suite(half, S, [PropertySpec("normalized")]).verdicts[0].status == "pass"
    bad = SubmeasureHandle.from_table(S, {0: 0.1, 3: 1.0}, declared=("monotone",))
    v = run_suite(bad, S, [PropertySpec("normalized")]).verdicts[0]
    assert v.status == "fail" and replay_witness(bad, v)


def test_join_consistency():
    S = ProductTreeSpace((2, 2))
    parts = [tower_handle((2, 2), MaxNorm(2), WeightedP.uniform(2)), SubmeasureHandle.uniform(S),
             SubmeasureHandle.point_mass(S, PointSet(S, 0b0001))]
    h = join_handle(parts)
    rep = run_suite(h, S, [PropertySpec(n) for n in ("monotone", "subadditive", "join_consistency")])
    assert all(v.status == "pass" for v in rep.verdicts)


def test_stability_biconditional_on_potential():
    K = np.array([[1, 0.2, 0.0], [0.2, 1, 0.3], [0.0, 0.3, 1]])
    problem = PotentialProblem(DiscretePotentialSpace(np.ones(3)), ExplicitMatrix(K), 2.0, tol=1e-9)
    h = potential_handle(problem, "m3")
    rep = run_suite(h, h.space, [PropertySpec("stability_biconditional", tolerance=1e-7), PropertySpec("monotone", tolerance=1e-7)])
    assert [v.status for v in rep.verdicts] == ["pass", "pass"]


def test_determinism_and_threads(monkeypatch):
    h = tower_handle((2, 2, 2), MaxNorm(2), WeightedP.uniform(2, 2.0), WeightedP.uniform(2))
    specs = default_specs(seed=5) + [PropertySpec("subadditive", mode="randomized", trials=100, seed=9)]
    a = json.dumps(run_suite(h, h.space, specs).to_json(), sort_keys=True)
    b = json.dumps(run_suite(h, h.space, specs, workers=4).to_json(), sort_keys=True)
    assert a == b
    monkeypatch.setenv("CAPACITYLAB_THREADS", "3")
    c = json.dumps(run_suite(h, h.space, specs).to_json(), sort_keys=True)
    assert a == c


def test_suite_does_not_change_values():
    h = tower_handle((2, 3), WeightedP([0.3, 0.7], 2.0), MaxNorm(3))
    before = h.table().copy()
    run_suite(h, h.space, default_specs())
    assert np.array_equal(h.table(), before)


def test_table_text():
    h = planted()
    text = run_suite(h, h.space, [PropertySpec("monotone"), PropertySpec("subadditive")]).table()
    assert "monotone" in text.splitlines()[1] and "fail" in text


def test_spec_validation():
    with pytest.raises(ValueError):
        PropertySpec("associative")
    with pytest.raises(ValueError):
        PropertySpec("monotone", mode="sometimes")
    with pytest.raises(ValueError):
        PropertySpec("monotone", trials=0)
