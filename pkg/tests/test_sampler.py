"""Boundary-walk sampler tests.

Zero gains label unstable (the nadir criterion fails by 2.5%), so the auto
direction walks it toward stability; the hand-picked (0, 50, 50, 0) seed is
genuinely stable and walks the other way.
"""

import dataclasses

import numpy as np
import pytest

from freqwalk import (
    GainVector,
    SamplerConfig,
    SystemParams,
    augment,
    evaluate,
    generate_initial,
    integrate,
    rule_satisfied,
)
from freqwalk.dynamics import validate_gains

P = SystemParams()
STABLE = GainVector(0.0, 50.0, 50.0, 0.0)


def relabel(theta):
    return evaluate(integrate(theta, P, storage="streaming"), P).label


# ------------------------------------------------------------ seed drawing


def test_generate_initial_deterministic():
    a, ra = generate_initial(50, P, seed=42)
    b, rb = generate_initial(50, P, seed=42)
    assert a == b and ra == rb
    c, _ = generate_initial(50, P, seed=43)
    assert a != c


def test_generate_initial_counts_and_feasibility():
    seeds, redraws = generate_initial(100, P, seed=42)
    assert len(seeds) == 100
    assert redraws == 6
    for kv in seeds:
        assert validate_gains(kv, P).feasible
        assert kv.k12 >= -75.0
    assert generate_initial(0, P, seed=1) == ([], 0)


def test_generate_initial_moments():
    seeds, _ = generate_initial(4000, P, seed=7)
    arr = np.array([kv.as_array() for kv in seeds])
    # k11, k21, k22 are untouched normals
    for col in (0, 2, 3):
        assert abs(arr[:, col].mean()) < 3.0
        assert abs(arr[:, col].std() - 50.0) < 3.0
    # redrawing k12 < -75 truncates the left tail and shifts the mean up by
    # sigma*phi(1.5)/(1-Phi(1.5)) ~ +6.9
    assert 3.0 < arr[:, 1].mean() < 11.0
    assert arr[:, 1].min() >= -75.0


# ------------------------------------------------------------ stop rules


def fake_report(rocof, nadir, enabled=("rocof", "nadir")):
    r = evaluate(integrate(GainVector(), P), P)
    return dataclasses.replace(r, rocof_hz_s=rocof, nadir_hz=nadir, enabled=tuple(enabled))


def test_flip_rule():
    cfg = SamplerConfig()
    rep = fake_report(-0.5, -0.5)  # label stays whatever evaluate computed
    rep = dataclasses.replace(rep, label=0)
    assert rule_satisfied(rep, 1, "stabilize", cfg, P)
    assert not rule_satisfied(rep, 0, "destabilize", cfg, P)


def test_margin_rule_stabilize():
    cfg = SamplerConfig(rule="margin", margin_delta=0.05)
    # |values| within (1+delta)*threshold on every enabled criterion
    assert rule_satisfied(fake_report(-1.04, 0.83), 1, "stabilize", cfg, P)
    assert rule_satisfied(fake_report(-0.97, 0.5), 1, "stabilize", cfg, P)
    assert not rule_satisfied(fake_report(-1.06, 0.5), 1, "stabilize", cfg, P)


def test_margin_rule_destabilize():
    cfg = SamplerConfig(rule="margin", margin_delta=0.05)
    # |values| at or above (1-delta)*threshold everywhere
    assert rule_satisfied(fake_report(-0.97, 0.77), 0, "destabilize", cfg, P)
    assert not rule_satisfied(fake_report(-0.97, 0.5), 0, "destabilize", cfg, P)


def test_margin_ignores_disabled_criteria():
    cfg = SamplerConfig(rule="margin", margin_delta=0.05, enabled=("rocof",))
    assert rule_satisfied(fake_report(-0.97, 99.0, enabled=("rocof",)), 1, "stabilize", cfg, P)


# ------------------------------------------------------------ the walk


def test_zero_gain_seed_stabilizes_with_bracket():
    ds = augment([GainVector()], P, SamplerConfig())
    r = ds.records[0]
    assert r.label_initial == 1 and r.direction == "stabilize"
    assert r.converged and r.label_final == 0
    assert 1 <= r.iterations <= 200
    # the last two iterates straddle the boundary under independent relabeling
    assert relabel(r.theta_prev) == 1
    assert relabel(r.theta_final) == 0


def test_stable_seed_destabilizes_with_bracket():
    ds = augment([STABLE], P, SamplerConfig())
    r = ds.records[0]
    assert r.label_initial == 0 and r.direction == "destabilize"
    assert r.converged and r.label_final == 1
    assert relabel(r.theta_prev) == 0
    assert relabel(r.theta_final) == 1


def test_walk_is_deterministic():
    seeds, _ = generate_initial(3, P, seed=11)
    a = augment(seeds, P, SamplerConfig(max_iter=40))
    b = augment(seeds, P, SamplerConfig(max_iter=40))
    for ra, rb in zip(a.records, b.records):
        assert ra.theta_final == rb.theta_final
        assert ra.iterations == rb.iterations and ra.converged == rb.converged


def test_record_order_and_batching_are_cosmetic():
    seeds, _ = generate_initial(5, P, seed=11)
    a = augment(seeds, P, SamplerConfig(max_iter=10, batch_size=2))
    b = augment(seeds, P, SamplerConfig(max_iter=10, batch_size=5))
    assert [r.theta_initial for r in a.records] == seeds
    for ra, rb in zip(a.records, b.records):
        assert ra.theta_final == rb.theta_final


def test_zero_iteration_budget():
    r = augment([GainVector()], P, SamplerConfig(max_iter=0)).records[0]
    assert not r.converged and r.iterations == 0
    assert r.theta_final == r.theta_initial
    assert r.label_final == r.label_initial == 1


def test_zero_alpha_flip_never_converges():
    r = augment([GainVector()], P, SamplerConfig(alpha=0.0, max_iter=5)).records[0]
    assert not r.converged
    assert r.iterations == 5  # updates applied, all of them no-ops
    assert r.theta_final == r.theta_initial


def test_zero_alpha_margin_already_satisfied():
    # zero gains: |rocof| = 1.0 <= 1.05, |nadir| = 0.8206 <= 0.84
    cfg = SamplerConfig(alpha=0.0, rule="margin", margin_delta=0.05, max_iter=5)
    r = augment([GainVector()], P, cfg).records[0]
    assert r.converged and r.iterations == 0


def test_invalid_seed_is_marked():
    r = augment([GainVector(0.0, -80.0, 0.0, 0.0)], P, SamplerConfig()).records[0]
    assert r.label_initial == "invalid" and r.label_final == "invalid"
    assert not r.converged and r.iterations == 0
    assert r.failure == "InfeasibleGain"
    assert r.report_final is None


def test_backtracking_keeps_iterates_feasible():
    # pushing an unstable sample harder against the feasibility fold: the
    # sensitivity diverges there, so the walk must shrink its steps and
    # eventually gives up without ever leaving the feasible region
    cfg = SamplerConfig(direction_policy="destabilize", max_iter=5)
    r = augment([GainVector(0.0, -74.9, 0.0, 0.0)], P, cfg).records[0]
    assert r.failure == "backtrack_exhausted"
    assert not r.converged
    assert r.iterations >= 1
    assert -75.0 <= r.theta_final.k12 < -74.9
    assert validate_gains(r.theta_final, P).feasible


def test_backtrack_limit_zero_fails_fast():
    cfg = SamplerConfig(direction_policy="destabilize", max_iter=5, backtrack_limit=0)
    r = augment([GainVector(0.0, -74.9, 0.0, 0.0)], P, cfg).records[0]
    assert r.failure == "backtrack_exhausted"
    assert r.iterations == 0
    assert r.theta_final == r.theta_initial


def test_violated_only_drops_passing_criteria():
    # at zero gains only the nadir is violated; rocof sits exactly on its
    # threshold and contributes nothing under violated_only
    a = augment([GainVector()], P, SamplerConfig(max_iter=1)).records[0]
    b = augment([GainVector()], P, SamplerConfig(max_iter=1, violated_only=True)).records[0]
    assert a.theta_final != b.theta_final
    assert a.theta_final.k11 == b.theta_final.k11  # rocof gradient only lives in k12
    assert a.theta_final.k12 != b.theta_final.k12


def test_forced_direction_overrides_label():
    r = augment([STABLE], P, SamplerConfig(direction_policy="stabilize", max_iter=3)).records[0]
    assert r.direction == "stabilize"
    assert not r.converged  # already stable, flip can't trigger walking inward


def test_dataset_metadata():
    ds = augment([GainVector()], P, SamplerConfig(max_iter=1))
    md = ds.metadata
    assert len(md["params_hash"]) == 16
    assert md["seed"] == 42
    assert md["config"]["sampler"]["alpha"] == 1e4
    assert md["config"]["system"]["m0"] == 6.0


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(alpha=-1.0).validate()
    with pytest.raises(ValueError):
        SamplerConfig(rule="nudge").validate()
    with pytest.raises(ValueError):
        SamplerConfig(rule="margin", margin_delta=0.0).validate()
    with pytest.raises(ValueError):
        SamplerConfig(direction_policy="both").validate()
    with pytest.raises(ValueError):
        SamplerConfig(enabled=("rocof", "sag")).validate()
    SamplerConfig(alpha=0.0).validate()  # explicitly allowed
