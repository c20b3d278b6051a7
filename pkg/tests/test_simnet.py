"""Simulation world: behaviors, round sampling, message accounting."""
import numpy as np
import pytest

from proxima import digest, simnet


def _world(**kw):
    return simnet.spawn_world(simnet.SimConfig(**kw))


def test_byzantine_count_floor():
    # int(0.3 * 100) is 29 under IEEE floats; the config must not fall for it
    cfg = simnet.SimConfig(n_validators=100, byz_fraction=0.3)
    assert cfg.n_byzantine == 30
    assert simnet.SimConfig(n_validators=1000, byz_fraction=0.3).n_byzantine == 300
    assert simnet.SimConfig(n_validators=10, byz_fraction=0.05).n_byzantine == 0


def test_behavior_round_robin_assignment():
    w = _world(n_validators=100, byz_fraction=0.3)
    behaviors = [v.behavior for v in w.validators[:30]]
    assert behaviors[:5] == list(simnet.DEFAULT_BEHAVIORS)
    assert behaviors[5] == simnet.Behavior.FABRICATE
    assert all(v.behavior is None for v in w.validators[30:])


def test_state_hash_deterministic():
    a = _world(n_validators=50, byz_fraction=0.2, seed=9)
    b = _world(n_validators=50, byz_fraction=0.2, seed=9)
    assert a.state_hash() == b.state_hash()
    c = _world(n_validators=50, byz_fraction=0.2, seed=10)
    assert a.state_hash() != c.state_hash()  # world identity binds the seed
    d = _world(n_validators=50, byz_fraction=0.22, seed=9)
    assert a.state_hash() != d.state_hash()


def test_config_validation():
    with pytest.raises(ValueError):
        simnet.SimConfig(n_validators=0)
    with pytest.raises(ValueError):
        simnet.SimConfig(n_validators=10, byz_fraction=1.5)
    with pytest.raises(ValueError):
        simnet.SimConfig(n_validators=10, txs_per_block=2, max_missing=2)
    with pytest.raises(ValueError):
        simnet.SimConfig(n_validators=10, p_miss=-0.1)


def test_round_reference_is_full_set_digest():
    w = _world(n_validators=10, seed=2)
    s = simnet.prepare_round(w, 0)
    assert s.reference == digest.digest_of([t.payload for t in s.block.txs])
    assert len(s.block.txs) == w.config.txs_per_block


def test_round_determinism_and_distinctness():
    w1 = _world(n_validators=20, byz_fraction=0.3, seed=4)
    w2 = _world(n_validators=20, byz_fraction=0.3, seed=4)
    a, b = simnet.prepare_round(w1, 3), simnet.prepare_round(w2, 3)
    assert a.block.hash == b.block.hash
    assert np.array_equal(a.distances, b.distances)
    c = simnet.prepare_round(w1, 4)
    assert a.block.hash != c.block.hash


def test_honest_straggler_distance_matches_missing_sum():
    w = _world(n_validators=40, p_miss=0.9, seed=6)
    s = simnet.prepare_round(w, 0)
    stragglers = np.flatnonzero(s.miss_count > 0)
    assert stragglers.size > 0
    for i in stragglers[:10]:
        k = int(s.miss_count[i])
        gap = s.tx_grids[s.miss_pos[i, :k]].sum(axis=0) / digest.GRID
        assert np.isclose(s.distances[i], np.linalg.norm(gap))


def test_incomplete_honest_count_near_expectation():
    # 700 honest at p_miss=0.37: expect 259 stragglers, sd ~ 12.8
    w = _world(n_validators=1000, byz_fraction=0.3, p_miss=0.37, seed=0)
    s = simnet.prepare_round(w, 0)
    honest = np.array([not v.byzantine for v in w.validators])
    stragglers = int(((s.miss_count > 0) & honest).sum())
    assert 220 <= stragglers <= 300, stragglers
    assert np.all(s.miss_count[~honest] <= 1)  # only swap members fake a miss


def test_fabricated_digests_land_beyond_tau():
    w = _world(n_validators=200, byz_fraction=0.5, p_miss=0.37, seed=1,
               behaviors=(simnet.Behavior.FABRICATE,))
    beyond = 0
    total = 0
    for r in range(30):
        s = simnet.prepare_round(w, r)
        d = s.distances[:100]
        beyond += int((d > 4.9).sum())
        total += 100
    assert beyond / total >= 0.99, beyond / total


def test_swap_distance_moments_and_cap():
    w = _world(n_validators=4, byz_fraction=0.3, p_miss=0.0, seed=3,
               behaviors=(simnet.Behavior.REPLACE_ONE,))
    d = np.array([simnet.prepare_round(w, r).distances[0] for r in range(50_000)])
    assert abs(d.mean() - 1.1275) / 1.1275 < 0.02
    assert abs((d ** 2).mean() - 4 / 3) / (4 / 3) < 0.02
    assert d.max() < np.sqrt(8) + 1e-9  # swap can never cross the threshold


def test_swap_always_included_and_signs_fork():
    w = _world(n_validators=10, byz_fraction=0.1, p_miss=0.0, seed=8,
               behaviors=(simnet.Behavior.REPLACE_ONE,))
    s = simnet.prepare_round(w, 0)
    assert s.distances[0] <= 4.9
    fork = simnet.commit_action(w, s, 0)
    assert fork is not None and fork != s.block.hash
    assert simnet.commit_action(w, s, 5) == s.block.hash


def test_withhold_and_suppress_are_silent_in_commit():
    w = _world(n_validators=10, byz_fraction=0.5, p_miss=0.0, seed=8)
    s = simnet.prepare_round(w, 0)
    by_behavior = {v.behavior: v.index for v in w.validators if v.behavior}
    assert simnet.commit_action(w, s, by_behavior[simnet.Behavior.WITHHOLD]) is None
    assert simnet.commit_action(w, s, by_behavior[simnet.Behavior.SUPPRESS_AGG]) is None
    wrong = simnet.commit_action(w, s, by_behavior[simnet.Behavior.WRONG_HASH])
    assert wrong is not None and wrong != s.block.hash


def test_wrong_hash_commits_share_one_fork():
    w = _world(n_validators=20, byz_fraction=0.5, p_miss=0.0, seed=8,
               behaviors=(simnet.Behavior.WRONG_HASH,))
    s = simnet.prepare_round(w, 0)
    hashes = {simnet.commit_action(w, s, i) for i in range(10)}
    assert len(hashes) == 1  # colluding equivocators use a common branch


def test_byzantine_phase1_payload_rejects_honest():
    w = _world(n_validators=10, byz_fraction=0.1, seed=0)
    s = simnet.prepare_round(w, 0)
    with pytest.raises(ValueError):
        simnet.byzantine_phase1_payload(w, s, 9)


def test_metrics_accounting():
    m = simnet.Metrics(simnet.SimConfig(n_validators=100).byte_constants())
    m.send("phase1", "digest+bloom", count=100)
    m.send("phase1", "push", size=128)
    m.send("phase2", "signature", count=3)
    assert m.messages == 104
    assert m.bytes == 100 * (64 + 25) + 128 + 3 * 96
    assert m.by_phase()["phase1"] == (101, 100 * 89 + 128)
    with pytest.raises(ValueError):
        m.send("phase1", "no-such-kind")


def test_metrics_merge_conserves():
    consts = simnet.SimConfig(n_validators=10).byte_constants()
    a, b = simnet.Metrics(consts), simnet.Metrics(consts)
    a.send("phase1", "digest", count=2)
    b.send("phase2", "signature+bitmap", count=4, level=1)
    total = simnet.Metrics(consts)
    total.merge(a)
    total.merge(b)
    assert total.messages == a.messages + b.messages
    assert total.bytes == a.bytes + b.bytes
    assert total.by_level()[1] == (4, 4 * (96 + 2))


def test_metrics_rows_shape():
    cfg = simnet.SimConfig(n_validators=10, seed=1)
    m = simnet.Metrics(cfg.byte_constants())
    m.send("phase1", "digest+bloom", count=10)
    rows = simnet.metrics_rows(m, "flat", cfg, finalized=True)
    assert all(r["protocol"] == "flat" for r in rows)
    assert all(r["n_validators"] == 10 for r in rows)
    assert sum(r["messages"] for r in rows) == 10


def test_block_hash_depends_on_content():
    a = simnet.block_hash(1, b"\x00" * 32, [b"t1", b"t2"])
    b = simnet.block_hash(1, b"\x00" * 32, [b"t1", b"t3"])
    c = simnet.block_hash(2, b"\x00" * 32, [b"t1", b"t2"])
    assert a != b and a != c
    assert a == simnet.block_hash(1, b"\x00" * 32, [b"t1", b"t2"])


def test_counting_mode_metric_parity_flat_and_tree():
    from proxima import flat, tree
    kw = dict(n_validators=300, byz_fraction=0.3, p_miss=0.37, seed=5)
    full = simnet.SimConfig(**kw)
    count = simnet.SimConfig(counting_only=True, **kw)
    fa = flat.run_many(simnet.spawn_world(full), 12)
    fb = flat.run_many(simnet.spawn_world(count), 12)
    assert fa.metrics.as_dict() == fb.metrics.as_dict()
    assert (fa.successes, fa.fast_rounds) == (fb.successes, fb.fast_rounds)
    ta = tree.run_tree_many(simnet.spawn_world(full), 12)
    tb = tree.run_tree_many(simnet.spawn_world(count), 12)
    assert ta.metrics.as_dict() == tb.metrics.as_dict()
    assert (ta.successes, ta.fast_rounds) == (tb.successes, tb.fast_rounds)
