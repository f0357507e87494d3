import dataclasses
from collections import deque

import numpy as np
import pytest

from scneugm.config import EsConfig, OnlineConfig, RadioConfig
from scneugm.embedding import init_senn
from scneugm.graph.coloring import is_proper
from scneugm.graph.egnn import SPEC, FeatureScaler, PretrainedModels, fit_feature_scaler
from scneugm.graph.es import train_es
from scneugm.graph.pg import train_pg
from scneugm.hashing import init_dhf
from scneugm.nn import ParamVector, init_dense
from scneugm.online import (augment_pairs, candidate_pairs, per_slot_histogram, run_online,
                            run_round, virtual_round_ms)
from scneugm.predictors import init_predictors
from scneugm.wifi import SlotAssignment, generate_network, simulate_periods

RC = RadioConfig()


@pytest.fixture(scope="module")
def models():
    rng = np.random.default_rng(0)
    senn, pred, dhf = init_senn(rng), init_predictors(rng), init_dhf(rng)
    scaler = fit_feature_scaler(RC, senn, pred, dhf, seed=0, networks=3)
    return PretrainedModels(senn, pred, dhf, scaler)


@pytest.fixture(scope="module")
def egnn():
    return init_dense(SPEC, np.random.default_rng(5))


def small(**kw):
    return dataclasses.replace(OnlineConfig(rounds=4, periods_per_round=50, query_bits=4,
                                            tables=3), **kw)


def test_scaler_standardizes_its_own_sample(models):
    scaler = models.scaler
    assert scaler.mean.shape == (5,) and np.all(scaler.std > 0)
    again = FeatureScaler.from_dict(scaler.to_dict())
    np.testing.assert_array_equal(again.mean, scaler.mean)


def test_candidate_pairs_modes():
    codes = np.random.default_rng(0).choice(np.array([-1, 1], dtype=np.int8), size=(6, 30))
    rng = np.random.default_rng(1)
    np.testing.assert_array_equal(candidate_pairs(codes, "all", 7, 3, rng), ~np.eye(6, dtype=bool))
    with pytest.raises(ValueError):
        candidate_pairs(codes, "some", 7, 3, rng)


def test_augment_pairs_is_a_union():
    rng = np.random.default_rng(0)
    base = rng.random((5, 5)) < 0.3
    hist = [rng.random((5, 5)) < 0.3 for _ in range(3)]
    out = augment_pairs(base, hist)
    np.testing.assert_array_equal(out, base | hist[0] | hist[1] | hist[2])
    np.testing.assert_array_equal(augment_pairs(base, []), base)


def test_run_round_history_window(models):
    net = generate_network(RC, 1, 30)
    zero = ParamVector.zeros(SPEC.layout)  # every processed pair becomes an edge
    hist = deque(maxlen=2)
    cfg = small(history=2)
    counts = []
    for m in range(4):
        asg, info = run_round(net, hist, models, zero, cfg, RC, np.random.default_rng(m))
        counts.append(info["pair_count"])
        assert info["edge_count"] == info["pair_count"]
        assert len(hist) == min(m + 1, 2)
    # the processed pair set only grows while earlier edges are remembered
    assert counts == sorted(counts)
    no_hist = deque(maxlen=1)
    run_round(net, no_hist, models, zero, small(history=0), RC, np.random.default_rng(0))
    assert len(no_hist) == 0


def test_round_assignment_is_proper_on_its_graph(models, egnn):
    net = generate_network(RC, 2, 25)
    hist = deque(maxlen=1)
    asg, info = run_round(net, hist, models, egnn, small(history=1), RC, np.random.default_rng(0))
    assert is_proper(hist[-1], asg)
    assert set(info["phase_ms"]) == {"Emb", "Hsh", "Buc", "Pre", "EG", "Col"}


def test_first_round_does_not_transmit(models, egnn):
    res = run_online(generate_network(RC, 3, 20), models, egnn, small(), RC, seed=0)
    assert not res.records[0].transmitted
    assert all(r.transmitted for r in res.records[1:])
    assert res.records[0].loss_rate == 0.0 and res.records[0].violations == 0


def test_loss_is_one_minus_mean_reliability(models, egnn):
    res = run_online(generate_network(RC, 4, 20), models, egnn, small(rounds=2), RC, seed=0)
    last = res.records[-1]
    assert last.loss_rate == pytest.approx(1.0 - res.last_report.reliability.mean())
    assert last.violations == res.last_report.violations(RC.reliability_target)


def test_online_runs_reproducible_in_main_columns(models, egnn):
    net = generate_network(RC, 5, 20)
    cfg = small(mobility=True)
    a = run_online(net, models, egnn, cfg, RC, seed=7, speed=3.0)
    b = run_online(net, models, egnn, cfg, RC, seed=7, speed=3.0)
    assert [r.row() for r in a.records] == [r.row() for r in b.records]
    np.testing.assert_array_equal(a.network.sta_positions, b.network.sta_positions)
    assert not np.array_equal(a.network.sta_positions, net.sta_positions)


def test_static_run_keeps_positions(models, egnn):
    net = generate_network(RC, 6, 20)
    res = run_online(net, models, egnn, small(mobility=False), RC, seed=0, speed=5.0)
    np.testing.assert_array_equal(res.network.sta_positions, net.sta_positions)


def test_virtual_time_models():
    assert virtual_round_ms(small(time_model="measured"), 12.5, 100) == 12.5
    assert virtual_round_ms(small(time_model="fixed", fixed_dt_ms=40.0), 12.5, 100) == 40.0
    assert virtual_round_ms(small(time_model="pairs"), 12.5, 1000) == pytest.approx(23.0)
    with pytest.raises(ValueError):
        virtual_round_ms(small(time_model="other"), 1.0, 1)


def test_run_online_rejects_bad_config(models, egnn):
    net = generate_network(RC, 0, 10)
    with pytest.raises(ValueError):
        run_online(net, models, egnn, small(pairs="none"), RC, seed=0)
    with pytest.raises(ValueError):
        run_online(net, models, egnn, small(history=-1), RC, seed=0)


def test_per_slot_histogram_conserves_counts():
    net = generate_network(RC, 8, 30)
    asg = SlotAssignment(np.arange(30) % 4 + 1, 5)  # slot 5 left empty
    rep = simulate_periods(net, asg, 50, 0, RC)
    hist = per_slot_histogram(asg, rep, RC.reliability_target)
    assert [h[0] for h in hist] == [1, 2, 3, 4, 5]
    assert sum(h[1] for h in hist) == 30 and hist[-1][1] == 0
    assert sum(h[2] for h in hist) == rep.violations(RC.reliability_target)


def tiny_es(**kw):
    return EsConfig(k_start=6, k_total=12, batch_increment=3, periods=20, max_steps=4, **kw)


def test_es_with_zero_learning_rate_keeps_parameters(models):
    res = train_es(tiny_es(lr=0.0), RC, models, seed=3)
    assert not res.params.values.any()
    np.testing.assert_array_equal(res.state.log_var.values, np.log(0.1))


def test_es_and_pg_traces_reproducible(models):
    for fn in (train_es, train_pg):
        a, b = fn(tiny_es(), RC, models, 5), fn(tiny_es(), RC, models, 5)
        assert [r[:-1] for r in a.rows] == [r[:-1] for r in b.rows]
        np.testing.assert_array_equal(a.params.values, b.params.values)
