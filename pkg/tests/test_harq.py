import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarharq.construction import design_qup_code
from polarharq.crc import CRC16, crc_append
from polarharq.decoder import LLR_CLIP
from polarharq.harq import HarqPlan, HarqRx, HarqTx, HeavyPuncturingWarning, PlanError, SessionError, build_plan
from polarharq.modem import Constellation
from polarharq.polar import polar_transform

MI_GRID = [round(0.1 * i, 1) for i in range(1, 10)]


def bpsk_llr(bits, scale=LLR_CLIP):
    return scale * (1.0 - 2.0 * np.asarray(bits, dtype=float))


@pytest.mark.parametrize("mi", MI_GRID)
def test_worked_example(mi):
    plan = build_plan(5, [7, 5], [{"mi": mi}] * 2)
    assert plan.N == 16
    assert plan.segments == ((10, 16), (5, 9))
    s1, s2 = plan.stages
    assert set(s1.info_set) == {12, 13, 14, 15, 16}
    assert set(s2.info_set) == {8, 12, 14, 15, 16}
    assert s2.dynamic_constraints == ((13, 8),)
    # message bit 2 moved from u_13 to u_8
    assert s2.info_set[1] == 8
    assert set(s1.static_frozen) <= set(s2.static_frozen)


def test_worked_example_prefix_preserved():
    plan = build_plan(5, [7, 5], [{"mi": 0.5}] * 2)
    rng = np.random.default_rng(0)
    for _ in range(200):
        msg = rng.integers(0, 2, 5)
        tx = HarqTx(plan, msg)
        first = tx.next()
        c1 = tx.codeword[0].copy()
        second = tx.next()
        c2 = tx.codeword[0]
        assert np.array_equal(first, c1[9:]) and np.array_equal(second, c2[4:9])
        assert np.array_equal(c1[9:], c2[9:])
        assert tx.u[7] == tx.u[12] == msg[1]


@pytest.mark.parametrize("n,k,mi", [(7, 5, 0.5), (250, 144, 0.6), (100, 30, 0.3)])
def test_single_stage_is_direct_design(n, k, mi):
    plan = build_plan(k, [n], [{"mi": mi}])
    spec, _ = design_qup_code(n, k, mi)
    assert plan.stages[0] == spec
    assert not plan.stages[0].dynamic_constraints


def test_single_stage_on_double_mother():
    small = build_plan(144, [250], [{"mi": 0.6}]).stages[0]
    big = build_plan(144, [250], [{"mi": 0.6}], N=512).stages[0]
    assert big.info_set == tuple(i + 256 for i in small.info_set)


def test_fig4_chain_shape():
    plan = build_plan(144, [250, 250, 200, 140], [3.0, -1.0, -2.5, -3.0])
    assert plan.N == 1024
    assert plan.segments == ((775, 1024), (525, 774), (325, 524), (185, 324))
    assert all(s.k == 144 for s in plan.stages)
    assert [s.punct_count for s in plan.stages] == [774, 524, 324, 184]


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 40), st.lists(st.integers(1, 60), min_size=1, max_size=4), st.data())
def test_plan_invariants(k, tail, data):
    ns = [max(k, 8)] + tail
    mis = [{"mi": data.draw(st.floats(0.05, 0.95))} for _ in ns]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HeavyPuncturingWarning)
        plan = build_plan(k, ns, mis)
    N = plan.N
    assert N == 1 << (sum(ns) - 1).bit_length()
    covered = []
    for t, ((a, b), spec) in enumerate(zip(plan.segments, plan.stages), start=1):
        covered += list(range(a, b + 1))
        lo = N - sum(ns[:t]) + 1
        assert spec.k == k
        assert min(spec.info_set) >= lo
        assert spec.punct_count == lo - 1
        tied = set(spec.info_set) | set(spec.targets)
        assert set(spec.static_frozen) | tied == set(range(lo, N + 1))
        for tgt, src in spec.dynamic_constraints:
            assert src in spec.info_set and src < tgt
        if t > 1:
            assert set(plan.stages[t - 2].static_frozen) <= set(spec.static_frozen)
    assert sorted(covered) == list(range(N - sum(ns) + 1, N + 1))


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 30), st.lists(st.integers(4, 50), min_size=1, max_size=3), st.integers(0, 2**32 - 1))
def test_every_extension_preserves_sent_bits(k, tail, seed):
    ns = [max(k, 10)] + tail
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HeavyPuncturingWarning)
        plan = build_plan(k, ns, [{"mi": 0.5}] * len(ns))
    msg = np.random.default_rng(seed).integers(0, 2, k)
    tx = HarqTx(plan, msg)
    sent = np.full(plan.N, -1)
    for t in range(1, plan.t_max + 1):
        seg = tx.next()
        a, b = plan.segments[t - 1]
        sent[a - 1 : b] = seg
        c = tx.codeword[0]
        mask = sent >= 0
        assert np.array_equal(c[mask], sent[mask])
        spec = plan.stages[t - 1]
        for tgt, src in spec.dynamic_constraints:
            assert tx.u[tgt - 1] == tx.u[src - 1]
        assert np.array_equal(tx.u[np.asarray(spec.info_set) - 1], msg)
        assert np.array_equal(polar_transform(tx.u), c)


def test_noiseless_session_decodes_every_stage():
    plan = build_plan(80, [120, 60, 60], [1.0, -1.0, -2.0])
    rng = np.random.default_rng(1)
    msg = crc_append(rng.integers(0, 2, 64))
    tx, rx = HarqTx(plan, msg), HarqRx(plan, list_size=8, crc=CRC16)
    for _ in range(plan.t_max):
        res = rx.next(bpsk_llr(tx.next()))
        assert res.crc_ok and np.array_equal(res.info_bits, msg)
    trace = json.loads(rx.trace_json())
    assert [s["stage"] for s in trace] == [1, 2, 3]
    assert all(s["crc_ok"] for s in trace)


def test_accumulator_keeps_earlier_segments():
    plan = build_plan(40, [80, 40], [0.0, -1.0])
    rng = np.random.default_rng(2)
    tx, rx = HarqTx(plan, rng.integers(0, 2, 40)), HarqRx(plan, list_size=4)
    for t in range(1, 3):
        rx.next(bpsk_llr(tx.next(), 2.0) + rng.normal(0, 2, plan.symbols(t)))
        lo = plan.N - plan.received_length(t)
        assert np.all(rx.llr[lo:] != 0) and not rx.llr[:lo].any()


def test_erased_first_transmission_uses_second():
    plan = build_plan(24, [64, 64], [{"mi": 0.7}, {"mi": 0.7}])
    rng = np.random.default_rng(3)
    sigma = 0.8
    errors_erased = errors_both = 0
    for _ in range(300):
        msg = crc_append(rng.integers(0, 2, 8))
        tx = HarqTx(plan, msg)
        segs = [1.0 - 2.0 * tx.next() for _ in range(2)]
        noisy = [2 * (x + sigma * rng.standard_normal(x.size)) / sigma**2 for x in segs]
        rx = HarqRx(plan, 8, CRC16)
        rx.next(np.zeros(64))
        errors_erased += not np.array_equal(rx.next(noisy[1]).info_bits, msg)
        rx = HarqRx(plan, 8, CRC16)
        rx.next(noisy[0])
        errors_both += not np.array_equal(rx.next(noisy[1]).info_bits, msg)
    assert errors_erased < 300
    assert errors_erased > errors_both


def test_session_errors():
    plan = build_plan(5, [7, 5], [{"mi": 0.5}] * 2)
    with pytest.raises(SessionError):
        HarqTx(plan, [0, 1])
    tx = HarqTx(plan, [1, 0, 1, 0, 1])
    tx.next()
    tx.next()
    with pytest.raises(SessionError):
        tx.next()
    rx = HarqRx(plan)
    with pytest.raises(SessionError):
        rx.next(np.zeros(5))
    rx.next(np.zeros(7))
    rx.next(np.zeros(5))
    with pytest.raises(SessionError):
        rx.next(np.zeros(5))
    with pytest.raises(SessionError):
        HarqRx(plan).next_symbols(np.zeros(7))


def test_plan_errors():
    with pytest.raises(PlanError):
        build_plan(10, [8], [1.0])
    with pytest.raises(PlanError):
        build_plan(4, [8, 8], [1.0])
    with pytest.raises(PlanError):
        build_plan(4, [8, 0], [1.0, 1.0])
    with pytest.raises(PlanError):
        build_plan(6, [9, 6], [10.0, 5.0], modulation=2)
    with pytest.raises(PlanError):
        build_plan(4, [8], [{"mi": 1.5}])


def test_heavy_puncturing_warning():
    with pytest.warns(HeavyPuncturingWarning):
        build_plan(5, [7, 8, 1], [{"mi": 0.5}] * 3)
    with warnings.catch_warnings():
        warnings.simplefilter("error", HeavyPuncturingWarning)
        build_plan(5, [7, 5], [{"mi": 0.5}] * 2)


def test_plan_json_round_trip():
    plan = build_plan(144, [250, 250, 200, 140], [3.0, -1.0, -2.5, -3.0])
    again = HarqPlan.from_json(plan.to_json())
    assert again == plan
    doc = json.loads(plan.to_json())
    assert doc["N"] == 1024 and len(doc["stages"]) == 4


def test_design_point_forms_agree():
    a = build_plan(5, [7, 5], [2.0, {"snr_db": 2.0}])
    assert a.stages[0].info_set == build_plan(5, [7], [{"snr_db": 2.0}], N=16).stages[0].info_set
    assert a.design_snr_db == (2.0, 2.0)
    assert a.design_mi[0] == a.design_mi[1]


def test_fig6_multilevel_chain():
    plan = build_plan(912, [1200, 600, 1200, 900], [16.25, 11.25, 6.75, 5.0], modulation=3)
    assert plan.N == 2048
    assert [plan.symbols(t) for t in range(1, 5)] == [400, 200, 400, 300]
    for spec in plan.stages:
        assert spec.levels == 3 and spec.k == 912
        per_level = [sum(spec.level_of(i) == j for i in spec.info_set) for j in (1, 2, 3)]
        assert sum(per_level) == 912
        assert per_level[0] <= per_level[1] <= per_level[2]
    rng = np.random.default_rng(4)
    msg = crc_append(rng.integers(0, 2, 896))
    const = Constellation(3)
    tx, rx = HarqTx(plan, msg), HarqRx(plan, 8, CRC16, sigma=0.01)
    for _ in range(4):
        x = tx.next_symbols(const)
        res = rx.next_symbols(x + 0.01 * rng.standard_normal(x.shape), const)
        assert res.crc_ok and np.array_equal(res.info_bits, msg)
