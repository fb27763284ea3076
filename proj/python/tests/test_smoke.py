import random

import pytest

import amiagg

EXAMPLE = [
    ("water_heater", "medium", 25),
    ("dryer", None, None),
    ("ev_charger", "low", 12),
    ("hvac", "high", 35),
    ("uncontrollable", None, 125),
]


def test_encode_pack_roundtrip():
    v = amiagg.encode(EXAMPLE)
    assert v["hvac.high.consumption"] == 35
    assert v["uncontrollable.count"] == 1
    assert len(v.fields) == amiagg.FIELD_COUNT
    packed = amiagg.pack(v)
    assert packed.bit_length() <= amiagg.CodecConfig().total_bits
    assert amiagg.unpack(packed) == v
    assert amiagg.unpack(2 * packed) == amiagg.vec_add(v, v)


def test_overflow_is_a_protocol_error():
    with pytest.raises(amiagg.ProtocolError):
        amiagg.encode([("hvac", "high", 1 << 16)])


def test_paillier_adds():
    p = amiagg.Paillier(bits=128, seed=3)
    assert p.n.bit_length() == 128
    c = p.add(p.encrypt(25), p.encrypt(12))
    assert p.decrypt(c) == 37
    rng = random.Random(1)
    for _ in range(20):
        a, b = rng.randrange(p.n), rng.randrange(p.n)
        assert p.decrypt(p.add(p.encrypt(a), p.encrypt(b))) == (a + b) % p.n


@pytest.mark.parametrize("scheme", ["masked-scalar", "masked-group", "paillier"])
def test_round_matches_ground_truth(scheme):
    r = amiagg.run_round(scheme, n=20, arity=3, seed=5)
    assert r["ok"], r["diagnostic"]
    assert r["total"] == r["ground_truth"]
    assert r["message_count"] == 21


def test_round_is_deterministic():
    a = amiagg.run_round("masked-group", n=7, seed=9)
    b = amiagg.run_round("masked-group", n=7, seed=9)
    assert a["total"] == b["total"]


def test_example_round_and_plan():
    r = amiagg.run_round("masked-group", n=1, readings=[EXAMPLE])
    assert r["total"]["hvac.high.consumption"] == 35
    plan = amiagg.plan_reduction(r["total"], 1, 70)
    assert plan["cells"][("hvac", "high")] == 35
    assert plan["cells"][("water_heater", "medium")] == 25
    assert plan["cells"][("ev_charger", "low")] == 10
    assert plan["shortfall"] == 0
    assert amiagg.plan_reduction(r["total"], 1, 100)["shortfall"] == 28


def test_probe_full_domain():
    out = amiagg.collusion_probe(n=3, compromised={1})
    assert out["privacy_holds"]
    assert set(out["candidates"]) == {2, 3}
