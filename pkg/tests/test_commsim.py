import numpy as np
import pytest

from commflow import commsim, numerics
from commflow.commsim import Channel, Party, RowPartition


def test_send_five_numbers_at_l8():
    ch = Channel(8)
    out = ch.send(Party.ALICE, Party.COORDINATOR, "x", [1, 2, 3, 4, 5])
    assert out.tolist() == [1, 2, 3, 4, 5]
    assert ch.transcript.events[-1].bits == 85


def test_empty_payload_logged_with_zero_bits():
    ch = Channel(8)
    ch.send(Party.BOB, Party.COORDINATOR, "x", [])
    assert len(ch.transcript.events) == 1
    assert ch.transcript.total_bits == 0


def test_send_to_self_rejected():
    with pytest.raises(ValueError):
        Channel(8).send(Party.ALICE, Party.ALICE, "x", [1.0])


def test_send_overflow():
    with pytest.raises(numerics.OverflowQuantizationError):
        Channel(4).send(Party.ALICE, Party.BOB, "x", [100.0])


def test_send_delivers_quantized_payload():
    out = commsim.send(Channel(2), Party.ALICE, Party.BOB, "x", [0.3])
    assert out.tolist() == [0.25]


def test_rows_cost_index_plus_value():
    ch = Channel(4)
    ch.send_rows(Party.ALICE, Party.COORDINATOR, "rows", [[1.0, 0.0, -1.0, 0.0]])
    # 2 nonzeros * (ceil(log2 4) + 9)
    assert ch.transcript.total_bits == 2 * (2 + 9)


def test_grand_total_and_phase_totals():
    ch = Channel(3)
    ch.send(Party.ALICE, Party.COORDINATOR, "a", [1.0, 2.0])
    ch.send(Party.BOB, Party.COORDINATOR, "b", [1.0])
    ch.send(Party.COORDINATOR, Party.BOB, "a", [1.0])
    t = ch.transcript
    assert t.by_phase() == {"a": 21, "b": 7}
    assert t.total_bits == sum(e.bits for e in t.events) == 28


def test_alice_as_coordinator_links_are_free():
    ch = Channel(3, alice_is_coordinator=True)
    ch.send(Party.ALICE, Party.COORDINATOR, "a", [1.0])
    ch.send(Party.BOB, Party.COORDINATOR, "a", [1.0])
    assert [e.bits for e in ch.transcript.events] == [0, 7]


def test_shared_randomness_is_identical_and_free():
    a, b = Channel(8, seed=7), Channel(8, seed=7)
    np.testing.assert_array_equal(commsim.shared_random(a, "p", 5), commsim.shared_random(b, "p", 5))
    assert a.transcript.total_bits == 0
    assert not np.array_equal(Channel(8, seed=8).stream("p").random(5), Channel(8, seed=7).stream("p").random(5))


def test_charge_formula_and_actual_modes():
    bits = numerics.leverage_cost(10, 2, 16, 5.0)
    ch = Channel(16)
    commsim.charge_protocol_cost(ch, "leverage", bits)
    assert ch.transcript.total_bits == 10 * 2 * 16 + 10 * 16 * 3
    ch = Channel(16, charge_mode="actual")
    commsim.charge_protocol_cost(ch, "leverage", bits)
    assert ch.transcript.total_bits == 0


def test_transcript_csv_and_summary():
    ch = Channel(2)
    ch.send(Party.ALICE, Party.COORDINATOR, "v1", [1.0])
    assert ch.transcript.to_csv() == "phase,sender,receiver,elements,bits\nv1,alice,coordinator,1,5\n"
    assert '"total_bits": 5' in ch.transcript.summary_json()


def test_row_partition():
    p = RowPartition.alternating(5)
    assert p.rows(Party.ALICE).tolist() == [0, 2, 4]
    assert p.rows("bob").tolist() == [1, 3]
    assert len(p.concat(RowPartition.all_alice(2))) == 7
    with pytest.raises(ValueError):
        RowPartition([Party.COORDINATOR])
