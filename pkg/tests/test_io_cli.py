import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from commflow import cli
from commflow import io as cio
from commflow.commsim import Party
from commflow.flow import FlowNetwork

FIX = Path(__file__).parent / "fixtures"


# --- readers ---------------------------------------------------------------


def test_read_max_fixture():
    inp = cio.read_network(FIX / "single_edge.max")
    assert inp.kind == "max" and (inp.source, inp.sink) == (0, 1)
    assert inp.network.caps.tolist() == [5]


def test_read_min_fixture():
    inp = cio.read_network(FIX / "three_vertex.min")
    net = inp.network
    assert net.demands.tolist() == [2, 0, -2]
    assert net.owners == [Party.ALICE, Party.BOB, Party.BOB]
    assert net.costs.tolist() == [1, 1, 3]


def test_dimacs_roundtrip():
    inp = cio.read_network(FIX / "three_vertex.min")
    again = cio.read_dimacs(cio.write_dimacs(inp))
    assert cio.network_to_dict(again) == cio.network_to_dict(inp)


def test_json_roundtrip():
    inp = cio.read_network(FIX / "single_edge.max")
    text = json.dumps(cio.network_to_dict(inp))
    again = cio.read_network(text, "json")
    assert cio.network_to_dict(again) == cio.network_to_dict(inp)


@pytest.mark.parametrize(
    "text, line",
    [
        ("p min 2 1\na 1 3 0 1 1\n", 2),
        ("p min 2 1\na 1 2 0 x 1\n", 2),
        ("a 1 2 0 1 1\n", 1),
        ("p max 2 1\nn 1 q\n", 2),
        ("p min 2 1\na 1 2 0 1 1 o z\n", 2),
    ],
)
def test_dimacs_errors_carry_line(text, line):
    with pytest.raises(cio.ParseError) as info:
        cio.read_dimacs(text)
    assert info.value.line == line


def test_dimacs_arc_count_checked():
    with pytest.raises(cio.ParseError, match="announces 2"):
        cio.read_dimacs("p min 2 2\na 1 2 0 1 1\n")


def test_lp_json_roundtrip():
    lp = cio.read_lp(FIX / "toy_lp.json")
    assert lp.A.tolist() == [[1.0], [1.0]]
    assert list(lp.owners.owners) == [Party.ALICE, Party.BOB]
    assert cio.lp_to_dict(cio.lp_from_dict(cio.lp_to_dict(lp))) == cio.lp_to_dict(lp)


def test_lp_json_errors():
    with pytest.raises(cio.ParseError, match="missing key"):
        cio.lp_from_dict({"m": 1, "n": 1})
    with pytest.raises(cio.ParseError, match="line"):
        cio.read_lp('{"m": 1,\n "n": }')


# --- commands --------------------------------------------------------------


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = cli.main([*argv, "--out-dir", str(out)])
    return code, out


def test_cli_maxflow_single_edge(tmp_path, capsys):
    code, out = run(tmp_path, "maxflow", "--input", str(FIX / "single_edge.max"))
    assert code == 0
    doc = json.loads((out / "solution.json").read_text())
    assert doc["flow_value"] == 5 and doc["flow"] == [5]
    rows = list(csv.reader(io.StringIO((out / "transcript.csv").read_text())))
    assert rows[0] == ["phase", "sender", "receiver", "elements", "bits"]
    assert sum(int(r[4]) for r in rows[1:]) == json.loads((out / "summary.json").read_text())["total_bits"]
    assert cli.main(["verify", "--input", str(FIX / "single_edge.max"), "--solution", str(out / "solution.json")]) == 0


def test_cli_mincost_and_verify(tmp_path):
    code, out = run(tmp_path, "mincost", "--input", str(FIX / "three_vertex.min"))
    assert code == 0
    doc = json.loads((out / "solution.json").read_text())
    assert doc["cost"] == 4 and doc["flow"] == [2, 2, 0]
    assert cli.main(["verify", "--input", str(FIX / "three_vertex.min"), "--solution", str(out / "solution.json")]) == 0
    doc["flow"] = [1, 1, 1]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert cli.main(["verify", "--input", str(FIX / "three_vertex.min"), "--solution", str(bad)]) == 1


def test_cli_solve_lp_and_verify(tmp_path):
    code, out = run(tmp_path, "solve-lp", "--input", str(FIX / "toy_lp.json"))
    assert code == 0
    doc = json.loads((out / "solution.json").read_text())
    assert doc["objective"] <= 4 + 1e-3
    assert cli.main(["verify", "--input", str(FIX / "toy_lp.json"), "--solution", str(out / "solution.json")]) == 0


def test_cli_infeasible_exit_code(tmp_path):
    src = tmp_path / "bad.min"
    src.write_text("p min 2 1\nn 1 3\nn 2 -3\na 1 2 0 1 1\n")
    code, _ = run(tmp_path, "mincost", "--input", str(src))
    assert code == 2


def test_cli_parse_error_exit_code(tmp_path, capsys):
    src = tmp_path / "broken.min"
    src.write_text("p min 2 1\na 1 9 0 1 1\n")
    code, _ = run(tmp_path, "mincost", "--input", str(src))
    assert code == 1
    assert "line 2" in capsys.readouterr().err


def test_cli_rejects_bad_flags():
    with pytest.raises(SystemExit):
        cli.main(["maxflow", "--input", "x", "--bits", "0"])
    with pytest.raises(SystemExit):
        cli.main(["maxflow", "--input", "x", "--mode", "three_party"])


def test_cli_reruns_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["mincost", "--input", str(FIX / "three_vertex.min"), "--seed", "3", "--out-dir", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]


def test_cli_experiment_small(tmp_path):
    code, out = run(tmp_path, "experiment", "--sizes", "3,4,5", "--capacity", "4")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((out / "experiment.csv").read_text())))
    assert [int(r["n"]) for r in rows] == [3, 4, 5]
    bits = [int(r["total_bits"]) for r in rows]
    assert bits == sorted(bits) and len(set(bits)) == 3


def test_family_graphs():
    rng = np.random.default_rng(0)
    net, s, t = cli.family_graph("complete", 5, 16, rng)
    assert net.m == 20 and int(net.caps.max()) == 16
    for fam in ("bipartite", "grid", "random"):
        net, s, t = cli.family_graph(fam, 9, 8, np.random.default_rng(1))
        assert isinstance(net, FlowNetwork) and s != t
