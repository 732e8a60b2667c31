import json

import pytest

from pnk import cli
from pnk import syntax as S
from pnk.netmodel import models as M


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_equiv_files(tmp_path, capsys):
    m = M.running_model(True, "f1")
    a, b = tmp_path / "a.pnk", tmp_path / "b.pnk"
    a.write_text(S.pretty_module(m.program))
    b.write_text(S.pretty_module(m.teleport))
    code, out, _ = run(capsys, "equiv", str(a), str(b), "--mode", "exact")
    doc = json.loads(out)
    assert code == 0 and doc["result"]["equivalent"] is True
    assert set(doc) == {"query", "mode", "result", "witnesses", "timings"}


def test_equiv_differs(capsys):
    code, out, _ = run(capsys, "equiv", "model", "teleport", "--scheme", "naive", "--failure", "f1")
    doc = json.loads(out)
    assert code == 1 and doc["witnesses"]


def test_delivery_chain(capsys):
    code, out, _ = run(capsys, "delivery", "--topo", "chain", "--k", "1", "--pfail", "1/1000",
                       "--scheme", "chain")
    assert code == 0
    assert json.loads(out)["result"]["mean"]["exact"] == "1999/2000"


def test_delivery_table(capsys):
    code, out, _ = run(capsys, "delivery", "--scheme", "resilient", "--failure", "f2",
                       "--format", "table")
    assert code == 0 and any(ln.startswith("result.mean") and "24/25" in ln for ln in out.splitlines())


def test_gen_topo(tmp_path, capsys):
    path = tmp_path / "t.dot"
    code, out, _ = run(capsys, "gen-topo", "fattree", "--k", "4", "--out", str(path))
    assert code == 0 and json.loads(out)["result"]["switches"] == 20
    assert path.read_text().count("kind=switch") == 20


def test_order(capsys):
    code, out, _ = run(capsys, "order", "model:scheme=naive,failure=f2",
                       "model:scheme=resilient,failure=f2")
    assert code == 0 and json.loads(out)["result"]["symbol"] == "<"


def test_resource_exit(capsys):
    code, _, err = run(capsys, "delivery", "--topo", "chain", "--k", "4", "--cap", "10")
    assert code == 3 and "resource" in err


def test_usage_errors(capsys):
    assert run(capsys, "delivery", "--topo", "nowhere.dot")[0] == 2
    assert run(capsys, "equiv", "model:bogus=1", "skip")[0] == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["equiv", "skip"])
    assert e.value.code == 2


def test_hops_plot(tmp_path, capsys):
    png = tmp_path / "h.png"
    code, out, _ = run(capsys, "hops", "--topo", "chain", "--k", "1", "--pfail", "0",
                       "--hops", "6", "--plot", str(png))
    doc = json.loads(out)
    assert code == 0 and png.stat().st_size > 0
    assert doc["result"]["histogram"] == {"2": {"exact": "1/1", "float": 1.0}}


def test_export_prism(tmp_path, capsys):
    src = tmp_path / "p.pnk"
    src.write_text("f:=0 +[1/2] f:=1")
    code, out, _ = run(capsys, "export-prism", str(src), "--ranges", "f=0..3")
    text = json.loads(out)["result"]["model"]
    assert code == 0 and "f : [0..3] init 0;" in text


def test_bench_chain(tmp_path, capsys):
    png = tmp_path / "c.png"
    code, out, _ = run(capsys, "bench-chain", "--ks", "1,2,4", "--plot", str(png))
    runs = json.loads(out)["result"]["runs"]
    assert code == 0 and all(r["match"] for r in runs) and png.exists()


def test_bench_fattree_small(capsys):
    code, out, _ = run(capsys, "bench-fattree", "--scheme", "f10_0", "--kfail", "0,1")
    runs = json.loads(out)["result"]["runs"]
    assert code == 0 and [r["teleport_equivalent"] for r in runs] == [True, False]


def test_jobs_do_not_change_results(capsys):
    outs = []
    for jobs in ("1", "2"):
        _, out, _ = run(capsys, "delivery", "--topo", "abfattree", "--scheme", "f10_3",
                        "--kfail", "1", "--jobs", jobs)
        outs.append(json.loads(out)["result"])
    assert outs[0] == outs[1]
