import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from cmereduce import __version__
from cmereduce.cli import RunConfig, UsageError, main
from cmereduce.io import read_csv, read_matrix_market, write_csv, write_matrix_market

from conftest import CORPUS, GOLDEN


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "cmereduce", "netinfo", str(CORPUS / "triangular.rxn")],
        capture_output=True,
        text=True,
        check=True,
    )
    assert "deficiency=" in res.stdout


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.rxn")), ids=lambda p: p.stem)
def test_netinfo_golden(capsys, path):
    code, out, err = _run(capsys, "netinfo", path)
    assert code == 0
    assert out == (GOLDEN / f"{path.stem}.netinfo.txt").read_text()
    if path.stem == "wilhelm":
        assert "molecularity" in err


def test_wilhelm_netinfo_values(capsys):
    out = _run(capsys, "netinfo", CORPUS / "wilhelm.rxn")[1].splitlines()
    for line in ["m=3", "r=3", "p=5", "rank_E=3", "rank_nuE=2", "deficiency=1", "conservation: 1 1 1"]:
        assert line in out


def test_states_outputs(capsys, tmp_path):
    code, out, _ = _run(
        capsys, "states", CORPUS / "network1.rxn", "--out", tmp_path / "k.mtx", "--states", tmp_path / "s.csv",
        "--fast-out", tmp_path / "kf.mtx", "--slow-out", tmp_path / "ks.mtx",
    )
    assert code == 0
    assert out.splitlines()[0] == "states=27"
    k = read_matrix_market(tmp_path / "k.mtx").toarray()
    kf = read_matrix_market(tmp_path / "kf.mtx").toarray()
    ks = read_matrix_market(tmp_path / "ks.mtx").toarray()
    assert k.shape == (27, 27)
    assert np.allclose(k, kf + ks, atol=1e-14)
    assert np.abs(k.sum(axis=0)).max() <= 1e-12
    header, rows = read_csv(tmp_path / "s.csv")
    assert header == ["index", *"ABCDEFG"]
    assert rows[0] == ["0", "1", "0", "0", "0", "0", "2", "0"]


def test_structure_golden(capsys, tmp_path):
    code, _, _ = _run(capsys, "structure", CORPUS / "network3.rxn", "--out", tmp_path / "s.csv")
    assert code == 0
    assert (tmp_path / "s.csv").read_text() == (GOLDEN / "network3_structure.csv").read_text()


def test_structure_dot(capsys):
    code, out, _ = _run(capsys, "structure", CORPUS / "network2.rxn", "--dot")
    assert code == 0
    assert out.startswith("digraph") and out.count("doublecircle") == 6


REDUCIBLE = ["ab", "birthdeath", "inputAB", "wilhelm", "triangular", "network1", "network2", "network3",
             "motor", "enzyme"]


@pytest.mark.parametrize("name", REDUCIBLE)
def test_reduce_golden_numeric(capsys, tmp_path, name):
    code, _, _ = _run(capsys, "reduce", CORPUS / f"{name}.rxn", "--out", tmp_path / "k.mtx",
                      "--table", tmp_path / "t.csv")
    assert code == 0
    ours = read_matrix_market(tmp_path / "k.mtx").toarray()
    ref = read_matrix_market(GOLDEN / f"{name}.ktilde.mtx").toarray()
    assert ours.shape == ref.shape
    assert np.allclose(ours, ref, rtol=1e-12, atol=1e-14)
    assert (tmp_path / "t.csv").read_text() == (GOLDEN / f"{name}.table.csv").read_text()


def test_reduce_full_operators(capsys, tmp_path):
    code, _, _ = _run(
        capsys, "reduce", CORPUS / "triangular.rxn", "--out", tmp_path / "k.mtx",
        "--full-operators", "--l-out", tmp_path / "L.mtx", "--pi-out", tmp_path / "Pi.mtx",
    )
    assert code == 0
    _, rows = read_csv(GOLDEN / "triangular.table.csv")
    assert [r[3] for r in rows] == ["2 0", "1 1", "0 2"]
    L = read_matrix_market(tmp_path / "L.mtx").toarray()
    Pi = read_matrix_market(tmp_path / "Pi.mtx").toarray()
    assert L.shape == (3, 6) and Pi.shape == (6, 3)
    assert np.allclose(L @ Pi, np.eye(3), atol=1e-12)


def test_reduce_to_stdout(capsys):
    code, out, _ = _run(capsys, "reduce", CORPUS / "motor.rxn")
    assert code == 0
    assert out.startswith("%%MatrixMarket")


def test_solve_full_and_reduced(capsys, tmp_path):
    args = ["solve", CORPUS / "motor.rxn", "--t-end", "20", "--steps", "10"]
    code, _, _ = _run(capsys, *args, "--out", tmp_path / "full.csv", "--dist-out", tmp_path / "p.csv")
    assert code == 0
    code, _, _ = _run(capsys, *args, "--reduced", "--out", tmp_path / "red.csv")
    assert code == 0
    h1, full = read_csv(tmp_path / "full.csv")
    h2, red = read_csv(tmp_path / "red.csv")
    assert h1 == h2 and h1[0] == "time" and len(full) == 11
    a = np.array(full, dtype=float)
    b = np.array(red, dtype=float)
    # CW probability is the sum of the CW0..CW4 means
    assert np.abs(a[:, 1:6].sum(axis=1) - b[:, 1:6].sum(axis=1)).max() <= 0.02
    _, dist = read_csv(tmp_path / "p.csv")
    assert np.allclose(np.array(dist, dtype=float)[:, 1:].sum(axis=1), 1.0)


def test_compare_csv(capsys, tmp_path):
    code, _, _ = _run(capsys, "compare", CORPUS / "network1.rxn", "--t-end", "50", "--steps", "50",
                      "--out", tmp_path / "c.csv")
    assert code == 0
    header, rows = read_csv(tmp_path / "c.csv")
    assert header[:2] == ["time", "prob_error"] and "mean_err_A" in header and "var_err_G" in header
    err = np.array([float(r[1]) for r in rows])
    assert err[0] == 0.0 and err.max() <= 0.05


def test_ssa_on_the_fly_golden(capsys, tmp_path):
    argv = ["ssa", CORPUS / "pfk.rxn", "--t-end", "2", "--n", "20", "--grid", "5", "--seed", "3",
            "--slow-scale", "--on-the-fly", "--out", tmp_path / "a.csv"]
    code, _, _ = _run(capsys, *argv)
    assert code == 0
    assert (tmp_path / "a.csv").read_bytes() == (GOLDEN / "pfk_onthefly_ssa.csv").read_bytes()


def test_ssa_paths_and_threads(capsys, tmp_path):
    base = ["ssa", CORPUS / "enzyme.rxn", "--t-end", "1", "--n", "300", "--grid", "4", "--seed", "1"]
    assert _run(capsys, *base, "--out", tmp_path / "a.csv", "--paths-out", tmp_path / "p.csv")[0] == 0
    assert _run(capsys, "--threads", "3", *base, "--out", tmp_path / "b.csv")[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header, rows = read_csv(tmp_path / "p.csv")
    assert header == ["realization", "time", "state_index"]
    assert rows[0][:2] == ["0", "0.0"] and rows[0][2] == "5 100 0 5 0 0"


def test_cap_override(capsys, tmp_path):
    code, out, _ = _run(capsys, "states", CORPUS / "inputAB.rxn", "--cap", "A=2,B=2")
    assert code == 0 and out.splitlines()[0] == "states=9"
    code, _, err = _run(capsys, "states", CORPUS / "inputAB.rxn", "--cap", "Q=2")
    assert code == 1 and "unknown species" in err


def test_unbounded_network_is_a_domain_error(capsys):
    code, _, err = _run(capsys, "states", CORPUS / "unbounded.rxn")
    assert code == 1
    assert "unbounded" in err and "k1" in err
    code, out, _ = _run(capsys, "states", CORPUS / "unbounded.rxn", "--cap", "A=3,B=3")
    assert code == 0 and out.startswith("states=16")


def test_parse_error_reports_line(capsys, tmp_path):
    bad = tmp_path / "bad.rxn"
    bad.write_text("species: A\nr1: A -> B rate=1 fast\n")
    code, _, err = _run(capsys, "netinfo", bad)
    assert code == 1
    assert "line 2" in err and "unknown species" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = _run(capsys, "netinfo", tmp_path / "nope.rxn")
    assert code == 1 and err.startswith("error:")


@pytest.mark.parametrize(
    "argv, fragment",
    [
        (["ssa", "x.rxn", "--t-end", "0", "--n", "5"], "--t-end"),
        (["ssa", "x.rxn", "--t-end", "1", "--n", "0"], "--n"),
        (["ssa", "x.rxn", "--t-end", "1", "--n", "5", "--on-the-fly"], "--slow-scale"),
        (["solve", "x.rxn", "--t-end", "1", "--steps", "0"], "--steps"),
        (["states", "x.rxn", "--cap", "A=x"], "NAME=COUNT"),
    ],
)
def test_usage_errors_exit_two(capsys, argv, fragment):
    code, _, err = _run(capsys, *argv)
    assert code == 2
    assert fragment in err


def test_argparse_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["ssa", "x.rxn"])
    assert exc.value.code == 2


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig("structure", CORPUS / "ab.rxn", full_operators=True)
    cfg = RunConfig("reduce", CORPUS / "ab.rxn", full_operators=True)
    assert cfg.full_operators


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(entries=st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), finite.filter(lambda v: v != 0.0)), max_size=12))
def test_matrix_market_round_trip(entries, tmp_path_factory):
    dense = np.zeros((5, 5))
    for i, j, v in entries:
        dense[i, j] = v
    path = tmp_path_factory.mktemp("mm") / "m.mtx"
    write_matrix_market(path, sp.csc_matrix(dense))
    assert np.array_equal(read_matrix_market(path).toarray(), dense)


@given(rows=st.lists(st.tuples(finite, st.integers(-10**12, 10**12)), max_size=10))
def test_csv_round_trip(rows, tmp_path_factory):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    write_csv(path, ["x", "n"], rows)
    header, back = read_csv(path)
    assert header == ["x", "n"]
    assert [(float(a), int(b)) for a, b in back] == [(float(a), b) for a, b in rows]
