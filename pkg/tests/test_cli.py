import pathlib

import pytest

from odeliveness.cli import main
from conftest import problem_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


# -- check ----------------------------------------------------------------------


def test_check_example1_exit0_and_chain(capsys):
    code, out = run(capsys, "check", problem_path("example1.ode"))
    assert code == 0
    names = [line.split()[1] for line in out.splitlines() if line[:1].isdigit()]
    assert names == ["GEx", "dV_geq", "K⟨&⟩", "M◇′"]
    assert "verdict: Proved" in out


def test_check_example2_exit0(capsys):
    code, out = run(capsys, "check", problem_path("example2.ode"))
    assert code == 0
    assert out.count("K⟨&⟩") >= 2 and "BEx" in out


def test_check_ce1_refused_exit2(capsys):
    code, out = run(capsys, "check", problem_path("ce1.ode"))
    assert code == 2
    assert "RuleRefused(GlobalLipschitz)" in out


def test_check_ce3_refused_initial_state(capsys):
    code, out = run(capsys, "check", problem_path("ce3.ode"))
    assert code == 2
    assert "RuleRefused(InitialState" in out


def test_check_ce4_refused_compact(capsys):
    code, out = run(capsys, "check", problem_path("ce4.ode"))
    assert code == 2
    assert "RuleRefused(Compact" in out


def test_check_domain_extension(capsys):
    code, out = run(capsys, "check", problem_path("example2_domain.ode"))
    assert code == 0
    assert "COR" in out


def test_check_halfopen_domain_refused(capsys):
    code, out = run(capsys, "check", problem_path("example2_domain_halfopen.ode"))
    assert code == 2
    assert "TopoUnknown" in out


def test_check_without_proof_block_is_input_error(tmp_path, capsys):
    f = tmp_path / "noproof.ode"
    f.write_text("ode { x' = 1 }  goal { x >= 0 }\n")
    code, out = run(capsys, "check", f)
    assert code == 3


def test_check_parse_error_exit3(tmp_path, capsys):
    f = tmp_path / "bad.ode"
    f.write_text("ode { x' = }\n")
    code, out = run(capsys, "check", f)
    assert code == 3
    assert "input error" in out


def test_check_trace_byte_identical(capsys):
    _, out1 = run(capsys, "check", problem_path("example1.ode"))
    _, out2 = run(capsys, "check", problem_path("example1.ode"))
    assert out1 == out2


def test_refuted_certificate_exit1(tmp_path, capsys):
    f = tmp_path / "wrong-eps.ode"
    f.write_text(
        """
        ode { u' = -v - u; v' = u - v }
        assume { u^2 + v^2 = 1 }
        goal { u^2 + v^2 <= 1/4 }
        proof { rule dV_geq { p = 1/4 - (u^2 + v^2); eps = 3;
                box = -4 <= u & u <= 4 & -4 <= v & v <= 4 } }
        """
    )
    code, out = run(capsys, "check", f)
    assert code == 1
    assert "verdict: Refuted" in out
    assert "counterexample" in out


# -- falsify ----------------------------------------------------------------------


def test_falsify_example1_exit0(capsys, tmp_path):
    code, out = run(
        capsys, "falsify", problem_path("example1.ode"), "--samples", 8, "--horizon", 5, "--out", tmp_path
    )
    assert code == 0
    assert "WITNESS=8" in out
    # manifest completeness: every written file is listed
    listed = {line.split()[-1] for line in out.splitlines() if line.startswith("wrote ")}
    actual = {str(p) for p in pathlib.Path(tmp_path).iterdir()}
    assert listed == actual


def test_falsify_ce4_exit1(capsys):
    code, out = run(capsys, "falsify", problem_path("ce4.ode"), "--samples", 4, "--horizon", 6)
    assert code == 1
    assert "BLOWUP=4" in out


def test_falsify_goal_false_exit2(tmp_path, capsys):
    f = tmp_path / "nofalse.ode"
    f.write_text("ode { x' = -x }  assume { x = 1 }  goal { false }\n")
    code, out = run(capsys, "falsify", f, "--samples", 2, "--horizon", 1)
    assert code == 2


def test_falsify_unsamplable_exit3(tmp_path, capsys):
    f = tmp_path / "unsamplable.ode"
    f.write_text("ode { x' = 1 }  assume { x >= 0 }  goal { x >= 1 }\n")
    code, out = run(capsys, "falsify", f, "--samples", 2)
    assert code == 3


# -- lie / simulate / emit-smt / catalog ----------------------------------------------


def test_lie_command_canonical_output(capsys):
    code, out = run(capsys, "lie", problem_path("example2.ode"), "-p", "u^2 + v^2", "-k", 1)
    assert code == 0
    assert out.strip() == "2*u^4 + 4*u^2*v^2 + 2*v^4 - 1/2*u^2 - 1/2*v^2"


def test_lie_k0_echoes_canonically(capsys):
    code, out = run(capsys, "lie", problem_path("example1.ode"), "-p", "v^2 + u^2", "-k", 0)
    assert out.strip() == "u^2 + v^2"


def test_lie_second_order(capsys):
    code, out = run(capsys, "lie", problem_path("example1.ode"), "-p", "u", "-k", 2)
    assert out.strip() == "2*v"


def test_simulate_writes_manifest(tmp_path, capsys):
    code, out = run(
        capsys,
        "simulate",
        problem_path("example1.ode"),
        "--init",
        "u=1,v=0",
        "--horizon",
        "2",
        "--out",
        tmp_path,
    )
    assert code == 0
    assert "GoalEntered" in out
    assert f"wrote {tmp_path}/trajectory.csv" in out


def test_emit_smt_writes_unknown_obligations(tmp_path, capsys):
    # valid premise that is neither symbolically derivable nor boxable:
    # the prover stays Unknown, so the obligation is exported for a solver
    f = tmp_path / "unknown.ode"
    f.write_text(
        """
        ode { x' = 2 + x + x^4 }
        assume { x = 0 }
        goal { x >= 0 }
        proof { rule dV_geq_star { p = x; eps = 1 } }
        """
    )
    code, out = run(capsys, "emit-smt", f, "--out", tmp_path / "smt")
    assert code == 0
    files = list((tmp_path / "smt").glob("ob-*.smt2"))
    assert files
    for p in files:
        assert f"wrote {p}" in out
    text = files[0].read_text()
    assert "(set-logic QF_NRA)" in text and "(check-sat)" in text
    # indices in the filenames match the obligation numbering of the trace
    code2, trace = run(capsys, "check", f)
    unknown_ids = {
        line.strip().split()[0].removeprefix("ob-")
        for line in trace.splitlines()
        if line.strip().startswith("ob-") and ": Unknown" in line and "slope" in line
    }
    file_ids = {p.name.split("-")[1] for p in files}
    assert unknown_ids <= file_ids


def test_catalog_command(capsys):
    code, out = run(capsys, "catalog", "--samples", 4)
    assert code == 0
    for ce in ("CE-1", "CE-2", "CE-3", "CE-4"):
        assert f"{ce}: ok" in out
