import json

import pytest

from mixedcurv.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_scenarios_listing(capsys):
    code, out, _ = _run(capsys, "scenarios")
    assert code == 0
    assert len(out.strip().splitlines()) >= 8


def test_scenarios_json(capsys):
    code, out, _ = _run(capsys, "scenarios", "--json")
    items = json.loads(out)
    assert code == 0 and isinstance(items, list)
    assert all(set(i) == {"name", "description"} for i in items)


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        [],
        ["verify"],
        ["verify", "--all", "--scenario", "warped_torus"],
        ["verify", "--scenario", "warped_torus", "--format", "xml"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["--scenario", "klein_bottle"], ["--scenario", "warped_torus", "--tol", "-1"]])
def test_config_errors_exit_2(argv, capsys):
    code, _, err = _run(capsys, "verify", *argv)
    assert code == 2 and "error" in err


def test_euclidean_foliation_is_exactly_zero(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, _ = _run(capsys, "verify", "--scenario", "euclidean_foliation", "--json", str(path))
    assert code == 0 and "PASS" in out
    report = json.loads(path.read_text())
    block = report["scenarios"]["euclidean_foliation"]
    for ident in block["identities"].values():
        assert ident["max_abs"] is None or ident["max_abs"] <= 1e-12


def test_json_to_stdout_and_schema(capsys):
    code, out, _ = _run(capsys, "verify", "--scenario", "warped_torus", "--json", "-", "--grid", "9", "--points", "5")
    report = json.loads(out)
    assert code == 0
    assert report["schema_version"] == "1.0"
    assert report["config"]["grid"] == 9 and report["config"]["seed"] == 42
    conv = report["conventions"]
    assert conv["sign_variant"] == "minus" and conv["evidence"]["xi_H_sign"]["discrepancy"]
    block = report["scenarios"]["warped_torus"]
    assert {"identities", "hypothesis", "facts", "passed", "runtime_s"} <= set(block)
    w = block["identities"]["walczak"]
    assert {"max_abs", "mean_abs", "worst_point", "variant"} <= set(w)


def test_forced_printed_sign_fails_where_xi_H_is_nonzero(capsys):
    code, out, _ = _run(capsys, "verify", "--scenario", "warped_torus_swapped", "--sign-variant", "plus", "--format", "json")
    report = json.loads(out)
    assert code == 1
    assert report["conventions"]["forced"] and not report["conventions"]["matches_resolver"]
    w = report["scenarios"]["warped_torus_swapped"]["identities"]["walczak"]
    assert w["variant"] == "plus" and w["max_abs"] > 0.5


def test_forced_printed_sign_is_invisible_on_contact_torus(capsys):
    # xi_H vanishes identically there, so both signs give the same residual
    code, out, _ = _run(capsys, "verify", "--scenario", "contact_T3", "--sign-variant", "plus", "--format", "json", "--grid", "9")
    report = json.loads(out)
    assert report["conventions"]["forced"] and not report["conventions"]["matches_resolver"]
    assert report["scenarios"]["contact_T3"]["identities"]["walczak"]["max_abs"] <= 1e-12
    assert code == 0


def _strip_runtime(x):
    if isinstance(x, dict):
        return {k: _strip_runtime(v) for k, v in x.items() if k != "runtime_s"}
    if isinstance(x, list):
        return [_strip_runtime(v) for v in x]
    return x


def test_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        _run(capsys, "verify", "--scenario", "contact_T3", "double_twisted_T2", "--grid", "9", "--json", str(p))
    a, b = (json.loads(p.read_text()) for p in paths)
    assert json.dumps(_strip_runtime(a), sort_keys=True) == json.dumps(_strip_runtime(b), sort_keys=True)


def test_seed_changes_random_points(capsys):
    outs = []
    for seed in ("1", "2"):
        _, out, _ = _run(capsys, "verify", "--scenario", "warped_torus", "--grid", "3", "--points", "4", "--seed", seed, "--format", "json")
        outs.append(json.loads(out)["scenarios"]["warped_torus"]["identities"]["walczak"]["mean_abs"])
    assert outs[0] != outs[1]
