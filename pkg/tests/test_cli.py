"""Command-line harness: subcommands and exit-code contract."""

import json

import pytest

from noisynet import random_instances as ri, trees
from noisynet.cli import main
from noisynet.protocol import protocol_to_text, star_xor
from noisynet.rng import RngStream


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_bounds_outputs_csv(capsys):
    code, out, _err = run(
        capsys, "bounds", "--gks", "0.25", "0.015625", "1.0"
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "bound,args,value"
    assert lines[1].startswith("gks_depth_bound,")
    assert lines[1].endswith("0.00125")


def test_bounds_needs_a_flag(capsys):
    code, _out, err = run(capsys, "bounds")
    assert code == 1


def test_unknown_command_is_invalid_input(capsys):
    code, _out, _err = run(capsys, "frobnicate")
    assert code == 1


def test_experiment_runs_and_prints_csv(capsys):
    code, out, _err = run(capsys, "--seed", "2", "experiment", "--experiment", "E3")
    assert code == 0
    assert out.splitlines()[0].startswith("schema,experiment,")
    assert len(out.splitlines()) == 5


def test_experiment_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps({"experiment": "E4", "params": {"ts": [1], "epses": [0.1]}})
    )
    out_path = tmp_path / "rows.csv"
    code, _out, _err = run(
        capsys, "--config", str(cfg), "--out", str(out_path), "experiment"
    )
    assert code == 0
    assert out_path.read_text().startswith("schema,experiment,")


def test_experiment_bad_config_is_invalid_input(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "E4", "typo_key": 1}))
    code, _out, err = run(capsys, "--config", str(cfg), "experiment")
    assert code == 1


def test_gen_network_and_decompose(tmp_path, capsys):
    net_path = tmp_path / "net.json"
    code, _out, err = run(
        capsys, "--seed", "3", "--out", str(net_path), "gen-network", "--n", "900"
    )
    assert code == 0 and net_path.exists()
    code, out, _err = run(
        capsys, "decompose", "--network", str(net_path)
    )
    assert code == 0
    assert "certified=True" in out


def test_run_protocol_exact(capsys):
    code, out, _err = run(
        capsys, "run-protocol", "--n", "2", "--eps", "0.1"
    )
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["error"] - 0.18) < 1e-9


def test_advantage_exact(tmp_path, capsys):
    path = tmp_path / "p.txt"
    path.write_text(protocol_to_text(star_xor(2, reps=1, eps=0.1)))
    code, out, _err = run(capsys, "advantage", "--protocol-file", str(path))
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["advantage"] - 0.64) < 1e-9


def test_advantage_missing_file_is_invalid_input(capsys):
    code, _out, err = run(
        capsys, "advantage", "--protocol-file", "/nonexistent/p.txt"
    )
    assert code == 1


def test_reduce_default_instance(capsys):
    code, out, _err = run(capsys, "--seed", "7", "reduce", "--stage", "readonce")
    assert code == 0
    doc = json.loads(out)
    assert doc["monotone"] is True


def test_tree_collapse_on_unordered_is_check_failure(tmp_path, capsys):
    spaces = [trees.uniform_bit_space(), trees.uniform_bit_space()]
    t = trees.Node(
        0,
        (0, 1),
        (trees.Node(1, (0, 1), (trees.Node(0, (0, 1), (trees._LEAF,) * 2),) * 2),) * 2,
    )
    path = tmp_path / "t.json"
    path.write_text(trees.tree_to_json(t, spaces))
    code, _out, err = run(capsys, "tree", str(path), "--collapse")
    assert code == 2
    code, out, _err = run(capsys, "tree", str(path), "--reorder", "--advantage")
    assert code == 0


def test_tree_requires_an_action(tmp_path, capsys):
    spaces = [trees.uniform_bit_space()]
    t = trees.Node(0, (0, 1), (trees._LEAF, trees._LEAF))
    path = tmp_path / "t.json"
    path.write_text(trees.tree_to_json(t, spaces))
    code, _out, _err = run(capsys, "tree", str(path))
    assert code == 1
