import json
import os
import subprocess
import sys

import networkx as nx
import numpy as np
import pytest

from claim_im.cli import main, parse_value, read_config
from claim_im.graph import Graph, write_edge_list

FAST = """\
# tiny settings for tests
episodes = 2
s_size = 3
k_seeds = 3
n_sims = 20
batch_size = 4
goal_samples = 2
walk_dim = 8
walks_per_node = 2
walk_length = 8
window = 2
walk_epochs = 1
hidden = 8
clusters = 3
fc_width = 8
"""


@pytest.fixture
def workdir(tmp_path):
    for s in (1, 2, 3):
        write_edge_list(Graph.from_networkx(nx.barabasi_albert_graph(30, 2, seed=s)),
                        tmp_path / f"g{s}.txt")
    (tmp_path / "fast.cfg").write_text(FAST)
    return tmp_path


def test_parse_value():
    assert parse_value("3") == 3 and parse_value("1e-3") == 1e-3
    assert parse_value("none") is None and parse_value("True") is True
    assert parse_value("cher") == "cher"


def test_read_config(workdir):
    cfg = read_config(workdir / "fast.cfg")
    assert cfg["episodes"] == 2 and cfg["hidden"] == 8


def test_print_defaults(capsys):
    assert main(["config", "--print-defaults"]) == 0
    out = capsys.readouterr().out
    assert "mode = 'cher'" in out and "episodes = 300" in out


def test_train_writes_outputs_and_manifest(workdir, capsys):
    out = workdir / "run"
    rc = main(["train", str(workdir / "g1.txt"), str(workdir / "g2.txt"),
               "--config", str(workdir / "fast.cfg"), "--seed", "4", "--out", str(out)])
    assert rc == 0
    assert sorted(os.listdir(out)) == ["checkpoint.bin", "manifest.json", "metrics.csv"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 4 and man["config"]["episodes"] == 2
    assert len(man["inputs"]["sha256"]) == 2
    assert (out / "metrics.csv").read_text().startswith("episode,graph,goal")


def test_evaluate_checkpoint_and_baselines(workdir, capsys):
    out = workdir / "run"
    assert main(["train", str(workdir / "g1.txt"), "--config", str(workdir / "fast.cfg"),
                 "--out", str(out)]) == 0
    capsys.readouterr()
    csv_path = workdir / "eval.csv"
    rc = main(["evaluate", str(workdir / "g3.txt"), "--checkpoint", str(out / "checkpoint.bin"),
               "--runs", "2", "--out", str(csv_path)])
    assert rc == 0
    assert "mean" in capsys.readouterr().out
    assert len(csv_path.read_text().splitlines()) == 3
    for policy in ("random", "change"):
        assert main(["evaluate", str(workdir / "g3.txt"), "--policy", policy, "--runs", "2",
                     "--config", str(workdir / "fast.cfg")]) == 0


def test_goal_command(capsys):
    assert main(["goal", "--v", "40", "--e", "60", "--i", "18.03", "--s", "5"]) == 0
    out = capsys.readouterr().out
    assert "p_prime = 0.5001" in out or "p_prime = 0.5000" in out


def test_goal_clamps_with_warning(capsys):
    assert main(["goal", "--v", "40", "--e", "60", "--i", "400", "--s", "5"]) == 0
    cap = capsys.readouterr()
    assert "clamped" in cap.err and "p_prime = 1.0000" in cap.out


def test_goal_from_graph(workdir, capsys):
    assert main(["goal", "--graph", str(workdir / "g1.txt"), "--samples", "2",
                 "--estimate-samples", "2"]) == 0
    assert capsys.readouterr().out.count("goal=") == 2


def test_influence_command(workdir, capsys):
    assert main(["influence", str(workdir / "g1.txt"), "--k", "2", "--n-sims", "200"]) == 0
    assert "influence =" in capsys.readouterr().out
    small = workdir / "small.txt"
    small.write_text("0 1\n1 2\n")
    assert main(["influence", str(small), "--k", "1", "--p", "0.5", "--exact"]) == 0
    out = capsys.readouterr().out
    assert "seeds = 1" in out and "influence = 2.000000" in out


def test_influence_exact_too_large(workdir, capsys):
    rc = main(["influence", str(workdir / "g1.txt"), "--exact"])
    assert rc == 1 and "at most" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["train"],
    ["train", "missing.txt"],
    ["evaluate", "x.txt", "--policy", "checkpoint"],
    ["goal", "--v", "10"],
    ["bogus"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1


def test_unknown_config_key(workdir):
    assert main(["train", str(workdir / "g1.txt"), "--set", "nope=1",
                 "--out", str(workdir / "r")]) == 1
    assert main(["train", str(workdir / "g1.txt"), "--set", "mode=weird",
                 "--out", str(workdir / "r")]) == 1


def test_bad_edge_list_is_runtime_error(workdir, capsys):
    bad = workdir / "bad.txt"
    bad.write_text("0 1\nx y\n")
    rc = main(["train", str(bad), "--config", str(workdir / "fast.cfg"), "--out", str(workdir / "r")])
    assert rc == 2
    assert not (workdir / "r").exists()


def test_failed_training_leaves_no_outputs(workdir):
    tiny = workdir / "tiny.txt"
    tiny.write_text("0 1\n")
    rc = main(["train", str(tiny), "--config", str(workdir / "fast.cfg"), "--out", str(workdir / "r")])
    assert rc != 0
    assert not (workdir / "r").exists()
    assert not [p for p in os.listdir(workdir) if p.startswith(".claim-train-")]


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "claim_im.cli", "config", "--print-defaults"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "random_state = 0" in proc.stdout


def _star_of_stars(hubs=6, leaves=8):
    edges, nxt = [], hubs + 1
    for h in range(1, hubs + 1):
        edges.append((0, h))
        for _ in range(leaves):
            edges.append((h, nxt))
            nxt += 1
    return Graph(edges)


def test_change_beats_random_on_star_of_stars(tmp_path, capsys):
    path = tmp_path / "sos.txt"
    write_edge_list(_star_of_stars(), path)
    # One start node: with five, the start neighbourhood already exposes most
    # hubs and the query order stops mattering.
    means = {}
    for policy in ("random", "change"):
        out = tmp_path / f"{policy}.csv"
        assert main(["evaluate", str(path), "--policy", policy, "--runs", "200", "--seed", "5",
                     "--set", "k_seeds=3", "--set", "n_sims=200", "--set", "s_size=1",
                     "--out", str(out)]) == 0
        vals = [float(line.rsplit(",", 1)[1]) for line in out.read_text().splitlines()[1:]]
        means[policy] = np.mean(vals)
    assert means["change"] >= means["random"]


def test_influence_all_nodes_and_zero_probability(workdir, capsys):
    small = workdir / "small.txt"
    small.write_text("0 1\n1 2\n2 3\n")
    assert main(["influence", str(small), "--k", "9", "--p", "1.0"]) == 0
    assert "influence = 4.000000" in capsys.readouterr().out
    assert main(["influence", str(small), "--k", "2", "--p", "0.0"]) == 0
    assert "influence = 2.000000" in capsys.readouterr().out
