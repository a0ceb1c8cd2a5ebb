import pytest
import yaml

from main import OpinionSimulationPipeline, build_parser


def run(argv):
    args = build_parser().parse_args(argv)
    OpinionSimulationPipeline().run(args.action, args)
    return args


def read_yaml(path):
    with open(path) as file:
        return yaml.safe_load(file)


def test_eval_metrics_action(tmp_path):
    (tmp_path / "sim.txt").write_text("0.1\n0.2\n0.3\n")
    (tmp_path / "truth.txt").write_text("0.0\n0.2\n0.4\n")
    out = tmp_path / "metrics.yaml"
    run(["eval-metrics", "--sim", str(tmp_path / "sim.txt"), "--truth", str(tmp_path / "truth.txt"),
         "--out", str(out)])

    metrics = read_yaml(out)
    assert set(metrics) == {"ΔBias", "ΔDiv", "Corr.", "F."}
    assert metrics["Corr."] == pytest.approx(1.0)


def test_retrieve_action(tmp_path):
    (tmp_path / "memories.csv").write_text(
        "0,0.8,cotton ban is fair,1,0,0\n"
        "1,0.6,cotton ban again,0.9,0.1,0\n"
        "2,-0.5,football tonight,0,0,1\n"
    )
    (tmp_path / "query.txt").write_text("1 0 0\n")
    out = tmp_path / "retrieval.yaml"
    run(["retrieve", "--memories", str(tmp_path / "memories.csv"), "--query", str(tmp_path / "query.txt"),
         "--top-r", "2", "--mu", "0.5", "--out", str(out)])

    result = read_yaml(out)
    assert len(result["contents"]) == 2
    assert result["mu"] == 0.5
    assert result["solver"] in ("propagation", "closed_form_fallback")
    assert set(result["selected"]) <= {0, 1, 2}


def test_simulate_action_writes_outputs(tmp_path):
    config = tmp_path / "sim.yaml"
    config.write_text(yaml.safe_dump({"n_agents": 30, "t_max": 3, "top_k_core": 3, "gmp": {"profile_dim": 16}}))
    out = tmp_path / "out"
    run(["simulate", "--config", str(config), "--out", str(out)])

    assert len((out / "trend.txt").read_text().splitlines()) == 3
    report = read_yaml(out / "report.yaml")
    assert report["config"]["n_agents"] == 30
    assert (out / "centrality.csv").exists()
    assert (out / "history").is_dir()
