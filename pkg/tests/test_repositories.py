"""CSV/JSON persistence"""
import json

import numpy as np
import pytest

from truthnet.errors import CliUsageError, DatasetFormatError
from truthnet.experiments.evalkit import SweepPoint, aggregate, run_method
from truthnet.experiments.generator import GenConfig, generate
from truthnet.inference.mathkernels import RngStream
from truthnet.models.options import VisitOptions
from truthnet.models.reports import RunResult
from truthnet.repositories.dataset_repository import (
    IdMap,
    flip_observations,
    load_real_dataset,
    read_gen_meta,
    read_observations,
    write_dataset,
)
from truthnet.repositories.report_repository import ReportRepository, sweep_rows, write_sweep


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def three_agent_files(tmp_path):
    """String IDs, one edge to an agent that never reports"""
    obs = write(tmp_path / "observations.csv", "agent_id,event_id,label\nalice,m1,1\nbob,m1,0\ncarol,m2,1\nalice,m2,1\n")
    net = write(tmp_path / "network.csv", "agent_a,agent_b\nalice,bob\nbob,carol\ncarol,dave\n")
    truth = write(tmp_path / "truth.csv", "event_id,state\nm1,1\nm2,1\n")
    return obs, net, truth


def test_id_map_ordering():
    """Numeric IDs sort numerically, others lexicographically"""
    ids = IdMap.from_ids(["10", "2", "2"], ["b", "a"])
    assert ids.agents == {"2": 0, "10": 1}
    assert ids.event_ids() == ["a", "b"]
    assert IdMap.identity(2, 1).agent_ids() == ["0", "1"]


def test_load_real_dataset(three_agent_files):
    """Dense indices, dropped dangling edge, truth aligned to events"""
    loaded = load_real_dataset(*three_agent_files)
    assert loaded.id_map.agent_ids() == ["alice", "bob", "carol"]
    assert loaded.obs.num_reports == 4
    assert loaded.obs.num_states == 2
    assert loaded.graph.edges.tolist() == [[0, 1], [1, 2]]
    assert loaded.dropped_edges == 1
    assert loaded.truth_states.tolist() == [1, 1]


def test_num_states_override(three_agent_files):
    """--num-states widens R"""
    obs_path, net_path, _ = three_agent_files
    assert load_real_dataset(obs_path, net_path, num_states=4).obs.num_states == 4


def test_format_errors_carry_line_numbers(tmp_path):
    """Bad headers, labels and duplicates report file and line"""
    with pytest.raises(DatasetFormatError) as info:
        read_observations(write(tmp_path / "a.csv", "agent,event,label\n1,1,0\n"))
    assert info.value.line == 1
    with pytest.raises(DatasetFormatError) as info:
        read_observations(write(tmp_path / "b.csv", "agent_id,event_id,label\n1,1,0\n2,1,x\n"))
    assert info.value.line == 3
    with pytest.raises(DatasetFormatError) as info:
        read_observations(write(tmp_path / "c.csv", "agent_id,event_id,label\n1,1,0\n1,1,1\n"))
    assert info.value.line == 3
    with pytest.raises(DatasetFormatError):
        read_observations(write(tmp_path / "d.csv", "agent_id,event_id,label\n1,1,2\n"), num_states=2)
    with pytest.raises(DatasetFormatError):
        read_observations(tmp_path / "missing.csv")


def test_self_loop_rejected(tmp_path, three_agent_files):
    """Self-loops in the network file are format errors"""
    obs_path, _, _ = three_agent_files
    net = write(tmp_path / "loop.csv", "agent_a,agent_b\nalice,alice\n")
    with pytest.raises(DatasetFormatError):
        load_real_dataset(obs_path, net)


def test_flip_fraction_zero_is_noop(three_agent_files):
    """No adversarial reports for fraction 0"""
    plain = load_real_dataset(*three_agent_files)
    flipped = load_real_dataset(*three_agent_files, flip_fraction=0.0)
    assert np.array_equal(plain.obs.labels, flipped.obs.labels)


def test_flip_adds_two_per_event(tmp_path):
    """Fraction 0.2 of 10 agents flips exactly two non-reporters per event"""
    lines = ["agent_id,event_id,label"]
    lines += [f"{a},A,0" for a in range(5)] + [f"{a},B,1" for a in range(5, 10)]
    obs = write(tmp_path / "obs.csv", "\n".join(lines) + "\n")
    net = write(tmp_path / "net.csv", "agent_a,agent_b\n0,1\n")
    truth = write(tmp_path / "truth.csv", "event_id,state\nA,0\nB,1\n")
    loaded = load_real_dataset(obs, net, truth, flip_fraction=0.2, flip_seed=3)
    assert loaded.obs.num_reports == 14
    added_a = (loaded.obs.events == 0) & (loaded.obs.agents >= 5)
    added_b = (loaded.obs.events == 1) & (loaded.obs.agents < 5)
    assert added_a.sum() == 2 and np.all(loaded.obs.labels[added_a] == 1)
    assert added_b.sum() == 2 and np.all(loaded.obs.labels[added_b] == 0)


def test_flip_requirements(three_agent_files):
    """Flipping needs truth and binary states"""
    obs_path, net_path, truth_path = three_agent_files
    with pytest.raises(CliUsageError):
        load_real_dataset(obs_path, net_path, flip_fraction=0.2)
    with pytest.raises(CliUsageError):
        load_real_dataset(obs_path, net_path, truth_path, num_states=3, flip_fraction=0.2)


def test_flip_caps_at_available_agents():
    """Events with too few non-reporters take all of them"""
    reports = [(0, 0, 0), (1, 0, 0)]
    added = flip_observations(reports, 3, np.array([0]), 1.0, RngStream(0))
    assert sorted(added) == [(0, 0, 0), (1, 0, 0), (2, 0, 1)]


def test_write_dataset_and_gen_meta(tmp_path):
    """Generated files reload into the same data and ground truth"""
    config = GenConfig(num_agents=5, num_events=6, num_communities=2, num_states=3,
                       diag_values=[0.7, 0.4], sparsity=0.3)
    obs, graph, truth = generate(config, RngStream(1))
    paths = write_dataset(tmp_path, obs, graph, truth, config)
    assert (tmp_path / "observations.csv").read_text().splitlines()[0] == "agent_id,event_id,label"
    loaded = load_real_dataset(paths["observations"], paths["network"], paths["truth"], num_states=3)
    assert np.array_equal(loaded.obs.labels, obs.labels)
    assert np.array_equal(loaded.truth_states, truth.theta)
    meta = read_gen_meta(paths["gen_meta"])
    assert np.array_equal(meta.s, truth.s)
    assert np.allclose(meta.agent_omega, truth.agent_omega)
    assert json.loads(paths["gen_meta"].read_text())["config"]["num_agents"] == 5


def test_gen_meta_missing_field(tmp_path):
    """Incomplete gen_meta files are format errors"""
    with pytest.raises(DatasetFormatError):
        read_gen_meta(write(tmp_path / "meta.json", '{"theta": [0]}'))


def test_report_round_trip(tmp_path, tiny_obs, tiny_graph, tiny_hyper):
    """VISIT report carries events, agents, memberships and a trace without timing"""
    outcome = run_method("visit", tiny_obs, tiny_graph, tiny_hyper, VisitOptions(max_iters=2))
    repository = ReportRepository(tmp_path, schema_version=1)
    report = repository.build_report("visit", outcome, tiny_obs, IdMap.identity(3, 2), tiny_hyper)
    path = repository.save_report(report)
    loaded = ReportRepository.load_report(path)
    assert loaded.schema_version == 1
    assert [e.state for e in loaded.events] == outcome.states.tolist()
    assert len(loaded.agents) == 3 and len(loaded.reports) == tiny_obs.num_reports
    assert np.array(loaded.agents[0].confusions).shape == (2, 2, 2)
    assert "seconds" not in json.loads(path.read_text())
    assert all("seconds" not in record for record in loaded.trace.records)


def test_majority_report_has_votes_only(tmp_path, tiny_obs, tiny_graph, tiny_hyper):
    """Majority reports carry vote counts and no posterior fields"""
    outcome = run_method("majority", tiny_obs, tiny_graph, tiny_hyper)
    repository = ReportRepository(tmp_path, schema_version=1)
    document = json.loads(repository.save_report(
        repository.build_report("majority", outcome, tiny_obs, IdMap.identity(3, 2))
    ).read_text())
    assert document["events"][1] == {"event_id": "1", "state": 1, "votes": [1, 2]}
    assert document["agents"] == [] and "trace" not in document


def test_load_report_rejects_other_documents(tmp_path):
    """A JSON file that is not a report is a format error"""
    with pytest.raises(DatasetFormatError):
        ReportRepository.load_report(write(tmp_path / "r.json", '{"method": "visit"}'))
    with pytest.raises(DatasetFormatError):
        ReportRepository.load_report(write(tmp_path / "s.json", "{not json"))


def test_sweep_rows_layout(tmp_path):
    """Data rows first, then one mean row per method and value"""
    results = [RunResult(method="majority", run=0, accuracy=0.5, correct=[True, False])]
    point = SweepPoint(0.7, results, {"majority": aggregate("majority", results)})
    rows = sweep_rows([point], ["majority"])
    assert rows == [
        ["majority", "0.7", "0", "0.5", "", "", "", ""],
        ["majority", "0.7", "mean", "0.5", "", "", "0.0", ""],
    ]
    path = write_sweep(tmp_path / "sweep.csv", [point], ["majority"], field="epsilon")
    assert path.read_text().splitlines()[0] == "method,epsilon,run,accuracy,mse,seconds,accuracy_std,mse_std"
