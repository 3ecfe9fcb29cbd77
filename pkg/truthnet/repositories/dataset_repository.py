"""CSV/JSON persistence of datasets, ground truth and ID maps."""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from truthnet.errors import CliUsageError, DatasetFormatError, DomainError
from truthnet.experiments.generator import GenConfig
from truthnet.inference.mathkernels import RngStream
from truthnet.models.dataset import ObservationSet, SocialGraph
from truthnet.models.state import GroundTruth

logger = logging.getLogger(__name__)

OBSERVATIONS_FILE = "observations.csv"
NETWORK_FILE = "network.csv"
TRUTH_FILE = "truth.csv"
GEN_META_FILE = "gen_meta.json"
ID_MAP_FILE = "id_map.json"

OBSERVATION_HEADER = ["agent_id", "event_id", "label"]
NETWORK_HEADER = ["agent_a", "agent_b"]
TRUTH_HEADER = ["event_id", "state"]


class IdMap(BaseModel):
    """External ID -> dense index, for agents and events."""
    agents: Dict[str, int]
    events: Dict[str, int]

    @staticmethod
    def _ordered(ids) -> List[str]:
        unique = set(ids)
        if all(i.lstrip("-").isdigit() for i in unique):
            return sorted(unique, key=int)
        return sorted(unique)

    @classmethod
    def from_ids(cls, agent_ids, event_ids) -> "IdMap":
        return cls(
            agents={a: i for i, a in enumerate(cls._ordered(agent_ids))},
            events={e: i for i, e in enumerate(cls._ordered(event_ids))},
        )

    @classmethod
    def identity(cls, num_agents: int, num_events: int) -> "IdMap":
        return cls(
            agents={str(i): i for i in range(num_agents)},
            events={str(i): i for i in range(num_events)},
        )

    def agent_ids(self) -> List[str]:
        return sorted(self.agents, key=self.agents.__getitem__)

    def event_ids(self) -> List[str]:
        return sorted(self.events, key=self.events.__getitem__)


class LoadedDataset(NamedTuple):
    obs: ObservationSet
    graph: SocialGraph
    id_map: IdMap
    truth_states: Optional[np.ndarray]   # dense event order, -1 where unknown
    dropped_edges: int


def _rows(path: Path, header: Sequence[str]) -> Iterator[Tuple[int, Dict[str, str]]]:
    """(line number, row) pairs of a CSV with exactly ``header``."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except FileNotFoundError as exc:
        raise DatasetFormatError(str(path), None, "file not found") from exc
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(header):
            raise DatasetFormatError(str(path), 1, f"header must be {','.join(header)}, got {reader.fieldnames}")
        for row in reader:
            if None in row or any(v is None or v.strip() == "" for v in row.values()):
                raise DatasetFormatError(str(path), reader.line_num, f"expected {len(header)} non-empty fields")
            yield reader.line_num, {k.strip(): v.strip() for k, v in row.items()}


def _label(path: Path, line: int, raw: str, num_states: Optional[int]) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise DatasetFormatError(str(path), line, f"label {raw!r} is not an integer") from exc
    if value < 0 or (num_states is not None and value >= num_states):
        bound = f"0..{num_states - 1}" if num_states is not None else "a non-negative integer"
        raise DatasetFormatError(str(path), line, f"label {value} must be {bound}")
    return value


def read_observations(path: Path, num_states: Optional[int] = None) -> List[Tuple[str, str, int]]:
    reports = []
    seen = set()
    for line, row in _rows(path, OBSERVATION_HEADER):
        key = (row["agent_id"], row["event_id"])
        if key in seen:
            raise DatasetFormatError(str(path), line, f"duplicate report of agent {key[0]} on event {key[1]}")
        seen.add(key)
        reports.append((row["agent_id"], row["event_id"], _label(path, line, row["label"], num_states)))
    if not reports:
        raise DatasetFormatError(str(path), None, "no reports")
    return reports


def read_network(path: Path) -> List[Tuple[str, str]]:
    pairs = []
    for line, row in _rows(path, NETWORK_HEADER):
        if row["agent_a"] == row["agent_b"]:
            raise DatasetFormatError(str(path), line, f"self-loop on agent {row['agent_a']}")
        pairs.append((row["agent_a"], row["agent_b"]))
    return pairs


def read_truth(path: Path) -> Dict[str, int]:
    truth = {}
    for line, row in _rows(path, TRUTH_HEADER):
        if row["event_id"] in truth:
            raise DatasetFormatError(str(path), line, f"duplicate event {row['event_id']}")
        truth[row["event_id"]] = _label(path, line, row["state"], None)
    return truth


def flip_observations(reports: List[Tuple[int, int, int]], num_agents: int, truth_states: np.ndarray,
                      fraction: float, rng: RngStream) -> List[Tuple[int, int, int]]:
    """Adversarial augmentation: per event, round(fraction * N) agents that did not
    report it are made to report the opposite of the true binary state."""
    if not 0 <= fraction <= 1:
        raise DomainError(f"flip fraction must lie in [0, 1], got {fraction}")
    per_event = int(math.floor(fraction * num_agents + 0.5))
    if per_event == 0:
        return list(reports)
    reporters: Dict[int, set] = {}
    for agent, event, _ in reports:
        reporters.setdefault(event, set()).add(agent)
    added = []
    for event, state in enumerate(truth_states):
        if state < 0:
            continue
        candidates = np.array([a for a in range(num_agents) if a not in reporters.get(event, set())], dtype=np.int64)
        take = min(per_event, candidates.size)
        if take < per_event:
            logger.warning(f"Event {event}: only {candidates.size} non-reporters available to flip")
        for agent in np.sort(rng.generator.choice(candidates, size=take, replace=False)):
            added.append((int(agent), event, 1 - int(state)))
    logger.info(f"Flip augmentation added {len(added)} adversarial reports")
    return sorted(list(reports) + added)


def load_real_dataset(observations_path: Path, network_path: Path, truth_path: Optional[Path] = None,
                      num_states: Optional[int] = None, flip_fraction: float = 0.0,
                      flip_seed: int = 0) -> LoadedDataset:
    """Read a file dataset into dense indices.

    The agent universe is the set of agents that report at least once; edges
    touching any other agent are dropped with a warning.
    """
    raw_reports = read_observations(observations_path, num_states)
    raw_pairs = read_network(network_path)
    raw_truth = read_truth(truth_path) if truth_path is not None else None

    id_map = IdMap.from_ids([a for a, _, _ in raw_reports], [e for _, e, _ in raw_reports])
    r = num_states if num_states is not None else max(2, max(label for _, _, label in raw_reports) + 1)

    truth_states = None
    if raw_truth is not None:
        truth_states = np.full(len(id_map.events), -1, dtype=np.int64)
        for event_id, state in raw_truth.items():
            if event_id in id_map.events:
                truth_states[id_map.events[event_id]] = state
        if np.any(truth_states >= r):
            raise DatasetFormatError(str(truth_path), None, f"truth states must be below {r}")

    reports = sorted((id_map.agents[a], id_map.events[e], label) for a, e, label in raw_reports)
    if flip_fraction > 0:
        if r != 2:
            raise CliUsageError(f"--flip-fraction needs binary states, got {r}")
        if truth_states is None:
            raise CliUsageError("--flip-fraction needs --truth")
        reports = flip_observations(reports, len(id_map.agents), truth_states, flip_fraction, RngStream(flip_seed))

    kept = [(id_map.agents[a], id_map.agents[b]) for a, b in raw_pairs if a in id_map.agents and b in id_map.agents]
    dropped = len(raw_pairs) - len(kept)
    if dropped:
        logger.warning(f"Dropped {dropped} edge(s) with an endpoint outside the reporting agents")

    obs = ObservationSet.from_reports(len(id_map.agents), len(id_map.events), r, reports)
    graph = SocialGraph.from_pairs(len(id_map.agents), kept)
    logger.info(
        f"Loaded {obs.num_reports} reports from {obs.num_agents} agents on {obs.num_events} events, "
        f"{graph.num_edges} edges"
    )
    return LoadedDataset(obs, graph, id_map, truth_states, dropped)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise DatasetFormatError(str(path), None, "file not found") from exc
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(str(path), exc.lineno, f"invalid JSON: {exc.msg}") from exc


def write_dataset(out_dir: Path, obs: ObservationSet, graph: SocialGraph,
                  truth: Optional[GroundTruth] = None, config: Optional[GenConfig] = None) -> Dict[str, Path]:
    """Write observations/network (and truth/gen_meta when given) under ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"observations": out_dir / OBSERVATIONS_FILE, "network": out_dir / NETWORK_FILE}
    _write_csv(paths["observations"], OBSERVATION_HEADER, zip(obs.agents.tolist(), obs.events.tolist(), obs.labels.tolist()))
    _write_csv(paths["network"], NETWORK_HEADER, graph.edges.tolist())
    if truth is not None:
        paths["truth"] = out_dir / TRUTH_FILE
        _write_csv(paths["truth"], TRUTH_HEADER, enumerate(truth.theta.tolist()))
        paths["gen_meta"] = out_dir / GEN_META_FILE
        write_json(paths["gen_meta"], gen_meta(truth, config))
    return paths


def gen_meta(truth: GroundTruth, config: Optional[GenConfig]) -> dict:
    return {
        "config": config.model_dump() if config is not None else None,
        "theta": truth.theta.tolist(),
        "s": truth.s.tolist(),
        "pi": truth.pi.tolist(),
        "community_omega": truth.community_omega.tolist(),
        "agent_omega": truth.agent_omega.tolist(),
    }


def read_gen_meta(path: Path) -> GroundTruth:
    meta = read_json(path)
    try:
        return GroundTruth(
            theta=np.asarray(meta["theta"], dtype=np.int64),
            s=np.asarray(meta["s"], dtype=np.int64),
            pi=np.asarray(meta["pi"], dtype=float),
            community_omega=np.asarray(meta["community_omega"], dtype=float),
            agent_omega=np.asarray(meta["agent_omega"], dtype=float),
        )
    except KeyError as exc:
        raise DatasetFormatError(str(path), None, f"missing field {exc}") from exc


def write_id_map(path: Path, id_map: IdMap) -> None:
    write_json(path, id_map.model_dump())
