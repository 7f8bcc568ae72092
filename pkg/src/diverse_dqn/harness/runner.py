"""Single runs and the (algorithm x regulariser x lambda x seed) run matrix."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import regularizers
from ..agents import Agent, AgentConfig, TrainingRecord, records_to_csv, train
from ..environments import make_env
from .config import ExperimentConfig

log = logging.getLogger(__name__)


def env_seeds(seed: int) -> tuple[int, int]:
    """Independent seeds for the training and the evaluation environment."""
    a, b = np.random.SeedSequence([seed, 7919]).generate_state(2)
    return int(a), int(b)


@dataclass
class RunResult:
    records: list[TrainingRecord]
    agent: Agent


def build_agent(env_name: str, env_params: dict, agent_cfg: AgentConfig, seed: int):
    train_seed, eval_seed = env_seeds(seed)
    env = make_env(env_name, seed=train_seed, **env_params)
    eval_env = make_env(env_name, seed=eval_seed, **env_params)
    mask_fn = env.action_mask if env_name == "maxbias_chain" else None
    agent = Agent(agent_cfg, env.obs_dim, env.n_actions, seed=seed, mask_fn=mask_fn)
    return agent, env, eval_env


def run_single(env_name: str, env_params: dict, agent_cfg: AgentConfig, seed: int,
               total_steps: int, eval_every: int, callback=None) -> RunResult:
    agent, env, eval_env = build_agent(env_name, env_params, agent_cfg, seed)
    records = train(agent, env, total_steps, eval_every, eval_env, callback=callback)
    return RunResult(records, agent)


def norm_inequality_csv(records: list[TrainingRecord]) -> str:
    """(step, l2_norm_1..N, gini) at every evaluation point."""
    n = len(records[0].norms) if records else 0
    lines = [",".join(["step", *(f"l2_norm_{k + 1}" for k in range(n)), "gini"])]
    for rec in records:
        g = regularizers.gini(rec.norms) if len(rec.norms) >= 2 else 0.0
        lines.append(",".join([str(rec.step), *(repr(v) for v in rec.norms), repr(g)]))
    return "\n".join(lines) + "\n"


def final_return(records: list[TrainingRecord], window: int) -> float:
    tail = records[-window:]
    return float(np.mean([r.return_mean for r in tail])) if tail else float("nan")


def area_under_curve(records: list[TrainingRecord]) -> float:
    return float(np.mean([r.return_mean for r in records])) if records else float("nan")


@dataclass(frozen=True)
class Cell:
    algorithm: str
    regularizer: str
    lam: float
    seed: int

    @property
    def method(self) -> str:
        if self.regularizer == "none":
            return "baseline"
        return f"{self.regularizer}@{self.lam:g}"

    @property
    def run_id(self) -> str:
        return f"{self.algorithm}-{self.regularizer}-lam{self.lam:g}-seed{self.seed}"


def matrix_cells(cfg: ExperimentConfig) -> list[Cell]:
    """Every run of the sweep. The unregularised baseline gets a single lambda = 0 cell."""
    algorithms = cfg.algorithms or [cfg.agent.algorithm]
    regs = cfg.regularizers or [cfg.agent.regularizer]
    lambdas = cfg.lambdas or [cfg.agent.lam]
    cells = []
    for algo in algorithms:
        for reg in regs:
            for lam in ([0.0] if reg == "none" else lambdas):
                for seed in cfg.seeds:
                    cells.append(Cell(algo, reg, float(lam), int(seed)))
    return cells


def cell_agent_config(cfg: ExperimentConfig, cell: Cell) -> AgentConfig:
    return dataclasses.replace(cfg.agent, algorithm=cell.algorithm, regularizer=cell.regularizer,
                               lam=cell.lam)


def _execute(cfg_text: str, cell: Cell, out_dir: str) -> dict:
    cfg = ExperimentConfig.parse(cfg_text)
    run_dir = Path(out_dir) / "runs" / cell.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    try:
        agent_cfg = cell_agent_config(cfg, cell)
        result = run_single(cfg.env, cfg.env_params, agent_cfg, cell.seed, cfg.total_steps, cfg.eval_every)
        artifacts = {
            "training_csv": run_dir / "train.csv",
            "norms_csv": run_dir / "norms.csv",
        }
        artifacts["training_csv"].write_text(records_to_csv(result.records, result.agent.n_members))
        artifacts["norms_csv"].write_text(norm_inequality_csv(result.records))
        return {
            "status": "completed",
            "final_return": final_return(result.records, cfg.final_window),
            "auc_return": area_under_curve(result.records),
            "artifacts": {k: str(v.relative_to(out_dir)) for k, v in artifacts.items()},
        }
    except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the matrix
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc()}


@dataclass
class RunManifest:
    config_text: str
    runs: dict[str, dict] = field(default_factory=dict)

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.runs.items() if v.get("status") != "completed"]

    def to_json(self) -> str:
        return json.dumps({
            "config": self.config_text,
            "config_sha256": hashlib.sha256(self.config_text.encode()).hexdigest(),
            "selection": "final-window mean of greedy returns (final_return); auc_return also reported",
            "runs": self.runs,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(d["config"], d["runs"])


def run_matrix(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None) -> RunManifest:
    """Run every cell; results are deterministic per cell whatever the schedule."""
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg_text = cfg.to_text()
    (out / "config.ini").write_text(cfg_text)
    manifest = RunManifest(cfg_text)
    cells = matrix_cells(cfg)
    for cell in cells:
        manifest.runs[cell.run_id] = {**dataclasses.asdict(cell), "method": cell.method, "status": "pending"}
    _write_manifest(out, manifest)

    def record(cell: Cell, info: dict) -> None:
        manifest.runs[cell.run_id].update(info)
        _write_manifest(out, manifest)
        log.info("%s: %s", cell.run_id, info["status"])

    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {pool.submit(_execute, cfg_text, c, str(out)): c for c in cells}
            for fut, cell in futures.items():
                try:
                    info = fut.result()
                except Exception as exc:  # noqa: BLE001 - worker crash
                    info = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
                record(cell, info)
    else:
        for cell in cells:
            record(cell, _execute(cfg_text, cell, str(out)))
    return manifest


def _write_manifest(out: Path, manifest: RunManifest) -> None:
    tmp = out / "manifest.json.tmp"
    tmp.write_text(manifest.to_json())
    tmp.replace(out / "manifest.json")
