"""End-to-end analyses: sine-regression CKA demo, similarity timelines,
overestimation probes on the bias chain, and the z-score/Welch tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import autodiff as ad
from ..agents import Agent, AgentConfig, masked_max
from ..environments import MaxBiasChain, sine_dataset
from ..network import MLP
from ..similarity import SimilarityHeatmap, heatmap
from ..stats import Score, compare_to_baseline, z_scores
from .runner import RunResult, run_single


# --- sine regression ---------------------------------------------------------

@dataclass(frozen=True)
class SineNetSpec:
    hidden: tuple[int, ...]
    batch_size: int
    lr: float


SINE_NETS = (SineNetSpec((64, 64), 512, 1e-4), SineNetSpec((32, 32), 128, 1e-3))


def train_sine_net(spec: SineNetSpec, seed: int, x: np.ndarray, y: np.ndarray, steps: int) -> MLP:
    net = MLP([1, *spec.hidden, 1], seed=seed)
    opt = ad.Adam(net.params, lr=spec.lr)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 31337]))
    for _ in range(steps):
        idx = rng.integers(len(x), size=spec.batch_size)
        pred = net.forward(ad.Tensor(x[idx]))
        loss = ad.mean(ad.square(ad.sub(pred, ad.Tensor(y[idx]))))
        net.zero_grad()
        ad.backward(loss)
        opt.step()
    return net


def sine_mse(net: MLP, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((net(x) - y) ** 2))


@dataclass
class SineDemoResult:
    before: SimilarityHeatmap
    after: SimilarityHeatmap
    mse: tuple[float, float]
    output_cka_before: float
    output_cka_after: float
    nets: tuple[MLP, MLP] = field(repr=False)


def sine_demo(seed_a: int = 0, seed_b: int = 1, steps: int = 6000, n_train: int = 4096,
              n_probe: int = 256, specs: Sequence[SineNetSpec] = SINE_NETS,
              out_dir: str | Path | None = None) -> SineDemoResult:
    """Fit sin(x) with two differently configured MLPs and compare them with CKA."""
    x, y = sine_dataset(n_train, seed=10_007)
    probe = np.linspace(-2 * np.pi, 2 * np.pi, n_probe)[:, None]
    spec_a, spec_b = specs
    untrained = (MLP([1, *spec_a.hidden, 1], seed=seed_a), MLP([1, *spec_b.hidden, 1], seed=seed_b))
    before = heatmap(*untrained, probe)
    net_a = train_sine_net(spec_a, seed_a, x, y, steps)
    net_b = train_sine_net(spec_b, seed_b, x, y, steps)
    after = heatmap(net_a, net_b, probe)
    px, py = sine_dataset(2048, seed=20_011)
    result = SineDemoResult(
        before=before, after=after,
        mse=(sine_mse(net_a, px, py), sine_mse(net_b, px, py)),
        output_cka_before=float(before.values[-1, -1]),
        output_cka_after=float(after.values[-1, -1]),
        nets=(net_a, net_b),
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sine_heatmap_before.csv").write_text(before.to_csv())
        (out / "sine_heatmap_after.csv").write_text(after.to_csv())
        (out / "sine_summary.csv").write_text(
            "net,hidden,batch_size,lr,mse\n"
            + "".join(f"{tag},{'x'.join(map(str, s.hidden))},{s.batch_size},{s.lr!r},{m!r}\n"
                      for tag, s, m in zip("AB", specs, result.mse))
            + f"output_cka_before,{result.output_cka_before!r}\noutput_cka_after,{result.output_cka_after!r}\n")
    return result


# --- similarity over training ------------------------------------------------

@dataclass
class TimelinePoint:
    checkpoint: int
    step: int
    mean_cka: float
    eval_return: float
    heatmap: SimilarityHeatmap


def similarity_timeline(env_name: str, env_params: dict, agent_cfg: AgentConfig, seed: int,
                        total_steps: int, every_k_steps: int, probe_size: int = 256,
                        out_dir: str | Path | None = None) -> tuple[list[TimelinePoint], RunResult]:
    """Train a 2-member ensemble and take a member-0 vs member-1 CKA heatmap every
    ``every_k_steps`` steps on states drawn from the agent's replay buffer."""
    if agent_cfg.n_members != 2:
        raise ValueError("similarity_timeline needs a 2-member ensemble")
    probe_rng = np.random.default_rng(np.random.SeedSequence([seed, 4242]))
    maps: list[tuple[int, SimilarityHeatmap]] = []

    def snapshot(step: int, agent: Agent) -> None:
        probe = agent.buffer.states(probe_size, probe_rng)
        maps.append((step, heatmap(agent.members[0], agent.members[1], probe)))

    result = run_single(env_name, env_params, agent_cfg, seed, total_steps, every_k_steps, callback=snapshot)
    points = []
    for k, ((step, hm), rec) in enumerate(zip(maps, result.records), start=1):
        diag = hm.corresponding()
        # every corresponding layer dead -> no defined similarity at this checkpoint
        mean_cka = float(np.nanmean(diag)) if np.isfinite(diag).any() else float("nan")
        points.append(TimelinePoint(k, step, mean_cka, rec.return_mean, hm))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for p in points:
            (out / f"heatmap_step{p.step}.csv").write_text(p.heatmap.to_csv())
        (out / "timeline.csv").write_text(timeline_csv(points))
    return points, result


def timeline_csv(points: Sequence[TimelinePoint]) -> str:
    lines = ["checkpoint,step,mean_corresponding_cka,eval_return"]
    lines += [f"{p.checkpoint},{p.step},{p.mean_cka!r},{p.eval_return!r}" for p in points]
    return "\n".join(lines) + "\n"


# --- overestimation on the bias chain ----------------------------------------

def start_state_estimate(agent: Agent) -> float:
    """max_a of the agent's acting estimate at the chain's start state A."""
    obs = MaxBiasChain.one_hot(MaxBiasChain.STATE_A)[None, :]
    return float(masked_max(agent.q_proxy(obs), agent._mask(obs))[0])


CHAIN_AGENT = dict(hidden=(), gamma=1.0, optimizer="sgd", lr=0.05, batch_size=8,
                   buffer_capacity=10_000, exploration_steps=0, eps_start=0.1, eps_end=0.1,
                   grad_clip=-1.0, target_sync=1, eval_episodes=1)


def chain_bias_estimate(algorithm: str, n_members: int, seed: int, steps: int = 300, **overrides) -> float:
    """Train on the bias chain for ``steps`` steps and return the start-state estimate."""
    cfg = AgentConfig(algorithm=algorithm, n_members=n_members, **{**CHAIN_AGENT, **overrides})
    result = run_single("maxbias_chain", {}, cfg, seed, steps, eval_every=0)
    return start_state_estimate(result.agent)


# --- statistics tables -------------------------------------------------------

def stats_tables(groups: dict[tuple[str, ...], list[Score]], baseline: str = "baseline") -> tuple[str, str]:
    """z-score and p-value CSV tables: rows = method, columns = group key."""
    keys = sorted(groups)
    z_table: dict[str, dict] = {}
    p_table: dict[str, dict] = {}
    for key in keys:
        _, per_method = z_scores(groups[key])
        for method, z in per_method.items():
            z_table.setdefault(method, {})[key] = z
        for method, (_, test) in compare_to_baseline(groups[key], baseline).items():
            p_table.setdefault(method, {})[key] = test.p_value

    def render(table: dict[str, dict]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", *("/".join(map(str, k)) for k in keys)])
        for method in sorted(table, key=lambda m: (m != baseline, m)):
            w.writerow([method, *(f"{table[method][k]:.6f}" if k in table[method] else "" for k in keys)])
        return buf.getvalue()

    return render(z_table), render(p_table)
