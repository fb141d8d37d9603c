"""Experiment orchestration: the outer training loop and all baselines.

One adversarial loop serves three methods: the full algorithm, the plain
adversarial baseline (alpha forced to 0, identical code path and RNG
consumption, so the reduction is bit-exact), and the GAN-imitation baseline
(no classifiers, no source rollouts). Source-domain reward transfer and
direct expert transfer run separately. Every run writes progress.csv, a
resolved config copy, checkpoints, and final-policy evaluation trajectories.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
from pathlib import Path

import numpy as np

from .buffers import DemoSet, ReplayBuffer, load_demos, save_demos
from .config import ExperimentConfig, save_config
from .dd import ClassifierPair, classifier_loss, dd_for_transitions
from .envs import make_linkchain_pair, make_pointmaze_pair, rollout, write_trajectory_csv
from .irl import Discriminator, GailDiscriminator, disc_loss, gail_disc_loss, gail_policy_reward, policy_reward, reward_heatmap
from .nets import Adam
from .policy import GaussianPolicy, PolicyOptimizer, ValueNet, evaluate

logger = logging.getLogger(__name__)

PROGRESS_COLUMNS = [
    "iteration", "target_steps", "source_steps", "disc_loss", "classifier_loss",
    "mean_dd", "policy_entropy", "gt_return", "success_rate",
    "loss_sas", "loss_sa", "std_dd", "demo_acc", "policy_acc",
]


class ProgressWriter:
    """CSV logger with a fixed column set and deterministic float formatting."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(PROGRESS_COLUMNS)

    def write(self, **fields) -> None:
        row = []
        for col in PROGRESS_COLUMNS:
            val = fields.get(col)
            if val is None:
                row.append("")
            elif isinstance(val, (int, np.integer)):
                row.append(str(int(val)))
            else:
                row.append(format(float(val), ".10g"))
        self._writer.writerow(row)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _streams(seed: int) -> dict:
    """Named deterministic RNG streams and integer seeds derived from one seed."""
    ints = np.random.SeedSequence(seed).generate_state(24)
    names = [
        "env_source", "env_target", "env_eval_source", "env_eval_target",
        "policy_init", "value_init", "disc_init", "classifier_init",
        "actions", "classifier", "disc", "policy_update", "misc",
        "policy2_init", "value2_init",
    ]
    return {
        "seeds": {name: int(ints[i]) for i, name in enumerate(names)},
        "rngs": {
            name: np.random.default_rng(int(ints[16 + j]))
            for j, name in enumerate(["actions", "classifier", "disc", "policy_update", "misc"])
        },
    }


def build_envs(cfg: ExperimentConfig, seeds: dict):
    """(source, target, source_eval, target_eval) instances for the config."""
    if cfg.task == "pointmaze":
        pm = cfg.pointmaze
        src, tgt = make_pointmaze_pair(pm.base_config(), pm.source_wall_length,
                                       pm.target_wall_length, seeds["env_source"], seeds["env_target"])
        src_eval, tgt_eval = make_pointmaze_pair(pm.base_config(), pm.source_wall_length,
                                                 pm.target_wall_length, seeds["env_eval_source"],
                                                 seeds["env_eval_target"])
    else:
        lc = cfg.linkchain
        src, tgt = make_linkchain_pair(lc.base_config(), lc.target_disabled_mask,
                                       seeds["env_source"], seeds["env_target"])
        src_eval, tgt_eval = make_linkchain_pair(lc.base_config(), lc.target_disabled_mask,
                                                 seeds["env_eval_source"], seeds["env_eval_target"])
    return src, tgt, src_eval, tgt_eval


def collect_batch(policy, env, batch_steps: int, rng) -> list:
    """Roll full episodes until at least batch_steps transitions are gathered."""
    trajs, n = [], 0
    while n < batch_steps:
        traj = rollout(policy, env, env.spec.horizon, rng)
        trajs.append(traj)
        n += len(traj)
    return trajs


def _gt_reward_fn(env):
    def reward_fn(s, a, sn):
        return np.array([env.ground_truth_reward(x) for x in sn])
    return reward_fn


def _save_summary(out: Path, **fields) -> None:
    with open(out / "summary.json", "w") as fh:
        json.dump(fields, fh, indent=2, sort_keys=True)


def _final_artifacts(cfg, out: Path, policy, src_eval, tgt_eval) -> tuple[float, float]:
    """Dump final-policy evaluation trajectories in both domains."""
    tgt_trajs = [rollout(policy, tgt_eval, tgt_eval.spec.horizon, deterministic=True)
                 for _ in range(cfg.final_eval_trajectories)]
    src_trajs = [rollout(policy, src_eval, src_eval.spec.horizon, deterministic=True)
                 for _ in range(cfg.final_eval_trajectories)]
    write_trajectory_csv(out / "final_eval_target.csv", tgt_trajs)
    write_trajectory_csv(out / "final_eval_source.csv", src_trajs)
    ret, succ = evaluate(policy, tgt_eval, cfg.eval_episodes)
    return ret, succ


# ---------------------------------------------------------------------------
# Expert training and demo collection
# ---------------------------------------------------------------------------

def train_expert(cfg: ExperimentConfig, out_dir=None) -> Path:
    """Train the source-domain expert against ground-truth reward."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    streams = _streams(cfg.seed)
    seeds, rngs = streams["seeds"], streams["rngs"]
    src, _, src_eval, _ = build_envs(cfg, seeds)
    policy = GaussianPolicy(src.spec, hidden=tuple(cfg.policy.hidden),
                            seed=seeds["policy_init"], init_log_std=cfg.policy.init_log_std)
    value = ValueNet(src.spec, hidden=tuple(cfg.policy.hidden), seed=seeds["value_init"])
    opt_cfg = cfg.policy.opt_config()
    opt_cfg.entropy_coef = cfg.expert.entropy_coef
    popt = PolicyOptimizer(policy, value, opt_cfg)
    reward_fn = _gt_reward_fn(src)

    path = out / "expert_policy.bin"
    best_score = -np.inf
    curve_path = out / "expert_curve.csv"
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "gt_return", "success_rate", "entropy"])
        for t in range(1, cfg.expert.steps + 1):
            trajs = collect_batch(policy, src, cfg.expert.batch_steps, rngs["actions"])
            stats = popt.update(trajs, reward_fn, rngs["policy_update"])
            if t % cfg.eval_every == 0 or t == cfg.expert.steps:
                ret, succ = evaluate(policy, src_eval, cfg.eval_episodes)
                writer.writerow([t, format(ret, ".10g"), format(succ, ".10g"),
                                 format(stats["entropy"], ".10g")])
                logger.info("expert iter %d: return %.3f success %.2f", t, ret, succ)
                score = succ + 0.01 * ret  # success first, return breaks ties
                if score >= best_score:
                    best_score = score
                    policy.save(path)
    policy.save(out / "expert_policy_final.bin")
    return path


def collect_demos(cfg: ExperimentConfig, expert_path, out_path, n_episodes=None) -> DemoSet:
    """Roll the trained expert in the source domain and persist demonstrations."""
    n_episodes = n_episodes or cfg.expert.n_demo_episodes
    streams = _streams(cfg.seed)
    seeds, rngs = streams["seeds"], streams["rngs"]
    src, _, _, _ = build_envs(cfg, seeds)
    policy = GaussianPolicy(src.spec, hidden=tuple(cfg.policy.hidden),
                            seed=seeds["policy_init"], init_log_std=cfg.policy.init_log_std)
    policy.load(expert_path)
    trajs, attempts = [], 0
    keep_success_only = cfg.expert.demo_success_only and cfg.task == "pointmaze"
    while len(trajs) < n_episodes and attempts < 20 * n_episodes:
        attempts += 1
        traj = rollout(policy, src, src.spec.horizon, rngs["misc"])
        if keep_success_only and not traj.transitions[-1].done:
            continue
        trajs.append(traj)
    if len(trajs) < n_episodes:
        raise RuntimeError(
            f"collected only {len(trajs)}/{n_episodes} demo episodes; expert too weak"
        )
    demos = DemoSet(trajectories=trajs, env_config_hash=cfg.env_config_hash(),
                    expert_seed=cfg.seed, horizon=src.spec.horizon)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_demos(demos, out_path)
    logger.info("saved %d demo episodes (%d transitions) to %s", len(trajs), len(demos), out_path)
    return demos


# ---------------------------------------------------------------------------
# Main adversarial loop (odirl / airl / gail)
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> Path:
    cfg.validate()
    if cfg.method in ("odirl", "airl", "gail"):
        return _run_adversarial(cfg)
    if cfg.method == "airl_source_transfer":
        return _run_airl_source_transfer(cfg)
    if cfg.method == "expert_transfer":
        return _run_expert_transfer(cfg)
    raise ValueError(f"unknown method {cfg.method}")


def _load_demoset(cfg, spec) -> DemoSet:
    if not cfg.demos_path:
        raise ValueError("demos_path is required for this method")
    return load_demos(cfg.demos_path, expected_spec=spec,
                      expected_config_hash=cfg.env_config_hash())


def _run_adversarial(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    streams = _streams(cfg.seed)
    seeds, rngs = streams["seeds"], streams["rngs"]
    src, tgt, src_eval, tgt_eval = build_envs(cfg, seeds)
    demos = _load_demoset(cfg, src.spec)

    sd, ad = tgt.spec.state_dim, tgt.spec.action_dim
    policy = GaussianPolicy(tgt.spec, hidden=tuple(cfg.policy.hidden),
                            seed=seeds["policy_init"], init_log_std=cfg.policy.init_log_std)
    value = ValueNet(tgt.spec, hidden=tuple(cfg.policy.hidden), seed=seeds["value_init"])
    popt = PolicyOptimizer(policy, value, cfg.policy.opt_config())

    use_dd_pipeline = cfg.method in ("odirl", "airl")
    alpha_eff = cfg.alpha if cfg.method == "odirl" else 0.0
    if use_dd_pipeline:
        disc = Discriminator(sd, ad, gamma=cfg.policy.gamma, state_only_g=cfg.disc.state_only_g,
                             hidden=tuple(cfg.disc.hidden), seed=seeds["disc_init"])
        disc_opt = Adam(disc.blocks(), lr=cfg.disc.lr, weight_decay=cfg.disc.weight_decay)
        pair = ClassifierPair(sd, ad, hidden=tuple(cfg.dd.hidden), seed=seeds["classifier_init"])
        cls_opt = Adam(pair.blocks(), lr=cfg.dd.lr, weight_decay=cfg.dd.weight_decay)
        dd_cfg = cfg.dd.dd_config(alpha_eff)
    else:
        gail = GailDiscriminator(sd, ad, hidden=tuple(cfg.disc.hidden), seed=seeds["disc_init"])
        disc_opt = Adam(gail.blocks(), lr=cfg.disc.lr, weight_decay=cfg.disc.weight_decay)

    b_src = ReplayBuffer(cfg.buffers.source_capacity, src.domain_tag)
    b_tgt = ReplayBuffer(cfg.buffers.target_capacity, tgt.domain_tag)
    writer = ProgressWriter(out / "progress.csv")
    target_steps = source_steps = source_episodes = 0

    def reward_fn(s, a, sn):
        if use_dd_pipeline:
            logp = policy.log_prob(s, a)
            return policy_reward(disc, s, a, sn, logp, flip_sign=cfg.flip_reward_sign)
        return gail_policy_reward(gail, s, a)

    for t in range(1, cfg.steps + 1):
        trajs = collect_batch(policy, tgt, cfg.batch_steps, rngs["actions"])
        for traj in trajs:
            b_tgt.push(traj)
            target_steps += len(traj)
        if use_dd_pipeline and t % cfg.r == 0:
            straj = rollout(policy, src, src.spec.horizon, rngs["actions"])
            b_src.push(straj)
            source_steps += len(straj)
            source_episodes += 1

        cls_total = l_sas = l_sa = None
        mean_dd = std_dd = None
        if use_dd_pipeline:
            if len(b_src) > 0:
                for _ in range(cfg.dd.steps_per_iter):
                    sb = b_src.sample(cfg.dd.batch_size, rngs["classifier"])
                    tb = b_tgt.sample(cfg.dd.batch_size, rngs["classifier"])
                    cls_total, l_sas, l_sa = classifier_loss(
                        pair, sb, tb, noise_std=cfg.dd.input_noise_std, rng=rngs["classifier"])
                    cls_opt.step()
            dd_demo_all = dd_for_transitions(pair, demos.transitions(), dd_cfg)
            mean_dd, std_dd = float(dd_demo_all.mean()), float(dd_demo_all.std())

        # Discriminator phase: one epoch over a buffer-sampled policy batch of
        # the iteration's size, demo batch of equal size.
        n_batch = sum(len(traj) for traj in trajs)
        pol_batch = b_tgt.sample(n_batch, rngs["disc"])
        demo_batch = demos.sample(n_batch, rngs["disc"])
        d_losses, demo_accs, pol_accs = [], [], []
        for _ in range(cfg.disc.epochs):
            perm = rngs["disc"].permutation(n_batch)
            for start in range(0, n_batch, cfg.disc.minibatch_size):
                idx = perm[start : start + cfg.disc.minibatch_size]
                d_mb = [demo_batch[i] for i in idx]
                p_mb = [pol_batch[i] for i in idx]
                if use_dd_pipeline:
                    d_s = np.array([x.s for x in d_mb])
                    d_a = np.array([x.a for x in d_mb])
                    p_s = np.array([x.s for x in p_mb])
                    p_a = np.array([x.a for x in p_mb])
                    demo_logp = policy.log_prob(d_s, d_a)
                    pol_logp = policy.log_prob(p_s, p_a)
                    demo_dd = dd_for_transitions(pair, d_mb, dd_cfg)
                    _, stats = disc_loss(disc, d_mb, p_mb, demo_logp, pol_logp, demo_dd)
                else:
                    _, stats = gail_disc_loss(gail, d_mb, p_mb)
                disc_opt.step()
                d_losses.append(stats["loss"])
                demo_accs.append(stats["demo_acc"])
                pol_accs.append(stats["policy_acc"])

        pstats = popt.update(trajs, reward_fn, rngs["policy_update"])

        gt_return = success = None
        if t % cfg.eval_every == 0 or t == cfg.steps:
            gt_return, success = evaluate(policy, tgt_eval, cfg.eval_episodes)
            logger.info("%s iter %d: return %.3f success %.2f disc %.3f",
                        cfg.method, t, gt_return, success, float(np.mean(d_losses)))
        writer.write(
            iteration=t, target_steps=target_steps, source_steps=source_steps,
            disc_loss=float(np.mean(d_losses)), classifier_loss=cls_total,
            mean_dd=mean_dd, policy_entropy=pstats["entropy"],
            gt_return=gt_return, success_rate=success,
            loss_sas=l_sas, loss_sa=l_sa, std_dd=std_dd,
            demo_acc=float(np.mean(demo_accs)), policy_acc=float(np.mean(pol_accs)),
        )
        if cfg.checkpoint_every and t % cfg.checkpoint_every == 0:
            ckpt = out / "checkpoints"
            ckpt.mkdir(exist_ok=True)
            policy.save(ckpt / f"policy_{t:06d}.bin")

    writer.close()
    ckpt = out / "checkpoints"
    ckpt.mkdir(exist_ok=True)
    policy.save(ckpt / "policy_final.bin")
    value.save(ckpt / "value_final.bin")
    if use_dd_pipeline:
        disc.save(ckpt / "disc_final.bin")
        pair.save(ckpt / "classifiers_final.bin")
        if cfg.task == "pointmaze" and cfg.disc.state_only_g:
            reward_heatmap(disc, cfg.heatmap_grid, path=out / "heatmap.csv")
    else:
        gail.save(ckpt / "gail_final.bin")
    final_return, final_success = _final_artifacts(cfg, out, policy, src_eval, tgt_eval)
    _save_summary(
        out, method=cfg.method, task=cfg.task, seed=cfg.seed, alpha=alpha_eff,
        final_gt_return=final_return, final_success_rate=final_success,
        target_steps=target_steps, source_steps=source_steps, source_episodes=source_episodes,
    )
    return out


# ---------------------------------------------------------------------------
# Baselines with their own loops
# ---------------------------------------------------------------------------

def _run_expert_transfer(cfg: ExperimentConfig) -> Path:
    """Evaluate the source expert directly in the target domain; no training."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    if not cfg.expert_path:
        raise ValueError("expert_path is required for expert_transfer")
    streams = _streams(cfg.seed)
    seeds = streams["seeds"]
    src, tgt, src_eval, tgt_eval = build_envs(cfg, seeds)
    policy = GaussianPolicy(tgt.spec, hidden=tuple(cfg.policy.hidden),
                            seed=seeds["policy_init"], init_log_std=cfg.policy.init_log_std)
    policy.load(cfg.expert_path)
    writer = ProgressWriter(out / "progress.csv")
    gt_return, success = evaluate(policy, tgt_eval, cfg.eval_episodes)
    writer.write(iteration=0, target_steps=0, source_steps=0,
                 policy_entropy=policy.entropy(), gt_return=gt_return, success_rate=success)
    writer.close()
    final_return, final_success = _final_artifacts(cfg, out, policy, src_eval, tgt_eval)
    _save_summary(out, method=cfg.method, task=cfg.task, seed=cfg.seed, alpha=None,
                  final_gt_return=final_return, final_success_rate=final_success,
                  target_steps=0, source_steps=0, source_episodes=0)
    return out


def _run_airl_source_transfer(cfg: ExperimentConfig) -> Path:
    """Adversarial IRL in the source domain on the same source budget, then
    the transferable reward term g trains a fresh target policy."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    streams = _streams(cfg.seed)
    seeds, rngs = streams["seeds"], streams["rngs"]
    src, tgt, src_eval, tgt_eval = build_envs(cfg, seeds)
    demos = _load_demoset(cfg, src.spec)
    sd, ad = src.spec.state_dim, src.spec.action_dim

    # Phase 1: source-domain adversarial IRL, budget-matched to the main
    # method's source episode count, with an r-fold gradient-step multiplier.
    policy = GaussianPolicy(src.spec, hidden=tuple(cfg.policy.hidden),
                            seed=seeds["policy_init"], init_log_std=cfg.policy.init_log_std)
    value = ValueNet(src.spec, hidden=tuple(cfg.policy.hidden), seed=seeds["value_init"])
    src_opt_cfg = cfg.policy.opt_config()
    src_opt_cfg.epochs = cfg.policy.epochs * cfg.r
    popt = PolicyOptimizer(policy, value, src_opt_cfg)
    disc = Discriminator(sd, ad, gamma=cfg.policy.gamma, state_only_g=cfg.disc.state_only_g,
                         hidden=tuple(cfg.disc.hidden), seed=seeds["disc_init"])
    disc_opt = Adam(disc.blocks(), lr=cfg.disc.lr, weight_decay=cfg.disc.weight_decay)

    def src_reward_fn(s, a, sn):
        logp = policy.log_prob(s, a)
        return policy_reward(disc, s, a, sn, logp, flip_sign=cfg.flip_reward_sign)

    n_src_iters = cfg.steps // cfg.r
    source_steps = source_episodes = 0
    with open(out / "source_phase.csv", "w", newline="") as fh:
        phase_writer = csv.writer(fh)
        phase_writer.writerow(["iteration", "source_steps", "disc_loss"])
        for t in range(1, n_src_iters + 1):
            traj = rollout(policy, src, src.spec.horizon, rngs["actions"])
            source_steps += len(traj)
            source_episodes += 1
            n_batch = len(traj)
            demo_batch = demos.sample(n_batch, rngs["disc"])
            pol_batch = traj.transitions
            d_losses = []
            for _ in range(cfg.disc.epochs * cfg.r):
                perm = rngs["disc"].permutation(n_batch)
                for start in range(0, n_batch, cfg.disc.minibatch_size):
                    idx = perm[start : start + cfg.disc.minibatch_size]
                    d_mb = [demo_batch[i] for i in idx]
                    p_mb = [pol_batch[i] for i in idx]
                    demo_logp = policy.log_prob(np.array([x.s for x in d_mb]),
                                                np.array([x.a for x in d_mb]))
                    pol_logp = policy.log_prob(np.array([x.s for x in p_mb]),
                                               np.array([x.a for x in p_mb]))
                    _, stats = disc_loss(disc, d_mb, p_mb, demo_logp, pol_logp)
                    disc_opt.step()
                    d_losses.append(stats["loss"])
            popt.update([traj], src_reward_fn, rngs["policy_update"])
            phase_writer.writerow([t, source_steps, format(float(np.mean(d_losses)), ".10g")])

    # Phase 2: transfer g as the reward for a fresh target-domain policy.
    policy2 = GaussianPolicy(tgt.spec, hidden=tuple(cfg.policy.hidden),
                             seed=seeds["policy2_init"], init_log_std=cfg.policy.init_log_std)
    value2 = ValueNet(tgt.spec, hidden=tuple(cfg.policy.hidden), seed=seeds["value2_init"])
    popt2 = PolicyOptimizer(policy2, value2, cfg.policy.opt_config())

    def transfer_reward_fn(s, a, sn):
        return disc.g_value(s, a)

    writer = ProgressWriter(out / "progress.csv")
    target_steps = 0
    for t in range(1, cfg.steps + 1):
        trajs = collect_batch(policy2, tgt, cfg.batch_steps, rngs["actions"])
        target_steps += sum(len(traj) for traj in trajs)
        pstats = popt2.update(trajs, transfer_reward_fn, rngs["policy_update"])
        gt_return = success = None
        if t % cfg.eval_every == 0 or t == cfg.steps:
            gt_return, success = evaluate(policy2, tgt_eval, cfg.eval_episodes)
            logger.info("airl_source_transfer iter %d: return %.3f success %.2f",
                        t, gt_return, success)
        writer.write(iteration=t, target_steps=target_steps, source_steps=source_steps,
                     policy_entropy=pstats["entropy"], gt_return=gt_return, success_rate=success)
    writer.close()
    ckpt = out / "checkpoints"
    ckpt.mkdir(exist_ok=True)
    policy2.save(ckpt / "policy_final.bin")
    disc.save(ckpt / "disc_final.bin")
    if cfg.task == "pointmaze" and cfg.disc.state_only_g:
        reward_heatmap(disc, cfg.heatmap_grid, path=out / "heatmap.csv")
    final_return, final_success = _final_artifacts(cfg, out, policy2, src_eval, tgt_eval)
    _save_summary(out, method=cfg.method, task=cfg.task, seed=cfg.seed, alpha=None,
                  final_gt_return=final_return, final_success_rate=final_success,
                  target_steps=target_steps, source_steps=source_steps,
                  source_episodes=source_episodes)
    return out


# ---------------------------------------------------------------------------
# Ablation sweep and aggregation
# ---------------------------------------------------------------------------

def run_ablation(cfg: ExperimentConfig, alphas) -> list[Path]:
    """One full run per alpha with shared demos and seed."""
    if cfg.method != "odirl":
        raise ValueError("ablation sweeps are defined for the odirl method")
    alphas = list(alphas)
    if not alphas:
        raise ValueError("alpha list must be nonempty")
    base_out = Path(cfg.out_dir)
    dirs = []
    for alpha in alphas:
        sub = copy.deepcopy(cfg)
        sub.alpha = float(alpha)
        sub.out_dir = str(base_out / f"alpha_{alpha:g}")
        dirs.append(run_experiment(sub))
    return dirs


def aggregate(run_dirs, out_path) -> Path:
    """Per-method per-evaluation-step mean/min/max ground-truth return."""
    import yaml

    groups: dict[str, dict] = {}
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        with open(run_dir / "config.yaml") as fh:
            conf = yaml.safe_load(fh)
        method = conf["method"]
        iters, returns = [], []
        with open(run_dir / "progress.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                if row["gt_return"] != "":
                    iters.append(int(row["iteration"]))
                    returns.append(float(row["gt_return"]))
        if not iters:
            raise ValueError(f"{run_dir}: no evaluation rows in progress.csv")
        group = groups.setdefault(method, {"grid": iters, "runs": []})
        if group["grid"] != iters:
            raise ValueError(f"{run_dir}: evaluation step grid does not match other "
                             f"{method} runs")
        group["runs"].append(returns)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "iteration", "mean_return", "min_return", "max_return", "n_seeds"])
        for method in sorted(groups):
            grid = groups[method]["grid"]
            data = np.array(groups[method]["runs"])
            for k, it in enumerate(grid):
                col = data[:, k]
                writer.writerow([
                    method, it, format(col.mean(), ".10g"),
                    format(col.min(), ".10g"), format(col.max(), ".10g"), data.shape[0],
                ])
    return out_path
