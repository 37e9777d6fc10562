"""Dataset generation, training loops, Monte-Carlo BER evaluation against
the exhaustive-search reference, and the three channel over-training
experiments (mismatch, sequential continual learning, mixed training).
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .channel import (
    ModulationScheme,
    RicianModel,
    ebn0_to_noise_var,
    modulate,
    sample_channels,
    transmit_blocks,
)
from .config import RunConfig, echo_config
from .detectors import (
    candidate_set,
    count_bit_errors,
    feature_length,
    features_from_gram,
    gram,
    matched_filter,
    mlsd_bits_batch,
)
from .network import (
    NetworkSpec,
    backward,
    bce_loss,
    detector_spec,
    forward,
    init_network,
    predict_bits,
)
from .optimizers import (
    OptimizerConfig,
    OptimizerState,
    adam_step,
    init_state,
    lr_schedule,
    osgd_step,
    sgd_step,
)
from .checkpoint import save_model

log = logging.getLogger(__name__)

EVAL_CHUNK_BLOCKS = 4096

# Spawn-key namespaces hanging off the run seed; fixed so that every stream
# is reproducible independently of execution order.
_NS_INIT = 0
_NS_TASK = 1
_NS_EVAL = 2


@dataclass(frozen=True)
class TrainingTask:
    """One training stage: a channel (fixed K or a uniform K mixture drawn
    per sample), the training SNR, and its iteration budget."""

    channel_k: float | tuple[float, float]
    train_ebn0_db: float = 8.0
    batch_size: int = 500
    iteration_budget: int = 20000
    seed: int | None = None  # explicit stream seed; None derives from the run seed

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.iteration_budget < 1:
            raise ValueError("iteration_budget must be at least 1")
        if isinstance(self.channel_k, tuple):
            lo, hi = self.channel_k
            if lo < 0 or hi < lo:
                raise ValueError("mixture range must satisfy 0 <= lo <= hi")
        elif self.channel_k < 0:
            raise ValueError("channel K must be nonnegative")


@dataclass(frozen=True)
class EvalGrid:
    k_list: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 5.0)
    ebn0_list_db: tuple[float, ...] = (-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    min_bit_errors: int = 200
    max_blocks: int = 2_000_000

    def __post_init__(self):
        if not self.k_list or not self.ebn0_list_db:
            raise ValueError("evaluation grid must be non-empty")
        if self.min_bit_errors < 1:
            raise ValueError("min_bit_errors must be at least 1")


@dataclass(frozen=True)
class BerPoint:
    detector: str
    k_factor: float
    ebn0_db: float
    bits_sent: int
    bit_errors: int
    seed: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent


def generate_batch(task: TrainingTask, n_rx: int, n_tx: int, scheme: ModulationScheme, rng):
    """One supervised mini-batch: feature matrix (B, 2M(M+1)) and target
    bit matrix (B, M*bits_per_symbol) drawn at the task's training SNR."""
    b = task.batch_size
    if isinstance(task.channel_k, tuple):
        model = RicianModel(n_rx, n_tx, 0.0)
        ks = rng.uniform(task.channel_k[0], task.channel_k[1], size=b)
        h = sample_channels(model, b, rng, k_factors=ks)
    else:
        model = RicianModel(n_rx, n_tx, float(task.channel_k))
        h = sample_channels(model, b, rng)
    n_bits = n_tx * scheme.bits_per_symbol
    bits = rng.integers(0, 2, size=(b, n_bits), dtype=np.int8)
    x = modulate(bits, scheme)
    noise_var = ebn0_to_noise_var(task.train_ebn0_db, scheme, model)
    y = transmit_blocks(x, h, noise_var, rng)
    feats = features_from_gram(gram(h), matched_filter(h, y))
    return feats, bits.astype(np.float64)


def _mean_layer_inputs(trace):
    return [x.mean(axis=0) if x.ndim == 2 else x for x in trace.layer_inputs]


@dataclass
class TrainResult:
    state: OptimizerState | None
    loss_log: list[tuple[int, int, float, float]]  # step, task_index, loss, lr


def train(
    params,
    spec: NetworkSpec,
    optimizer: str,
    schedule,
    *,
    n_rx: int,
    n_tx: int,
    scheme: ModulationScheme,
    cfg: OptimizerConfig | None = None,
    seed: int = 0,
    state: OptimizerState | None = None,
) -> TrainResult:
    """Run the continual-learning loop over a task schedule, in place.

    Optimizer state (projection matrices, moments, and the step counter)
    persists across tasks; that persistence is what lets the projection
    optimizer remember earlier channels. Raises on non-finite loss.
    """
    if not schedule:
        raise ValueError("schedule must contain at least one task")
    cfg = cfg or OptimizerConfig()
    if optimizer not in ("osgd", "adam", "sgd"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if spec.layer_dims[0] != feature_length(n_tx):
        raise ValueError("network input dim does not match feature length")
    if spec.layer_dims[-1] != n_tx * scheme.bits_per_symbol:
        raise ValueError("network output dim does not match bit count")
    if optimizer != "sgd" and state is None:
        state = init_state(params, cfg, optimizer)
    loss_log: list[tuple[int, int, float, float]] = []
    step = state.t if state is not None else 0
    for task_index, task in enumerate(schedule):
        if task.seed is not None:
            ss = np.random.SeedSequence(task.seed)
        else:
            ss = np.random.SeedSequence(entropy=seed, spawn_key=(_NS_TASK, task_index))
        rng = np.random.default_rng(ss)
        for _ in range(task.iteration_budget):
            feats, targets = generate_batch(task, n_rx, n_tx, scheme, rng)
            trace = forward(params, spec, feats)
            loss = bce_loss(trace.output, targets)
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss {loss} at step {step + 1} "
                    f"(task {task_index}, optimizer {optimizer})"
                )
            grads = backward(params, spec, trace, targets)
            if optimizer == "osgd":
                report = osgd_step(params, grads, _mean_layer_inputs(trace), state, cfg)
                step = state.t
                lr = report.effective_lr
            elif optimizer == "adam":
                report = adam_step(params, grads, state, cfg)
                step = state.t
                lr = report.effective_lr
            else:
                step += 1
                lr = lr_schedule(step, cfg)
                sgd_step(params, grads, lr)
            loss_log.append((step, task_index, loss, lr))
            if step % 1000 == 0:
                log.info(
                    "step %d task %d loss %.4f lr %.2e", step, task_index, loss, lr
                )
    return TrainResult(state=state, loss_log=loss_log)


class MlsdDetector:
    """Exhaustive-search reference detector."""

    def __init__(self, scheme: ModulationScheme, n_tx: int):
        self.tag = "mlsd"
        self.scheme = scheme
        self.n_tx = n_tx

    def decide(self, g, z) -> np.ndarray:
        return mlsd_bits_batch(g, z, candidate_set(self.scheme, self.n_tx))


class NeuralDetector:
    """Trained network wrapped as a detector."""

    def __init__(self, tag: str, params, spec: NetworkSpec):
        self.tag = tag
        self.params = params
        self.spec = spec

    def decide(self, g, z) -> np.ndarray:
        feats = features_from_gram(g, z)
        return predict_bits(forward(self.params, self.spec, feats).output)


def _evaluate_point(args):
    """Worker: one (K, Eb/N0) grid point for every detector on shared
    paired draws. Returns (k_index, ebn0_index, bits_sent, error counts)."""
    (detectors, k_index, ebn0_index, k, ebn0_db, n_rx, n_tx, scheme,
     min_bit_errors, max_blocks, seed, chunk_blocks) = args
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_NS_EVAL, k_index, ebn0_index))
    rng = np.random.default_rng(ss)
    model = RicianModel(n_rx, n_tx, k)
    noise_var = ebn0_to_noise_var(ebn0_db, scheme, model)
    n_bits = n_tx * scheme.bits_per_symbol
    errors = np.zeros(len(detectors), dtype=np.int64)
    blocks = 0
    while blocks < max_blocks:
        b = min(chunk_blocks, max_blocks - blocks)
        h = sample_channels(model, b, rng)
        bits = rng.integers(0, 2, size=(b, n_bits), dtype=np.int8)
        x = modulate(bits, scheme)
        y = transmit_blocks(x, h, noise_var, rng)
        g = gram(h)
        z = matched_filter(h, y)
        for i, det in enumerate(detectors):
            errors[i] += count_bit_errors(bits, det.decide(g, z))
        blocks += b
        if errors.min() >= min_bit_errors:
            break
    return k_index, ebn0_index, blocks * n_bits, errors


def evaluate_ber(
    detectors,
    grid: EvalGrid,
    *,
    n_rx: int,
    n_tx: int,
    scheme: ModulationScheme,
    seed: int,
    workers: int = 1,
    chunk_blocks: int = EVAL_CHUNK_BLOCKS,
) -> list[BerPoint]:
    """Paired Monte-Carlo BER sweep over the grid.

    Every detector sees identical channel, symbol, and noise draws at each
    point (variance reduction for detector comparisons). A point stops once
    every detector has accumulated min_bit_errors or max_blocks is reached.
    Each point owns a stream derived from (seed, k index, ebn0 index), so
    results do not depend on worker count or scheduling order.
    """
    if hasattr(detectors, "decide"):
        detectors = [detectors]
    detectors = list(detectors)
    if not detectors:
        raise ValueError("need at least one detector")
    jobs = [
        (detectors, ki, ei, float(k), float(e), n_rx, n_tx, scheme,
         grid.min_bit_errors, grid.max_blocks, seed, chunk_blocks)
        for ki, k in enumerate(grid.k_list)
        for ei, e in enumerate(grid.ebn0_list_db)
    ]
    if workers <= 1:
        results = [_evaluate_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_point, jobs))
    points = []
    for (ki, ei, bits_sent, errors) in sorted(results, key=lambda r: (r[0], r[1])):
        for det, err in zip(detectors, errors):
            points.append(
                BerPoint(
                    detector=det.tag,
                    k_factor=float(grid.k_list[ki]),
                    ebn0_db=float(grid.ebn0_list_db[ei]),
                    bits_sent=int(bits_sent),
                    bit_errors=int(err),
                    seed=seed,
                )
            )
        log.info(
            "eval K=%g Eb/N0=%g dB: %s",
            grid.k_list[ki],
            grid.ebn0_list_db[ei],
            ", ".join(f"{d.tag} {e}/{bits_sent}" for d, e in zip(detectors, errors)),
        )
    return points


BER_CSV_COLUMNS = ("detector", "k_factor", "ebn0_db", "bits_sent", "bit_errors", "ber", "seed")


def write_ber_csv(path, points) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(BER_CSV_COLUMNS)
        for p in points:
            writer.writerow(
                [p.detector, repr(p.k_factor), repr(p.ebn0_db), p.bits_sent,
                 p.bit_errors, repr(p.ber), p.seed]
            )


def read_ber_csv(path) -> list[BerPoint]:
    points = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            points.append(
                BerPoint(
                    detector=row["detector"],
                    k_factor=float(row["k_factor"]),
                    ebn0_db=float(row["ebn0_db"]),
                    bits_sent=int(row["bits_sent"]),
                    bit_errors=int(row["bit_errors"]),
                    seed=int(row["seed"]),
                )
            )
    return points


def write_loss_csv(path, loss_log, seed: int) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# seed = {seed}\n")
        writer = csv.writer(f)
        writer.writerow(("step", "task_index", "loss", "effective_lr"))
        for step, task_index, loss, lr in loss_log:
            writer.writerow([step, task_index, repr(loss), repr(lr)])


def read_loss_csv(path):
    rows = []
    with open(path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    for row in csv.DictReader(lines):
        rows.append(
            (int(row["step"]), int(row["task_index"]), float(row["loss"]),
             float(row["effective_lr"]))
        )
    return rows


def curve(points, detector: str, k_factor: float):
    """(ebn0, ber, bits_sent) rows of one detector at one K, SNR-sorted."""
    rows = [
        (p.ebn0_db, p.ber, p.bits_sent)
        for p in points
        if p.detector == detector and p.k_factor == k_factor
    ]
    return sorted(rows)


def snr_at_ber(points, detector: str, k_factor: float, target: float) -> float:
    """Eb/N0 (dB) where the detector's curve crosses the target BER,
    log-linearly interpolated between grid points.

    Returns -inf when the curve is already below target at the lowest grid
    SNR and +inf when it never reaches the target. Zero-error points are
    floored at half an error for interpolation.
    """
    rows = curve(points, detector, k_factor)
    if not rows:
        raise ValueError(f"no points for {detector!r} at K={k_factor}")
    eff = [(e, max(ber, 0.5 / bits)) for e, ber, bits in rows]
    if eff[0][1] < target:
        return -math.inf
    for (e0, b0), (e1, b1) in zip(eff, eff[1:]):
        if b0 >= target > b1 or (b0 > target and b1 == target):
            frac = (math.log10(b0) - math.log10(target)) / (
                math.log10(b0) - math.log10(b1)
            )
            return e0 + frac * (e1 - e0)
        if b0 == target and b1 <= target:
            return e0
    return math.inf


def gap_to_mlsd(points, detector: str, k_factor: float, target: float) -> float:
    """SNR penalty of a detector versus the exhaustive reference at one
    target BER, in dB."""
    return snr_at_ber(points, detector, k_factor, target) - snr_at_ber(
        points, "mlsd", k_factor, target
    )


def ber_at(points, detector: str, k_factor: float, ebn0_db: float) -> float:
    for p in points:
        if (
            p.detector == detector
            and p.k_factor == k_factor
            and p.ebn0_db == ebn0_db
        ):
            return p.ber
    raise ValueError(f"no point for {detector!r} at K={k_factor}, {ebn0_db} dB")


@dataclass
class ExperimentResult:
    points: list[BerPoint]
    loss_logs: dict[str, list]
    files: dict[str, Path]


def _init_params(cfg: RunConfig, scheme):
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(_NS_INIT,))
    )
    spec = detector_spec(cfg.n_tx, scheme)
    return init_network(spec, rng), spec


def _train_one(cfg: RunConfig, scheme, optimizer: str, schedule):
    """Fresh net + full schedule under one optimizer. Nets trained from the
    same cfg.seed share their initialization and data streams exactly."""
    params, spec = _init_params(cfg, scheme)
    result = train(
        params,
        spec,
        optimizer,
        schedule,
        n_rx=cfg.n_rx,
        n_tx=cfg.n_tx,
        scheme=scheme,
        cfg=cfg.optimizer_config(),
        seed=cfg.seed,
    )
    return params, spec, result


def _workers(cfg: RunConfig) -> int:
    import os

    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def _run_experiment(cfg: RunConfig, out_dir, optimizers, schedule, k_list, title) -> ExperimentResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scheme = cfg.scheme()
    files: dict[str, Path] = {}
    echo_path = out / "config.txt"
    echo_config(cfg, echo_path)
    files["config"] = echo_path

    detectors = [MlsdDetector(scheme, cfg.n_tx)]
    loss_logs: dict[str, list] = {}
    for optimizer in optimizers:
        tag = f"ann-{optimizer}"
        log.info("training %s on schedule %s", tag, cfg.schedule)
        params, spec, result = _train_one(cfg, scheme, optimizer, schedule)
        ckpt = out / f"{tag}.ckpt"
        save_model(params, spec, ckpt, optimizer_state=result.state, seed=cfg.seed)
        files[f"checkpoint-{tag}"] = ckpt
        loss_path = out / f"loss-{tag}.csv"
        write_loss_csv(loss_path, result.loss_log, cfg.seed)
        files[f"loss-{tag}"] = loss_path
        loss_logs[tag] = result.loss_log
        detectors.append(NeuralDetector(tag, params, spec))

    grid = EvalGrid(
        k_list=tuple(k_list),
        ebn0_list_db=cfg.ebn0_list_db,
        min_bit_errors=cfg.min_bit_errors,
        max_blocks=cfg.max_blocks,
    )
    points = evaluate_ber(
        detectors,
        grid,
        n_rx=cfg.n_rx,
        n_tx=cfg.n_tx,
        scheme=scheme,
        seed=cfg.seed,
        workers=_workers(cfg),
    )
    csv_path = out / "ber.csv"
    write_ber_csv(csv_path, points)
    files["ber"] = csv_path

    from .plotting import render_ber_plot

    plot_path = out / "ber.svg"
    render_ber_plot(csv_path, plot_path, title=title)
    files["plot"] = plot_path
    return ExperimentResult(points=points, loss_logs=loss_logs, files=files)


def run_experiment_1(cfg: RunConfig, out_dir) -> ExperimentResult:
    """Channel mismatch: one baseline-trained net (K=0) evaluated across
    channel models against the exhaustive reference."""
    task = TrainingTask(
        channel_k=0.0,
        train_ebn0_db=cfg.train_ebn0_db,
        batch_size=cfg.batch_size,
        iteration_budget=cfg.iteration_budget,
    )
    cfg = replace(cfg, experiment=1, schedule="0.0")
    return _run_experiment(
        cfg, out_dir,
        optimizers=("adam",),
        schedule=[task],
        k_list=cfg.k_list,
        title="Experiment 1: trained at K=0, evaluated across channels",
    )


def run_experiment_2(cfg: RunConfig, out_dir) -> ExperimentResult:
    """Sequential continual learning: K=0 then K=1, baseline vs projection
    optimizer, both evaluated on both channels."""
    mk = lambda k: TrainingTask(
        channel_k=k,
        train_ebn0_db=cfg.train_ebn0_db,
        batch_size=cfg.batch_size,
        iteration_budget=cfg.iteration_budget,
    )
    cfg = replace(cfg, experiment=2, schedule="0.0,1.0")
    return _run_experiment(
        cfg, out_dir,
        optimizers=("adam", "osgd"),
        schedule=[mk(0.0), mk(1.0)],
        k_list=(0.0, 1.0),
        title="Experiment 2: sequential training K=0 then K=1",
    )


def run_experiment_3(cfg: RunConfig, out_dir) -> ExperimentResult:
    """Mixed training: K drawn uniformly from [0, 5] per sample, baseline vs
    projection optimizer, evaluated on the standard channel set."""
    task = TrainingTask(
        channel_k=(0.0, 5.0),
        train_ebn0_db=cfg.train_ebn0_db,
        batch_size=cfg.batch_size,
        iteration_budget=cfg.iteration_budget,
    )
    cfg = replace(cfg, experiment=3, schedule="0.0:5.0")
    return _run_experiment(
        cfg, out_dir,
        optimizers=("adam", "osgd"),
        schedule=[task],
        k_list=cfg.k_list,
        title="Experiment 3: mixed training, K uniform in [0, 5]",
    )
