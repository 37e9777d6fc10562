"""Command-line entry point.

Subcommands: train, eval, experiment, plot. Every config key is mirrored
one-to-one by a flag; flags override config-file values. The effective
config is echoed into the output directory of every run. The environment
variable OSGD_MIMO_OUTPUT_DIR overrides the output directory.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import _KEYS, ConfigError, RunConfig, echo_config, parse_config
from .harness import (
    EvalGrid,
    MlsdDetector,
    NeuralDetector,
    evaluate_ber,
    run_experiment_1,
    run_experiment_2,
    run_experiment_3,
    train,
    write_ber_csv,
    write_loss_csv,
    _init_params,
)
from .checkpoint import save_model
from .plotting import render_ber_plot

ENV_OUTPUT_DIR = "OSGD_MIMO_OUTPUT_DIR"

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osgd-mimo",
        description="Train, evaluate, and reproduce the channel over-training experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", metavar="FILE", default=None,
                       help="flat key = value config file")
        for key in _KEYS:
            p.add_argument(f"--{key}", metavar="V", default=None,
                           help=f"override config key '{key}'")

    p_train = sub.add_parser("train", help="train one network per the schedule")
    add_common(p_train)
    p_eval = sub.add_parser("eval", help="evaluate a checkpoint against the reference")
    add_common(p_eval)
    p_exp = sub.add_parser("experiment", help="run a full experiment preset")
    p_exp.add_argument("id", nargs="?", type=int, choices=(1, 2, 3),
                       help="experiment number (alternatively --experiment)")
    add_common(p_exp)
    p_plot = sub.add_parser("plot", help="render a BER CSV to a vector plot")
    add_common(p_plot)
    return parser


def _config_from_args(ns) -> RunConfig:
    raw = vars(ns)
    overrides = {key: raw[key] for key in _KEYS if raw.get(key) is not None}
    if raw.get("id") is not None:
        overrides["experiment"] = str(raw["id"])
    cfg = parse_config(ns.config, overrides)
    env_out = os.environ.get(ENV_OUTPUT_DIR)
    if env_out:
        cfg = parse_config(None, overrides | {"output_dir": env_out}) if ns.config is None \
            else parse_config(ns.config, overrides | {"output_dir": env_out})
    return cfg


def _resolved_workers(cfg: RunConfig) -> int:
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def cmd_train(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out / "config.txt")
    scheme = cfg.scheme()
    params, spec = _init_params(cfg, scheme)
    result = train(
        params, spec, cfg.optimizer, cfg.tasks(),
        n_rx=cfg.n_rx, n_tx=cfg.n_tx, scheme=scheme,
        cfg=cfg.optimizer_config(), seed=cfg.seed,
    )
    tag = f"ann-{cfg.optimizer}"
    ckpt_path = Path(cfg.checkpoint) if cfg.checkpoint else out / f"{tag}.ckpt"
    save_model(params, spec, ckpt_path, optimizer_state=result.state, seed=cfg.seed)
    write_loss_csv(out / f"loss-{tag}.csv", result.loss_log, cfg.seed)
    log.info("wrote %s", ckpt_path)
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    if not cfg.checkpoint:
        raise ConfigError("missing required key 'checkpoint'")
    ckpt = load_checkpoint(cfg.checkpoint)
    scheme = cfg.scheme()
    kind = ckpt.optimizer_state.kind if ckpt.optimizer_state else None
    tag = f"ann-{kind}" if kind else "ann"
    detectors = [
        MlsdDetector(scheme, cfg.n_tx),
        NeuralDetector(tag, ckpt.params, ckpt.spec),
    ]
    grid = EvalGrid(
        k_list=cfg.k_list,
        ebn0_list_db=cfg.ebn0_list_db,
        min_bit_errors=cfg.min_bit_errors,
        max_blocks=cfg.max_blocks,
    )
    points = evaluate_ber(
        detectors, grid,
        n_rx=cfg.n_rx, n_tx=cfg.n_tx, scheme=scheme,
        seed=cfg.seed, workers=_resolved_workers(cfg),
    )
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out / "config.txt")
    write_ber_csv(out / "ber.csv", points)
    log.info("wrote %s", out / "ber.csv")
    return 0


def cmd_experiment(cfg: RunConfig) -> int:
    runners = {1: run_experiment_1, 2: run_experiment_2, 3: run_experiment_3}
    if cfg.experiment not in runners:
        raise ConfigError("invalid value for 'experiment': pick 1, 2 or 3")
    out_dir = Path(cfg.output_dir) / f"exp{cfg.experiment}"
    result = runners[cfg.experiment](cfg, out_dir)
    for name, path in result.files.items():
        log.info("%s: %s", name, path)
    return 0


def cmd_plot(cfg: RunConfig) -> int:
    csv_path = Path(cfg.csv) if cfg.csv else Path(cfg.output_dir) / "ber.csv"
    if not csv_path.exists():
        raise FileNotFoundError(f"no such CSV: {csv_path}")
    out_path = csv_path.with_suffix(".svg")
    render_ber_plot(csv_path, out_path)
    log.info("wrote %s", out_path)
    return 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s"
    )
    ns = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(ns)
        return _COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
