"""``v2xrb <experiment> [--config PATH] [--seed N] [--out DIR] [--set key=value ...]``

Exit codes: 0 success, 2 configuration error, 3 runtime contract violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .config import EXPERIMENTS, PRESETS, RunConfig, load_config
from .errors import ConfigError, ContractViolation, ParameterError
from .output import write_atomic, write_csv, write_json
from .sim import RECORD_COLUMNS, record_row, run_episode

log = logging.getLogger("v2xrb")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONTRACT = 3


def _comment(cfg: RunConfig) -> str:
    return f"v2xrb experiment={cfg.experiment} seed={cfg.seed} config_sha256={cfg.config_hash()}"


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir)


def cmd_curves(cfg: RunConfig) -> list:
    path = write_csv(_out(cfg) / "curves.csv", ex.CURVES_HEADER, ex.curves_rows(cfg), _comment(cfg))
    written = [path]
    if cfg.data["svg"]:
        from .plot import render_curves
        written.append(render_curves(path, path.with_suffix(".svg")))
    return written


def cmd_heatmap(cfg: RunConfig) -> list:
    written = []
    for eps in cfg.section("heatmap")["epsilons"]:
        result = ex.heatmap_episode(cfg, eps)
        rows = ex.heatmap_rows(result.agents[0].tables["d"])
        path = write_csv(_out(cfg) / f"heatmap_eps{eps:g}.csv", ex.HEATMAP_HEADER, rows,
                         _comment(cfg))
        written.append(path)
        if cfg.data["svg"]:
            from .plot import render_heatmap
            written.append(render_heatmap(path, path.with_suffix(".svg")))
    return written


def cmd_converge(cfg: RunConfig) -> list:
    written = []
    paths = {}
    for eps in cfg.section("converge")["epsilons"]:
        result = ex.converge_episode(cfg, eps)
        path = write_csv(_out(cfg) / f"converge_eps{eps:g}.csv", ex.CONVERGE_HEADER,
                         ex.converge_rows(result), _comment(cfg))
        paths["A/B" if eps == 1.0 else f"eps={eps:g}"] = path
        written.append(path)
    written.append(write_json(_out(cfg) / "converge_summary.json",
                              {"config": cfg.to_dict(), "strategies": ex.converge_summary(cfg)}))
    if cfg.data["svg"]:
        from .plot import render_converge
        written.append(render_converge(paths, _out(cfg) / "converge.svg"))
    return written


def cmd_tau(cfg: RunConfig) -> list:
    path = write_csv(_out(cfg) / "tau.csv", ex.TAU_HEADER, ex.tau_rows(cfg), _comment(cfg))
    written = [path]
    if cfg.data["svg"]:
        from .plot import render_tau
        written.append(render_tau(path, path.with_suffix(".svg")))
    return written


def cmd_episode(cfg: RunConfig) -> list:
    result = run_episode(cfg.episode_config())
    log_path = write_csv(_out(cfg) / "episode_log.csv", RECORD_COLUMNS,
                         (record_row(r) for r in result.records), _comment(cfg))
    summary = write_json(_out(cfg) / "episode_summary.json", result.summary(cfg.to_dict()))
    return [log_path, summary]


COMMANDS = {
    "curves": cmd_curves,
    "heatmap": cmd_heatmap,
    "converge": cmd_converge,
    "tau": cmd_tau,
    "episode": cmd_episode,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="v2xrb", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config value, e.g. bandit.epsilon=0.2 (repeatable)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--svg", action="store_true", help="also render SVG plots from the CSVs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    sets = list(args.sets) + (["svg=true"] if args.svg else [])
    try:
        cfg = load_config(args.config, sets, experiment=args.experiment, seed=args.seed,
                          output_dir=args.output_dir, preset=args.preset)
    except ConfigError as exc:
        print(f"v2xrb: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _out(cfg).mkdir(parents=True, exist_ok=True)
        write_atomic(_out(cfg) / "config.json", cfg.to_json())
        written = COMMANDS[cfg.experiment](cfg)
    except OSError as exc:
        print(f"v2xrb: cannot write to {cfg.output_dir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractViolation, ParameterError) as exc:
        print(f"v2xrb: contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
