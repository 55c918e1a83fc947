"""Command-line interface: prepare | select | evaluate | synth | report | init-config.

Exit codes: 0 success, 2 validation error, 3 runtime error. Set BANDSEL_LOG
to DEBUG/INFO/WARNING to control verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .dataset import write_labels_csv, write_spectra_csv
from .errors import BandselError, ValidationError
from .pipeline import (
    PipelineConfig,
    build_report,
    emit_artifacts,
    evaluate,
    load_config,
    load_prepared,
    load_selection,
    prepare,
    save_prepared,
    save_selection,
    select,
)
from .synthgen import generate
from .utils import atomic_write_text, canonical_json

logger = logging.getLogger("bandsel")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandsel",
        description="Reduce hyperspectral reflectance to a few camera-ready bands "
        "for binary nitrogen-status classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        p.add_argument(
            "--config", default=None, required=needs_config, help="pipeline config JSON"
        )
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--threads", type=int, default=None, help="override the config thread count"
        )
        p.add_argument("--out", default=None, help="override the config output directory")

    add_common(sub.add_parser("prepare", help="ingest, merge, screen, and split the data"))
    add_common(sub.add_parser("select", help="run band selection on prepared data"))
    add_common(sub.add_parser("evaluate", help="score the selection and emit the report"))
    add_common(sub.add_parser("synth", help="write a synthetic spectra/labels CSV pair"))
    report = sub.add_parser("report", help="run the full pipeline and emit all artifacts")
    add_common(report)
    report.add_argument(
        "--stage",
        choices=("prepare", "select", "evaluate"),
        default="prepare",
        help="resume from this stage using files already in the output directory",
    )
    init = sub.add_parser("init-config", help="write a config file with all defaults")
    init.add_argument("--out", default="bandsel_config.json", help="where to write it")
    return parser


def _load(args) -> PipelineConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ValidationError("threads must be positive")
        config.threads = args.threads
    if args.out is not None:
        config.out_dir = args.out
    return config


def _cmd_init_config(args) -> None:
    text = canonical_json(PipelineConfig().to_json_dict()) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(args.out, text)
        logger.info("wrote %s", args.out)


def _cmd_synth(args) -> None:
    config = _load(args)
    if config.synth is None:
        raise ValidationError("config has no synth block")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table, labels = generate(config.synth)
    write_spectra_csv(table, out / "spectra.csv")
    write_labels_csv(labels, out / "labels.csv")
    logger.info(
        "wrote %s and %s (%d samples, %d wavelengths)",
        out / "spectra.csv", out / "labels.csv", table.n_samples, table.n_wavelengths,
    )


def _cmd_prepare(args) -> None:
    config = _load(args)
    prepared = prepare(config)
    save_prepared(prepared, config.out_dir)
    logger.info("prepared data saved to %s", config.out_dir)


def _cmd_select(args) -> None:
    config = _load(args)
    prepared = load_prepared(config.out_dir)
    selection = select(config, prepared)
    save_selection(selection, config.out_dir)
    logger.info("selection saved to %s", config.out_dir)


def _cmd_evaluate(args) -> None:
    config = _load(args)
    prepared = load_prepared(config.out_dir)
    selection = load_selection(config.out_dir)
    evaluation = evaluate(config, prepared, selection)
    report = build_report(config, prepared, selection, evaluation)
    written = emit_artifacts(report, config.out_dir)
    logger.info("wrote %s in %s", ", ".join(written), config.out_dir)


def _cmd_report(args) -> None:
    config = _load(args)
    if args.stage == "prepare":
        prepared = prepare(config)
        save_prepared(prepared, config.out_dir)
    else:
        prepared = load_prepared(config.out_dir)
    if args.stage in ("prepare", "select"):
        selection = select(config, prepared)
        save_selection(selection, config.out_dir)
    else:
        selection = load_selection(config.out_dir)
    evaluation = evaluate(config, prepared, selection)
    report = build_report(config, prepared, selection, evaluation)
    written = emit_artifacts(report, config.out_dir)
    logger.info("wrote %s in %s", ", ".join(written), config.out_dir)


_COMMANDS = {
    "init-config": _cmd_init_config,
    "synth": _cmd_synth,
    "prepare": _cmd_prepare,
    "select": _cmd_select,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    level = os.environ.get("BANDSEL_LOG", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ValidationError as exc:
        logger.error("%s", exc)
        return 2
    except BandselError as exc:
        logger.error("%s", exc)
        return 3
    except OSError as exc:
        logger.error("%s", exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
