"""Command-line entry point: ``xlmimo-gan {gen-data,train,eval,sweep,report}``.

Every subcommand reads an optional flat config file (``--config``) and then
applies flag overrides. Failures print one JSON object on stderr, e.g.
``{"error": "missing_checkpoint", "message": "..."}``, and exit nonzero
(2 for usage, configuration and missing-input errors, 1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import build, load_text, parse_assignments
from .dataset import generate_dataset, load_dataset, save_dataset
from .errors import ConfigError, IntegrityError, ParameterError, TrainingAborted

USAGE_EXIT = 2
FAILURE_EXIT = 1


class UsageError(Exception):
    pass


class MissingInput(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser, out_help: str, out_required: bool = True):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", choices=("desk", "full"), help="geometry and size preset")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--r", type=float, help="LoS distance in metres")
    p.add_argument("--snr", type=float, help="pilot SNR in dB")
    p.add_argument("--pilot-len", type=int, help="pilot length P")
    p.add_argument("--eta", type=float, help="L1 weight")
    p.add_argument("--seed", type=int, help="dataset and training seed")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--input-mode", choices=("ie", "raw"), help="generator conditional")
    p.add_argument("--out", required=out_required, help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xlmimo-gan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-data", help="generate and save a dataset")
    _add_common(p, "dataset directory to write")

    p = sub.add_parser("train", help="train an estimator")
    _add_common(p, "checkpoint directory to write")
    p.add_argument("--data", help="dataset directory (generated from the config if omitted)")

    p = sub.add_parser("eval", help="score a checkpoint on a dataset's test split")
    _add_common(p, "result table path (stdout if omitted)", out_required=False)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")

    p = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common(p, "sweep output directory")
    p.add_argument("--axis", required=True,
                   choices=("distance_r", "snr_db", "pilot_length", "eta"))
    p.add_argument("values", nargs="+", type=float, help="axis values")
    p.add_argument("--distances", nargs="+", type=float, help="distance groups in metres")
    p.add_argument("--seeds", nargs="+", type=int, help="seeds (overrides --seed)")
    p.add_argument("--no-retrain", action="store_true",
                   help="train once per distance and seed and reuse it at every value")

    p = sub.add_parser("report", help="re-render tables and plots of a finished sweep")
    p.add_argument("--out", required=True, help="sweep output directory")
    return parser


def _values(args) -> dict:
    values = load_text(args.config) if args.config else {}
    if args.preset:
        values["preset"] = args.preset
    values.update(parse_assignments(args.set))
    flags = {"r": args.r, "snr_db": args.snr, "P": args.pilot_len, "eta": args.eta,
             "epochs": args.epochs, "input_mode": args.input_mode}
    if args.seed is not None:
        flags.update(seed=args.seed, master_seed=args.seed)
    values.update({k: v for k, v in flags.items() if v is not None})
    return values


def _emit(payload: dict):
    print(json.dumps(payload, sort_keys=True))


def _load_data(path):
    if not (Path(path) / "manifest.json").is_file():
        raise MissingInput("missing_dataset", f"no dataset at {path}")
    return load_dataset(path)


def cmd_gen_data(args) -> int:
    run = build(_values(args))
    dataset = generate_dataset(run.dataset)
    path = save_dataset(args.out, dataset)
    g = run.dataset.geometry
    _emit({"dataset": str(path), "n_t": g.n_t, "n_r": g.n_r, "f_c": g.f_c, "L": run.dataset.L,
           "n_train": len(dataset.train), "n_test": len(dataset.test)})
    return 0


def cmd_train(args) -> int:
    from .gan.training import save_checkpoint, train

    run = build(_values(args))
    dataset = _load_data(args.data) if args.data else generate_dataset(run.dataset)
    spec = run.network_spec(dataset.config)
    state = train(dataset, spec, run.train, dump_path=Path(args.out) / "aborted")
    save_checkpoint(args.out, state)
    _emit({"checkpoint": str(args.out), "iterations": state.iteration,
           "final_l1": state.history["l1"][-1] if state.history["l1"] else None})
    return 0


def cmd_eval(args) -> int:
    from .gan.training import load_checkpoint
    from .report import format_rows
    from .sweep import _rows, evaluate

    run = build(_values(args))
    if not (Path(args.checkpoint) / "manifest.json").is_file():
        raise MissingInput("missing_checkpoint", f"no checkpoint at {args.checkpoint}")
    dataset = _load_data(args.data)
    state = load_checkpoint(args.checkpoint)
    scores = evaluate(dataset, state, run.omp_oversample)
    r = dataset.config.r
    text = format_rows(_rows(r, scores, dataset.config.master_seed, r))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    from .sweep import SweepSpec, run_sweep

    values = _values(args)
    run = build(values)
    seeds = args.seeds or [values.get("seed", 0)]
    spec = SweepSpec(axis=args.axis, values=list(args.values), base=run, seeds=seeds,
                     retrain=not args.no_retrain, distances=args.distances)
    rows = run_sweep(spec, out_dir=args.out, checkpoint_dir=args.out)
    _emit({"sweep": str(args.out), "rows": len(rows)})
    return 0


def cmd_report(args) -> int:
    from .report import render_report

    paths = render_report(args.out)
    _emit({k: str(v) for k, v in paths.items()})
    return 0


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval,
            "sweep": cmd_sweep, "report": cmd_report}


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage_error", str(exc), USAGE_EXIT)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                            format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except MissingInput as exc:
        return _fail(exc.kind, str(exc), USAGE_EXIT)
    except (ConfigError, ParameterError) as exc:
        return _fail("config_error", str(exc), USAGE_EXIT)
    except IntegrityError as exc:
        return _fail("integrity_error", str(exc), FAILURE_EXIT)
    except TrainingAborted as exc:
        return _fail("training_aborted", str(exc), FAILURE_EXIT)
    except Exception as exc:  # noqa: BLE001 - last-resort one-line report
        return _fail("internal_error", f"{type(exc).__name__}: {exc}", FAILURE_EXIT)


if __name__ == "__main__":
    sys.exit(main())
