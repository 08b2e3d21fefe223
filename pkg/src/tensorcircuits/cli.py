"""Command-line interface.

Subcommands:

* ``reconstruct``: build the full coefficient tensor of one class from a
  decomposition JSON file.
* ``forward``: score an activation grid with a decomposition, directly or in
  log space (``--log-space``).
* ``rank-experiment``, ``generalized-experiment``, ``approx-gap``,
  ``lemma-check``: run a Monte-Carlo experiment from a JSON config and/or
  flags and write its report (JSON + CSV + PNG figure next to them).

Exit codes: 0 on success, 1 when an experiment's failure count exceeds its
allowance, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from tensorcircuits.circuits import cp_forward, ht_forward
from tensorcircuits.decompositions import (
    CpDecomposition,
    cp_reconstruct,
    ht_reconstruct,
)
from tensorcircuits.experiments import (
    ConfigError,
    ExperimentConfig,
    report_to_csv_text,
    report_to_json_text,
    run_experiment,
)
from tensorcircuits.logspace import logspace_forward
from tensorcircuits.serialize import (
    SchemaError,
    decomposition_from_dict,
    grid_from_dict,
    tensor_to_dict,
)

__all__ = ["cli_main", "main"]

_EXPERIMENT_COMMANDS = {
    "rank-experiment": "rank-separation",
    "generalized-experiment": "generalized",
    "approx-gap": "approx-gap",
    "lemma-check": None,  # kind from --lemma / config
}


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"cannot read {path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2)
        handle.write("\n")


def _parse_ranks(text: str) -> tuple[int, ...]:
    try:
        ranks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"cannot parse ranks {text!r}; expected e.g. 3,3,3") from None
    if not ranks:
        raise ConfigError(f"cannot parse ranks {text!r}; expected e.g. 3,3,3")
    return ranks


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorcircuits",
        description="Tensor decompositions, circuit evaluation and rank experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", help="build the full coefficient tensor")
    rec.add_argument("--decomposition", required=True, help="decomposition JSON file")
    rec.add_argument("--class-index", type=int, default=0)
    rec.add_argument("--out", help="tensor JSON output path (stdout if omitted)")

    fwd = sub.add_parser("forward", help="score an activation grid")
    fwd.add_argument("--decomposition", required=True, help="decomposition JSON file")
    fwd.add_argument("--grid", required=True, help="activation grid JSON file")
    fwd.add_argument("--log-space", action="store_true",
                     help="evaluate in log space (non-negative weights only)")
    fwd.add_argument("--out", help="scores JSON output path (stdout if omitted)")

    for command in _EXPERIMENT_COMMANDS:
        exp = sub.add_parser(command, help=f"run the {command} experiment")
        exp.add_argument("--config", help="experiment config JSON file")
        exp.add_argument("--trials", type=int)
        exp.add_argument("--seed", type=int)
        exp.add_argument("--shared", action="store_true", default=None)
        exp.add_argument("--out", help="report base path (writes .json/.csv/.png)")
        exp.add_argument("--format", choices=("csv", "json", "both"))
        exp.add_argument("--rel-tol", type=float)
        exp.add_argument("--distribution",
                         choices=("normal", "uniform", "uniform01"))
        exp.add_argument("--allowed-failures", type=int)
        exp.add_argument("--workers", type=int, default=1)
        exp.add_argument("--no-plot", action="store_true",
                         help="skip the PNG figure next to the report")
        exp.add_argument("--n-modes", type=int)
        exp.add_argument("--mode-dim", type=int)
        exp.add_argument("--ranks", help="comma-separated level ranks, e.g. 3,3,3")
        if command == "generalized-experiment":
            exp.add_argument("--l1", type=int)
            exp.add_argument("--l2", type=int)
        if command == "approx-gap":
            exp.add_argument("--n-terms", type=int)
            exp.add_argument("--gap-floor-rel", type=float)
        if command == "lemma-check":
            exp.add_argument("--lemma", choices=("lemma1", "lemma2"))
            exp.add_argument("--rows", type=int)
            exp.add_argument("--cols", type=int)
            exp.add_argument("--n-matrices", type=int)
            exp.add_argument("--matrix-size", type=int)
            exp.add_argument("--min-rank", type=int)
    return parser


_EXPERIMENT_DEFAULTS = {
    "rank-separation": dict(n_modes=8, mode_dim=3, ranks=(3, 3, 3), trials=500),
    "generalized": dict(
        n_modes=8, mode_dim=2, ranks=(2, 2, 2), l1=3, l2=2, trials=200
    ),
    "approx-gap": dict(n_modes=4, mode_dim=2, ranks=(2, 2), n_terms=2, trials=200),
    "lemma1": dict(rows=4, cols=3, trials=1000),
    "lemma2": dict(n_matrices=2, matrix_size=4, min_rank=2, trials=1000),
}

_OVERRIDE_FLAGS = (
    "trials", "seed", "shared", "out", "format", "rel_tol", "distribution",
    "allowed_failures", "n_modes", "mode_dim", "l1", "l2", "n_terms",
    "gap_floor_rel", "rows", "cols", "n_matrices", "matrix_size", "min_rank",
)


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        doc.update(_load_json(args.config))

    kind = _EXPERIMENT_COMMANDS[args.command]
    if kind is None:  # lemma-check
        kind = getattr(args, "lemma", None) or doc.get("kind") or "lemma1"
    if "kind" in doc and doc["kind"] != kind:
        raise ConfigError(
            f"config kind {doc['kind']!r} does not match the "
            f"{args.command} subcommand ({kind!r})"
        )
    doc["kind"] = kind

    for name in _OVERRIDE_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    if getattr(args, "ranks", None) is not None:
        doc["ranks"] = _parse_ranks(args.ranks)

    for name, value in _EXPERIMENT_DEFAULTS[kind].items():
        doc.setdefault(name, value)
    return ExperimentConfig.from_dict(doc)


def _report_paths(out: str, fmt: str, plot: bool) -> dict[str, Path]:
    base = Path(out)
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    paths = {}
    if fmt in ("json", "both"):
        paths["json"] = base.with_suffix(".json")
    if fmt in ("csv", "both"):
        paths["csv"] = base.with_suffix(".csv")
    if plot:
        paths["png"] = base.with_suffix(".png")
    return paths


def _cmd_experiment(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    report = run_experiment(cfg, workers=args.workers)
    if cfg.out:
        paths = _report_paths(cfg.out, cfg.format, plot=not args.no_plot)
        try:
            if "json" in paths:
                paths["json"].write_text(report_to_json_text(report), encoding="utf-8")
            if "csv" in paths:
                paths["csv"].write_text(report_to_csv_text(report), encoding="utf-8")
            if "png" in paths:
                from tensorcircuits.plots import render_report_figure

                render_report_figure(report, paths["png"])
        except OSError as exc:
            raise ConfigError(f"cannot write report: {exc}") from None
        written = ", ".join(str(p) for p in paths.values())
        print(f"{cfg.kind}: {report.trials} trials, {report.failures} failures "
              f"(budget {cfg.failure_budget}); wrote {written}")
    else:
        sys.stdout.write(report_to_json_text(report))
    return 0 if report.within_budget else 1


def _cmd_reconstruct(args: argparse.Namespace) -> int:
    decomp = decomposition_from_dict(_load_json(args.decomposition))
    builder = cp_reconstruct if isinstance(decomp, CpDecomposition) else ht_reconstruct
    tensor = builder(decomp, args.class_index)
    doc = tensor_to_dict(tensor)
    if args.out:
        _write_json(doc, args.out)
    else:
        sys.stdout.write(json.dumps(doc) + "\n")
    return 0


def _cmd_forward(args: argparse.Namespace) -> int:
    decomp = decomposition_from_dict(_load_json(args.decomposition))
    grid = grid_from_dict(_load_json(args.grid))
    if args.log_space:
        scores = logspace_forward(decomp, grid)
        doc = {"schema_version": 1, "log_scores": [float(s) for s in scores]}
    else:
        forward = cp_forward if isinstance(decomp, CpDecomposition) else ht_forward
        scores = forward(decomp, grid)
        doc = {"schema_version": 1, "scores": [float(s) for s in scores]}
    if args.out:
        _write_json(doc, args.out)
    else:
        sys.stdout.write(json.dumps(doc) + "\n")
    return 0


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        if args.command == "reconstruct":
            return _cmd_reconstruct(args)
        if args.command == "forward":
            return _cmd_forward(args)
        return _cmd_experiment(args)
    except (ConfigError, SchemaError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
