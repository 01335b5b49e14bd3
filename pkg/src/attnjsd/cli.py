"""Command line interface.

Subcommands:

    toy       four-distribution comparison of the set objective vs NT-Xent
    adapt     sign-gradient adaptation loop on the synthetic model
    score     disentanglement score of an attention dump
    sweep     step-size sweep against the no-update baseline
    extract   per-token fields from one dump entry

Exit codes: 0 success, 1 usage error, 2 malformed data, 3 numerical
failure.  Block and timestep ranges use inclusive ``lo:hi`` syntax.
All randomness is seeded, so a fixed command line reproduces its output
artifacts byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict

from .adaptation import (
    LoopConfig,
    SyntheticAttentionModel,
    alpha_sweep,
    run_adaptation,
    write_trace_csv,
)
from .distributions import entropy_normalized
from .dump import read_dump
from .errors import DataError, NumericalError
from .extraction import DegenerateExtractionWarning, extract_token_field
from .objective import LossConfig
from .score import disentanglement_score, export_series_csv, series_summary
from .toy import ToyConfig, run_toy, write_frames_csv

__all__ = ["main", "entrypoint", "build_parser"]

DEFAULT_SWEEP_ALPHAS = "0.5,0.3,0.1,0.05,0.03,0.01,0.005,0.003,0.001"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _parse_range(text: str) -> tuple[int, int]:
    """Inclusive ``lo:hi`` range; a bare integer means a single label."""
    try:
        if ":" in text:
            lo_text, hi_text = text.split(":", 1)
            lo, hi = int(lo_text), int(hi_text)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'lo:hi' or a single integer, got {text!r}"
        ) from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        h_text, w_text = text.lower().split("x", 1)
        return int(h_text), int(w_text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _loss_name(flag: str) -> str:
    return "nt_xent" if flag == "nt-xent" else flag


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="attnjsd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    toy = sub.add_parser("toy", help="four-distribution objective comparison")
    toy.add_argument("--loss", choices=("jedi", "nt-xent"), default="jedi")
    toy.add_argument("--cells", type=int, default=64)
    toy.add_argument("--step-size", type=float, default=0.05)
    toy.add_argument("--iterations", type=int, default=12)
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--lambda", dest="diversity_weight", type=float, default=0.01)
    toy.add_argument("--temperature", type=float, default=0.5)
    toy.add_argument("--snapshot-every", type=int, default=3)
    toy.add_argument("--frames-out", metavar="PATH", help="write distribution snapshots as CSV")
    toy.set_defaults(func=_cmd_toy)

    adapt = sub.add_parser("adapt", help="run the adaptation loop on the synthetic model")
    _add_loop_arguments(adapt)
    adapt.add_argument("--trace-out", metavar="PATH", help="write the per-step trace as CSV")
    adapt.set_defaults(func=_cmd_adapt)

    score = sub.add_parser("score", help="disentanglement score of an attention dump")
    score.add_argument("dump", help="attention dump file")
    score.add_argument("--baseline", metavar="PATH", help="second dump for side-by-side export")
    score.add_argument("--blocks", type=_parse_range, metavar="LO:HI")
    score.add_argument("--timesteps", type=_parse_range, metavar="LO:HI")
    score.add_argument("--csv-out", metavar="PATH", help="per-timestep CSV (needs --baseline)")
    score.add_argument("--json-out", metavar="PATH", help="aggregate summary as JSON")
    score.set_defaults(func=_cmd_score)

    sweep = sub.add_parser("sweep", help="step-size sweep against the no-update baseline")
    _add_loop_arguments(sweep)
    sweep.add_argument("--alphas", type=_parse_floats, default=_parse_floats(DEFAULT_SWEEP_ALPHAS))
    sweep.add_argument("--csv-out", metavar="PATH", help="write sweep summary as CSV")
    sweep.set_defaults(func=_cmd_sweep)

    extract = sub.add_parser("extract", help="per-token fields from one dump entry")
    extract.add_argument("dump", help="attention dump file")
    extract.add_argument("--timestep", type=int, default=None, help="default: first in dump")
    extract.add_argument("--block", type=int, default=None, help="default: first in dump")
    extract.add_argument("--tokens", type=_parse_ints, default=None, help="default: all")
    extract.add_argument("--csv-out", metavar="PATH", help="long-format field CSV")
    extract.set_defaults(func=_cmd_extract)

    return parser


def _add_loop_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=3e-3)
    p.add_argument("--k", dest="update_steps", type=int, default=18)
    p.add_argument("--t", dest="total_steps", type=int, default=28)
    p.add_argument("--loss", choices=("jedi", "nt-xent"), default="jedi")
    p.add_argument("--lambda", dest="diversity_weight", type=float, default=0.01)
    p.add_argument("--temperature", type=float, default=0.5)
    p.add_argument("--no-intra", action="store_true", help="disable the within-group term")
    p.add_argument("--no-inter", action="store_true", help="disable the separation term")
    p.add_argument("--no-diversity", action="store_true", help="disable the entropy term")
    p.add_argument("--inner-iterations", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subjects", type=int, default=2)
    p.add_argument("--maps-per-subject", type=int, default=2)
    p.add_argument("--grid", type=_parse_grid, default=(16, 16), metavar="HxW")


def _loop_setup(args) -> tuple[SyntheticAttentionModel, LoopConfig]:
    model = SyntheticAttentionModel(
        num_subjects=args.subjects,
        maps_per_subject=args.maps_per_subject,
        grid=args.grid,
        seed=args.seed,
    )
    loss_cfg = LossConfig(
        diversity_weight=args.diversity_weight,
        enable_intra=not args.no_intra,
        enable_inter=not args.no_inter,
        enable_diversity=not args.no_diversity,
    )
    cfg = LoopConfig(
        alpha=args.alpha,
        update_steps=args.update_steps,
        total_steps=args.total_steps,
        loss=_loss_name(args.loss),
        loss_config=loss_cfg,
        temperature=args.temperature,
        inner_iterations=args.inner_iterations,
        seed=args.seed,
    )
    return model, cfg


def _metrics_dict(metrics) -> dict:
    return {
        "within_group_jsd": metrics.within_group_jsd,
        "between_group_jsd": metrics.between_group_jsd,
        "mixture_entropies": list(metrics.mixture_entropies),
        "mean_mixture_entropy": metrics.mean_mixture_entropy,
    }


def _cmd_toy(args) -> int:
    cfg = ToyConfig(
        cells=args.cells,
        loss=_loss_name(args.loss),
        step_size=args.step_size,
        iterations=args.iterations,
        seed=args.seed,
        diversity_weight=args.diversity_weight,
        temperature=args.temperature,
        snapshot_every=args.snapshot_every,
    )
    result = run_toy(cfg)
    if args.frames_out:
        write_frames_csv(result, args.frames_out)
    _emit(
        {
            "loss": cfg.loss,
            "seed": cfg.seed,
            "iterations": cfg.iterations,
            "initial": _metrics_dict(result.initial),
            "final": _metrics_dict(result.final),
        }
    )
    return 0


def _cmd_adapt(args) -> int:
    model, cfg = _loop_setup(args)
    result = run_adaptation(model, model.prompt_spec(), cfg)
    if args.trace_out:
        write_trace_csv(result.trace, args.trace_out)
    first, last = result.trace[0], result.trace[-1]
    _emit(
        {
            "loss": cfg.loss,
            "seed": cfg.seed,
            "updates_applied": result.updates_applied,
            "steps": len(result.trace),
            "initial": {"total": first.total, "intergroup_jsd": first.intergroup_jsd},
            "final": {
                "intra": last.intra,
                "inter": last.inter,
                "diversity": last.diversity,
                "total": last.total,
                "intergroup_jsd": last.intergroup_jsd,
            },
        }
    )
    return 0


def _series_for(path: str, args):
    dump = read_dump(path)
    return disentanglement_score(
        dump,
        block_range=args.blocks,
        timestep_range=args.timesteps,
    )


def _cmd_score(args) -> int:
    if args.csv_out and not args.baseline:
        raise _UsageError("--csv-out requires --baseline for the side-by-side export")
    series = _series_for(args.dump, args)
    summary = {"dump": series_summary(series)}
    if args.baseline:
        baseline = _series_for(args.baseline, args)
        summary["baseline"] = series_summary(baseline)
        if args.csv_out:
            export_series_csv(series, baseline, args.csv_out)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(summary, indent=2) + "\n")
    _emit(summary)
    return 0


def _cmd_sweep(args) -> int:
    model, cfg = _loop_setup(args)
    entries = alpha_sweep(model, model.prompt_spec(), cfg, args.alphas)
    if args.csv_out:
        lines = ["alpha,final_total,final_intergroup_jsd,displacement_inf"]
        for e in entries:
            lines.append(
                ",".join(
                    repr(float(v))
                    for v in (e.alpha, e.final_total, e.final_intergroup_jsd, e.displacement_inf)
                )
            )
        with open(args.csv_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    _emit({"entries": [asdict(e) for e in entries]})
    return 0


def _cmd_extract(args) -> int:
    dump = read_dump(args.dump)
    man = dump.manifest
    timestep = man.timesteps[0] if args.timestep is None else args.timestep
    block = man.blocks[0] if args.block is None else args.block
    tokens = tuple(range(man.m)) if args.tokens is None else args.tokens
    matrix = dump.matrix(timestep, block)
    fields = []
    degenerate = []
    for token in tokens:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateExtractionWarning)
            fields.append(extract_token_field(matrix, token))
            degenerate.append(
                any(issubclass(w.category, DegenerateExtractionWarning) for w in caught)
            )
    if args.csv_out:
        _write_fields_csv(args.csv_out, man, tokens, fields, degenerate)
    _emit(
        {
            "timestep": timestep,
            "block": block,
            "tokens": [
                {
                    "token": int(token),
                    "label": man.token_labels[token],
                    "cells": fields[i].dim,
                    "shape": list(fields[i].shape) if fields[i].shape else None,
                    "entropy_normalized": entropy_normalized(fields[i]),
                    "uniform_fallback": degenerate[i],
                }
                for i, token in enumerate(tokens)
            ],
        }
    )
    return 0


def _write_fields_csv(path, manifest, tokens, fields, degenerate) -> None:
    lines = ["token,label,uniform_fallback,cell,row,col,value"]
    for i, token in enumerate(tokens):
        f = fields[i]
        for cell, value in enumerate(f.values):
            if f.shape is not None:
                row, col = divmod(cell, f.shape[1])
                row_s, col_s = str(row), str(col)
            else:
                row_s = col_s = ""
            lines.append(
                ",".join(
                    [
                        str(int(token)),
                        manifest.token_labels[token],
                        "1" if degenerate[i] else "0",
                        str(cell),
                        row_s,
                        col_s,
                        repr(float(value)),
                    ]
                )
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv: list[str] | None = None) -> int:
    """Run the CLI; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except FileNotFoundError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 2
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
