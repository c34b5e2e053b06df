"""Command-line front-end: load data, fit or attach a model, estimate every
feature's importance with confidence intervals, and write the result.

Exit codes: 0 success, 1 user error (arguments, data, configuration),
2 model-contract or external-protocol error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from typing import IO

from . import __version__
from .ablation import compute_delta_matrix, derive_seed, draw_replacement_table
from .core import (
    AblationError,
    InvalidArgumentError,
    LossSpec,
    ModelContractError,
    fixed_data_risk,
)
from .estimator import fd_samples, rv_samples
from .io import (
    RESULT_FORMATS,
    RunConfig,
    RunResult,
    load_csv,
    read_csv_header,
    to_jsonable,
    write_result,
    write_text,
)
from .models import DEFAULT_BATCH_TIMEOUT, build_model, format_number, parse_model_spec
from .oracle import simulate_coverage
from .uncertainty import ImportanceEstimate, confidence_interval

RV_INDEPENDENCE_NOTE = (
    "rv formulation with K > 1 treats the N*K row/replacement cross products "
    "as independent samples"
)


def parse_loss_spec(text: str) -> LossSpec:
    """Parse a --loss string: squared | absolute | zero_one[:t=<x>] | log_loss."""
    name, _, params = text.partition(":")
    if name in ("squared", "absolute", "log_loss"):
        if params:
            raise InvalidArgumentError(f"loss {name!r} takes no parameters")
        return LossSpec(kind=name)
    if name == "zero_one":
        if not params:
            return LossSpec(kind="zero_one")
        key, _, raw = params.partition("=")
        if key != "t":
            raise InvalidArgumentError(f"zero_one takes t=<x>, got {params!r}")
        try:
            return LossSpec(kind="zero_one", threshold=float(raw))
        except ValueError as exc:
            raise InvalidArgumentError(f"bad zero_one threshold {raw!r}") from exc
    raise InvalidArgumentError(f"unknown loss {name!r}")


def _stable_feature_order(config: RunConfig) -> dict[str, int]:
    """Feature name -> its index among all non-target CSV columns.

    Per-feature seeds key off this position, so narrowing --features never
    changes the draws of the features that remain.
    """
    header = read_csv_header(config.data_path)
    order = [name for name in header if name != config.target_column]
    return {name: i for i, name in enumerate(order)}


def run_pipeline(
    config: RunConfig, batch_timeout: float = DEFAULT_BATCH_TIMEOUT
) -> RunResult:
    """Execute a full importance run described by ``config``."""
    data = load_csv(config.data_path, config.target_column, config.feature_columns)
    stable_index = _stable_feature_order(config)
    formulations = ["rv", "fd"] if config.formulation == "both" else [config.formulation]

    model = build_model(config.model, data, batch_timeout=batch_timeout)
    try:
        baseline = fixed_data_risk(model, data, config.loss)
        estimates: list[ImportanceEstimate] = []
        for i, name in enumerate(data.feature_names):
            feature_seed = derive_seed(config.seed, stable_index[name])
            table = draw_replacement_table(
                data, i, config.K, feature_seed, mode=config.mode
            )
            grid = compute_delta_matrix(model, data, config.loss, table)
            for formulation in formulations:
                samples = (rv_samples if formulation == "rv" else fd_samples)(grid)
                interval = confidence_interval(
                    samples,
                    level=config.confidence_level,
                    method=config.ci_method,
                    variance=config.variance,
                )
                estimates.append(
                    ImportanceEstimate(
                        feature_index=i,
                        feature_name=name,
                        point=interval.point,
                        sem=interval.sem,
                        ci_low=interval.ci_low,
                        ci_high=interval.ci_high,
                        confidence_level=config.confidence_level,
                        formulation=formulation,
                        n_samples=int(samples.values.size),
                        K=table.K,
                        mode=table.mode,
                        seed=table.seed,
                        ci_method=config.ci_method,
                    )
                )
    finally:
        close = getattr(model, "close", None)
        if close is not None:
            close()

    notes = ()
    if "rv" in formulations and config.K > 1:
        notes = (RV_INDEPENDENCE_NOTE,)
    return RunResult(
        baseline_risk=baseline.risk,
        estimates=tuple(estimates),
        config_echo=config,
        library_version=__version__,
        notes=notes,
    )


@dataclass(frozen=True)
class CoverageRunResult:
    """Coverage simulation output for each feature and formulation."""

    reports: tuple[dict, ...]
    config_echo: RunConfig
    library_version: str


def run_coverage(
    config: RunConfig, replicates: int, batch_timeout: float = DEFAULT_BATCH_TIMEOUT
) -> CoverageRunResult:
    """Run the coverage simulator for every selected feature."""
    data = load_csv(config.data_path, config.target_column, config.feature_columns)
    formulations = ["rv", "fd"] if config.formulation == "both" else [config.formulation]

    model = build_model(config.model, data, batch_timeout=batch_timeout)
    reports: list[dict] = []
    try:
        for i, name in enumerate(data.feature_names):
            for formulation in formulations:
                report = simulate_coverage(
                    model,
                    data,
                    i,
                    config.loss,
                    K=config.K,
                    level=config.confidence_level,
                    formulation=formulation,
                    replicates=replicates,
                    seed=config.seed,
                )
                reports.append(
                    {
                        "feature_index": i,
                        "feature_name": name,
                        "replicates": report.replicates,
                        "hits": report.hits,
                        "coverage": report.coverage,
                        "target_level": report.target_level,
                        "formulation": report.formulation,
                    }
                )
    finally:
        close = getattr(model, "close", None)
        if close is not None:
            close()

    return CoverageRunResult(
        reports=tuple(reports), config_echo=config, library_version=__version__
    )


class _CliParser(argparse.ArgumentParser):
    """argparse, but argument problems are user errors (exit 1, not 2)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise InvalidArgumentError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _CliParser(
        prog="ablate-ci",
        description=(
            "Measure each feature's importance to a model by randomized "
            "ablation, with confidence intervals."
        ),
    )
    parser.add_argument("--data", required=True, help="input CSV file")
    parser.add_argument("--target", required=True, help="target column name")
    parser.add_argument(
        "--features",
        default=None,
        help="comma-separated feature columns (default: all non-target columns)",
    )
    parser.add_argument(
        "--model",
        default="builtin:ols",
        help=(
            "builtin:constant[:v=<x>] | builtin:ols[:lambda=<x>] | "
            "builtin:knn[:k=<n>] | exec:<command>"
        ),
    )
    parser.add_argument(
        "--loss",
        default="squared",
        help="squared | absolute | zero_one[:t=<x>] | log_loss",
    )
    parser.add_argument("--K", type=int, default=30, help="replicates per feature")
    parser.add_argument(
        "--mode",
        choices=["resample", "permute", "exact"],
        default="resample",
        help="how replacement values are drawn",
    )
    parser.add_argument(
        "--formulation", choices=["rv", "fd", "both"], default="both"
    )
    parser.add_argument("--level", type=float, default=0.95, help="confidence level")
    parser.add_argument(
        "--ci-method", choices=["t", "normal"], default="t", dest="ci_method"
    )
    parser.add_argument(
        "--variance", choices=["mle", "unbiased"], default="mle"
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--format", choices=list(RESULT_FORMATS), default="json")
    parser.add_argument(
        "--coverage",
        type=int,
        default=None,
        metavar="REPLICATES",
        help="run the CI coverage simulator instead of a plain estimate",
    )
    parser.add_argument(
        "--serial",
        action="store_true",
        help="force one in-flight batch for exec models (their default)",
    )
    parser.add_argument(
        "--batch-timeout",
        type=float,
        default=DEFAULT_BATCH_TIMEOUT,
        metavar="SECONDS",
        help="per-batch timeout for exec models",
    )
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    features = None
    if args.features is not None:
        features = tuple(name.strip() for name in args.features.split(",") if name.strip())
        if not features:
            raise InvalidArgumentError("--features given but no names parsed")
    model_spec = parse_model_spec(args.model)
    if args.serial and model_spec.kind == "exec":
        model_spec = replace(model_spec, serial=True)
    return RunConfig(
        data_path=args.data,
        target_column=args.target,
        feature_columns=features,
        model=model_spec,
        loss=parse_loss_spec(args.loss),
        K=args.K,
        mode=args.mode,
        formulation=args.formulation,
        confidence_level=args.level,
        ci_method="student_t" if args.ci_method == "t" else "normal",
        seed=args.seed,
        variance=args.variance,
    )


def _emit(result, fmt: str, out: str | None, stdout: IO[str]) -> None:
    if out is None:
        write_result(result, fmt, stdout)
    else:
        write_result(result, fmt, out)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _config_from_args(args)
        if args.coverage is not None:
            coverage = run_coverage(
                config, replicates=args.coverage, batch_timeout=args.batch_timeout
            )
            _emit_coverage(coverage, args.format, args.out, sys.stdout)
        else:
            result = run_pipeline(config, batch_timeout=args.batch_timeout)
            _emit(result, args.format, args.out, sys.stdout)
        return 0
    except ModelContractError as exc:
        print(f"ablate-ci: model error: {exc}", file=sys.stderr)
        return 2
    except (AblationError, OSError) as exc:
        print(f"ablate-ci: error: {exc}", file=sys.stderr)
        return 1


def _emit_coverage(
    coverage: CoverageRunResult, fmt: str, out: str | None, stdout: IO[str]
) -> None:
    if fmt == "json":
        text = json.dumps(to_jsonable(coverage), indent=2) + "\n"
    else:
        lines = ["feature,formulation,replicates,hits,coverage,target_level"]
        for r in coverage.reports:
            lines.append(
                ",".join(
                    [
                        r["feature_name"],
                        r["formulation"],
                        str(r["replicates"]),
                        str(r["hits"]),
                        format_number(r["coverage"]),
                        format_number(r["target_level"]),
                    ]
                )
            )
        text = "\n".join(lines) + "\n"
    write_text(text, stdout if out is None else out)


if __name__ == "__main__":
    sys.exit(main())
