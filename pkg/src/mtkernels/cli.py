"""Batch command line front end.

Subcommands: ``lebesgue`` (grid diagnostics report), ``fit`` (solver sweep
over a lambda grid), ``predict`` (apply a saved model), ``synth`` (write
the synthetic dataset), and ``eval`` (dense block kernel matrix between
point sets). Configuration comes from a JSON file via ``--config`` with
individual flags taking precedence. Reports are JSON with sorted keys so
identical configurations produce byte-identical outputs.

Exit codes: 0 on success, 2 when the lebesgue subcommand finds the strict
bound violated (the report is still written), 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    flatten_targets,
    load_csv,
    load_idx,
    parse_synth_spec,
    write_csv_matrix,
)
from .experiments import DEFAULT_LAMBDA_GRID, fit_l1_path
from .interpolation import CoefficientVector, RepresenterFunction
from .kernels import (
    CouplingMatrix,
    MultiTaskKernel,
    SampleSet,
    assemble_gram,
    block_kernel_matrix,
    parse_kernel,
)
from .lebesgue import check_admissibility, lebesgue_constant, uniform_grid
from .solvers import AdmmParams, fit_ridge, metrics


@dataclass
class ExperimentConfig:
    """Validated bag of experiment settings shared by the subcommands."""

    kernel: str = "exponential:r=1.0"
    coupling: str = "identity:1"
    dataset: dict | None = None
    task: str | None = None
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    solver: str = "both"
    admm: AdmmParams = field(default_factory=AdmmParams)
    select: str = "train"
    select_dataset: dict | None = None
    points: object = None
    grid: object = None
    model: str | None = None
    output: str | None = None
    seed: int | None = None

    def __post_init__(self):
        self.lambda_grid = tuple(float(v) for v in self.lambda_grid)
        if not self.lambda_grid or any(v <= 0 for v in self.lambda_grid):
            raise ValueError("lambda grid must be nonempty with positive entries")
        if self.solver not in ("l1", "ridge", "both"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.task not in (None, "regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.select not in ("train", "test", "accuracy"):
            raise ValueError(f"unknown selection rule {self.select!r}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(mapping)
        if "admm" in kwargs and isinstance(kwargs["admm"], dict):
            kwargs["admm"] = AdmmParams(**kwargs["admm"])
        return cls(**kwargs)


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    mapping: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            mapping = json.load(fh)
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key in ExperimentConfig.__dataclass_fields__ and value is not None
    }
    mapping.update(overrides)
    return ExperimentConfig.from_mapping(mapping)


def _resolve_coupling(spec: str) -> CouplingMatrix:
    if spec.startswith("identity:"):
        return CouplingMatrix.identity(int(spec.split(":", 1)[1]))
    return CouplingMatrix.from_csv(spec)


def _resolve_points(value) -> np.ndarray:
    """Points from an inline list or a CSV path."""
    if value is None:
        raise ValueError("no points specified")
    if isinstance(value, str):
        return np.loadtxt(value, delimiter=",", ndmin=2)
    return np.atleast_2d(np.asarray(value, dtype=float))


def _parse_uniform_axis(text: str) -> tuple[float, float, int]:
    body = text.split(":", 1)[1]
    lo, hi, count = body.split(",")
    return float(lo), float(hi), int(count)


def _resolve_grid(value) -> np.ndarray:
    """Grid from ``uniform:lo,hi,count`` specs (one per dimension), a CSV path, or inline points."""
    if value is None:
        raise ValueError("no grid specified")
    if isinstance(value, str):
        if value.startswith("uniform:"):
            return uniform_grid([_parse_uniform_axis(value)])
        return np.loadtxt(value, delimiter=",", ndmin=2)
    if isinstance(value, (list, tuple)) and value and isinstance(value[0], str):
        return uniform_grid([_parse_uniform_axis(item) for item in value])
    return np.atleast_2d(np.asarray(value, dtype=float))


def _resolve_dataset(spec: dict | None, default_seed: int | None) -> Dataset:
    if spec is None:
        raise ValueError("no dataset specified")
    kind = spec.get("kind")
    if kind == "synth":
        text = spec["spec"]
        if default_seed is not None and "seed=" not in text:
            text += f",seed={default_seed}"
        return parse_synth_spec(text)
    if kind == "csv":
        return load_csv(
            spec["features"], spec["targets"], header=bool(spec.get("header", False))
        )
    if kind == "idx":
        return load_idx(spec["images"], spec["labels"], keep_labels=spec.get("keep"))
    raise ValueError(f"unknown dataset kind {kind!r}")


def _write_json(payload: dict, path: str | Path | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _build_kernel(config: ExperimentConfig) -> MultiTaskKernel:
    return MultiTaskKernel(parse_kernel(config.kernel), _resolve_coupling(config.coupling))


def cmd_lebesgue(config: ExperimentConfig, admissibility: bool = False) -> int:
    """Write the Lebesgue report; exit 2 when the strict bound fails."""
    kernel = _build_kernel(config)
    samples = SampleSet(_resolve_points(config.points))
    grid = _resolve_grid(config.grid)
    report = lebesgue_constant(kernel, samples, grid)
    payload = report.to_dict()
    if admissibility:
        payload["admissibility"] = check_admissibility(
            kernel, [samples], grid
        ).to_dict()
    _write_json(payload, config.output)
    return 0 if report.satisfies_strict else 2


def _model_payload(config, result, samples, task) -> dict:
    return {
        "kind": "representer_model",
        "kernel": config.kernel,
        "coupling": _resolve_coupling(config.coupling).entries.tolist(),
        "samples": samples.points.tolist(),
        "d": result.model.kernel.d,
        "coefficients": result.model.coefficients.values.tolist(),
        "lambda": result.lam,
        "task": task,
    }


def load_model(path) -> tuple[RepresenterFunction, str]:
    """Rebuild a representer function from a model JSON file."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("kind") != "representer_model":
        raise ValueError(f"{path}: not a model file")
    kernel = MultiTaskKernel(
        parse_kernel(payload["kernel"]), CouplingMatrix(np.array(payload["coupling"]))
    )
    model = RepresenterFunction(
        kernel=kernel,
        samples=SampleSet(np.array(payload["samples"])),
        coefficients=CoefficientVector(np.array(payload["coefficients"]), payload["d"]),
    )
    return model, payload.get("task", "regression")


def _coefficient_rows(coeffs: CoefficientVector) -> list[str]:
    return [
        f"{j},{t},{coeffs.blocks[j, t]!r}"
        for j in range(coeffs.m)
        for t in range(coeffs.d)
    ]


def cmd_fit(config: ExperimentConfig) -> int:
    """Sweep the lambda grid per solver, select a model, write reports."""
    dataset = _resolve_dataset(config.dataset, config.seed)
    if dataset.m == 0:
        raise ValueError("dataset is empty")
    task = config.task or "regression"
    kernel = _build_kernel(config)
    if kernel.d != dataset.d:
        raise ValueError(
            f"coupling dimension {kernel.d} does not match targets d={dataset.d}"
        )
    x = SampleSet(dataset.features)
    y = flatten_targets(dataset)
    gram = assemble_gram(kernel, x)

    select_x, select_y = x, y
    if config.select == "test":
        if config.select_dataset is None:
            raise ValueError("select=test requires select_dataset")
        select_ds = _resolve_dataset(config.select_dataset, config.seed)
        select_x, select_y = SampleSet(select_ds.features), flatten_targets(select_ds)

    solver_names = ("l1", "ridge") if config.solver == "both" else (config.solver,)
    outdir = Path(config.output) if config.output else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)

    payload = {
        "task": task,
        "kernel": config.kernel,
        "lambda_grid": sorted(config.lambda_grid),
        "solvers": {},
    }
    for name in solver_names:
        if name == "l1":
            results = fit_l1_path(kernel, x, y, config.lambda_grid, config.admm, gram)
        else:
            results = {
                lam: fit_ridge(kernel, x, y, lam, gram=gram)
                for lam in config.lambda_grid
            }
        per_lambda = []
        for lam in sorted(results):
            res = results[lam]
            rec = metrics(res.model, select_x, select_y, task)
            entry = {
                "lambda": lam,
                "objective": res.objective,
                "mse": rec.mse,
                "sparsity": res.sparsity,
                "iterations": res.iterations,
                "converged": res.converged,
            }
            if task == "classification":
                entry["accuracy"] = rec.accuracy
            per_lambda.append(entry)

        if config.select == "accuracy":
            if task != "classification":
                raise ValueError("select=accuracy requires a classification task")
            best = max(per_lambda, key=lambda e: (e["accuracy"], e["lambda"]))
        else:
            best = min(per_lambda, key=lambda e: (e["mse"], e["lambda"]))
        result = results[best["lambda"]]

        model_csv = outdir / f"model_{name}.csv"
        model_csv.write_text(
            "\n".join(_coefficient_rows(result.model.coefficients)) + "\n",
            encoding="utf-8",
        )
        _write_json(
            _model_payload(config, result, x, task),
            outdir / f"model_{name}.json",
        )
        payload["solvers"][name] = {
            "per_lambda": per_lambda,
            "selected_lambda": best["lambda"],
            "selected": best,
        }
    _write_json(payload, outdir / "metrics.json")
    return 0


def cmd_predict(config: ExperimentConfig) -> int:
    """Apply a saved model to a dataset; write predictions and metrics."""
    if config.model is None:
        raise ValueError("no model file specified")
    model, model_task = load_model(config.model)
    task = config.task or model_task
    dataset = _resolve_dataset(config.dataset, config.seed)
    if dataset.m == 0:
        raise ValueError("dataset is empty")
    if dataset.n != model.samples.n:
        raise ValueError(
            f"dataset features in R^{dataset.n}, model expects R^{model.samples.n}"
        )
    if dataset.d != model.kernel.d:
        raise ValueError(
            f"dataset targets d={dataset.d}, model predicts d={model.kernel.d}"
        )
    test_x = SampleSet(dataset.features)
    rec = metrics(model, test_x, flatten_targets(dataset), task)

    outdir = Path(config.output) if config.output else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv_matrix(model.predict(test_x.points), outdir / "predictions.csv")
    payload = rec.to_dict()
    if task == "classification" and dataset.label_values is not None:
        payload["misclassified"] = [
            [i, dataset.label_values[true], dataset.label_values[pred]]
            for i, true, pred in rec.misclassified
        ]
    _write_json(payload, outdir / "metrics.json")
    return 0


def cmd_synth(spec: str, features_out: str, targets_out: str) -> int:
    """Generate the synthetic dataset and write feature/target CSVs."""
    dataset = parse_synth_spec(spec)
    write_csv_matrix(dataset.features, features_out)
    write_csv_matrix(dataset.targets, targets_out)
    return 0


def cmd_eval(kernel_spec: str, coupling_spec: str, points, points2, output) -> int:
    """Write the dense block kernel matrix between two point sets."""
    kernel = MultiTaskKernel(parse_kernel(kernel_spec), _resolve_coupling(coupling_spec))
    pa = _resolve_points(points)
    pb = pa if points2 is None else _resolve_points(points2)
    write_csv_matrix(block_kernel_matrix(kernel, pa, pb), output)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtkernels",
        description="sparse multi-task kernel learning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--kernel", help="kernel descriptor, e.g. exponential:r=1.0")
    common.add_argument("--coupling", help="coupling CSV path or identity:d")
    common.add_argument("--output", help="output path (report) or directory (fit/predict)")
    common.add_argument("--seed", type=int, help="seed applied to seedless dataset specs")

    p = sub.add_parser("lebesgue", parents=[common], help="Lebesgue constant report")
    p.add_argument("--points", help="sample points CSV")
    p.add_argument("--grid", help="grid: uniform:lo,hi,count or CSV path")
    p.add_argument(
        "--admissibility", action="store_true", help="include admissibility diagnostics"
    )

    p = sub.add_parser("fit", parents=[common], help="fit solvers over the lambda grid")
    p.add_argument("--task", choices=["regression", "classification"])
    p.add_argument("--solver", choices=["l1", "ridge", "both"])
    p.add_argument("--lambda-grid", dest="lambda_grid", help="comma separated values")
    p.add_argument("--select", choices=["train", "test", "accuracy"])

    p = sub.add_parser("predict", parents=[common], help="apply a saved model")
    p.add_argument("--model", help="model JSON file written by fit")
    p.add_argument("--task", choices=["regression", "classification"])

    p = sub.add_parser("synth", help="write the synthetic dataset as CSV")
    p.add_argument("--spec", required=True, help="synth:h=...,noise=...,seed=...")
    p.add_argument("--features-out", required=True)
    p.add_argument("--targets-out", required=True)

    p = sub.add_parser("eval", help="evaluate the block kernel matrix on points")
    p.add_argument("--kernel", required=True)
    p.add_argument("--coupling", default="identity:1")
    p.add_argument("--points", required=True, help="points CSV")
    p.add_argument("--points2", help="second points CSV (defaults to --points)")
    p.add_argument("--output", required=True)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args.spec, args.features_out, args.targets_out)
        if args.command == "eval":
            return cmd_eval(
                args.kernel, args.coupling, args.points, args.points2, args.output
            )
        if getattr(args, "lambda_grid", None) is not None:
            args.lambda_grid = tuple(float(v) for v in args.lambda_grid.split(","))
        config = _load_config(args)
        if args.command == "lebesgue":
            return cmd_lebesgue(config, admissibility=args.admissibility)
        if args.command == "fit":
            return cmd_fit(config)
        if args.command == "predict":
            return cmd_predict(config)
        raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:  # noqa: BLE001 - CLI boundary maps errors to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
