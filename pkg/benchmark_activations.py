#!/usr/bin/env python3
"""
Benchmark script comparing activation specs across seeds on one base config
"""

import argparse
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

from harness import DivergenceError, ExperimentError, load_config, run_experiment

DEFAULT_ACTIVATIONS = ["relu", "aff{id,relu,tanh}", "conv{id,relu}", "lrelu(0.01)"]
DEFAULT_SEEDS = 3


@dataclass
class BenchmarkRun:
    seed: int
    test_accuracy: float
    # Final coefficient vector per combined layer; empty for fixed activations
    coefficients: Dict[str, List[float]] = field(default_factory=dict)

    @property
    def diverged(self) -> bool:
        return bool(np.isnan(self.test_accuracy))


def slugify(spec: str) -> str:
    """Directory-safe name for an activation spec"""
    return re.sub(r"[^a-z0-9.]+", "-", spec.lower()).strip("-")


def run_grid(
    config_path: str, activations: List[str], seeds: int, output_root: Path
) -> Dict[str, List[BenchmarkRun]]:
    results: Dict[str, List[BenchmarkRun]] = {}
    for spec in activations:
        results[spec] = []
        for seed in range(seeds):
            overrides = {
                "activation": spec,
                "seed": seed,
                "output_dir": str(output_root / f"{slugify(spec)}-seed{seed}"),
                "progress": False,
            }
            config = load_config(config_path, overrides)
            try:
                record = run_experiment(config)
                results[spec].append(
                    BenchmarkRun(seed, record.test_accuracy, dict(record.coefficients))
                )
            except DivergenceError as e:
                print(f"⚠️  {spec} seed {seed} diverged: {e}")
                results[spec].append(BenchmarkRun(seed, float("nan")))
    return results


def median_accuracy(runs: List[BenchmarkRun]) -> float:
    """Median over runs that finished; nan when every run diverged"""
    accuracies = [run.test_accuracy for run in runs]
    if not accuracies or np.all(np.isnan(accuracies)):
        return float("nan")
    return float(np.nanmedian(accuracies))


def format_coefficients(coefficients: Dict[str, List[float]]) -> str:
    return "; ".join(
        f"{layer}=[{', '.join(f'{c:.4f}' for c in values)}]"
        for layer, values in coefficients.items()
    )


def summary_lines(results: Dict[str, List[BenchmarkRun]]) -> List[str]:
    """Median table followed by the final coefficients of every run"""
    lines = [
        "📊 Median Test Accuracy:",
        f"{'ACTIVATION':<24} {'MEDIAN':<8} {'RUNS'}",
        "-" * 50,
    ]
    for spec, runs in results.items():
        accuracies = ", ".join(f"{run.test_accuracy:.4f}" for run in runs)
        lines.append(f"{spec:<24} {median_accuracy(runs):<8.4f} {accuracies}")

    coefficient_lines = [
        f"{spec} seed {run.seed}: {format_coefficients(run.coefficients)}"
        for spec, runs in results.items()
        for run in runs
        if run.coefficients
    ]
    if coefficient_lines:
        lines += ["", "🧮 Final Coefficients:", *coefficient_lines]
    return lines


def main():
    parser = argparse.ArgumentParser(description="Median test accuracy per activation spec")
    parser.add_argument("--config", required=True, help="Base experiment config (JSON)")
    parser.add_argument(
        "--activations",
        nargs="+",
        default=DEFAULT_ACTIVATIONS,
        help="Activation specs to compare",
    )
    parser.add_argument("--seeds", type=int, default=DEFAULT_SEEDS, help="Seeds per spec")
    parser.add_argument(
        "--output-root", default="runs/benchmark", help="Parent directory for run outputs"
    )
    args = parser.parse_args()

    print("🚀 hullact Activation Benchmark")
    print("=" * 50)

    start_time = time.time()
    try:
        results = run_grid(args.config, args.activations, args.seeds, Path(args.output_root))
    except ExperimentError as e:
        print(f"❌ Benchmark failed: {e}")
        sys.exit(1)
    elapsed = time.time() - start_time

    print()
    for line in summary_lines(results):
        print(line)

    print(f"\n⏱️  Total time: {elapsed:.1f}s")


if __name__ == "__main__":
    main()
