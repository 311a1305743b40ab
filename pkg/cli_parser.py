#!/usr/bin/env python3
"""
CLI Parser - Handles command line argument parsing for hullact
"""

import argparse
from typing import Any, Dict, List, Optional


class CLIParser:
    """Handles command line argument parsing and validation"""

    def __init__(self, config: Dict[str, Any]):
        self.config = config
        self._parser: Optional[argparse.ArgumentParser] = None

    def build_parser(self) -> argparse.ArgumentParser:
        self._parser = argparse.ArgumentParser(
            prog="hullact",
            description="hullact - Learnable hull-constrained activations",
            epilog="""Common workflows:
  Fetch data:     hullact download --data-dir data/fashion-mnist
  Train:          hullact train --config configs/lenet_aff_id_relu_tanh.json
  Quick check:    hullact verify --quick
  Plot curves:    hullact curves --model runs/lenet-aff/model.npz --out curves.csv
  Inspect a run:  hullact show --run runs/lenet-aff""",
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        subparsers = self._parser.add_subparsers(dest="command", help="Available commands")

        self._add_train_parser(subparsers)
        self._add_verify_parser(subparsers)
        self._add_curves_parser(subparsers)
        self._add_download_parser(subparsers)
        self._add_show_parser(subparsers)

        return self._parser

    def parse_args(self, argv: Optional[List[str]] = None) -> argparse.Namespace:
        """Parse command line arguments"""
        return self.build_parser().parse_args(argv)

    def print_help(self) -> None:
        if self._parser is None:
            self.build_parser()
        assert self._parser is not None
        self._parser.print_help()

    def _add_train_parser(self, subparsers):
        """Add train command parser"""
        train_parser = subparsers.add_parser(
            "train",
            help="Train a network from an experiment config",
            description=(
                "Train one architecture/activation pair and write metrics, coefficients, "
                "the model and activation curves to the output directory."
            ),
            epilog="""Examples:
  %(prog)s --config configs/smoke_synthetic.json
  %(prog)s --config configs/lenet_relu.json --seed 3 --epochs 2
  HULLACT_SEED=7 %(prog)s --config configs/lenet_conv_id_relu.json \\
           --output-dir runs/conv-seed7 --no-progress""",
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        train_parser.add_argument(
            "--config", type=str, required=True, help="Path to experiment config (JSON)"
        )
        train_parser.add_argument(
            "--seed",
            type=str,
            help="Training seed (overrides HULLACT_SEED and the config file)",
        )
        train_parser.add_argument("--epochs", type=int, help="Override the number of epochs")
        train_parser.add_argument(
            "--output-dir",
            type=str,
            default=self.config.get("default_output_dir"),
            help="Run directory for artifacts. Default from the config file or hullact.json.",
        )
        train_parser.add_argument(
            "--data-dir",
            type=str,
            default=self.config.get("default_data_dir"),
            help="Directory holding the Fashion-MNIST IDX files",
        )
        train_parser.add_argument(
            "--no-progress", action="store_true", help="Disable the per-epoch progress bar"
        )

    def _add_verify_parser(self, subparsers):
        """Add verify command parser"""
        verify_parser = subparsers.add_parser(
            "verify",
            help="Run the correctness property suite",
            description=(
                "Check gradients, projections and activation identities. "
                "Exits with status 3 if any property fails."
            ),
            epilog="""Examples:
  %(prog)s
  %(prog)s --quick --seed 5""",
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        verify_parser.add_argument(
            "--quick", action="store_true", help="Run reduced trial counts (for CI)"
        )
        verify_parser.add_argument(
            "--seed", type=str, default="0", help="Seed for random trials (default: 0)"
        )

    def _add_curves_parser(self, subparsers):
        """Add curves command parser"""
        curves_parser = subparsers.add_parser(
            "curves",
            help="Export learned activation curves from a saved model",
            epilog="""Examples:
  %(prog)s --model runs/lenet-aff/model.npz --out curves.csv""",
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        curves_parser.add_argument(
            "--model", type=str, required=True, help="Path to a saved model (.npz)"
        )
        curves_parser.add_argument(
            "--out", type=str, required=True, help="Destination CSV file"
        )

    def _add_download_parser(self, subparsers):
        """Add download command parser"""
        download_parser = subparsers.add_parser(
            "download",
            help="Download the Fashion-MNIST IDX files",
        )
        download_parser.add_argument(
            "--data-dir",
            type=str,
            default=self.config.get("default_data_dir", "data/fashion-mnist"),
            help="Destination directory (default: data/fashion-mnist)",
        )

    def _add_show_parser(self, subparsers):
        """Add show command parser"""
        show_parser = subparsers.add_parser(
            "show",
            help="Show metrics history and coefficients of a run",
        )
        show_parser.add_argument(
            "--run", type=str, required=True, help="Run directory written by train"
        )
