#!/usr/bin/env python3
"""
hullact - Train and verify networks with learnable hull-constrained activations
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

from cli_parser import CLIParser
from activations import ActivationError
from data import DataError, download_fashion_mnist
from harness import (
    SEED_ENV_VAR,
    ConfigError,
    DataMissingError,
    DivergenceError,
    ExperimentError,
    export_activation_curves,
    load_config,
    run_experiment,
    summarize_run,
)
from input_validator import InputValidator
from layers import Network, NetworkError
from message_templates import MessageTemplates
from run_store import RunStore
from ui_utilities import UIUtilities
from verify import PROPERTIES, run_property_suite

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 2
EXIT_PROPERTY_FAILED = 3


class HullActCLI:
    def __init__(self, environ: Optional[Dict[str, str]] = None):
        self.environ = dict(os.environ) if environ is None else environ
        self.validator = InputValidator()
        self.ui = UIUtilities(self.validator)

        self.config = self._load_config()
        self.cli_parser = CLIParser(self.config)

    def parse_args(self, argv: Optional[List[str]] = None) -> argparse.Namespace:
        """Parse command line arguments"""
        return self.cli_parser.parse_args(argv)

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Dispatch a subcommand and return its exit code"""
        try:
            args = self.parse_args(argv)
        except SystemExit as e:
            # argparse exits 2 on usage errors; 2 is reserved for divergence
            return EXIT_OK if e.code in (0, None) else EXIT_ERROR

        if args.command is None:
            self.cli_parser.print_help()
            return EXIT_OK
        elif args.command == "train":
            return self.train(args)
        elif args.command == "verify":
            return self.verify(args)
        elif args.command == "curves":
            return self.curves(args)
        elif args.command == "download":
            return self.download(args)
        elif args.command == "show":
            return self.show(args)
        else:
            print("❌ Unknown command")
            return EXIT_ERROR

    def _load_config(self) -> Dict[str, Any]:
        """Load CLI defaults from hullact.json in current working directory"""
        config_path = Path.cwd() / "hullact.json"
        if config_path.exists():
            try:
                with open(config_path, "r") as f:
                    data = json.load(f)
                if isinstance(data, dict):
                    return data
                print(f"⚠️ Ignoring {config_path}: expected a JSON object")
            except json.JSONDecodeError as e:
                print(f"⚠️ Invalid JSON in config file {config_path}: {e}")
            except PermissionError:
                print(f"⚠️ Permission denied reading config file {config_path}")
            except OSError as e:
                print(f"⚠️ Error reading config file {config_path}: {e}")
        return {}

    def train(self, args: argparse.Namespace) -> int:
        if not self.validator.validate_inputs(args):
            return EXIT_ERROR

        if args.seed is None and self.environ.get(SEED_ENV_VAR):
            print(MessageTemplates.SEED_FROM_ENV.format(seed=self.environ[SEED_ENV_VAR]))

        overrides = {
            "seed": args.seed,
            "epochs": args.epochs,
            "output_dir": args.output_dir,
            "data_dir": args.data_dir,
            "progress": False if args.no_progress else None,
        }
        try:
            config = load_config(args.config, overrides, environ=self.environ)
            run_experiment(config)
        except DivergenceError as e:
            print(MessageTemplates.run_error("diverged", str(e)))
            return EXIT_DIVERGED
        except DataMissingError as e:
            print(MessageTemplates.data_missing(str(e), overrides["data_dir"] or "data/fashion-mnist"))
            return EXIT_ERROR
        except ConfigError as e:
            print(MessageTemplates.run_error("config", str(e)))
            return EXIT_ERROR
        except (ExperimentError, ActivationError, NetworkError, DataError, OSError) as e:
            print(MessageTemplates.run_error("failed", str(e)))
            return EXIT_ERROR
        return EXIT_OK

    def verify(self, args: argparse.Namespace) -> int:
        try:
            seed = self.validator.sanitize_seed(args.seed)
        except ValueError as e:
            print(f"❌ Error: {e}")
            return EXIT_ERROR

        print(MessageTemplates.verify_started(args.quick, len(PROPERTIES)))
        start = time.perf_counter()
        results = run_property_suite(
            quick=args.quick,
            seed=seed,
            on_result=lambda r: print(
                MessageTemplates.property_line(r.name, r.passed, r.detail, r.seconds)
            ),
        )
        elapsed = time.perf_counter() - start

        print()
        self.ui.show_property_report(results)
        failed = sum(1 for r in results if not r.passed)
        print(MessageTemplates.verify_summary(len(results), failed, elapsed))
        return EXIT_PROPERTY_FAILED if failed else EXIT_OK

    def curves(self, args: argparse.Namespace) -> int:
        try:
            net = Network.load(args.model)
        except NetworkError as e:
            print(MessageTemplates.run_error("model", str(e)))
            return EXIT_ERROR

        try:
            target = export_activation_curves(net, args.out)
        except OSError as e:
            print(MessageTemplates.run_error("failed", str(e)))
            return EXIT_ERROR

        count = len(net.combined_activations())
        if count:
            print(MessageTemplates.curves_written(count, str(target)))
        return EXIT_OK

    def download(self, args: argparse.Namespace) -> int:
        try:
            fetched = download_fashion_mnist(args.data_dir)
        except (DataError, OSError) as e:
            print(MessageTemplates.run_error("failed", str(e)))
            return EXIT_ERROR

        for path in fetched:
            print(MessageTemplates.DOWNLOAD_FILE.format(name=path.name))
        print(MessageTemplates.DOWNLOAD_DONE.format(data_dir=args.data_dir, count=len(fetched)))
        for name in self.ui.describe_data_dir(args.data_dir):
            print(f"   {name}")
        return EXIT_OK

    def show(self, args: argparse.Namespace) -> int:
        try:
            run_dir = self.validator.validate_data_dir(Path(args.run), "Run directory")
        except ValueError:
            print(MessageTemplates.RUN_NOT_FOUND.format(run_dir=args.run))
            return EXIT_ERROR

        try:
            summary = summarize_run(RunStore(run_dir))
        except (ValueError, OSError) as e:
            print(MessageTemplates.run_error("failed", str(e)))
            return EXIT_ERROR
        if summary is None:
            print(MessageTemplates.RUN_NOT_FOUND.format(run_dir=run_dir))
            return EXIT_ERROR

        self.ui.show_run(summary, run_dir)
        return EXIT_OK


def main():
    """Main entry point for the hullact CLI"""
    sys.exit(HullActCLI().run())


if __name__ == "__main__":
    main()
