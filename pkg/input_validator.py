#!/usr/bin/env python3

import argparse
import re
from pathlib import Path
from typing import Any, Dict, List

from activations import ActivationError, parse_activation

MAX_SEED = 2**32 - 1


class InputValidator:
    # key -> accepted JSON types
    EXPERIMENT_KEYS: Dict[str, tuple] = {
        "name": (str,),
        "dataset": (str,),
        "data_dir": (str,),
        "data_seed": (int,),
        "architecture": (str,),
        "activation": (str, list),
        "optimizer": (dict,),
        "epochs": (int,),
        "batch_size": (int,),
        "seed": (int,),
        "train_subset": (int, type(None)),
        "test_subset": (int, type(None)),
        "synthetic_train_size": (int,),
        "synthetic_test_size": (int,),
        "synthetic_image_shape": (list,),
        "num_classes": (int,),
        "augment": (dict, bool, type(None)),
        "output_dir": (str,),
        "progress": (bool,),
    }
    VALID_DATASETS = {"synthetic", "fashion-mnist"}
    VALID_ARCHITECTURES = {"lenet", "kerasnet-mini", "tiny"}
    AUGMENT_KEYS = {"horizontal_flip", "flip_probability", "shift"}

    def __init__(self):
        self.run_name_pattern = re.compile(r"^[a-zA-Z0-9._-]{1,100}$")

    def sanitize_seed(self, seed: Any) -> int:
        if isinstance(seed, bool):
            raise ValueError(f"Seed must be an integer, got {seed!r}")
        if isinstance(seed, str):
            seed = seed.strip()
            if not seed:
                raise ValueError("Seed cannot be empty")
            if not seed.isdigit():
                raise ValueError(f"Seed must be a non-negative integer, got '{seed}'")
            seed = int(seed)
        if not isinstance(seed, int):
            raise ValueError(f"Seed must be an integer, got {seed!r}")
        if not 0 <= seed <= MAX_SEED:
            raise ValueError(f"Seed must be in [0, {MAX_SEED}], got {seed}")
        return seed

    def sanitize_activation_spec(self, spec: str) -> str:
        if not isinstance(spec, str) or not spec.strip():
            raise ValueError("Activation spec cannot be empty")

        spec = spec.strip()

        if len(spec) > 200:
            raise ValueError(f"Activation spec too long (max 200 chars): {spec[:40]}...")

        try:
            parse_activation(spec)
        except ActivationError as e:
            raise ValueError(str(e))

        return spec

    def sanitize_run_name(self, name: str) -> str:
        if not name:
            raise ValueError("Run name cannot be empty")

        name = name.strip()

        if not self.run_name_pattern.match(name):
            raise ValueError(
                f"Invalid run name: {name}. Use only letters, numbers, dots, underscores and hyphens."
            )

        return name

    def validate_data_dir(self, path: Path, description: str = "Data directory") -> Path:
        try:
            resolved_path = path.expanduser().resolve()

            if not resolved_path.exists():
                raise ValueError(f"{description} does not exist: {resolved_path}")
            if not resolved_path.is_dir():
                raise ValueError(f"{description} is not a directory: {resolved_path}")

            return resolved_path

        except PermissionError as e:
            raise ValueError(f"Invalid {description} - permission denied: {e}")
        except OSError as e:
            raise ValueError(f"Invalid {description} - file system error: {e}")
        except (TypeError, AttributeError) as e:
            raise ValueError(f"Invalid {description} - invalid path format: {e}")

    def validate_output_dir(self, path: Path) -> Path:
        try:
            resolved_path = path.expanduser().resolve()
        except (OSError, TypeError, AttributeError) as e:
            raise ValueError(f"Invalid output directory: {e}")

        if resolved_path.exists() and not resolved_path.is_dir():
            raise ValueError(f"Output path exists and is not a directory: {resolved_path}")

        return resolved_path

    def _positive_int(self, data: Dict[str, Any], key: str, issues: List[str]) -> None:
        value = data.get(key)
        if isinstance(value, int) and not isinstance(value, bool) and value < 1:
            issues.append(f"{key} must be >= 1, got {value}")

    def validate_experiment_dict(self, data: Any) -> Dict[str, Any]:
        """Check keys, types and ranges of an experiment config; returns it unchanged"""
        if not isinstance(data, dict):
            raise ValueError("Experiment config must be a JSON object")

        issues: List[str] = []

        unknown = sorted(set(data) - set(self.EXPERIMENT_KEYS))
        if unknown:
            issues.append(f"Unknown keys: {', '.join(unknown)}")

        for key, types in self.EXPERIMENT_KEYS.items():
            if key not in data:
                continue
            value = data[key]
            if isinstance(value, bool) and bool not in types:
                issues.append(f"{key} must be {'/'.join(t.__name__ for t in types)}")
            elif not isinstance(value, types):
                issues.append(f"{key} must be {'/'.join(t.__name__ for t in types)}")

        if issues:
            raise ValueError("; ".join(issues))

        if "dataset" in data and data["dataset"] not in self.VALID_DATASETS:
            issues.append(
                f"dataset must be one of {', '.join(sorted(self.VALID_DATASETS))}"
            )
        if "architecture" in data and data["architecture"] not in self.VALID_ARCHITECTURES:
            issues.append(
                f"architecture must be one of {', '.join(sorted(self.VALID_ARCHITECTURES))}"
            )

        activation = data.get("activation")
        specs = activation if isinstance(activation, list) else [activation]
        for spec in specs:
            if spec is None:
                continue
            try:
                self.sanitize_activation_spec(spec)
            except ValueError as e:
                issues.append(str(e))

        for key in (
            "epochs",
            "batch_size",
            "train_subset",
            "test_subset",
            "synthetic_train_size",
            "synthetic_test_size",
        ):
            self._positive_int(data, key, issues)

        if "num_classes" in data and data["num_classes"] < 2:
            issues.append(f"num_classes must be >= 2, got {data['num_classes']}")

        for key in ("seed", "data_seed"):
            if key in data:
                try:
                    self.sanitize_seed(data[key])
                except ValueError as e:
                    issues.append(f"{key}: {e}")

        shape = data.get("synthetic_image_shape")
        if shape is not None and (
            len(shape) != 3
            or not all(isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in shape)
        ):
            issues.append("synthetic_image_shape must be three positive integers [C, H, W]")

        augment = data.get("augment")
        if isinstance(augment, dict):
            extra = sorted(set(augment) - self.AUGMENT_KEYS)
            if extra:
                issues.append(f"Unknown augment keys: {', '.join(extra)}")

        if "name" in data:
            try:
                self.sanitize_run_name(data["name"])
            except ValueError as e:
                issues.append(str(e))

        if issues:
            raise ValueError("; ".join(issues))

        return data

    def validate_inputs(self, args: argparse.Namespace) -> bool:
        """Check train command arguments, normalizing them in place"""
        try:
            if not args.config:
                print("❌ Error: --config is required")
                return False

            if not Path(args.config).is_file():
                print(f"❌ Error: Config file not found: {args.config}")
                return False

            if args.seed is not None:
                try:
                    args.seed = self.sanitize_seed(args.seed)
                except ValueError as e:
                    print(f"❌ Error: {e}")
                    return False

            if args.epochs is not None and args.epochs < 1:
                print(f"❌ Error: --epochs must be >= 1, got {args.epochs}")
                return False

            if args.output_dir:
                try:
                    args.output_dir = str(self.validate_output_dir(Path(args.output_dir)))
                except ValueError as e:
                    print(f"❌ Error: {e}")
                    return False

            return True

        except (AttributeError, TypeError) as e:
            print(f"❌ Input validation error - invalid argument format: {e}")
            return False
