#!/usr/bin/env python3
"""
Harness - Experiment configuration, training loop, evaluation and curve export
"""

import json
import os
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from activations import (
    ActivationError,
    CombinedActivation,
    eval_combined,
    parse_activation,
)
from data import (
    AugmentConfig,
    Dataset,
    augment,
    batches,
    load_fashion_mnist,
    make_synthetic,
    subset,
)
from input_validator import InputValidator
from layers import Network, NetworkError, build, preset
from message_templates import MessageTemplates
from optim import Optimizer, OptimizerConfig, OptimizerError
from run_store import CURVES_FILE, RunStore, atomic_write, format_number

SEED_ENV_VAR = "HULLACT_SEED"
CURVE_RANGE = (-5.0, 5.0)
CURVE_POINTS = 1001
EVAL_BATCH_SIZE = 256
MAX_CONFIG_SIZE = 1024 * 1024


class ExperimentError(Exception):
    """Base exception for experiment runs"""


class ConfigError(ExperimentError):
    """Experiment config is malformed or out of range"""


class DivergenceError(ExperimentError):
    """Training loss became NaN or infinite"""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"loss became {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class DataMissingError(ExperimentError):
    """Dataset files are not where the config says"""


@dataclass
class ExperimentConfig:
    name: str = "run"
    dataset: str = "synthetic"
    data_dir: str = "data/fashion-mnist"
    data_seed: int = 0
    architecture: str = "lenet"
    activation: Union[str, List[str]] = "relu"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    epochs: int = 1
    batch_size: int = 32
    seed: int = 0
    train_subset: Optional[int] = None
    test_subset: Optional[int] = None
    synthetic_train_size: int = 256
    synthetic_test_size: int = 64
    synthetic_image_shape: Tuple[int, int, int] = (1, 28, 28)
    num_classes: int = 10
    augment: Optional[AugmentConfig] = None
    output_dir: str = "runs/default"
    progress: bool = True

    def validate(self) -> None:
        try:
            InputValidator().validate_experiment_dict(self.to_dict())
            self.optimizer.validate()
            if self.augment is not None:
                self.augment.validate()
        except (ValueError, OptimizerError) as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["synthetic_image_shape"] = list(self.synthetic_image_shape)
        if isinstance(self.activation, list):
            data["activation"] = list(self.activation)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        raw = dict(data)
        try:
            InputValidator().validate_experiment_dict(raw)
            optimizer = OptimizerConfig.from_dict(raw.pop("optimizer", {}))
        except (ValueError, OptimizerError) as e:
            raise ConfigError(str(e)) from e

        augment_value = raw.pop("augment", None)
        if augment_value is True:
            augment_config: Optional[AugmentConfig] = AugmentConfig()
        elif isinstance(augment_value, dict):
            augment_config = AugmentConfig(**augment_value)
        else:
            augment_config = None
        if "synthetic_image_shape" in raw:
            raw["synthetic_image_shape"] = tuple(raw["synthetic_image_shape"])

        config = cls(optimizer=optimizer, augment=augment_config, **raw)
        config.validate()
        return config


def load_config(
    path: Union[str, Path],
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Read a JSON config; HULLACT_SEED beats the file, overrides beat both"""
    config_path = Path(path)
    try:
        if config_path.stat().st_size > MAX_CONFIG_SIZE:
            raise ConfigError(f"{config_path} is larger than {MAX_CONFIG_SIZE} bytes")
        with open(config_path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{config_path} is not valid JSON: {e}") from e
    except OSError as e:
        raise ConfigError(f"Cannot read {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{config_path} must hold a JSON object")

    env = os.environ if environ is None else environ
    if env.get(SEED_ENV_VAR):
        try:
            data["seed"] = InputValidator().sanitize_seed(env[SEED_ENV_VAR])
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV_VAR}: {e}") from e

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    return ExperimentConfig.from_dict(data)


@dataclass
class MetricsRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float
    seconds: float
    coefficients: Dict[str, List[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_datasets(config: ExperimentConfig) -> Tuple[Dataset, Dataset]:
    if config.dataset == "synthetic":
        train = make_synthetic(
            config.synthetic_train_size,
            config.num_classes,
            config.synthetic_image_shape,
            seed=config.data_seed,
        )
        test = make_synthetic(
            config.synthetic_test_size,
            config.num_classes,
            config.synthetic_image_shape,
            seed=config.data_seed + 1,
        )
    else:
        try:
            train = load_fashion_mnist(config.data_dir, "train")
            test = load_fashion_mnist(config.data_dir, "test")
        except FileNotFoundError as e:
            raise DataMissingError(str(e)) from e

    try:
        if config.train_subset is not None:
            train = subset(train, config.train_subset, seed=config.data_seed)
        if config.test_subset is not None:
            test = subset(test, config.test_subset, seed=config.data_seed)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return train, test


def evaluate(net: Any, ds: Dataset, batch_size: int = EVAL_BATCH_SIZE) -> float:
    """Top-1 accuracy with dropout inactive"""
    if len(ds) == 0:
        raise ExperimentError("Cannot evaluate on an empty dataset")
    correct = 0
    for images, labels in batches(ds, batch_size):
        logits = net.forward(images)
        correct += int(np.sum(np.argmax(logits, axis=1) == labels))
    return correct / len(ds)


def _activation_label(activation: Union[str, List[str]]) -> str:
    return activation if isinstance(activation, str) else ", ".join(activation)


def run_experiment(config: ExperimentConfig) -> MetricsRecord:
    """Train, evaluate every epoch and persist the run; returns the final record"""
    config.validate()
    train_ds, test_ds = load_datasets(config)
    try:
        spec = preset(
            config.architecture, config.activation, train_ds.image_shape, train_ds.num_classes
        )
    except (ValueError, NetworkError) as e:
        raise ConfigError(str(e)) from e
    net = build(spec, config.seed)
    optimizer = Optimizer(config.optimizer, net.coefficient_hulls())
    layer_names = {
        f"layer{index}": act.name for index, act in net.combined_activations().items()
    }

    store = RunStore(config.output_dir)
    run_id = store.create_run(config.to_dict())
    print(
        MessageTemplates.format_run_started(
            run_id=run_id,
            architecture=config.architecture,
            activation=_activation_label(config.activation),
            dataset=config.dataset,
            train_size=len(train_ds),
            test_size=len(test_ds),
            optimizer=config.optimizer.kind,
            learning_rate=config.optimizer.learning_rate,
            epochs=config.epochs,
            batch_size=config.batch_size,
            seed=config.seed,
            output_dir=str(store.output_dir),
        )
    )

    record: Optional[MetricsRecord] = None
    try:
        for epoch in range(1, config.epochs + 1):
            record = _train_epoch(net, optimizer, train_ds, test_ds, config, epoch)
            store.append_metrics(
                record.epoch,
                record.train_loss,
                record.train_accuracy,
                record.test_accuracy,
                record.seconds,
                record.coefficients,
            )
            store.update_status("running", progress_message=f"epoch {epoch} done")
            print(
                MessageTemplates.format_epoch_summary(
                    epoch,
                    config.epochs,
                    record.train_loss,
                    record.train_accuracy,
                    record.test_accuracy,
                    record.seconds,
                )
            )
            for line in MessageTemplates.format_coefficients(record.coefficients, layer_names):
                print(line)

        store.save_model(net)
        if net.combined_activations():
            export_activation_curves(net, store.path(CURVES_FILE))
    except DivergenceError as e:
        store.update_status("diverged", error_message=str(e))
        raise
    except Exception as e:
        store.update_status("failed", error_message=str(e))
        raise

    assert record is not None
    store.update_status("completed", final=record.to_dict())
    print(MessageTemplates.format_run_completed(run_id, record.test_accuracy, str(store.output_dir)))
    return record


def _train_epoch(
    net: Network,
    optimizer: Optimizer,
    train_ds: Dataset,
    test_ds: Dataset,
    config: ExperimentConfig,
    epoch: int,
) -> MetricsRecord:
    start = time.perf_counter()
    # dropout and augmentation draw from a per-epoch stream
    rng = np.random.default_rng([config.seed, epoch])
    total_loss = 0.0
    correct = 0

    pbar = tqdm(
        total=len(train_ds),
        desc=f"Epoch {epoch}/{config.epochs}",
        unit="img",
        leave=False,
        disable=not config.progress,
    )
    try:
        stream = batches(train_ds, config.batch_size, shuffle_seed=[config.seed, epoch])
        for batch_index, (images, labels) in enumerate(stream):
            if config.augment is not None:
                images = augment(images, config.augment, rng)
            loss, grads, graph = net.loss_and_grads(images, labels, rng=rng, training=True)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, batch_index, loss)
            logits = graph.node("loss").inputs[0].value
            correct += int(np.sum(np.argmax(logits, axis=1) == labels))
            total_loss += loss * len(labels)
            optimizer.apply(net.params, grads)

            pbar.update(len(labels))
            pbar.set_description(f"Epoch {epoch}/{config.epochs} (loss {loss:.4f})")
    finally:
        pbar.close()
    optimizer.end_epoch()

    net.check_constraints()
    return MetricsRecord(
        epoch=epoch,
        train_loss=total_loss / len(train_ds),
        train_accuracy=correct / len(train_ds),
        test_accuracy=evaluate(net, test_ds),
        seconds=time.perf_counter() - start,
        coefficients=net.coefficients(),
    )


# -- activation curves -----------------------------------------------------

_HEADER_PATTERN = re.compile(r"^# (layer\d+) (\S+) coefficients=(\[.*\])$")


@dataclass
class CurveTable:
    grid: np.ndarray
    columns: Dict[str, np.ndarray]
    coefficients: Dict[str, List[float]]
    activations: Dict[str, str]


def export_activation_curves(
    net: Network,
    path: Union[str, Path],
    grid: Optional[np.ndarray] = None,
) -> Path:
    """Write x and f(x) per combined layer; coefficients go in header comments"""
    target = Path(path)
    points = (
        np.linspace(CURVE_RANGE[0], CURVE_RANGE[1], CURVE_POINTS)
        if grid is None
        else np.asarray(grid, dtype=np.float64)
    )
    combined: Dict[int, CombinedActivation] = net.combined_activations()

    lines: List[str] = []
    if not combined:
        print(MessageTemplates.validation_warning(MessageTemplates.NO_COMBINED_ACTIVATIONS))
    else:
        columns = {}
        for index, act in combined.items():
            layer = f"layer{index}"
            lines.append(f"# {layer} {act.name} coefficients={json.dumps(act.coefficients.tolist())}")
            columns[layer] = eval_combined(act, points)
        lines.append(",".join(["x", *columns]))
        for row, x in enumerate(points):
            values = [format_number(x)] + [format_number(col[row]) for col in columns.values()]
            lines.append(",".join(values))

    with atomic_write(target) as temp_file:
        temp_file.write_text("\n".join(lines) + ("\n" if lines else ""))
    return target


def load_curves(path: Union[str, Path]) -> CurveTable:
    coefficients: Dict[str, List[float]] = {}
    activations: Dict[str, str] = {}
    header: List[str] = []
    rows: List[List[float]] = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            match = _HEADER_PATTERN.match(line)
            if match:
                layer, name, values = match.groups()
                activations[layer] = name
                coefficients[layer] = json.loads(values)
            elif not header:
                header = line.split(",")
            else:
                rows.append([float(v) for v in line.split(",")])

    table = np.array(rows, dtype=np.float64).reshape(len(rows), max(len(header), 1))
    grid = table[:, 0] if header else np.zeros(0)
    columns = {name: table[:, i] for i, name in enumerate(header) if i > 0}
    return CurveTable(grid, columns, coefficients, activations)


def recompute_curve(table: CurveTable, layer: str) -> np.ndarray:
    """Sum_i c_i f_i(x) from the header coefficients alone"""
    try:
        act = parse_activation(table.activations[layer])
    except (KeyError, ActivationError) as e:
        raise ExperimentError(f"Curve file has no usable header for {layer}: {e}") from e
    if not isinstance(act, CombinedActivation):
        raise ExperimentError(f"{layer} is not a combined activation")
    coefficients = table.coefficients[layer]
    return sum(c * f.value(table.grid) for c, f in zip(coefficients, act.bases))  # type: ignore


def summarize_run(store: RunStore) -> Optional[Dict[str, Any]]:
    """Run metadata plus metrics history and the last coefficient snapshot"""
    run = store.load_run()
    if run is None:
        return None
    snapshots = store.load_coefficients()
    return {
        "run": run,
        "metrics": store.load_metrics(),
        "coefficients": snapshots[-1]["coefficients"] if snapshots else {},
    }
