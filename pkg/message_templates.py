#!/usr/bin/env python3
"""
Message Templates - Standardized messages for hullact
Provides consistent status lines, errors and report text for the CLI and harness
"""

from typing import Dict, List, Optional, Sequence


class MessageTemplates:
    """Centralized message templates for consistent output"""

    # Run lifecycle
    RUN_STARTED = """🚀 Training {architecture} with {activation}

Run: {run_id}
Dataset: {dataset} ({train_size} train / {test_size} test)
Optimizer: {optimizer} (lr {learning_rate:g})
Epochs: {epochs}, batch size {batch_size}, seed {seed}
Output: {output_dir}"""

    EPOCH_SUMMARY = (
        "📈 Epoch {epoch}/{epochs}: loss {train_loss:.4f}, "
        "train acc {train_accuracy:.4f}, test acc {test_accuracy:.4f} ({seconds:.1f}s)"
    )
    COEFFICIENT_LINE = "   {layer} {activation}: c = [{values}]"

    RUN_COMPLETED = """✅ Run {run_id} completed

Final test accuracy: {test_accuracy:.4f}
Artifacts: {output_dir}"""

    RUN_DIVERGED = "❌ Training diverged: {error}"
    RUN_FAILED = "❌ Run failed: {error}"

    # Error message templates
    CONFIG_ERROR = "❌ Invalid config: {error}"
    DATA_MISSING = "❌ {error}\n💡 Fetch the dataset with: hullact download --data-dir {data_dir}"
    INPUT_VALIDATION_ERROR = "❌ Input validation failed: {error}"
    MODEL_LOAD_ERROR = "❌ Could not load model: {error}"
    RUN_NOT_FOUND = "❌ No run found in {run_dir}"

    # Success message templates
    CURVES_WRITTEN = "✅ Wrote activation curves for {count} layer(s) to {path}"
    DOWNLOAD_FILE = "📥 Downloaded {name}"
    DOWNLOAD_DONE = "✅ Fashion-MNIST ready in {data_dir} ({count} file(s) fetched)"

    # Warning message templates
    VALIDATION_WARNING = "⚠️  Warning: {warning_message}"
    NO_COMBINED_ACTIVATIONS = (
        "network has no learnable combined activations; wrote an empty curve file"
    )
    SEED_FROM_ENV = "ℹ️  Using seed {seed} from HULLACT_SEED"

    # Property suite
    VERIFY_STARTED = "🔍 Running {mode} property suite ({count} properties)..."
    VERIFY_PASSED = "✅ All {count} properties hold ({seconds:.1f}s)"
    VERIFY_FAILED = "❌ {failed} of {count} properties failed ({seconds:.1f}s)"
    PROPERTY_LINE = "{mark} {name}: {detail} ({seconds:.2f}s)"

    @staticmethod
    def format_run_started(
        run_id: str,
        architecture: str,
        activation: str,
        dataset: str,
        train_size: int,
        test_size: int,
        optimizer: str,
        learning_rate: float,
        epochs: int,
        batch_size: int,
        seed: int,
        output_dir: str,
    ) -> str:
        return MessageTemplates.RUN_STARTED.format(
            run_id=run_id,
            architecture=architecture,
            activation=activation,
            dataset=dataset,
            train_size=train_size,
            test_size=test_size,
            optimizer=optimizer,
            learning_rate=learning_rate,
            epochs=epochs,
            batch_size=batch_size,
            seed=seed,
            output_dir=output_dir,
        )

    @staticmethod
    def format_epoch_summary(
        epoch: int,
        epochs: int,
        train_loss: float,
        train_accuracy: float,
        test_accuracy: float,
        seconds: float,
    ) -> str:
        """Format one epoch's metrics line"""
        return MessageTemplates.EPOCH_SUMMARY.format(
            epoch=epoch,
            epochs=epochs,
            train_loss=train_loss,
            train_accuracy=train_accuracy,
            test_accuracy=test_accuracy,
            seconds=seconds,
        )

    @staticmethod
    def format_coefficients(
        coefficients: Dict[str, Sequence[float]],
        activations: Optional[Dict[str, str]] = None,
    ) -> List[str]:
        """One line per layer with its coefficient vector"""
        names = activations or {}
        return [
            MessageTemplates.COEFFICIENT_LINE.format(
                layer=layer,
                activation=names.get(layer, ""),
                values=", ".join(f"{c:.4f}" for c in values),
            )
            for layer, values in coefficients.items()
        ]

    @staticmethod
    def format_run_completed(run_id: str, test_accuracy: float, output_dir: str) -> str:
        return MessageTemplates.RUN_COMPLETED.format(
            run_id=run_id, test_accuracy=test_accuracy, output_dir=output_dir
        )

    @staticmethod
    def run_error(error_type: str, error_message: str) -> str:
        """Format a run error by category"""
        template_map = {
            "config": MessageTemplates.CONFIG_ERROR,
            "diverged": MessageTemplates.RUN_DIVERGED,
            "failed": MessageTemplates.RUN_FAILED,
            "input": MessageTemplates.INPUT_VALIDATION_ERROR,
            "model": MessageTemplates.MODEL_LOAD_ERROR,
        }
        template = template_map.get(error_type, MessageTemplates.RUN_FAILED)
        return template.format(error=error_message)

    @staticmethod
    def data_missing(error: str, data_dir: str) -> str:
        return MessageTemplates.DATA_MISSING.format(error=error, data_dir=data_dir)

    @staticmethod
    def validation_warning(message: str) -> str:
        """Format validation warning"""
        return MessageTemplates.VALIDATION_WARNING.format(warning_message=message)

    @staticmethod
    def curves_written(count: int, path: str) -> str:
        return MessageTemplates.CURVES_WRITTEN.format(count=count, path=path)

    @staticmethod
    def verify_started(quick: bool, count: int) -> str:
        return MessageTemplates.VERIFY_STARTED.format(
            mode="quick" if quick else "full", count=count
        )

    @staticmethod
    def property_line(name: str, passed: bool, detail: str, seconds: float) -> str:
        return MessageTemplates.PROPERTY_LINE.format(
            mark="✅" if passed else "❌", name=name, detail=detail, seconds=seconds
        )

    @staticmethod
    def verify_summary(count: int, failed: int, seconds: float) -> str:
        if failed:
            return MessageTemplates.VERIFY_FAILED.format(
                failed=failed, count=count, seconds=seconds
            )
        return MessageTemplates.VERIFY_PASSED.format(count=count, seconds=seconds)
