#!/usr/bin/env python3

from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from message_templates import MessageTemplates


class UIUtilities:
    def __init__(self, validator):
        self.validator = validator

    def format_timestamp(self, iso_string: str) -> str:
        try:
            dt = datetime.fromisoformat(iso_string.replace("Z", "+00:00"))
            now = datetime.now(timezone.utc)
            diff = now - dt
            if diff.days > 0:
                return f"{diff.days}d ago"
            elif diff.seconds > 3600:
                return f"{diff.seconds // 3600}h ago"
            elif diff.seconds > 60:
                return f"{diff.seconds // 60}m ago"
            else:
                return "just now"
        except (ValueError, TypeError):
            return iso_string

    def status_color(self, status: str) -> str:
        colors = {
            "running": "\033[94m",
            "completed": "\033[92m",
            "PASS": "\033[92m",
            "failed": "\033[91m",
            "FAIL": "\033[91m",
            "diverged": "\033[93m",
        }
        reset = "\033[0m"
        return colors.get(status, "") + status + reset

    def show_history(self, metrics: Sequence[Dict[str, float]]) -> None:
        if not metrics:
            print("No epochs recorded")
            return
        print(
            f"{'EPOCH':<6} {'TRAIN LOSS':<12} {'TRAIN ACC':<10} {'TEST ACC':<10} {'SECONDS':<8}"
        )
        print("-" * 50)
        for row in metrics:
            print(
                f"{int(row['epoch']):<6} {row['train_loss']:<12.5f} {row['train_acc']:<10.4f} "
                f"{row['test_acc']:<10.4f} {row['seconds']:<8.1f}"
            )
        best = max(metrics, key=lambda row: row["test_acc"])
        print(f"Best test accuracy: {best['test_acc']:.4f} (epoch {int(best['epoch'])})")

    def show_coefficients(
        self,
        coefficients: Dict[str, Sequence[float]],
        activations: Optional[Dict[str, str]] = None,
    ) -> None:
        if not coefficients:
            print("No learnable activation coefficients")
            return
        print("\n🧮 Activation Coefficients:")
        for line in MessageTemplates.format_coefficients(coefficients, activations):
            print(line)

    def show_property_report(self, results: Sequence[Any]) -> None:
        """Table of PropertyResult rows with a pass/fail tally"""
        print(f"{'PROPERTY':<32} {'RESULT':<6} {'SECONDS':<8} {'DETAIL'}")
        print("-" * 90)
        for result in results:
            status = self.status_color("PASS" if result.passed else "FAIL")
            detail = result.detail if len(result.detail) <= 60 else result.detail[:57] + "..."
            print(f"{result.name:<32} {status:<6} {result.seconds:<8.2f} {detail}")
        failed = [r for r in results if not r.passed]
        print(f"\nStatus summary: {len(results) - len(failed)} passed, {len(failed)} failed")

    def show_run(self, summary: Dict[str, Any], run_dir: Path) -> None:
        run = summary["run"]
        config = run.get("config", {})
        print(f"📊 Run Details: {run['run_id']}")
        print(f"Status: {self.status_color(run['status'])}")
        print(f"Architecture: {config.get('architecture')} / {config.get('activation')}")
        print(f"Dataset: {config.get('dataset')}")
        print(f"Directory: {run_dir}")
        print(f"Created: {run['created_at']}")
        print(f"Updated: {self.format_timestamp(run['updated_at'])}")
        if run.get("error_message"):
            print(f"❌ Error: {run['error_message']}")

        print("\n📈 Metrics History:")
        self.show_history(summary["metrics"])
        self.show_coefficients(summary["coefficients"])

        if run.get("progress_log"):
            print("\n📋 Progress Log:")
            for entry in run["progress_log"][-5:]:
                timestamp = self.format_timestamp(entry["timestamp"])
                print(f"  [{timestamp}] {entry['message']}")

    def describe_data_dir(self, data_dir: str) -> List[str]:
        """Names of dataset files present in data_dir, for download reports"""
        try:
            root = self.validator.validate_data_dir(Path(data_dir))
        except ValueError:
            return []
        return sorted(p.name for p in root.iterdir() if "ubyte" in p.name)
