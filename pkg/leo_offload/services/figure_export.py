"""
Chart.js configurations for sweep results and training curves.

Only data is produced; any Chart.js page (or other plotting tool reading the
JSON) can render it.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd
from loguru import logger

PALETTE = ["#36A2EB", "#FF6384", "#FFCE56", "#4BC0C0", "#9966FF", "#FF9F40", "#C9CBCF"]

SWEEP_METRICS = ["C", "T_total", "E", "r_failure", "P_total"]

AXIS_LABELS = {
    "tasks": "Number of tasks",
    "reliability": "Reliability threshold (%)",
    "privacy": "Privacy threshold (%)",
    "timestep": "Timestep",
}


@dataclass
class FigureSpec:
    """One chart: shared x labels and one series per group."""
    title: str
    x_label: str
    y_label: str
    labels: List[Any]
    series: Dict[str, List[Optional[float]]] = field(default_factory=dict)
    chart_type: str = "line"


def _finite_or_none(value: Any) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


class FigureExporter:
    """Builds Chart.js configurations from tidy result frames"""

    def sweep_figure(self, frame: pd.DataFrame, axis: str, metric: str, group: str = "policy") -> FigureSpec:
        """Mean of ``metric`` per axis value, one series per group."""
        if frame.empty:
            raise ValueError("No rows to plot")
        pivot = frame.groupby([group, "value"], sort=True)[metric].mean().unstack(group)
        labels = [_label(v) for v in pivot.index]
        series = {str(name): [_finite_or_none(v) for v in pivot[name]] for name in pivot.columns}
        return FigureSpec(
            title=f"{metric} vs {AXIS_LABELS.get(axis, axis).lower()}",
            x_label=AXIS_LABELS.get(axis, axis),
            y_label=metric,
            labels=labels,
            series=series,
            chart_type="bar" if axis == "tasks" else "line",
        )

    def training_figure(self, logs: Dict[str, pd.DataFrame], metric: str = "mean_cost") -> FigureSpec:
        """Training curves keyed by run name, aligned on the union of logged timesteps."""
        timesteps = sorted({int(t) for log in logs.values() for t in log["timestep"]})
        series = {}
        for name, log in logs.items():
            by_step = dict(zip(log["timestep"].astype(int), log[metric]))
            series[name] = [_finite_or_none(by_step[t]) if t in by_step else None for t in timesteps]
        return FigureSpec(
            title=f"{metric} during training",
            x_label=AXIS_LABELS["timestep"],
            y_label=metric,
            labels=timesteps,
            series=series,
        )

    def chartjs_config(self, spec: FigureSpec) -> Dict[str, Any]:
        """Generate a complete Chart.js configuration from a figure spec"""
        datasets = []
        for k, (name, values) in enumerate(spec.series.items()):
            color = PALETTE[k % len(PALETTE)]
            dataset = {
                "label": name,
                "data": values,
                "backgroundColor": color,
                "borderColor": color,
                "borderWidth": 1,
            }
            if spec.chart_type == "line":
                dataset["fill"] = False
                dataset["tension"] = 0.1
            datasets.append(dataset)

        return {
            "type": spec.chart_type,
            "data": {"labels": spec.labels, "datasets": datasets},
            "options": {
                "responsive": True,
                "maintainAspectRatio": False,
                "plugins": {
                    "title": {"display": True, "text": spec.title},
                    "legend": {"display": True, "position": "bottom"},
                },
                "scales": {
                    "x": {"display": True, "title": {"display": True, "text": spec.x_label}},
                    "y": {"display": True, "title": {"display": True, "text": spec.y_label}},
                },
            },
        }

    def export_sweep(self, frame: pd.DataFrame, axis: str, path: Union[str, Path],
                     metrics: Sequence[str] = SWEEP_METRICS) -> Path:
        """Write one Chart.js configuration per metric into a single JSON file"""
        path = Path(path)
        charts = {metric: self.chartjs_config(self.sweep_figure(frame, axis, metric)) for metric in metrics}
        path.write_text(json.dumps(charts, indent=2, sort_keys=True), encoding="utf-8")
        logger.info(f"📊 Chart data saved to {path}")
        return path


def _label(value: Any) -> Any:
    value = float(value)
    return int(value) if value.is_integer() else value


# Global exporter instance
figure_exporter = FigureExporter()
