"""Report assembly: JSON persistence, CSV and markdown rendering."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from ..errors import ConfigError
from .evaluation import Arm, EvalReport, SeasonScore

COLUMNS = (
    "Train Split",
    "Model",
    "Early Test Loss",
    "Late Test Loss",
    "Very-Late Test Loss",
)
_SEASON_BY_COLUMN = {
    "Early Test Loss": "early",
    "Late Test Loss": "late",
    "Very-Late Test Loss": "very_late",
}


def format_cell(score: SeasonScore | None) -> str:
    """One decimal, ``±`` separator — the published table style."""
    if score is None:
        return ""
    return f"{score.mean:.1f}±{score.std:.1f}"


def report_to_mapping(report: EvalReport) -> dict:
    return {
        "train_label": report.train_label,
        "model_label": report.model_label,
        "mode": report.mode,
        "arm": {"name": report.arm.name, "lr": report.arm.lr, "steps": report.arm.steps},
        "k": report.k,
        "steps": report.steps,
        "runs": report.runs,
        "seed": report.seed,
        "checkpoint_index": report.checkpoint_index,
        "weighting": report.weighting,
        "seasons": {
            name: {
                "mean": s.mean,
                "std": s.std,
                "per_run": s.per_run,
                "days": s.days,
                "images": s.images,
            }
            for name, s in report.seasons.items()
        },
    }


def report_from_mapping(mapping: dict) -> EvalReport:
    arm = Arm(
        name=mapping["arm"]["name"],
        lr=mapping["arm"]["lr"],
        steps=mapping["arm"]["steps"],
    )
    seasons = {
        name: SeasonScore(
            mean=body["mean"],
            std=body["std"],
            per_run=list(body["per_run"]),
            days=body["days"],
            images=body["images"],
        )
        for name, body in mapping["seasons"].items()
    }
    return EvalReport(
        train_label=mapping["train_label"],
        model_label=mapping["model_label"],
        mode=mapping["mode"],
        arm=arm,
        k=mapping["k"],
        steps=mapping["steps"],
        runs=mapping["runs"],
        seed=mapping["seed"],
        checkpoint_index=mapping["checkpoint_index"],
        weighting=mapping["weighting"],
        seasons=seasons,
    )


def save_report(report: EvalReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(report_to_mapping(report), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return path


def load_report(path: str | Path) -> EvalReport:
    try:
        return report_from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError, KeyError) as err:
        raise ConfigError(f"cannot read report {path}: {err}") from err


def _rows(reports: list[EvalReport]) -> list[dict[str, str]]:
    rows = []
    for report in reports:
        row = {"Train Split": report.train_label, "Model": report.model_label}
        for column, season in _SEASON_BY_COLUMN.items():
            row[column] = format_cell(report.seasons.get(season))
        rows.append(row)
    return rows


def render_csv(reports: list[EvalReport]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(_rows(reports))
    return buffer.getvalue()


def render_markdown(reports: list[EvalReport]) -> str:
    """Markdown table; consecutive rows sharing a train split print it once."""
    lines = [
        "| " + " | ".join(COLUMNS) + " |",
        "|" + "|".join(" --- " for _ in COLUMNS) + "|",
    ]
    previous_split = None
    for row in _rows(reports):
        split = row["Train Split"]
        shown = split if split != previous_split else ""
        previous_split = split
        cells = [shown, row["Model"]] + [row[c] for c in COLUMNS[2:]]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render(reports: list[EvalReport], fmt: str) -> str:
    if fmt == "csv":
        return render_csv(reports)
    if fmt == "markdown":
        return render_markdown(reports)
    raise ConfigError(f"unknown report format {fmt!r}")


def parse_report_csv(text: str) -> list[dict[str, object]]:
    """Read a rendered CSV back into numeric values (round-trip check)."""
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row: dict[str, object] = {
            "Train Split": raw["Train Split"],
            "Model": raw["Model"],
        }
        for column in COLUMNS[2:]:
            cell = raw[column]
            if cell:
                mean_text, std_text = cell.split("±")
                row[column] = (float(mean_text), float(std_text))
            else:
                row[column] = None
        rows.append(row)
    return rows
