"""Self-describing result files: CSV with the resolved config as comment lines, a JSON mirror, plots."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

logger = logging.getLogger(__name__)

CONFIG_PREFIX = "# config: "


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    n: int
    alpha_or_ksigma: float
    shrink_point: str
    estimator: str
    mean_loss: float
    std_error: float
    replicates: int
    seed: int


COLUMNS = [f.name for f in fields(ResultRow)]


def write_csv(path: Path, rows: Iterable[ResultRow], config: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        for line in json.dumps(config, indent=2, sort_keys=True, default=str).splitlines():
            handle.write(f"{CONFIG_PREFIX}{line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_format(getattr(row, name)) for name in COLUMNS])
    return path


def _format(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_csv(path: Path) -> tuple[dict[str, Any], list[ResultRow]]:
    config_lines: list[str] = []
    body: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith(CONFIG_PREFIX):
            config_lines.append(line[len(CONFIG_PREFIX):])
        else:
            body.append(line)
    config = json.loads("\n".join(config_lines)) if config_lines else {}
    rows = []
    for record in csv.DictReader(body):
        rows.append(
            ResultRow(
                experiment=record["experiment"],
                n=int(record["n"]),
                alpha_or_ksigma=float(record["alpha_or_ksigma"]),
                shrink_point=record["shrink_point"],
                estimator=record["estimator"],
                mean_loss=float(record["mean_loss"]),
                std_error=float(record["std_error"]),
                replicates=int(record["replicates"]),
                seed=int(record["seed"]),
            )
        )
    return config, rows


def write_json(path: Path, rows: Iterable[ResultRow], config: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"config": config, "rows": [asdict(row) for row in rows]}
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8")
    return path


def write_plots(directory: Path, stem: str, rows: Sequence[ResultRow]) -> list[Path]:
    """One SVG of mean_loss against n per alpha_or_ksigma value; needs the ``plots`` extra."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping plots (install the 'plots' extra)")
        return []

    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for level in sorted({row.alpha_or_ksigma for row in rows}):
        subset = [row for row in rows if row.alpha_or_ksigma == level]
        curves: dict[tuple[str, str], list[ResultRow]] = {}
        for row in subset:
            curves.setdefault((row.shrink_point, row.estimator), []).append(row)
        if all(len(points) < 2 for points in curves.values()):
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        for (shrink_point, estimator), points in curves.items():
            points.sort(key=lambda r: r.n)
            label = estimator if shrink_point == "-" else f"{estimator} ({shrink_point})"
            ax.plot([r.n for r in points], [r.mean_loss for r in points], marker="o", label=label)
        ax.set_xlabel("n")
        ax.set_ylabel("mean loss")
        ax.set_title(f"{stem} ({level:g})")
        ax.legend(fontsize="small")
        path = directory / f"{stem}-{level:g}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written
