from __future__ import annotations

from typing import Any, Iterable

from rich.table import Table

from geodesic_js.geometry.tree import TreePoint
from geodesic_js.harness.output import ResultRow
from geodesic_js.harness.report import Event


def render_point(point: Any) -> str:
    if isinstance(point, TreePoint):
        if point.is_vertex:
            return f"vertex {point.tail}"
        return f"{point.offset:g} along ({point.tail}, {point.head})"
    return str(point)


def render_event(event: Event) -> str:
    kind = event.kind
    data = event.data

    if kind == "check":
        status = "ok" if data.get("ok") else "FAILED"
        extras = ", ".join(f"{key}={_value(value)}" for key, value in data.items() if key not in ("name", "ok"))
        return f"[{status}] {data.get('name')}" + (f" ({extras})" if extras else "")
    if kind == "note":
        return f"Note: {data.get('text')}"
    if kind == "tripod_distances":
        return f"d(A, B) = {data['d_ab']:g}, d(A, C) = {data['d_ac']:g}."
    if kind == "tripod_means":
        return (
            f"E2 X = {render_point(data['mean_x'])}; E2(X | Y=0) = {render_point(data['given_y0'])}; "
            f"E2(X | Y=1) = {render_point(data['given_y1'])}."
        )
    if kind == "tripod_tower":
        return (
            f"E2(E2(X | Y)) = {render_point(data['mean_of_means'])}, "
            f"d(E2 X, E2(E2(X | Y))) = {data['gap']:.6f}."
        )
    if kind == "circle_table":
        return f"Risk over {len(data.get('rows', []))} shrinkage weights computed."
    if kind == "table1_row":
        return (
            f"k_sigma = {data['k_sigma']}: sigma2 = {data['sigma2']:.4f}, "
            f"oracle weight = {data['oracle_weight']:.4f}."
        )
    if kind == "spd_bayes":
        return (
            f"alpha = {data['alpha']}: sigma2 = {data['sigma2']:.4f}, tau2 = {data['tau2']:.4f}, "
            f"best weight = {data['best_weight']:.4f}."
        )
    if kind == "spd_freq":
        return f"Domination proportions over {data['draws']} scale-matrix draws."
    if kind == "validation_summary":
        return f"{data['suites'] - data['failed']} of {data['suites']} suites passed."

    return f"{kind}: {data}"


def _value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, TreePoint):
        return render_point(value)
    return str(value)


def event_style(event: Event) -> str:
    if event.kind == "check":
        return "green" if event.data.get("ok") else "bold red"
    return {
        "note": "yellow",
        "validation_summary": "bold magenta",
        "tripod_tower": "cyan",
    }.get(event.kind, "")


def results_table(title: str, rows: Iterable[ResultRow]) -> Table:
    table = Table(title=title, header_style="bold magenta")
    table.add_column("n", justify="right")
    table.add_column("alpha / k_sigma / t", justify="right")
    table.add_column("Shrink point", style="cyan")
    table.add_column("Estimator")
    table.add_column("Mean loss", justify="right")
    table.add_column("Std. error", justify="right", style="dim")
    table.add_column("Reps", justify="right", style="dim")
    for row in rows:
        table.add_row(
            str(row.n),
            f"{row.alpha_or_ksigma:g}",
            row.shrink_point,
            row.estimator,
            f"{row.mean_loss:.4f}",
            f"{row.std_error:.4f}",
            str(row.replicates),
        )
    return table
