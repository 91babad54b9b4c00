"""Trace alignment, divergence detection, and the comparison table.

Traces from the unpatched program and each sampled patch are joined on
(location, label, kind, occurrence).  Because occurrence indices count
dynamic evaluations per site, the join lines up loop iterations across
variants even when the variants run the loop a different number of times;
a variant that never produces a row simply has an absent cell there.

Divergence is decided on serialized value forms, bit-exact: two floats
differ exactly when their shortest round-trip decimal forms differ, and a
missing cell always differs from a present one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .minilang.source import SourceLocation
from .tracer import EVENT_KINDS, TraceEvent

__all__ = [
    "CompareError",
    "RowKey",
    "Cell",
    "ComparisonTable",
    "align",
    "first_divergence",
    "summarize",
    "render_text",
    "table_to_json",
    "table_from_json",
]

BUGGY = "buggy"


class CompareError(Exception):
    """Trace alignment or table lookup failed."""


@dataclass(frozen=True, order=True)
class RowKey:
    """Identity of one table row: a logged site plus its occurrence index."""

    location: SourceLocation
    label: str
    kind: str
    occurrence: int


@dataclass(frozen=True)
class Cell:
    """One logged value; comparison is on the serialized pair."""

    value_type: str
    value: str


@dataclass
class ComparisonTable:
    """Aligned runtime values, one column per variant, buggy first.

    rows are ordered by first appearance: the buggy trace contributes its
    rows in execution order, then each patch column appends only the rows
    the buggy run never produced.  first_divergences maps each patch column
    to the earliest row whose cell differs from the buggy cell, or None
    when the columns agree everywhere.  elided_before is populated by
    summarize: for a kept row, the number of same-group rows dropped
    immediately before it.
    """

    columns: tuple[str, ...]
    rows: tuple[RowKey, ...]
    cells: dict[str, dict[RowKey, Cell]]
    first_divergences: dict[str, Optional[RowKey]]
    elided_before: dict[RowKey, int] = field(default_factory=dict)

    def cell(self, variant: str, row: RowKey) -> Optional[Cell]:
        if variant not in self.cells:
            raise CompareError(f"unknown variant {variant!r}")
        return self.cells[variant].get(row)

    def is_divergent(self, patch_id: str, row: RowKey) -> bool:
        """Does this patch's cell differ from the buggy cell at this row?"""
        if patch_id not in self.cells:
            raise CompareError(f"unknown variant {patch_id!r}")
        return self.cells[patch_id].get(row) != self.cells[BUGGY].get(row)

    def group_rows(self, location: SourceLocation, label: str) -> tuple[RowKey, ...]:
        return tuple(r for r in self.rows if r.location == location and r.label == label)

    def divergent_groups(self, patch_id: str) -> frozenset[tuple[SourceLocation, str]]:
        """The (location, label) groups where this patch diverges anywhere."""
        return frozenset(
            (r.location, r.label) for r in self.rows if self.is_divergent(patch_id, r)
        )

    def cell_count(self) -> int:
        return sum(len(per_variant) for per_variant in self.cells.values())


def align(traces: Mapping[str, Sequence[TraceEvent]]) -> ComparisonTable:
    """Join per-variant traces into one table.

    The mapping must contain the "buggy" variant; column order is buggy
    first, then the remaining keys in mapping order.  Two events in one
    trace with the same (location, label, occurrence) mean the trace was
    not produced by a well-formed run and are rejected.
    """
    if BUGGY not in traces:
        raise CompareError('traces must include the "buggy" variant')
    columns = (BUGGY,) + tuple(k for k in traces if k != BUGGY)

    rows: list[RowKey] = []
    seen_rows: set[RowKey] = set()
    cells: dict[str, dict[RowKey, Cell]] = {c: {} for c in columns}
    for column in columns:
        occupied: set[tuple[SourceLocation, str, int]] = set()
        for event in traces[column]:
            slot = (event.location, event.label, event.occurrence)
            if slot in occupied:
                raise CompareError(
                    f"variant {column!r} logged {event.label!r} at "
                    f"{event.location.file}:{event.location.line} occurrence "
                    f"{event.occurrence} twice"
                )
            occupied.add(slot)
            key = RowKey(event.location, event.label, event.kind, event.occurrence)
            if key not in seen_rows:
                seen_rows.add(key)
                rows.append(key)
            cells[column][key] = Cell(event.value_type, event.value)

    table = ComparisonTable(columns, tuple(rows), cells, {})
    for column in columns[1:]:
        table.first_divergences[column] = first_divergence(table, column)
    return table


def first_divergence(table: ComparisonTable, patch_id: str) -> Optional[RowKey]:
    """Earliest row, in table order, where the patch differs from buggy.

    A cell present on one side and absent on the other counts as different;
    None means the two columns agree at every row.
    """
    if patch_id not in table.cells or patch_id == BUGGY:
        raise CompareError(f"unknown patch column {patch_id!r}")
    buggy_cells = table.cells[BUGGY]
    patch_cells = table.cells[patch_id]
    for row in table.rows:
        if buggy_cells.get(row) != patch_cells.get(row):
            return row
    return None


def summarize(table: ComparisonTable, budget: int) -> ComparisonTable:
    """Shrink long (location, label) row groups to the informative rows.

    Groups at or under the budget stay whole.  An oversized group keeps its
    first row, its last row, and, for every patch column, the first row in
    the group where that patch diverges from buggy; dropped stretches are
    recorded in elided_before against the next kept row.
    """
    if budget < 1:
        raise CompareError(f"summary budget must be >= 1, got {budget}")
    groups: dict[tuple[SourceLocation, str], list[RowKey]] = {}
    for row in table.rows:
        groups.setdefault((row.location, row.label), []).append(row)

    keep: set[RowKey] = set()
    for group_rows in groups.values():
        if len(group_rows) <= budget:
            keep.update(group_rows)
            continue
        keep.add(group_rows[0])
        keep.add(group_rows[-1])
        for patch_id in table.columns[1:]:
            for row in group_rows:
                if table.is_divergent(patch_id, row):
                    keep.add(row)
                    break

    new_rows = tuple(r for r in table.rows if r in keep)
    elided: dict[RowKey, int] = {}
    for group_rows in groups.values():
        dropped = 0
        for row in group_rows:
            if row in keep:
                if dropped:
                    elided[row] = dropped
                dropped = 0
            else:
                dropped += 1
        # Trailing drops cannot occur: the group's last row is always kept.
    new_cells = {
        column: {row: cell for row, cell in per_variant.items() if row in keep}
        for column, per_variant in table.cells.items()
    }
    summarized = ComparisonTable(
        table.columns, new_rows, new_cells, {}, elided
    )
    for column in table.columns[1:]:
        summarized.first_divergences[column] = first_divergence(summarized, column)
    return summarized


ABSENT_TEXT = "-"


def render_text(table: ComparisonTable) -> str:
    """Plain-text rendering: one line per row, divergent cells marked."""
    headers = ["site", "kind", "label", "occ"] + list(table.columns)
    body: list[list[str]] = []
    for row in table.rows:
        if row in table.elided_before:
            body.append([f"({table.elided_before[row]} rows elided)"])
        line = [
            f"{row.location.file}:{row.location.line}",
            row.kind,
            row.label,
            str(row.occurrence),
        ]
        for column in table.columns:
            cell = table.cells[column].get(row)
            if cell is None:
                text = ABSENT_TEXT
            else:
                text = cell.value
            if column != BUGGY and table.is_divergent(column, row):
                text = "!" + text
            line.append(text)
        body.append(line)

    widths = [len(h) for h in headers]
    for line in body:
        if len(line) == 1:
            continue
        for i, cell_text in enumerate(line):
            widths[i] = max(widths[i], len(cell_text))
    out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip()]
    for line in body:
        if len(line) == 1:
            out.append(line[0])
        else:
            out.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(line)).rstrip())
    for column in table.columns[1:]:
        row = table.first_divergences.get(column)
        if row is None:
            out.append(f"{column}: no divergence")
        else:
            out.append(
                f"{column}: first divergence at {row.location.file}:{row.location.line} "
                f"{row.label} occurrence {row.occurrence}"
            )
    return "\n".join(out) + "\n"


def _row_to_json(row: RowKey) -> dict:
    return {
        "location": row.location.to_json(),
        "label": row.label,
        "kind": row.kind,
        "occurrence": row.occurrence,
    }


def _row_from_json(data: dict) -> RowKey:
    kind = data["kind"]
    if kind not in EVENT_KINDS:
        raise CompareError(f"unknown row kind {kind!r}")
    return RowKey(
        SourceLocation.from_json(data["location"]),
        data["label"],
        kind,
        data["occurrence"],
    )


def table_to_json(table: ComparisonTable) -> dict:
    """Structured export: rows in table order, cells array-aligned to columns."""
    rows = []
    for row in table.rows:
        cells = []
        for column in table.columns:
            cell = table.cells[column].get(row)
            cells.append(None if cell is None else {"type": cell.value_type, "value": cell.value})
        entry = _row_to_json(row)
        entry["cells"] = cells
        if row in table.elided_before:
            entry["elided_before"] = table.elided_before[row]
        rows.append(entry)
    index_of = {row: i for i, row in enumerate(table.rows)}
    divergences = {}
    for column in table.columns[1:]:
        row = table.first_divergences.get(column)
        divergences[column] = None if row is None else index_of[row]
    return {"columns": list(table.columns), "rows": rows, "first_divergence": divergences}


def table_from_json(data: dict) -> ComparisonTable:
    try:
        columns = tuple(data["columns"])
        rows: list[RowKey] = []
        cells: dict[str, dict[RowKey, Cell]] = {c: {} for c in columns}
        elided: dict[RowKey, int] = {}
        for entry in data["rows"]:
            row = _row_from_json(entry)
            rows.append(row)
            for column, cell in zip(columns, entry["cells"]):
                if cell is not None:
                    cells[column][row] = Cell(cell["type"], cell["value"])
            if "elided_before" in entry:
                elided[row] = entry["elided_before"]
        divergences: dict[str, Optional[RowKey]] = {}
        for column, index in data["first_divergence"].items():
            if column not in cells:
                raise CompareError(f"first_divergence for unknown column {column!r}")
            divergences[column] = None if index is None else rows[index]
    except (KeyError, IndexError, TypeError) as e:
        raise CompareError(f"malformed table data: {e!r}") from None
    return ComparisonTable(columns, tuple(rows), cells, divergences, elided)
