"""Reading and writing symbolic tables.

The JSON layout is::

    {
      "variables": [
        {"name": "...", "kind": "...", "role": "input"|"target",
         "categories": [...]?, "ordered": bool?, "taxonomy": {...}?},
        ...
      ],
      "rows": [[cell, ...], ...]
    }

Cells are ``number`` | ``{"a": lo, "b": hi}`` | ``{"cat": label}`` |
``{"set": [labels]}`` | ``{"dist": [weights], "l": count?}`` | ``null``.
A taxonomy is a nested ``{"name": ..., "children": [...]}`` tree whose
leaves are exactly the variable's categories.

CSV import is supported for pure-quantitative tables (one header row of
variable names; blank cells read as missing).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

from .symbolic import (
    MISSING,
    Category,
    CategorySet,
    Distribution,
    Interval,
    Missing,
    Number,
    Role,
    SchemaError,
    SymbolicTable,
    SymbolicValue,
    Taxonomy,
    VariableKind,
    VariableSpec,
)


def _taxonomy_from_json(node: Mapping[str, Any]) -> Taxonomy:
    children: dict[str, tuple[str, ...]] = {}

    def walk(n: Mapping[str, Any]) -> str:
        if not isinstance(n, Mapping) or "name" not in n:
            raise SchemaError("taxonomy node must be an object with a 'name'")
        name = str(n["name"])
        kids = n.get("children", [])
        if kids:
            children[name] = tuple(walk(k) for k in kids)
        return name

    root = walk(node)
    return Taxonomy(root=root, children=children)


def _taxonomy_to_json(tax: Taxonomy, node: str | None = None) -> dict[str, Any]:
    name = tax.root if node is None else node
    kids = tax.children.get(name, ())
    out: dict[str, Any] = {"name": name}
    if kids:
        out["children"] = [_taxonomy_to_json(tax, k) for k in kids]
    return out


def _variable_from_json(entry: Mapping[str, Any], position: int) -> tuple[VariableSpec, Role]:
    if not isinstance(entry, Mapping):
        raise SchemaError(f"variable {position}: expected an object")
    try:
        name = str(entry["name"])
        kind = VariableKind(str(entry["kind"]))
    except KeyError as exc:
        raise SchemaError(f"variable {position}: missing field {exc}") from None
    except ValueError:
        raise SchemaError(
            f"variable {position}: unknown kind {entry.get('kind')!r}"
        ) from None
    role_text = entry.get("role", "input")
    try:
        role = Role(str(role_text))
    except ValueError:
        raise SchemaError(f"variable {name!r}: unknown role {role_text!r}") from None
    taxonomy = None
    if entry.get("taxonomy") is not None:
        taxonomy = _taxonomy_from_json(entry["taxonomy"])
    spec = VariableSpec(
        name=name,
        kind=kind,
        categories=tuple(str(c) for c in entry.get("categories", ())),
        ordered=bool(entry.get("ordered", False)),
        taxonomy=taxonomy,
    )
    return spec, role


def _cell_from_json(spec: VariableSpec, cell: Any, row: int) -> SymbolicValue:
    where = f"row {row}, column {spec.name!r}"
    if cell is None:
        return MISSING
    if isinstance(cell, bool):
        raise SchemaError(f"{where}: boolean is not a valid cell")
    if isinstance(cell, (int, float)):
        return Number(float(cell))
    if not isinstance(cell, Mapping):
        raise SchemaError(f"{where}: unsupported cell {cell!r}")
    keys = set(cell)
    if keys == {"a", "b"}:
        return Interval(float(cell["a"]), float(cell["b"]))
    if keys == {"cat"}:
        label = str(cell["cat"])
        if label in spec.categories:
            return Category(spec.category_index(label))
        if spec.taxonomy is not None and label in spec.taxonomy.node_names():
            leaves = spec.taxonomy.descendant_leaves(label)
            return CategorySet(frozenset(spec.category_index(l) for l in leaves))
        raise SchemaError(f"{where}: unknown category {label!r}")
    if keys == {"set"}:
        labels = cell["set"]
        if not isinstance(labels, Sequence) or isinstance(labels, str):
            raise SchemaError(f"{where}: 'set' must be a list of labels")
        return CategorySet(frozenset(spec.category_index(str(l)) for l in labels))
    if keys in ({"dist"}, {"dist", "l"}):
        weights = cell["dist"]
        if not isinstance(weights, Sequence):
            raise SchemaError(f"{where}: 'dist' must be a list of weights")
        micro = cell.get("l")
        return Distribution(tuple(float(p) for p in weights), micro_count=micro)
    raise SchemaError(f"{where}: unrecognized cell keys {sorted(keys)}")


def parse_table(document: str | Mapping[str, Any]) -> SymbolicTable:
    """Parse and validate a symbolic table from a JSON string or mapping.

    Schema problems raise :class:`SchemaError` naming the row/column;
    values that violate their variable's invariants raise
    :class:`ValidationError`. Missing cells are preserved.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    if not isinstance(document, Mapping):
        raise SchemaError("top level must be an object")
    if "variables" not in document or "rows" not in document:
        raise SchemaError("top level must contain 'variables' and 'rows'")

    parsed = [
        _variable_from_json(entry, i) for i, entry in enumerate(document["variables"])
    ]
    variables = tuple(spec for spec, _ in parsed)
    roles = tuple(role for _, role in parsed)

    rows = []
    for i, raw_row in enumerate(document["rows"]):
        if not isinstance(raw_row, Sequence) or isinstance(raw_row, (str, bytes)):
            raise SchemaError(f"row {i}: expected a list of cells")
        if len(raw_row) != len(variables):
            raise SchemaError(
                f"row {i}: expected {len(variables)} cells, got {len(raw_row)}"
            )
        rows.append(
            tuple(
                _cell_from_json(spec, cell, i)
                for spec, cell in zip(variables, raw_row)
            )
        )
    return SymbolicTable(variables=variables, roles=roles, rows=tuple(rows))


def _cell_to_json(spec: VariableSpec, cell: SymbolicValue) -> Any:
    if isinstance(cell, Missing):
        return None
    if isinstance(cell, Number):
        return cell.value
    if isinstance(cell, Interval):
        return {"a": cell.lower, "b": cell.upper}
    if isinstance(cell, Category):
        return {"cat": spec.categories[cell.index]}
    if isinstance(cell, CategorySet):
        return {"set": [spec.categories[i] for i in sorted(cell.indices)]}
    if isinstance(cell, Distribution):
        out: dict[str, Any] = {"dist": list(cell.probabilities)}
        if cell.micro_count is not None:
            out["l"] = cell.micro_count
        return out
    raise TypeError(f"unsupported cell type {type(cell).__name__}")


def serialize_table(table: SymbolicTable) -> dict[str, Any]:
    """Inverse of :func:`parse_table`: ``parse_table(serialize_table(t))`` equals ``t``."""
    variables = []
    for spec, role in zip(table.variables, table.roles):
        entry: dict[str, Any] = {
            "name": spec.name,
            "kind": spec.kind.value,
            "role": role.value,
        }
        if spec.categories:
            entry["categories"] = list(spec.categories)
        if spec.ordered:
            entry["ordered"] = True
        if spec.taxonomy is not None:
            entry["taxonomy"] = _taxonomy_to_json(spec.taxonomy)
        variables.append(entry)
    rows = [
        [_cell_to_json(spec, cell) for spec, cell in zip(table.variables, row)]
        for row in table.rows
    ]
    return {"variables": variables, "rows": rows}


def load_table(path: str | Path) -> SymbolicTable:
    return parse_table(Path(path).read_text())


def save_table(table: SymbolicTable, path: str | Path) -> None:
    Path(path).write_text(json.dumps(serialize_table(table), indent=2, sort_keys=True))


def load_csv_table(
    source: str | Path | io.TextIOBase,
    target_names: Sequence[str] = (),
    delimiter: str = ",",
) -> SymbolicTable:
    """Load a pure-quantitative table from CSV (header row of variable names)."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty CSV document") from None
    names = [h.strip() for h in header]
    unknown = set(target_names) - set(names)
    if unknown:
        raise SchemaError(f"target columns not in header: {sorted(unknown)}")
    variables = tuple(
        VariableSpec(name=n, kind=VariableKind.QUANTITATIVE) for n in names
    )
    roles = tuple(
        Role.TARGET if n in set(target_names) else Role.INPUT for n in names
    )
    rows = []
    for i, raw in enumerate(reader):
        if not raw:
            continue
        if len(raw) != len(names):
            raise SchemaError(f"row {i}: expected {len(names)} cells, got {len(raw)}")
        cells: list[SymbolicValue] = []
        for name, text_cell in zip(names, raw):
            stripped = text_cell.strip()
            if not stripped or stripped.lower() in {"nan", "na"}:
                cells.append(MISSING)
                continue
            try:
                cells.append(Number(float(stripped)))
            except ValueError:
                raise SchemaError(
                    f"row {i}, column {name!r}: not a number: {text_cell!r}"
                ) from None
        rows.append(tuple(cells))
    return SymbolicTable(variables=variables, roles=roles, rows=tuple(rows))
