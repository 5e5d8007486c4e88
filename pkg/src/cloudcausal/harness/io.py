"""File formats: JSON model documents, CSV datasets with a JSON sidecar, sweep CSVs.

Model document::

    {
      "variables": [{"name": "H", "states": ["0", "1"]}, ...],
      "edges": [["H", "R"], ...],
      "cpts": {"R": {"parents": ["H"], "rows": [[0.7, 0.3], [0.2, 0.8]]}, ...},
      "background": {"roots": ["U_R"], "deterministic": ["R"]}     # optional, FCMs only
    }

``rows`` are row-major over the parent configurations (last parent varies
fastest); each row is a distribution over the node's states.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import Table, Variable
from ..errors import ConsistencyError, ValidationError
from ..models import CausalModel, Dataset, FunctionalModel
from .experiments import SweepResult

META_SUFFIX = ".meta.json"


def _num(x: float) -> float:
    # shortest round-trip decimal; avoid "-0.0"
    x = float(x)
    return 0.0 if x == 0 else x


def model_to_dict(model: CausalModel | FunctionalModel) -> dict:
    m = model.model if isinstance(model, FunctionalModel) else model
    doc = {
        "variables": [{"name": v.name, "states": list(v.states)} for v in m.variables.values()],
        "edges": sorted([list(e) for e in m.dag.edges]),
        "cpts": {
            n: {"parents": list(t.given_names), "rows": [[_num(x) for x in row] for row in t.rows()]}
            for n, t in m.cpts.items()
        },
    }
    if isinstance(model, FunctionalModel):
        doc["background"] = {
            "roots": sorted(model.background),
            "deterministic": [n for n in model.observed if m.dag.parents(n)],
        }
    return doc


def model_from_dict(doc: dict) -> CausalModel | FunctionalModel:
    try:
        variables = [Variable(v["name"], tuple(v["states"])) for v in doc["variables"]]
        by_name = {v.name: v for v in variables}
        edges = [tuple(e) for e in doc.get("edges", [])]
        cpts = {}
        for name, spec in doc["cpts"].items():
            if name not in by_name:
                raise ConsistencyError(f"CPT for undeclared variable {name!r}")
            parents = []
            for p in spec.get("parents", []):
                if p not in by_name:
                    raise ConsistencyError(f"CPT for {name!r} names undeclared parent {p!r}")
                parents.append(by_name[p])
            cpts[name] = Table.from_rows(by_name[name], parents, spec["rows"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model document: {exc!r}") from None
    for a, b in edges:
        if a not in by_name or b not in by_name:
            raise ConsistencyError(f"edge {a}->{b} touches an undeclared variable")
    model = CausalModel(variables, edges, cpts)
    bg = doc.get("background")
    if not bg:
        return model
    f = FunctionalModel(model, bg.get("roots", []))
    for n in bg.get("deterministic", []):
        if not model.cpts[n].is_deterministic():
            raise ValidationError(f"mechanism of {n!r} is declared deterministic but is not")
    return f


def dump_model(model: CausalModel | FunctionalModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def save_model(model: CausalModel | FunctionalModel, path: str | Path):
    Path(path).write_text(dump_model(model))


def load_model(path: str | Path) -> CausalModel | FunctionalModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc)


# -- datasets --------------------------------------------------------------------------


def dataset_csv(d: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(d.names)
    labels = [np.array(v.states) for v in d.columns]
    for row in d.rows:
        w.writerow([labels[i][s] for i, s in enumerate(row)])
    return buf.getvalue()


def dataset_meta(d: Dataset) -> dict:
    return {
        "provenance": d.provenance,
        "intervened": sorted(d.intervened),
        "seed": d.seed,
        "variables": [{"name": v.name, "states": list(v.states)} for v in d.columns],
    }


def save_dataset(d: Dataset, path: str | Path):
    path = Path(path)
    path.write_text(dataset_csv(d))
    Path(str(path) + META_SUFFIX).write_text(json.dumps(dataset_meta(d), indent=2) + "\n")


def load_dataset(path: str | Path, variables: Sequence[Variable] | None = None) -> Dataset:
    """Read a dataset CSV; state schemes come from the sidecar, else from ``variables``."""
    path = Path(path)
    meta_path = Path(str(path) + META_SUFFIX)
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    schemes = {v["name"]: Variable(v["name"], tuple(v["states"])) for v in meta.get("variables", [])}
    for v in variables or ():
        schemes.setdefault(v.name, v)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        raw = list(reader)
    missing = [n for n in header if n not in schemes]
    if missing:
        raise ValidationError(f"no state scheme for columns {missing}")
    cols = tuple(schemes[n] for n in header)
    rows = np.array([[cols[i].index(cell) for i, cell in enumerate(r)] for r in raw], dtype=np.int64)
    rows = rows.reshape(len(raw), len(cols))
    return Dataset(
        cols,
        rows,
        meta.get("provenance", "observational"),
        frozenset(meta.get("intervened", [])),
        meta.get("seed"),
    )


# -- experiment outputs ---------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(_num(x))


def sweep_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.header)
    for row in result.rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def latency_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("experiment", "s", "p99_pred", "p99_true", "error"))
    for r in rows:
        w.writerow((r.experiment, "all" if r.s is None else r.s, _fmt(r.p99_pred), _fmt(r.p99_true), _fmt(r.error)))
    return buf.getvalue()


def write_with_meta(text: str, path: str | Path, meta: dict):
    path = Path(path)
    path.write_text(text)
    Path(str(path) + META_SUFFIX).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
