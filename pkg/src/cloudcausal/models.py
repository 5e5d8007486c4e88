"""Causal graphical models (CGMs), functional causal models (FCMs) and datasets.

Inference is exact enumeration over the full joint, guarded by a cell cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import NORM_TOL, Assignment, Table, Variable, check_assignment, product_table
from .errors import (
    ConsistencyError,
    NormalizationError,
    PreconditionError,
    StateSpaceError,
    ValidationError,
)
from .graphs import Dag

DEFAULT_CAP = 2**22


@dataclass(frozen=True)
class ValidationReport:
    acyclic: bool
    consistent: bool
    max_residual: float
    n_variables: int
    n_edges: int

    @property
    def ok(self) -> bool:
        return self.acyclic and self.consistent and self.max_residual <= NORM_TOL


def check_parts(variables: Sequence[Variable], edges: Iterable[tuple[str, str]], cpts: Mapping[str, Table]):
    """Validate raw model parts, raising on the first violation.

    Returns the DAG and a :class:`ValidationReport`.
    """
    names = [v.name for v in variables]
    if len(set(names)) != len(names):
        raise ConsistencyError(f"duplicate variable names in {names}")
    by_name = {v.name: v for v in variables}
    dag = Dag(names, edges)  # raises ConsistencyError / CycleError
    missing = [n for n in names if n not in cpts]
    if missing:
        raise ConsistencyError(f"no CPT for {missing}")
    extra = [n for n in cpts if n not in by_name]
    if extra:
        raise ConsistencyError(f"CPT for undeclared variables {extra}")
    worst = 0.0
    for n in dag.order:
        t = cpts[n]
        if t.scope_names != (n,):
            raise ConsistencyError(f"CPT for {n!r} has scope {t.scope_names}")
        if set(t.given_names) != dag.parents(n) or len(t.given_names) != len(dag.parents(n)):
            raise ConsistencyError(
                f"CPT for {n!r} conditions on {t.given_names} but DAG parents are {sorted(dag.parents(n))}"
            )
        for v in t.variables:
            if by_name[v.name] != v:
                raise ConsistencyError(f"CPT for {n!r} uses a different scheme for {v.name!r}")
        residual = float(np.abs(t.values.sum(axis=0) - 1.0).max()) if t.values.size else 0.0
        if residual > NORM_TOL:
            raise NormalizationError(f"CPT for {n!r} has row residual {residual:.3g}")
        worst = max(worst, residual)
    return dag, ValidationReport(True, True, worst, len(names), len(dag.edges))


class CausalModel:
    """A DAG plus one CPT per node.

    Parameters
    ----------
    variables : sequence of Variable
    edges : iterable of (parent, child)
    cpts : mapping from node name to a Table with scope ``(node,)`` and the
        node's parents as ``given``.
    """

    def __init__(self, variables: Sequence[Variable], edges: Iterable[tuple[str, str]], cpts: Mapping[str, Table]):
        variables = tuple(variables)
        self.dag, self.report = check_parts(variables, list(edges), cpts)
        self.variables = {v.name: v for v in variables}
        self.cpts = {n: cpts[n] for n in self.variables}
        self._joint: Table | None = None

    @classmethod
    def from_cpts(cls, cpts: Iterable[Table]) -> "CausalModel":
        cpts = list(cpts)
        variables = [t.scope[0] for t in cpts]
        edges = [(p, t.scope_names[0]) for t in cpts for p in t.given_names]
        return cls(variables, edges, {t.scope_names[0]: t for t in cpts})

    def __repr__(self):
        return f"CausalModel({self.dag!r})"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.variables)

    @property
    def roots(self) -> frozenset[str]:
        return self.dag.roots

    def parents(self, x: str) -> tuple[str, ...]:
        """Parents in CPT order."""
        return self.cpts[x].given_names

    def state_space(self) -> int:
        return math.prod(v.card for v in self.variables.values())

    def assignment(self, mapping: Mapping[str, object]) -> dict[str, int]:
        return check_assignment(self.variables, mapping)

    def with_cpts(self, replace: Mapping[str, Table]) -> "CausalModel":
        """Copy with some CPTs replaced; edges follow the new CPTs' givens."""
        cpts = dict(self.cpts)
        cpts.update(replace)
        edges = [(p, n) for n, t in cpts.items() for p in t.given_names]
        return CausalModel(self.variables.values(), edges, cpts)

    def drop_mechanism(self, x: str) -> "IncompleteModel":
        self.dag._check([x])
        return IncompleteModel(
            tuple(self.variables.values()), self.dag, {n: t for n, t in self.cpts.items() if n != x}
        )


def validate(m: CausalModel) -> ValidationReport:
    """Re-check every model invariant; raises on the first violation."""
    _, report = check_parts(tuple(m.variables.values()), m.dag.edges, m.cpts)
    return report


@dataclass(frozen=True)
class IncompleteModel:
    """A causal diagram with some mechanisms still unknown."""

    variables: tuple[Variable, ...]
    dag: Dag
    cpts: Mapping[str, Table]

    @property
    def missing(self) -> tuple[str, ...]:
        return tuple(n for n in self.dag.order if n not in self.cpts)

    def complete(self, cpts: Mapping[str, Table]) -> CausalModel:
        merged = dict(self.cpts)
        merged.update(cpts)
        return CausalModel(self.variables, self.dag.edges, merged)


# -- exact inference ----------------------------------------------------------------


def joint(m: CausalModel, cap: int = DEFAULT_CAP) -> Table:
    """Full joint distribution, scope in topological order."""
    if m.state_space() > cap:
        raise StateSpaceError(f"joint has {m.state_space()} cells, cap is {cap}")
    if m._joint is None:
        m._joint = product_table([m.cpts[n] for n in m.dag.order])
    return m._joint


def _point_masses(variables: Mapping[str, Variable], fixed: Mapping[str, int]) -> list[Table]:
    return [Table.point_mass(variables[n], s) for n, s in fixed.items()]


def query(m: CausalModel, targets: Sequence[str], evidence: Assignment = None, cap: int = DEFAULT_CAP) -> Table:
    """Exact p(targets | evidence)."""
    targets = tuple(targets)
    m.dag._check(targets)
    evidence = m.assignment(evidence or {})
    conditioned = joint(m, cap).condition_on(evidence)
    free = tuple(t for t in targets if t not in evidence)
    parts = [conditioned.marginal(free)] if free else []
    parts += _point_masses(m.variables, {t: evidence[t] for t in targets if t in evidence})
    if not parts:
        raise ValidationError("query needs at least one target")
    out = product_table(parts) if len(parts) > 1 else parts[0]
    return out.reorder(targets)


def intervene(m: CausalModel, do: Assignment) -> CausalModel:
    """Mutilated model for do(X = x).

    Intervened variables stay in the graph as point-mass roots; children
    have the intervened parent fixed in their CPTs, so the edge disappears.
    """
    do = m.assignment(do)
    cpts = {}
    for n, t in m.cpts.items():
        if n in do:
            cpts[n] = Table.point_mass(m.variables[n], do[n])
        else:
            fixed = {p: do[p] for p in t.given_names if p in do}
            cpts[n] = t.fix_given(fixed) if fixed else t
    edges = [(p, n) for n, t in cpts.items() for p in t.given_names]
    return CausalModel(m.variables.values(), edges, cpts)


def interventional_query(
    m: CausalModel,
    targets: Sequence[str],
    do: Assignment = None,
    evidence: Assignment = None,
    cap: int = DEFAULT_CAP,
) -> Table:
    """p(targets | do, evidence), computed on the mutilated model."""
    do = dict(do or {})
    evidence = dict(evidence or {})
    overlap = set(do) & set(evidence)
    if overlap:
        raise ValidationError(f"variables both intervened and observed: {sorted(overlap)}")
    model = intervene(m, do) if do else m
    return query(model, targets, evidence, cap)


# -- functional causal models -----------------------------------------------------


class FunctionalModel:
    """A causal model whose observed variables are deterministic given their parents.

    ``background`` names hidden root variables; each has exactly one child,
    which is observed.  Observed roots keep an arbitrary prior and act as
    their own background.  Every observed non-root variable must have a 0/1 CPT.
    """

    def __init__(self, model: CausalModel, background: Iterable[str]):
        self.model = model
        self.background = frozenset(background)
        dag = model.dag
        dag._check(self.background)
        self.background_of: dict[str, str] = {}
        for u in sorted(self.background):
            if dag.parents(u):
                raise ConsistencyError(f"background variable {u!r} must be a root")
            children = dag.children(u)
            if len(children) != 1:
                raise ConsistencyError(f"background variable {u!r} must have exactly one child")
            (x,) = children
            if x in self.background:
                raise ConsistencyError(f"background variable {u!r} points at background {x!r}")
            if x in self.background_of:
                raise ConsistencyError(f"{x!r} has more than one background variable")
            self.background_of[x] = u
        for x in self.observed:
            if dag.parents(x) and not model.cpts[x].is_deterministic():
                raise ValidationError(f"mechanism of observed variable {x!r} is not deterministic")
        self._induced: CausalModel | None = None

    def __repr__(self):
        return f"FunctionalModel({self.model.dag!r}, background={sorted(self.background)})"

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(n for n in self.model.dag.order if n not in self.background)

    @property
    def exogenous(self) -> tuple[str, ...]:
        """Roots of the full model: background variables plus observed roots."""
        return tuple(n for n in self.model.dag.order if n in self.model.roots)

    @property
    def induced(self) -> CausalModel:
        if self._induced is None:
            self._induced = induce_cgm(self)
        return self._induced

    def exogenous_configurations(self, cap: int = DEFAULT_CAP) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """All exogenous assignments with their prior probabilities.

        Returns a mapping from exogenous name to an index array, and the
        weight array, both of length equal to the number of configurations.
        """
        exo = self.exogenous
        cards = [self.model.variables[n].card for n in exo]
        total = math.prod(cards)
        if total > cap:
            raise StateSpaceError(f"{total} exogenous configurations, cap is {cap}")
        grids = np.indices(cards).reshape(len(cards), -1)
        weights = np.ones(grids.shape[1])
        for i, n in enumerate(exo):
            weights = weights * self.model.cpts[n].values[grids[i]]
        return {n: grids[i] for i, n in enumerate(exo)}, weights

    def propagate(self, exo: Mapping[str, np.ndarray], do: Mapping[str, int] | None = None) -> dict[str, np.ndarray]:
        """Deterministically evaluate every variable for each exogenous configuration."""
        do = do or {}
        n_cfg = len(next(iter(exo.values())))
        world: dict[str, np.ndarray] = {}
        for name in self.model.dag.order:
            if name in do:
                world[name] = np.full(n_cfg, do[name], dtype=np.intp)
            elif name in exo:
                world[name] = exo[name]
            else:
                t = self.model.cpts[name]
                cols = t.values[(slice(None),) + tuple(world[p] for p in t.given_names)]
                world[name] = np.argmax(cols, axis=0)
        return world


def induce_cgm(f: FunctionalModel) -> CausalModel:
    """Drop the background variables, marginalizing each mechanism over its noise prior."""
    m = f.model
    cpts = {}
    for x in f.observed:
        t = m.cpts[x]
        u = f.background_of.get(x)
        if u is None:
            cpts[x] = t
            continue
        ax = t.axis(u)
        prior = m.cpts[u].values
        shape = [1] * t.values.ndim
        shape[ax] = prior.size
        values = (t.values * prior.reshape(shape)).sum(axis=ax)
        given = [v for v in t.given if v.name != u]
        cpts[x] = Table(t.scope, values, given)
    variables = [m.variables[n] for n in m.variables if n not in f.background]
    edges = [(p, n) for n, t in cpts.items() for p in t.given_names]
    return CausalModel(variables, edges, cpts)


def functional_model(cpts: Iterable[Table], background: Iterable[str]) -> FunctionalModel:
    return FunctionalModel(CausalModel.from_cpts(cpts), background)


def deterministic_cpt(variable: Variable, parents: Sequence[Variable], fn) -> Table:
    """CPT with a 1 at ``fn(*parent_state_indices)`` in every row."""
    cards = [p.card for p in parents]
    rows = np.zeros((math.prod(cards), variable.card))
    for i, cfg in enumerate(np.ndindex(*cards) if cards else [()]):
        rows[i, variable.index(int(fn(*cfg)))] = 1.0
    return Table.from_rows(variable, parents, rows)


# -- datasets -------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Samples as state indices; one row per draw, one column per variable."""

    columns: tuple[Variable, ...]
    rows: np.ndarray
    provenance: str = "observational"
    intervened: frozenset[str] = field(default_factory=frozenset)
    seed: int | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise ValidationError(f"rows must have shape (n, {len(self.columns)})")
        cards = np.array([v.card for v in self.columns])
        if rows.size and (rows.min() < 0 or np.any(rows >= cards)):
            raise ValidationError("dataset entry outside its variable's cardinality")
        if self.provenance not in ("observational", "interventional"):
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        names = {v.name for v in self.columns}
        if not set(self.intervened) <= names:
            raise ValidationError("intervened set must be a subset of the columns")
        if self.provenance == "observational" and self.intervened:
            raise ValidationError("observational data cannot have an intervened set")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "intervened", frozenset(self.intervened))

    def __len__(self):
        return self.rows.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.columns)

    def var(self, name: str) -> Variable:
        return self.columns[self._index(name)]

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"{name!r} is not a dataset column") from None

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self._index(name)]

    def counts(self, names: Sequence[str]) -> np.ndarray:
        """Contingency array with one axis per name."""
        idx = [self._index(n) for n in names]
        cards = tuple(self.columns[i].card for i in idx)
        if not idx:
            return np.array(float(len(self)))
        flat = np.ravel_multi_index(tuple(self.rows[:, i] for i in idx), cards)
        return np.bincount(flat, minlength=math.prod(cards)).reshape(cards).astype(float)

    def empirical(self, names: Sequence[str]) -> Table:
        """Empirical joint distribution of ``names``."""
        if len(self) == 0:
            raise PreconditionError("empty dataset")
        c = self.counts(names)
        return Table([self.var(n) for n in names], c / c.sum())


def sample(m: CausalModel | FunctionalModel, n: int, seed: int) -> Dataset:
    """Ancestral sampling in topological order with a PCG64 generator.

    For a :class:`FunctionalModel` the background columns are dropped.
    """
    if n < 1:
        raise ValidationError("sample size must be >= 1")
    model = m.model if isinstance(m, FunctionalModel) else m
    rows = _ancestral(model, n, seed)
    order = model.dag.order
    keep = [n_ for n_ in order if not (isinstance(m, FunctionalModel) and n_ in m.background)]
    cols = [order.index(k) for k in keep]
    return Dataset(tuple(model.variables[k] for k in keep), rows[:, cols], "observational", frozenset(), seed)


def _ancestral(model: CausalModel, n: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    order = model.dag.order
    out = np.zeros((n, len(order)), dtype=np.int64)
    pos = {name: i for i, name in enumerate(order)}
    for name in order:
        t = model.cpts[name]
        u = rng.random(n)
        if t.given:
            cfg = np.ravel_multi_index(tuple(out[:, pos[p]] for p in t.given_names), [v.card for v in t.given])
            probs = t.values.reshape(t.scope[0].card, -1)[:, cfg].T
        else:
            probs = np.broadcast_to(t.values, (n, t.values.size))
        cum = np.cumsum(probs, axis=1)
        state = (u[:, None] >= cum).sum(axis=1)
        out[:, pos[name]] = np.minimum(state, t.scope[0].card - 1)
    return out


def sample_randomized(
    m: CausalModel | FunctionalModel,
    targets: Sequence[str],
    n: int,
    seed: int,
    design: Mapping[str, Sequence[float]] | None = None,
) -> Dataset:
    """Randomized experiment: each target is drawn independently from ``design`` (default uniform)."""
    model = m.model if isinstance(m, FunctionalModel) else m
    design = design or {}
    replace = {}
    for t in targets:
        var = model.variables[t]
        probs = design.get(t, np.full(var.card, 1.0 / var.card))
        replace[t] = Table((var,), probs)
    base: CausalModel | FunctionalModel = model.with_cpts(replace)
    if isinstance(m, FunctionalModel):
        # a randomized variable's background loses its only child
        orphans = {m.background_of[t] for t in targets if t in m.background_of}
        kept = [t for k, t in base.cpts.items() if k not in orphans]
        base = FunctionalModel(CausalModel.from_cpts(kept), m.background - orphans)
    d = sample(base, n, seed)
    return Dataset(d.columns, d.rows, "interventional", frozenset(targets), seed)


def fit_cpt(d: Dataset, x: str, pa: Sequence[str] = (), smoothing: float = 1.0) -> Table:
    """Frequency estimate of p(x | pa) with additive smoothing.

    Parent configurations never seen get a uniform row.  On interventional
    data every parent must have been randomized, otherwise the fit would not
    estimate p(x | do pa).
    """
    pa = tuple(pa)
    if smoothing < 0:
        raise ValidationError("smoothing must be >= 0")
    if d.provenance == "interventional" and not set(pa) <= d.intervened:
        raise PreconditionError(
            f"parents {sorted(set(pa) - d.intervened)} of {x!r} were not randomized in this experiment"
        )
    c = d.counts((x,) + pa) + smoothing
    total = c.sum(axis=0, keepdims=True)
    card = c.shape[0]
    values = np.where(total > 0, c / np.where(total > 0, total, 1.0), 1.0 / card)
    return Table((d.var(x),), values, [d.var(p) for p in pa])
