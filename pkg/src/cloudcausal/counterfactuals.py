"""Structural counterfactuals on FCMs and their CGM-only approximations.

The exact quantity sums over background configurations weighted by their
posterior given the evidence.  The approximation replaces the background
variables by a set W of observed nodes (the CGM's roots by default, or any
set satisfying the generalized preconditions), which needs only the CGM.
The certificate compares the two, averaged over evidence, against H(E | W).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Assignment, Bits, Certificate, Table, Variable, conditional_entropy, kl_divergence
from .errors import PreconditionError, ValidationError, ZeroProbabilityError
from .models import DEFAULT_CAP, CausalModel, FunctionalModel, intervene, joint


@dataclass(frozen=True)
class CounterfactualQuery:
    """p(Y_{do X=x'} | e): intervention ``do``, target variables, factual evidence."""

    do: Mapping[str, int]
    targets: tuple[str, ...]
    evidence: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "do", dict(self.do))
        object.__setattr__(self, "evidence", dict(self.evidence))
        if set(self.do) & set(self.targets):
            raise ValidationError("intervened and target variables must be disjoint")
        if not self.targets:
            raise ValidationError("counterfactual query needs a target")


def _flat_index(world: Mapping[str, np.ndarray], names: Sequence[str], cards: Sequence[int]) -> np.ndarray:
    if not names:
        n = len(next(iter(world.values())))
        return np.zeros(n, dtype=np.intp)
    return np.ravel_multi_index(tuple(world[n] for n in names), tuple(cards))


def _cells(t: Table) -> dict[str, np.ndarray]:
    """Per-variable state index for every cell of a joint table (C order)."""
    grid = np.indices(t.values.shape).reshape(len(t.scope), -1)
    return {n: grid[i] for i, n in enumerate(t.scope_names)}


def _cards(variables: Mapping[str, Variable], names: Sequence[str]) -> list[int]:
    return [variables[n].card for n in names]


def _evidence_row(variables, evidence_names, evidence: Mapping[str, int]) -> int:
    if not evidence_names:
        return 0
    return int(np.ravel_multi_index(tuple(evidence[n] for n in evidence_names), _cards(variables, evidence_names)))


def exact_rows(f: FunctionalModel, do: Mapping[str, int], targets: Sequence[str], evidence_names: Sequence[str],
               cap: int = DEFAULT_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Exact counterfactual distributions for every evidence cell at once.

    Returns ``(p_e, rows)`` where ``p_e[i]`` is the probability of evidence
    cell ``i`` and ``rows[i]`` is p(Y_{do} | e_i) flattened over the targets
    (undefined rows, where ``p_e`` is zero, are left at zero).
    """
    variables = f.model.variables
    do = f.model.assignment(do)
    exo, weights = f.exogenous_configurations(cap)
    factual = f.propagate(exo)
    counter = f.propagate(exo, do)
    e_cards = _cards(variables, evidence_names)
    y_cards = _cards(variables, targets)
    n_e, n_y = math.prod(e_cards), math.prod(y_cards)
    e_idx = _flat_index(factual, evidence_names, e_cards)
    y_idx = _flat_index(counter, targets, y_cards)
    mass = np.bincount(e_idx * n_y + y_idx, weights=weights, minlength=n_e * n_y).reshape(n_e, n_y)
    p_e = mass.sum(axis=1)
    rows = np.divide(mass, p_e[:, None], out=np.zeros_like(mass), where=p_e[:, None] > 0)
    return p_e, rows


def approx_rows(m: CausalModel, do: Mapping[str, int], targets: Sequence[str], evidence_names: Sequence[str],
                w_names: Sequence[str], cap: int = DEFAULT_CAP) -> tuple[np.ndarray, np.ndarray]:
    """sum_w p(y | do x', w) p(w | e) for every evidence cell, computed on the CGM alone."""
    variables = m.variables
    do = m.assignment(do)
    e_cards = _cards(variables, evidence_names)
    y_cards = _cards(variables, targets)
    w_cards = _cards(variables, w_names)
    n_e, n_y, n_w = math.prod(e_cards), math.prod(y_cards), math.prod(w_cards)

    j = joint(m, cap)
    cells = _cells(j)
    e_idx = _flat_index(cells, evidence_names, e_cards)
    w_idx = _flat_index(cells, w_names, w_cards)
    p_ew = np.bincount(e_idx * n_w + w_idx, weights=j.values.ravel(), minlength=n_e * n_w).reshape(n_e, n_w)
    p_e = p_ew.sum(axis=1)
    w_given_e = np.divide(p_ew, p_e[:, None], out=np.zeros_like(p_ew), where=p_e[:, None] > 0)

    ji = joint(intervene(m, do), cap) if do else j
    cells_i = _cells(ji)
    y_idx = _flat_index(cells_i, targets, y_cards)
    wi_idx = _flat_index(cells_i, w_names, w_cards)
    p_wy = np.bincount(wi_idx * n_y + y_idx, weights=ji.values.ravel(), minlength=n_w * n_y).reshape(n_w, n_y)
    p_w_do = p_wy.sum(axis=1)
    undefined = (p_w_do <= 0.0)[None, :] & (w_given_e > 0.0)
    if np.any(undefined):
        raise PreconditionError(
            f"p(Y | do {dict(do)}, W) is undefined for a W-cell that the evidence supports"
        )
    y_given_w = np.divide(p_wy, p_w_do[:, None], out=np.zeros_like(p_wy), where=p_w_do[:, None] > 0)
    return p_e, w_given_e @ y_given_w


def _single(rows_fn, variables, q: CounterfactualQuery, *args) -> Table:
    names = tuple(q.evidence)
    ev = {n: variables[n].index(v) for n, v in q.evidence.items()}
    p_e, rows = rows_fn(*args, q.do, q.targets, names)
    i = _evidence_row(variables, names, ev)
    if p_e[i] <= 0.0:
        raise ZeroProbabilityError(f"evidence {dict(q.evidence)} has probability zero")
    return Table([variables[n] for n in q.targets], rows[i])


def exact_counterfactual(f: FunctionalModel, q: CounterfactualQuery, cap: int = DEFAULT_CAP) -> Table:
    """p(Y_{do X=x'} | e) by abduction over all exogenous variables, action, prediction."""
    return _single(lambda *a: exact_rows(*a, cap=cap), f.model.variables, q, f)


def root_w(m: CausalModel, do: Iterable[str]) -> tuple[str, ...]:
    """Roots of the CGM minus the intervened variables, in topological order."""
    do = set(do)
    return tuple(n for n in m.dag.order if n in m.roots and n not in do)


def approx_counterfactual(m: CausalModel, q: CounterfactualQuery, cap: int = DEFAULT_CAP) -> Table:
    """Approximate counterfactual with W = roots(m) minus the intervened variables."""
    w = root_w(m, q.do)
    return _single(lambda *a: approx_rows(*a, w_names=w, cap=cap), m.variables, q, m)


def check_zset(m: CausalModel, zset: Iterable[str], do: Iterable[str], targets: Iterable[str]) -> tuple[str, ...]:
    """Verify the generalized preconditions for ``zset`` and return W = zset minus X.

    Requires Y d-separated from An(Z) \\ Z given Z, and no directed path from
    an intervened variable into W.
    """
    dag = m.dag
    zset = dag._check(zset)
    do = dag._check(do)
    ys = dag._check(targets) - zset
    rest = dag.ancestors(zset) - zset if zset else frozenset()
    if ys & rest:
        raise PreconditionError(f"targets {sorted(ys & rest)} are ancestors of Z, so Y is not separated from An(Z)")
    if ys and rest and not dag.d_separated(ys, rest, zset):
        raise PreconditionError("d-separation check failed: Y is not d-separated from An(Z) \\ Z given Z")
    w = zset - do
    hit = dag.descendants(do) & w if do else frozenset()
    if hit:
        raise PreconditionError(f"influence check failed: intervened variables influence W members {sorted(hit)}")
    return tuple(n for n in dag.order if n in w)


def generalized_approx_counterfactual(m: CausalModel, zset: Iterable[str], q: CounterfactualQuery,
                                      cap: int = DEFAULT_CAP) -> Table:
    w = check_zset(m, zset, q.do, q.targets)
    return _single(lambda *a: approx_rows(*a, w_names=w, cap=cap), m.variables, q, m)


def counterfactual_certificate(
    f: FunctionalModel,
    do: Mapping[str, int],
    targets: Sequence[str],
    evidence_vars: Sequence[str],
    zset: Iterable[str] | None = None,
    cap: int = DEFAULT_CAP,
) -> Certificate:
    """Evidence-averaged KL between exact and approximate counterfactuals, against H(E | W).

    ``zset`` defaults to the roots of the induced CGM.  The per-evidence KL
    terms are returned in ``details["per_evidence"]``.
    """
    m = f.induced
    targets, evidence_vars = tuple(targets), tuple(evidence_vars)
    do = m.assignment(do)
    w = root_w(m, do) if zset is None else check_zset(m, zset, do, targets)
    p_e, exact = exact_rows(f, do, targets, evidence_vars, cap)
    _, approx = approx_rows(m, do, targets, evidence_vars, w, cap)
    y_vars = [m.variables[n] for n in targets]
    e_cards = _cards(m.variables, evidence_vars)
    per_evidence = {}
    total = 0.0
    for i in np.flatnonzero(p_e > 0.0):
        kl = kl_divergence(Table(y_vars, exact[i]), Table(y_vars, approx[i]))
        cell = tuple(int(s) for s in np.unravel_index(i, e_cards)) if e_cards else ()
        per_evidence[cell] = float(kl)
        total += p_e[i] * kl
    e_only = tuple(n for n in evidence_vars if n not in w)
    bound = conditional_entropy(joint(m, cap), e_only, w) if e_only else Bits(0.0)
    return Certificate(
        Bits(total),
        bound,
        True,
        {"W": w, "evidence": evidence_vars, "per_evidence": per_evidence},
    )
