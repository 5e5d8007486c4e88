"""Application workflows: debugging/control of a system model, and the
privacy-preserving cost prediction protocol between cloud clients."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .core import Bits, Table, conditional_entropy, product_table
from .counterfactuals import (
    CounterfactualQuery,
    approx_counterfactual,
    check_zset,
    generalized_approx_counterfactual,
    root_w,
)
from .errors import PreconditionError, StateSpaceError, ValidationError
from .graphs import Dag
from .models import DEFAULT_CAP, CausalModel, Dataset, IncompleteModel, fit_cpt, joint
from .transport import TransportInputs, approx_transport

LOW_CONFIDENCE_BITS = 0.5


@dataclass(frozen=True)
class Policy:
    """A mechanism pi(variable | inputs) that the decision maker controls."""

    variable: str
    table: Table

    def __post_init__(self):
        if self.table.scope_names != (self.variable,):
            raise ValidationError(f"policy table must have scope ({self.variable!r},)")

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.table.given_names

    def encoding(self) -> tuple:
        return tuple(map(tuple, self.table.rows()))


@dataclass(frozen=True)
class Utility:
    """Real value per joint state of ``targets``; ``values`` has one axis per target."""

    targets: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "targets", tuple(self.targets))
        if values.ndim != len(self.targets):
            raise ValidationError("utility needs one axis per target")
        if not np.all(np.isfinite(values)):
            raise ValidationError("utility values must be finite")
        object.__setattr__(self, "values", values)

    def expected(self, m: CausalModel, cap: int = DEFAULT_CAP) -> float:
        p = joint(m, cap).marginal(self.targets).values
        return float(np.sum(p * self.values))


@dataclass(frozen=True)
class DebugQuery:
    """"Would Y have been y' instead of y, had X been x' instead of x, given F = f?" """

    x: str
    x_value: int
    x_prime: int
    y: str
    y_value: int
    y_prime: int
    side: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.x_value == self.x_prime and self.y_value == self.y_prime:
            raise ValidationError("vacuous debug query: x' = x and y' = y")
        if self.x == self.y or self.x in self.side or self.y in self.side:
            raise ValidationError("X, Y and side variables must be distinct")

    @property
    def evidence(self) -> dict[str, int]:
        return {self.x: self.x_value, self.y: self.y_value, **self.side}


class DebugAnswer(NamedTuple):
    probability: float
    bound: Bits
    low_confidence: bool


@dataclass
class StakeholderDisclosure:
    """What one stakeholder puts on the table during context negotiation.

    ``revealed`` stays empty until the stakeholder consents to reveal
    p(variable | C) for the chosen context.
    """

    stakeholder: str
    variable: str
    candidates: frozenset[str]
    entropies: Mapping[str, float]
    revealed: dict[str, Table] = field(default_factory=dict)

    def __post_init__(self):
        self.candidates = frozenset(self.candidates)
        missing = self.candidates - set(self.entropies)
        if missing:
            raise ValidationError(f"stakeholder {self.stakeholder} lacks entropies for {sorted(missing)}")
        if any(h < 0 for h in self.entropies.values()):
            raise ValidationError("entropies must be nonnegative")


# -- Step: back-door prediction --------------------------------------------------------


def backdoor_predict(
    source: CausalModel | Dataset,
    x: str,
    y: str,
    adjust: Iterable[str],
    dag: Dag | None = None,
    smoothing: float = 0.0,
) -> Table:
    """p(y | do x) = sum_z p(y | x, z) p(z), one row per value of x.

    ``source`` is a model or a dataset; a dataset needs ``dag``.  The
    adjustment set must satisfy the back-door criterion in the diagram.
    """
    adjust = tuple(sorted(adjust))
    if isinstance(source, CausalModel):
        dag = source.dag if dag is None else dag
        p = joint(source).marginal((y, x) + adjust)
    else:
        if dag is None:
            raise ValidationError("a causal diagram is required for data-driven adjustment")
        counts = source.counts((y, x) + adjust) + smoothing
        p = Table([source.var(n) for n in (y, x) + adjust], counts / counts.sum())
    if not dag.backdoor_admissible(x, y, adjust):
        raise PreconditionError(
            f"{set(adjust) or '{}'} is not back-door admissible for {x} -> {y}; "
            "adjusting for it would confuse correlation with causation"
        )
    arr = p.values  # axes: y, x, z...
    p_xz = arr.sum(axis=0)
    p_z = p_xz.sum(axis=0)
    bad = (p_xz <= 0.0) & (p_z[None] > 0.0)
    if np.any(bad):
        raise PreconditionError(f"p({y} | {x}, {', '.join(adjust)}) is not estimable for some strata")
    y_given_xz = np.divide(arr, p_xz[None], out=np.zeros_like(arr), where=p_xz[None] > 0)
    out = (y_given_xz * p_z[None, None]).reshape(arr.shape[0], arr.shape[1], -1).sum(axis=2)
    return Table((p.var(y),), out, (p.var(x),))


# -- Step: sandbox integration ----------------------------------------------------------


def integrate_sandbox(incomplete: IncompleteModel, data: Dataset, x: str | None = None,
                      smoothing: float = 1.0) -> CausalModel:
    """Fit the missing mechanism of ``x`` from a randomized experiment and plug it in.

    Every parent of ``x`` must have been randomized in ``data``; otherwise
    the regression would not estimate p(x | do pa).
    """
    missing = incomplete.missing
    if x is None:
        if len(missing) != 1:
            raise ValidationError(f"specify which mechanism to fill; missing: {missing}")
        x = missing[0]
    if x not in missing:
        raise ValidationError(f"{x!r} already has a mechanism")
    parents = tuple(sorted(incomplete.dag.parents(x)))
    if data.provenance != "interventional":
        raise PreconditionError("sandbox integration needs interventional data, got observational")
    unvaried = set(parents) - data.intervened
    if unvaried:
        raise PreconditionError(f"parents {sorted(unvaried)} of {x!r} were not varied in the experiment")
    cpt = fit_cpt(data, x, parents, smoothing)
    declared = {v.name: v for v in incomplete.variables}
    if any(declared[v.name] != v for v in cpt.variables):
        raise ValidationError("dataset schemes differ from the model's variables")
    return incomplete.complete({x: cpt})


# -- Step: control ---------------------------------------------------------------------


def _simplex_grid(card: int, steps: int) -> list[tuple[float, ...]]:
    pts = []
    for combo in itertools.product(range(steps + 1), repeat=card):
        if sum(combo) == steps:
            pts.append(tuple(c / steps for c in combo))
    return pts


def _letters(names):
    return {n: chr(ord("a") + i) if i < 26 else chr(ord("A") + i - 26) for i, n in enumerate(names)}


def policy_weights(m: CausalModel, x: str, u: Utility) -> np.ndarray:
    """Array W with E[u] = sum W[x, pa] pi(x | pa), shape (card x, *parent cards)."""
    pa = m.parents(x)
    names = list(m.names)
    letters = _letters(names)
    operands, subs = [], []
    for n, t in m.cpts.items():
        if n == x:
            continue
        operands.append(t.values)
        subs.append("".join(letters[v] for v in t.names))
    operands.append(u.values)
    subs.append("".join(letters[v] for v in u.targets))
    for n in (x,) + pa:
        operands.append(np.ones(m.variables[n].card))
        subs.append(letters[n])
    out = "".join(letters[n] for n in (x,) + pa)
    return np.einsum(",".join(subs) + "->" + out, *operands)


def candidate_policies(m: CausalModel, x: str, space: str = "deterministic", step: float = 0.1,
                       limit: int = 1_000_000):
    """Yield candidate CPT arrays for ``x`` in canonical (lexicographic) order."""
    var = m.variables[x]
    pa_cards = [m.variables[p].card for p in m.parents(x)]
    n_cfg = math.prod(pa_cards)
    if space == "deterministic":
        rows_options = [tuple(float(i == k) for i in range(var.card)) for k in range(var.card)]
    elif space == "stochastic":
        steps = round(1.0 / step)
        if not math.isclose(steps * step, 1.0):
            raise ValidationError("grid step must divide 1")
        rows_options = sorted(_simplex_grid(var.card, steps), reverse=True)
    else:
        raise ValidationError(f"unknown policy space {space!r}")
    if len(rows_options) ** n_cfg > limit:
        raise StateSpaceError(f"{len(rows_options) ** n_cfg} candidate policies exceed limit {limit}")
    for choice in itertools.product(rows_options, repeat=n_cfg):
        rows = np.array(choice)
        yield rows.T.reshape((var.card, *pa_cards))


def optimize_policy(m: CausalModel, x: str, u: Utility, space: str = "deterministic", step: float = 0.1,
                    cap: int = DEFAULT_CAP, tie_tol: float = 1e-12) -> tuple[Policy, float]:
    """Exhaustive search for the mechanism of ``x`` that maximizes E[u].

    Candidates are visited in canonical order: one row per parent
    configuration (row-major), and per row the deterministic choice of
    state 0 first.  A later candidate wins only if it beats the incumbent
    by more than ``tie_tol``, so ties go to the first one.
    """
    if m.state_space() > cap:
        raise StateSpaceError(f"model has {m.state_space()} cells, cap is {cap}")
    weights = policy_weights(m, x, u)
    best, best_value = None, -math.inf
    for values in candidate_policies(m, x, space, step):
        value = float(np.sum(weights * values))
        if value > best_value + tie_tol:
            best, best_value = values, value
    table = Table((m.variables[x],), best, [m.variables[p] for p in m.parents(x)])
    return Policy(x, table), best_value


# -- Step: observation-level debugging -------------------------------------------------


def debug_query(m: CausalModel, q: DebugQuery, zset: Iterable[str] | None = None,
                threshold: float = LOW_CONFIDENCE_BITS) -> DebugAnswer:
    """Approximate p(Y_{do X=x'} = y' | x, y, f) with the bound H(E | W), E = {X, Y, F}.

    ``low_confidence`` is set when the bound exceeds ``threshold`` bits;
    that flag is a reporting convention only.
    """
    cq = CounterfactualQuery({q.x: q.x_prime}, (q.y,), q.evidence)
    if zset is None:
        dist = approx_counterfactual(m, cq)
        w = root_w(m, cq.do)
    else:
        zset = tuple(zset)
        dist = generalized_approx_counterfactual(m, zset, cq)
        w = check_zset(m, zset, cq.do, cq.targets)
    e = tuple(n for n in m.dag.order if n in cq.evidence and n not in w)
    bound = conditional_entropy(joint(m), e, w) if e else Bits(0.0)
    p = float(dist.values[q.y_prime])
    return DebugAnswer(p, bound, bool(bound > threshold))


# -- privacy protocol ------------------------------------------------------------------


def pick_shared_context(disclosures: Sequence[StakeholderDisclosure]) -> str | None:
    """Common candidate context minimizing the summed entropies, or None if there is none."""
    if len(disclosures) < 2:
        raise ValidationError("context negotiation needs at least two stakeholders")
    common = frozenset.intersection(*(d.candidates for d in disclosures))
    if not common:
        return None
    return min(sorted(common), key=lambda c: sum(d.entropies[c] for d in disclosures))


def context_entropies(joint_table: Table, variable: str, candidates: Iterable[str]) -> dict[str, Bits]:
    """H(variable | C) for each candidate context C, computed by a stakeholder on their own data."""
    return {c: conditional_entropy(joint_table, (variable,), (c,)) for c in candidates}


def predict_outcome(
    mechanism: Table,
    policies: Sequence[Policy],
    disclosures: Sequence[StakeholderDisclosure],
    context_prior: Table,
    x0: str | None = None,
    include_x0: bool = False,
) -> tuple[Table, Bits]:
    """Predicted p_bar(Z | policies) and the bound sum_k H(X_k | C).

    Each policy maps a stakeholder's demand X_k to the purchased product
    Y_k; a disclosure without a policy feeds its variable to the mechanism
    directly.
    """
    if len(context_prior.scope) != 1:
        raise ValidationError("context prior must be over a single context variable")
    c = context_prior.scope_names[0]
    by_input = {}
    for pol in policies:
        if len(pol.inputs) != 1:
            raise ValidationError(f"policy for {pol.variable!r} must take exactly one demand variable")
        by_input[pol.inputs[0]] = pol
    composed = []
    bound = 0.0
    for d in disclosures:
        t = d.revealed.get(c)
        if t is None:
            raise PreconditionError(f"missing disclosure: p({d.variable} | {c}) from stakeholder {d.stakeholder}")
        if d.variable != x0 or include_x0:
            bound += conditional_entropy(product_table([context_prior, t]), (d.variable,), (c,))
        pol = by_input.get(d.variable)
        composed.append(t if pol is None else _compose(t, pol.table, c))
    used = {t.scope_names[0] for t in composed}
    for v in mechanism.given_names:
        if v not in used and v != c:
            raise PreconditionError(f"missing disclosure: nobody revealed a distribution for {v!r}")
    p_bar = approx_transport(TransportInputs(mechanism, tuple(composed), context_prior))
    return p_bar, Bits(bound)


def _compose(x_given_c: Table, policy: Table, c: str) -> Table:
    """p(y | c) = sum_x pi(y | x) p(x | c)."""
    x = x_given_c.scope_names[0]
    xc = x_given_c.reorder((x,), (c,)).values  # axes: x, c
    return Table(policy.scope, policy.values @ xc, x_given_c.given)
