"""Finite-domain variables, probability tables and information measures.

All information quantities are in bits.  Tables are immutable: the array
behind a :class:`Table` is flagged read-only after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AbsoluteContinuityError, NormalizationError, ValidationError, ZeroProbabilityError

NORM_TOL = 1e-9

Assignment = Mapping[str, int]


@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        object.__setattr__(self, "states", states)
        if not self.name:
            raise ValidationError("variable name must be non-empty")
        if len(states) < 1:
            raise ValidationError(f"variable {self.name!r} has no states")
        if len(set(states)) != len(states):
            raise ValidationError(f"variable {self.name!r} has duplicate state labels")

    @property
    def card(self) -> int:
        return len(self.states)

    def index(self, label) -> int:
        """State index for a label; integers in range pass through."""
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if 0 <= label < self.card:
                return int(label)
            raise ValidationError(f"state index {label} out of range for {self.name!r}")
        try:
            return self.states.index(str(label))
        except ValueError:
            raise ValidationError(f"{label!r} is not a state of {self.name!r}") from None

    @classmethod
    def binary(cls, name: str) -> "Variable":
        return cls(name, ("0", "1"))

    @classmethod
    def ranged(cls, name: str, card: int) -> "Variable":
        return cls(name, tuple(str(i) for i in range(card)))


def check_assignment(variables: Mapping[str, Variable], assignment: Assignment) -> dict[str, int]:
    out = {}
    for name, value in assignment.items():
        if name not in variables:
            raise ValidationError(f"unknown variable {name!r}")
        out[name] = variables[name].index(value)
    return out


class Bits(float):
    """A float measured in bits, with a natural-log accessor."""

    @property
    def nats(self) -> float:
        return float(self) * math.log(2.0)

    def __repr__(self):
        return f"Bits({float(self)!r})"


class Table:
    """Probability table p(scope | given).

    ``values`` has one axis per variable, scope axes first, then given axes.
    For every given-assignment the entries over the scope axes sum to one.
    Rows off by less than ``NORM_TOL`` are renormalized; larger deviations
    raise :class:`NormalizationError`.
    """

    __slots__ = ("scope", "given", "values")

    def __init__(self, scope: Sequence[Variable], values, given: Sequence[Variable] = ()):
        scope = tuple(scope)
        given = tuple(given)
        names = [v.name for v in scope + given]
        if len(set(names)) != len(names):
            raise ValidationError(f"scope and given must be disjoint and unique: {names}")
        shape = tuple(v.card for v in scope + given)
        arr = np.array(values, dtype=float)
        if arr.size != math.prod(shape):
            raise ValidationError(f"table over {names} needs {math.prod(shape)} entries, got {arr.size}")
        arr = arr.reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise NormalizationError(f"non-finite entries in table over {names}")
        if arr.size and (arr.min() < -NORM_TOL or arr.max() > 1 + NORM_TOL):
            raise NormalizationError(f"entries outside [0, 1] in table over {names}")
        arr = np.clip(arr, 0.0, 1.0)
        sums = arr.sum(axis=tuple(range(len(scope))), keepdims=True)
        residual = np.abs(sums - 1.0)
        if residual.size and residual.max() > NORM_TOL:
            raise NormalizationError(
                f"rows of table over {names} do not sum to 1 (max residual {residual.max():.3g})"
            )
        arr = arr / sums
        arr.setflags(write=False)
        self.scope = scope
        self.given = given
        self.values = arr

    # -- construction helpers -------------------------------------------------

    @classmethod
    def point_mass(cls, variable: Variable, state) -> "Table":
        values = np.zeros(variable.card)
        values[variable.index(state)] = 1.0
        return cls((variable,), values)

    @classmethod
    def uniform(cls, scope: Sequence[Variable], given: Sequence[Variable] = ()) -> "Table":
        shape = tuple(v.card for v in tuple(scope) + tuple(given))
        k = math.prod(v.card for v in scope)
        return cls(scope, np.full(shape, 1.0 / k), given)

    @classmethod
    def from_rows(cls, variable: Variable, parents: Sequence[Variable], rows) -> "Table":
        """CPT from row-major rows: one distribution over ``variable`` per parent configuration."""
        rows = np.asarray(rows, dtype=float)
        n_cfg = math.prod(p.card for p in parents)
        if rows.shape != (n_cfg, variable.card):
            raise ValidationError(
                f"CPT for {variable.name!r} needs {n_cfg} rows of {variable.card}, got shape {rows.shape}"
            )
        values = rows.T.reshape((variable.card,) + tuple(p.card for p in parents))
        return cls((variable,), values, parents)

    # -- introspection ----------------------------------------------------------

    @property
    def variables(self) -> tuple[Variable, ...]:
        return self.scope + self.given

    @property
    def scope_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.scope)

    @property
    def given_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.given)

    @property
    def names(self) -> tuple[str, ...]:
        return self.scope_names + self.given_names

    @property
    def is_joint(self) -> bool:
        return not self.given

    def var(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise ValidationError(f"{name!r} not in table over {self.names}")

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"{name!r} not in table over {self.names}") from None

    def rows(self) -> np.ndarray:
        """Row-major CPT rows, shape (given configurations, scope configurations)."""
        k = math.prod(v.card for v in self.scope)
        return self.values.reshape(k, -1).T.copy()

    def is_deterministic(self, tol: float = 0.0) -> bool:
        v = self.values
        return bool(np.all((np.abs(v) <= tol) | (np.abs(v - 1.0) <= tol)))

    def __call__(self, **assignment) -> float:
        idx = tuple(v.index(assignment[v.name]) for v in self.variables)
        return float(self.values[idx])

    def __repr__(self):
        g = f" | {', '.join(self.given_names)}" if self.given else ""
        return f"Table(p({', '.join(self.scope_names)}{g}))"

    def allclose(self, other: "Table", atol: float = 1e-9) -> bool:
        if self.names != other.names:
            other = other.reorder(self.scope_names, self.given_names)
        return bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))

    # -- algebra ----------------------------------------------------------------

    def reorder(self, scope: Sequence[str], given: Sequence[str] | None = None) -> "Table":
        given = self.given_names if given is None else tuple(given)
        if set(scope) != set(self.scope_names) or set(given) != set(self.given_names):
            raise ValidationError(f"reorder {tuple(scope)}|{given} does not match {self}")
        order = [self.axis(n) for n in tuple(scope) + tuple(given)]
        return Table(
            [self.var(n) for n in scope], np.transpose(self.values, order), [self.var(n) for n in given]
        )

    def marginal(self, names: Iterable[str]) -> "Table":
        """Sum out every scope variable not in ``names`` (order follows ``names``)."""
        names = tuple(names)
        for n in names:
            if n not in self.scope_names:
                raise ValidationError(f"{n!r} is not a scope variable of {self}")
        drop = tuple(i for i, n in enumerate(self.scope_names) if n not in names)
        arr = self.values.sum(axis=drop) if drop else self.values
        kept = [n for n in self.scope_names if n in names]
        t = Table([self.var(n) for n in kept], arr, self.given)
        return t.reorder(names) if tuple(kept) != names else t

    def conditional(self, targets: Iterable[str], given: Iterable[str], fill: str = "raise") -> "Table":
        """p(targets | given) from a joint table.

        ``fill`` controls given-configurations of probability zero:
        ``"raise"`` raises :class:`ZeroProbabilityError`, ``"uniform"`` fills them uniformly.
        """
        targets, given = tuple(targets), tuple(given)
        if set(targets) & set(given):
            raise ValidationError(f"targets {targets} and given {given} overlap")
        if self.given:
            raise ValidationError("conditional() expects a joint table")
        joint = self.marginal(targets + given)
        arr = joint.values
        k = len(targets)
        denom = arr.sum(axis=tuple(range(k)), keepdims=True)
        zero = denom <= 0.0
        if np.any(zero):
            if fill == "raise":
                raise ZeroProbabilityError(f"p({', '.join(given)}) = 0 for some configuration")
            arr = np.where(zero, 1.0 / math.prod(arr.shape[:k]), arr)
            denom = np.where(zero, 1.0, denom)
        return Table([self.var(n) for n in targets], arr / denom, [self.var(n) for n in given])

    def fix_given(self, assignment: Assignment) -> "Table":
        """Slice the given-axes named in ``assignment`` at their values."""
        idx = []
        keep = []
        for i, v in enumerate(self.variables):
            if i >= len(self.scope) and v.name in assignment:
                idx.append(v.index(assignment[v.name]))
            else:
                idx.append(slice(None))
                if i >= len(self.scope):
                    keep.append(v)
        return Table(self.scope, self.values[tuple(idx)], keep)

    def condition_on(self, evidence: Assignment) -> "Table":
        """Joint table restricted to ``evidence`` and renormalized; evidence variables are dropped."""
        if self.given:
            raise ValidationError("condition_on() expects a joint table")
        idx = tuple(v.index(evidence[v.name]) if v.name in evidence else slice(None) for v in self.scope)
        arr = self.values[idx]
        total = arr.sum()
        if total <= 0.0:
            raise ZeroProbabilityError(f"evidence {dict(evidence)} has probability zero")
        kept = [v for v in self.scope if v.name not in evidence]
        return Table(kept, arr / total)

    def probability(self, assignment: Assignment) -> float:
        """Marginal probability of a (partial) assignment under a joint table."""
        idx = tuple(v.index(assignment[v.name]) if v.name in assignment else slice(None) for v in self.scope)
        return float(np.sum(self.values[idx]))


def product_table(tables: Sequence[Table]) -> Table:
    """Joint table from a chain of conditionals whose givens are covered by earlier scopes."""
    seen: list[Variable] = []
    for t in tables:
        for v in t.variables:
            if v.name not in [s.name for s in seen]:
                seen.append(v)
    names = [v.name for v in seen]
    letters = {n: chr(ord("a") + i) if i < 26 else chr(ord("A") + i - 26) for i, n in enumerate(names)}
    operands = []
    subs = []
    for t in tables:
        operands.append(t.values)
        subs.append("".join(letters[n] for n in t.names))
    out = "".join(letters[n] for n in names)
    arr = np.einsum(",".join(subs) + "->" + out, *operands)
    return Table(seen, arr)


# -- information measures -------------------------------------------------------


def _plogp(p: np.ndarray) -> float:
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log2(nz)))


def _require_joint(t: Table):
    if t.given:
        raise ValidationError(f"expected a joint table, got {t}")


def entropy(p: Table) -> Bits:
    """Shannon entropy H(p) in bits, with 0 log 0 = 0."""
    _require_joint(p)
    return Bits(max(0.0, _plogp(p.values)))


def _disjoint(*groups):
    seen = set()
    for g in groups:
        g = set(g)
        if g & seen:
            raise ValidationError(f"variable sets overlap: {sorted(g & seen)}")
        seen |= g


def conditional_entropy(joint: Table, targets: Iterable[str], given: Iterable[str] = ()) -> Bits:
    """H(T | G) = H(T, G) - H(G)."""
    targets, given = tuple(targets), tuple(given)
    _require_joint(joint)
    _disjoint(targets, given)
    h_tg = _plogp(joint.marginal(targets + given).values)
    h_g = _plogp(joint.marginal(given).values) if given else 0.0
    return Bits(max(0.0, h_tg - h_g))


def mutual_information(joint: Table, a: Iterable[str], b: Iterable[str], given: Iterable[str] = ()) -> Bits:
    """I(A : B | C) = H(A | C) - H(A | B, C)."""
    a, b, given = tuple(a), tuple(b), tuple(given)
    _disjoint(a, b, given)
    value = conditional_entropy(joint, a, given) - conditional_entropy(joint, a, b + given)
    return Bits(max(0.0, value))


def kl_divergence(p: Table, q: Table) -> Bits:
    """D(p || q) in bits.

    Both tables must be joint tables over the same variables in the same
    order.  ``p(w) > 0`` with ``q(w) = 0`` raises
    :class:`AbsoluteContinuityError` instead of returning infinity.
    """
    _require_joint(p)
    _require_joint(q)
    if p.scope != q.scope:
        raise ValidationError(f"KL needs identical scopes: {p.scope_names} vs {q.scope_names}")
    pv, qv = p.values, q.values
    support = pv > 0.0
    if np.any(support & (qv <= 0.0)):
        raise AbsoluteContinuityError(f"p is not absolutely continuous w.r.t. q over {p.scope_names}")
    value = float(np.sum(pv[support] * (np.log2(pv[support]) - np.log2(qv[support]))))
    if -1e-12 < value < 0.0:
        value = 0.0
    return Bits(value)


# -- percentiles ----------------------------------------------------------------


def percentile(samples: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the ceil(q n / 100)-th smallest sample."""
    if not 0 < q <= 100:
        raise ValueError(f"percentile must lie in (0, 100], got {q}")
    xs = sorted(samples)
    if not xs:
        raise ValueError("percentile of an empty sample")
    rank = max(1, math.ceil(q * len(xs) / 100.0))
    return xs[rank - 1]


def distribution_percentile(p: Table, q: float, values: Sequence[float] | None = None) -> float:
    """Nearest-rank percentile of a one-variable distribution.

    Returns the smallest state value whose cumulative probability reaches
    ``q / 100``.  ``values`` maps state indices to numbers (default: the
    index itself) and must be nondecreasing.
    """
    _require_joint(p)
    if len(p.scope) != 1:
        raise ValidationError("distribution_percentile needs a single-variable table")
    if not 0 < q <= 100:
        raise ValueError(f"percentile must lie in (0, 100], got {q}")
    values = list(range(p.scope[0].card)) if values is None else list(values)
    cdf = np.cumsum(p.values)
    idx = int(np.searchsorted(cdf, q / 100.0 - 1e-12, side="left"))
    return values[min(idx, len(values) - 1)]


@dataclass(frozen=True)
class Certificate:
    """Error certificate for an approximation: achieved divergence against its bound.

    ``details`` carries per-term diagnostics (per-evidence KLs, per-source
    entropies, which bound variant was used).
    """

    divergence: Bits
    bound: Bits
    preconditions_ok: bool
    details: Mapping[str, object] = None

    @property
    def slack(self) -> float:
        return float(self.bound) - float(self.divergence)

    @property
    def holds(self) -> bool:
        return float(self.divergence) <= float(self.bound) + 1e-9
