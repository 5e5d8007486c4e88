"""Approximate integration of a known mechanism with per-source context conditionals.

Given p(z | x_0..x_K), each source's p(x_k | c) and the shared p(c), the
prediction treats the sources as independent given the context:

    p_bar(z) = sum_{x, c} p(z | x) prod_k p(x_k | c) p(c)

and the KL error of p_bar against the true p(z) is at most
sum_k H(X_k | C) whenever Z is independent of C given the X's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Bits, Certificate, Table, conditional_entropy, kl_divergence, product_table
from .errors import PreconditionError, ValidationError


@dataclass(frozen=True)
class TransportInputs:
    """Pieces revealed by the different sources.

    Parameters
    ----------
    mechanism : Table
        p(Z | X_0..X_K), optionally also conditioning on context variables.
    marginals : sequence of Table
        One p(X_k | C) per source; every one conditions on the same context.
    context : Table
        Joint prior p(C).  A single-state context means "no shared context".
    x0 : str, optional
        Name of the provider-side variable X_0, excluded from the default bound.
    """

    mechanism: Table
    marginals: tuple[Table, ...]
    context: Table
    x0: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if not self.context.is_joint:
            raise ValidationError("context prior must be a joint table")
        c_names = set(self.context.scope_names)
        c_vars = {v.name: v for v in self.context.scope}
        x_vars = {}
        for t in self.marginals:
            if len(t.scope) != 1:
                raise ValidationError(f"each source table must have one scope variable, got {t}")
            if set(t.given_names) != c_names:
                raise ValidationError(f"{t} must condition on the context {sorted(c_names)}")
            for v in t.given:
                if c_vars[v.name] != v:
                    raise ValidationError(f"scheme mismatch for context variable {v.name!r}")
            x = t.scope[0]
            if x.name in x_vars or x.name in c_names:
                raise ValidationError(f"duplicate source variable {x.name!r}")
            x_vars[x.name] = x
        known = {**x_vars, **c_vars}
        for v in self.mechanism.given:
            if v.name not in known:
                raise ValidationError(f"mechanism conditions on {v.name!r}, which no source reveals")
            if known[v.name] != v:
                raise ValidationError(f"scheme mismatch for {v.name!r}")
        if set(self.mechanism.scope_names) & set(known):
            raise ValidationError("outcome variables must differ from sources and context")
        if self.x0 is not None and self.x0 not in x_vars:
            raise ValidationError(f"x0 {self.x0!r} is not a source variable")

    @property
    def source_names(self) -> tuple[str, ...]:
        return tuple(t.scope_names[0] for t in self.marginals)

    @property
    def context_names(self) -> tuple[str, ...]:
        return self.context.scope_names

    @property
    def outcome_names(self) -> tuple[str, ...]:
        return self.mechanism.scope_names

    def source_joint(self) -> Table:
        """p(C) prod_k p(X_k | C), the independence-given-context surrogate."""
        return product_table([self.context, *self.marginals])


def approx_transport(t: TransportInputs) -> Table:
    """The prediction p_bar(Z)."""
    full = product_table([t.context, *t.marginals, t.mechanism])
    return full.marginal(t.outcome_names)


def bound_terms(t: TransportInputs, include_x0: bool = False) -> dict[str, Bits]:
    out = {}
    for m in t.marginals:
        x = m.scope_names[0]
        if x == t.x0 and not include_x0:
            continue
        out[x] = conditional_entropy(product_table([t.context, m]), (x,), t.context_names)
    return out


def transport_bound(t: TransportInputs, include_x0: bool = False) -> Bits:
    """sum_k H(X_k | C) over the sources; X_0 only when ``include_x0``."""
    return Bits(sum(bound_terms(t, include_x0).values()))


def conditional_independence_gap(joint: Table, a: Sequence[str], b: Sequence[str], given: Sequence[str]) -> float:
    """max |p(a,b,g) p(g) - p(a,g) p(b,g)|; zero iff A and B are independent given G."""
    a, b, given = tuple(a), tuple(b), tuple(given)
    if not a or not b:
        return 0.0
    p_abg = joint.marginal(a + b + given).values
    na, nb = len(a), len(b)
    p_g = p_abg.sum(axis=tuple(range(na + nb)), keepdims=True)
    p_ag = p_abg.sum(axis=tuple(range(na, na + nb)), keepdims=True)
    p_bg = p_abg.sum(axis=tuple(range(na)), keepdims=True)
    return float(np.abs(p_abg * p_g - p_ag * p_bg).max())


def _check_pieces(full: Table, t: TransportInputs, tol: float):
    c = t.context_names
    pc = full.marginal(c)
    if not pc.allclose(t.context, atol=tol):
        raise PreconditionError("context prior is not the marginal of the supplied joint")
    for m in t.marginals:
        x = m.scope_names[0]
        cond = full.conditional((x,), m.given_names, fill="uniform").values
        support = full.marginal(m.given_names).values > tol
        if np.abs((cond - m.values) * support[None]).max() > tol:
            raise PreconditionError(f"p({x} | C) is not the conditional of the supplied joint")
    g = t.mechanism.given_names
    cond = full.conditional(t.outcome_names, g, fill="uniform").reorder(t.outcome_names, g).values
    pg = full.marginal(g).values if g else np.array(1.0)
    weight = (pg > tol).reshape((1,) * len(t.outcome_names) + pg.shape)
    if np.abs((cond - t.mechanism.values) * weight).max() > tol:
        raise PreconditionError("mechanism is not the conditional of the supplied joint")


def transport_certificate(full_joint: Table, t: TransportInputs, include_x0: bool = False,
                          tol: float = 1e-6, ci_tol: float = 1e-9) -> Certificate:
    """KL(p(Z) || p_bar(Z)) against the entropy bound, validated on a full joint.

    The pieces in ``t`` must be marginals/conditionals of ``full_joint``.
    ``preconditions_ok`` reports an exact test of Z independent of C given the
    mechanism's inputs; when it fails the certificate is still returned but
    the bound is not guaranteed.
    """
    _check_pieces(full_joint, t, tol)
    p_z = full_joint.marginal(t.outcome_names)
    p_bar = approx_transport(t).reorder(t.outcome_names)
    divergence = kl_divergence(p_z, p_bar)
    terms = bound_terms(t, include_x0)
    g = t.mechanism.given_names
    rest = tuple(n for n in t.context_names if n not in g)
    gap = conditional_independence_gap(full_joint, t.outcome_names, rest, g)
    return Certificate(
        divergence,
        Bits(sum(terms.values())),
        gap <= ci_tol,
        {"terms": terms, "include_x0": include_x0, "ci_gap": gap, "p_bar": p_bar},
    )


def plausible(candidate: Table, t: TransportInputs, eps: float = 0.0, include_x0: bool = False) -> bool:
    """Whether a candidate p(Z) is compatible with the bound: KL(candidate || p_bar) <= bound (1 + eps)."""
    p_bar = approx_transport(t).reorder(candidate.scope_names)
    try:
        kl = kl_divergence(candidate, p_bar)
    except PreconditionError:
        return False
    return kl <= transport_bound(t, include_x0) * (1.0 + eps) + 1e-12
