"""Scenario generators: the spot-auction toy market and a synthetic latency system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Table, Variable
from ..errors import ValidationError
from ..models import CausalModel, FunctionalModel, deterministic_cpt, interventional_query, joint, query
from ..transport import TransportInputs


@dataclass(frozen=True)
class AuctionParams:
    r: float = 0.0
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.r <= 0.5:
            raise ValidationError(f"r must lie in [0, 0.5], got {self.r}")
        if self.n < 1:
            raise ValidationError("n must be positive")


def _bernoulli(var: Variable, p: float) -> Table:
    return Table((var,), [1.0 - p, p])


def gen_auction_model(r: float) -> FunctionalModel:
    """Two clients whose demand shares a public context C and a hidden confounder D.

    C ~ Bernoulli(0.5 - r), D ~ Bernoulli(r), N_k ~ Bernoulli(0.2 - 0.2 r),
    X_k = C xor D xor N_k, Y_k = X_k, Z = Y_1 and Y_2.
    """
    AuctionParams(r)
    c, d = Variable.binary("C"), Variable.binary("D")
    n1, n2 = Variable.binary("N_1"), Variable.binary("N_2")
    x1, x2 = Variable.binary("X_1"), Variable.binary("X_2")
    y1, y2 = Variable.binary("Y_1"), Variable.binary("Y_2")
    z = Variable.binary("Z")
    noise = 0.2 - 0.2 * r
    cpts = [
        _bernoulli(c, 0.5 - r),
        _bernoulli(d, r),
        _bernoulli(n1, noise),
        _bernoulli(n2, noise),
        deterministic_cpt(x1, [c, d, n1], lambda a, b, e: a ^ b ^ e),
        deterministic_cpt(x2, [c, d, n2], lambda a, b, e: a ^ b ^ e),
        deterministic_cpt(y1, [x1], lambda a: a),
        deterministic_cpt(y2, [x2], lambda a: a),
        deterministic_cpt(z, [y1, y2], lambda a, b: a & b),
    ]
    return FunctionalModel(CausalModel.from_cpts(cpts), ["N_1", "N_2"])


def mechanism_table(m: CausalModel, outcome: str, inputs: tuple[str, ...]) -> Table:
    """p(outcome | do inputs) for every input configuration."""
    out_var = m.variables[outcome]
    in_vars = [m.variables[n] for n in inputs]
    cards = [v.card for v in in_vars]
    rows = []
    for cfg in np.ndindex(*cards):
        rows.append(interventional_query(m, (outcome,), dict(zip(inputs, cfg))).values)
    return Table.from_rows(out_var, in_vars, np.array(rows))


def transport_inputs_from_model(m: CausalModel, outcome: str, sources: tuple[str, ...], context: str,
                                x0: str | None = None) -> TransportInputs:
    """Exact transport pieces read off a model: p(Z | do X), p(X_k | C), p(C)."""
    j = joint(m)
    marginals = tuple(j.conditional((x,), (context,), fill="uniform") for x in sources)
    return TransportInputs(mechanism_table(m, outcome, sources), marginals, query(m, (context,)), x0)


def transport_inputs_from_joint(full: Table, mechanism: Table, context: str) -> TransportInputs:
    """Transport pieces estimated from a (possibly empirical) joint, with a known mechanism."""
    sources = mechanism.given_names
    marginals = tuple(full.conditional((x,), (context,), fill="uniform") for x in sources)
    return TransportInputs(mechanism, marginals, full.marginal((context,)))


# -- latency system ----------------------------------------------------------------------


@dataclass(frozen=True)
class LatencyParams:
    """Synthetic stand-in for a web server sharing a machine with a concurrent workload.

    A load source H drives the requests R received by the application and S
    received by the concurrent workload; latency bin L grows linearly in
    (R, S) with a small jitter, plus a rare heavy tail whose position also
    grows with S.  All numeric defaults are made up for this harness.
    """

    h_card: int = 8
    r_card: int = 4
    s_card: int = 4
    l_bins: int = 32
    base: int = 1
    per_r: int = 1
    per_s: int = 2
    jitter: int = 1
    tail_weight: float = 0.03
    tail_offset: int = 6
    tail_per_s: int = 2
    follow: float = 0.7
    bin_width: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("h_card", "r_card", "s_card", "l_bins"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        for name in ("base", "per_r", "per_s", "jitter", "tail_offset", "tail_per_s"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if not 0.0 <= self.tail_weight < 1.0 or not 0.0 <= self.follow <= 1.0:
            raise ValidationError("tail_weight must lie in [0, 1) and follow in [0, 1]")
        if not np.isfinite(self.bin_width) or self.bin_width <= 0:
            raise ValidationError("bin_width must be positive")

    def latency_values(self) -> list[float]:
        """Latency (bin centre) for every state of L."""
        return [(b + 0.5) * self.bin_width for b in range(self.l_bins)]


def _request_noise(var: Variable, follow: float, card: int) -> Table:
    # state 0: follow the load level; state k > 0: uniformly random request level k - 1
    return Table((var,), [follow] + [(1.0 - follow) / card] * card)


def gen_latency_model(p: LatencyParams) -> FunctionalModel:
    """FCM with H -> R, H -> S, (R, S) -> L and one background variable for each of R, S, L."""
    h = Variable.ranged("H", p.h_card)
    r = Variable.ranged("R", p.r_card)
    s = Variable.ranged("S", p.s_card)
    l_var = Variable.ranged("L", p.l_bins)
    u_r = Variable.ranged("U_R", p.r_card + 1)
    u_s = Variable.ranged("U_S", p.s_card + 1)
    n_jit = 2 * p.jitter + 1
    u_l = Variable.ranged("U_L", 2 * n_jit)

    def level(hv, card):
        return round(hv * (card - 1) / max(p.h_card - 1, 1))

    def requests(card):
        return lambda hv, u: level(hv, card) if u == 0 else u - 1

    def latency(rv, sv, u):
        tail, j = divmod(u, n_jit)
        b = p.base + p.per_r * rv + p.per_s * sv + (j - p.jitter)
        if tail:
            b += p.tail_offset + p.tail_per_s * sv
        return min(max(b, 0), p.l_bins - 1)

    u_l_prior = [(1.0 - p.tail_weight) / n_jit] * n_jit + [p.tail_weight / n_jit] * n_jit
    cpts = [
        Table.uniform([h]),
        _request_noise(u_r, p.follow, p.r_card),
        _request_noise(u_s, p.follow, p.s_card),
        Table((u_l,), u_l_prior),
        deterministic_cpt(r, [h, u_r], requests(p.r_card)),
        deterministic_cpt(s, [h, u_s], requests(p.s_card)),
        deterministic_cpt(l_var, [r, s, u_l], latency),
    ]
    return FunctionalModel(CausalModel.from_cpts(cpts), ["U_R", "U_S", "U_L"])
