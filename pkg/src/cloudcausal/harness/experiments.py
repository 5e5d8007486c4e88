"""Parameter sweeps and experiment drivers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import Table, distribution_percentile
from ..graphs import G1
from ..models import (
    FunctionalModel,
    IncompleteModel,
    fit_cpt,
    interventional_query,
    joint,
    query,
    sample,
    sample_randomized,
)
from ..pipelines import backdoor_predict, integrate_sandbox
from ..transport import transport_certificate
from .scenarios import (
    LatencyParams,
    gen_auction_model,
    gen_latency_model,
    mechanism_table,
    transport_inputs_from_joint,
    transport_inputs_from_model,
)

SWEEP_HEADER = (
    "r", "p_true", "p_bar", "kl_bits", "bound_bits",
    "p_true_emp", "p_bar_emp", "kl_bits_emp", "bound_bits_emp",
)

DEFAULT_GRID = tuple(round(0.01 * i, 2) for i in range(51))


@dataclass(frozen=True)
class SweepResult:
    rows: list[tuple[float, ...]]
    seed: int
    n: int
    header: tuple[str, ...] = field(default=SWEEP_HEADER)

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([row[i] for row in self.rows])


def privacy_point(r: float, n: int, seed: int) -> tuple[float, ...]:
    """One sweep row: exact and empirical p(Z=1), p_bar(Z=1), KL and bound at confounder strength r."""
    f = gen_auction_model(r)
    m = f.induced
    names = ("Z", "X_1", "X_2", "C")
    exact_joint = joint(m).marginal(names)
    exact = transport_certificate(exact_joint, transport_inputs_from_model(m, "Z", ("X_1", "X_2"), "C"))

    data = sample(f, n, seed)
    emp_joint = data.empirical(names)
    mechanism = mechanism_table(m, "Z", ("X_1", "X_2"))
    emp = transport_certificate(emp_joint, transport_inputs_from_joint(emp_joint, mechanism, "C"))
    return (
        float(r),
        float(exact_joint.marginal(("Z",)).values[1]),
        float(exact.details["p_bar"].values[1]),
        float(exact.divergence),
        float(exact.bound),
        float(emp_joint.marginal(("Z",)).values[1]),
        float(emp.details["p_bar"].values[1]),
        float(emp.divergence),
        float(emp.bound),
    )


def run_privacy_sweep(grid: Sequence[float] = DEFAULT_GRID, n: int = 1000, seed: int = 0) -> SweepResult:
    """Sweep the confounder strength; point i samples with seed ``seed ^ i``."""
    grid = sorted(float(r) for r in grid)
    rows = [privacy_point(r, n, seed ^ i) for i, r in enumerate(grid)]
    return SweepResult(rows, seed, n)


# -- latency debugging ---------------------------------------------------------------------


@dataclass(frozen=True)
class LatencyRow:
    experiment: str  # "backdoor" or "sandbox"
    s: int | None
    p99_pred: float
    p99_true: float

    @property
    def error(self) -> float:
        return self.p99_pred - self.p99_true


def _p99(t: Table, values) -> float:
    return distribution_percentile(t, 99, values)


def run_debug_experiment(p: LatencyParams = LatencyParams(), n_obs: int | None = 100_000,
                         n_int: int | None = 100_000, seed: int = 0, smoothing: float = 0.0) -> list[LatencyRow]:
    """Back-door and sandbox experiments on the synthetic latency system.

    Experiment 1 adjusts observational data over R to predict p(l | do s).
    Experiment 2 fits p(l | do r, s) from a randomized (R, S) experiment,
    combines it with observational p(r, s), and predicts p(l).  Passing
    ``None`` for a sample size uses exact tables instead (infinite-data limit).
    Observational draws use ``seed``, the randomized experiment ``seed + 1``.
    """
    f: FunctionalModel = gen_latency_model(p)
    m = f.induced
    values = p.latency_values()
    s_var = m.variables["S"]

    obs = sample(f, n_obs, seed) if n_obs is not None else None
    adjusted = backdoor_predict(obs if obs is not None else m, "S", "L", {"R"}, dag=G1, smoothing=smoothing)
    rows = []
    for s in range(s_var.card):
        pred = Table(adjusted.scope, adjusted.values[:, s])
        true = interventional_query(m, ("L",), {"S": s})
        rows.append(LatencyRow("backdoor", s, _p99(pred, values), _p99(true, values)))

    if obs is not None:
        known = {
            "H": fit_cpt(obs, "H", (), smoothing),
            "R": fit_cpt(obs, "R", m.parents("R"), smoothing),
            "S": fit_cpt(obs, "S", m.parents("S"), smoothing),
        }
    else:
        known = {n: m.cpts[n] for n in ("H", "R", "S")}
    incomplete = IncompleteModel(tuple(m.variables.values()), m.dag, known)
    if n_int is not None:
        experiment = sample_randomized(f, ("R", "S"), n_int, seed + 1)
        completed = integrate_sandbox(incomplete, experiment, "L", smoothing)
    else:
        completed = incomplete.complete({"L": m.cpts["L"]})
    pred = query(completed, ("L",))
    rows.append(LatencyRow("sandbox", None, _p99(pred, values), _p99(query(m, ("L",)), values)))
    return rows
