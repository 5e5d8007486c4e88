"""Acceptance gate: nine criteria, each printed as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` (or ``python tests/test_acceptance.py``).
"""

from __future__ import annotations

import itertools
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus import (  # noqa: E402
    brute_d_separated,
    brute_force_policy,
    literal_counterfactual,
    random_cf_query,
    random_fcm,
    random_policy_problem,
    random_transport_model,
    transport_pieces,
)
from cloudcausal.counterfactuals import (  # noqa: E402
    CounterfactualQuery,
    counterfactual_certificate,
    exact_counterfactual,
)
from cloudcausal.errors import ZeroProbabilityError  # noqa: E402
from cloudcausal.graphs import Dag  # noqa: E402
from cloudcausal.harness import io as fio  # noqa: E402
from cloudcausal.harness.cli import main as cli_main  # noqa: E402
from cloudcausal.harness.experiments import run_debug_experiment, run_privacy_sweep  # noqa: E402
from cloudcausal.harness.scenarios import LatencyParams, gen_auction_model, transport_inputs_from_model  # noqa: E402
from cloudcausal.models import query  # noqa: E402
from cloudcausal.pipelines import Utility, optimize_policy  # noqa: E402
from cloudcausal.transport import approx_transport, transport_certificate  # noqa: E402

SEED = 20240501


def _line(n: int, ok: bool, text: str) -> str:
    return f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"


def criterion_1():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    held, worst = 0, -math.inf
    for _ in range(200):
        f = random_fcm(rng)
        do, ys, es = random_cf_query(rng, f)
        cert = counterfactual_certificate(f, do, ys, es)
        held += cert.divergence <= cert.bound + 1e-9
        worst = max(worst, cert.divergence - cert.bound)
    dt = time.perf_counter() - t0
    ok = held == 200 and dt < 60
    return ok, f"counterfactual certificate holds {held}/200, max(KL - bound) = {worst:.3g} bits, {dt:.1f}s"


def criterion_2():
    rng = np.random.default_rng(SEED + 1)
    t0 = time.perf_counter()
    held = ci = 0
    for _ in range(200):
        full, t = transport_pieces(random_transport_model(rng))
        cert = transport_certificate(full, t)
        ci += cert.preconditions_ok
        held += cert.preconditions_ok and cert.divergence <= cert.bound + 1e-9
    dt = time.perf_counter() - t0
    ok = held == 200 and dt < 60
    return ok, f"transport certificate holds {held}/200 (CI precondition met {ci}/200), {dt:.1f}s"


def criterion_3():
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    n_cf = 0
    while n_cf < 25:
        f = random_fcm(rng, root_determined=True)
        m = f.induced
        obs = [n for n in m.names if n not in m.roots]
        if len(obs) < 2:
            continue
        cert = counterfactual_certificate(f, {obs[0]: 1}, (obs[-1],), tuple(m.names))
        worst = max(worst, abs(cert.divergence), abs(cert.bound))
        n_cf += 1
    for _ in range(25):
        full, t = transport_pieces(random_transport_model(rng, functional=True))
        cert = transport_certificate(full, t, include_x0=True)
        worst = max(worst, abs(cert.divergence), abs(cert.bound))
    ok = worst <= 1e-12
    return ok, f"exact degenerations: max |divergence|, |bound| = {worst:.3g} over 25 + 25 models"


def criterion_4():
    out = {}
    for r in (0.0, 0.5):
        m = gen_auction_model(r).induced
        t = transport_inputs_from_model(m, "Z", ("X_1", "X_2"), "C")
        full = query(m, ("Z", "X_1", "X_2", "C"))
        cert = transport_certificate(full, t)
        out[r] = (full.marginal(("Z",)).values[1], approx_transport(t).values[1], float(cert.divergence),
                  float(cert.bound))
    expected = {0.0: (0.34, 0.34, 0.0, None), 0.5: (0.41, 0.25, 0.08837165581669393, 2.0)}
    ok = True
    for r, vals in expected.items():
        for got, want in zip(out[r], vals):
            if want is not None and abs(got - want) > 1e-6:
                ok = False
    ok = ok and abs(0.25 * out[0.5][3] - 0.5) <= 1e-6
    p0, p5 = out[0.0], out[0.5]
    return ok, (f"r=0: p={p0[0]:.4f} p_bar={p0[1]:.4f} KL={p0[2]:.5f}; "
                f"r=0.5: p={p5[0]:.4f} p_bar={p5[1]:.4f} KL={p5[2]:.5f} bound={p5[3]:.4f} (quarter = {0.25 * p5[3]:.4f})")


def criterion_5():
    t0 = time.perf_counter()
    result = run_privacy_sweep(n=1000, seed=SEED)
    dt = time.perf_counter() - t0
    kl, bound = result.column("kl_bits_emp"), result.column("bound_bits_emp")
    worst = float(np.max(kl - bound))
    trend = kl[0] < kl[-1]
    ok = worst <= 0.02 and trend and dt < 120 and len(kl) == 51
    return ok, (f"empirical max(KL - bound) = {worst:.3f} bits over {len(kl)} points, "
                f"KL(r=0) = {kl[0]:.4f} < KL(r=0.5) = {kl[-1]:.4f}: {trend}, {dt:.1f}s")


def criterion_6():
    p = LatencyParams()
    t0 = time.perf_counter()
    rows = [r for r in run_debug_experiment(p, 100_000, 100_000, SEED) if r.experiment == "backdoor"]
    dt = time.perf_counter() - t0
    worst = max(abs(r.error) / p.bin_width for r in rows)
    ok = worst <= 2 and dt < 120 and len(rows) == p.s_card
    detail = ", ".join(f"s={r.s}: {r.p99_pred:g} vs {r.p99_true:g}" for r in rows)
    return ok, f"back-door P99 within {worst:g} bins ({detail}), {dt:.1f}s"


def criterion_7():
    (row,) = [r for r in run_debug_experiment(LatencyParams(), 100_000, 100_000, SEED) if r.experiment == "sandbox"]
    ratio = row.p99_pred / row.p99_true
    sign = "over" if row.error > 0 else "under" if row.error < 0 else "exact"
    ok = 1 / 1.5 <= ratio <= 1.5
    return ok, f"sandbox P99 {row.p99_pred:g} vs true {row.p99_true:g} (ratio {ratio:.3f}, {sign}estimate)".replace(
        "exactestimate", "exact")


def criterion_8():
    rng = np.random.default_rng(SEED + 8)
    cf_worst, cf_n = 0.0, 0
    while cf_n < 200:
        f = random_fcm(rng)
        do, ys, es = random_cf_query(rng, f)
        ev = {e: int(rng.integers(0, 2)) for e in es}
        try:
            t = exact_counterfactual(f, CounterfactualQuery(do, ys, ev))
        except ZeroProbabilityError:
            continue
        cf_worst = max(cf_worst, float(np.abs(t.values.ravel() - literal_counterfactual(f, do, ys, ev)).max()))
        cf_n += 1

    policy_match = 0
    for _ in range(100):
        m, x, targets, values = random_policy_problem(rng)
        policy, value = optimize_policy(m, x, Utility(targets, values))
        choice = tuple(int(r.argmax()) for r in policy.table.rows())
        best, best_value = brute_force_policy(m, x, targets, values)
        policy_match += choice == best and abs(value - best_value) <= 1e-9

    # every DAG on <= 5 nodes is a relabeling of one whose edges respect a fixed order
    dsep_n = dsep_bad = 0
    for k in range(2, 6):
        nodes = "abcde"[:k]
        pairs = list(itertools.combinations(nodes, 2))
        for mask in range(1 << len(pairs)):
            edges = [p for i, p in enumerate(pairs) if mask >> i & 1]
            g = Dag(nodes, edges)
            for a, b in pairs:
                rest = [n for n in nodes if n not in (a, b)]
                for r in range(len(rest) + 1):
                    for z in itertools.combinations(rest, r):
                        dsep_n += 1
                        dsep_bad += g.d_separated({a}, {b}, set(z)) != brute_d_separated(nodes, edges, a, b, set(z))
    ok = cf_worst <= 1e-12 and policy_match == 100 and dsep_bad == 0
    return ok, (f"abduction vs literal sum max diff {cf_worst:.2g} ({cf_n} queries); "
                f"policy argmax matches {policy_match}/100; d-separation disagreements {dsep_bad}/{dsep_n}")


def criterion_9():
    def outputs(directory: Path) -> dict[str, bytes]:
        fio.save_model(gen_auction_model(0.3), directory / "auction.json")
        cli_main(["experiment", "privacy", "--n", "1000", "--seed", str(SEED), "--out", str(directory / "sweep.csv")])
        cli_main(["experiment", "latency", "--n-obs", "20000", "--n-int", "20000", "--seed", str(SEED),
                  "--out", str(directory / "latency.csv")])
        cli_main(["sample", str(directory / "auction.json"), "--n", "500", "--seed", str(SEED),
                  "--out", str(directory / "data.csv")])
        return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.suffix in (".csv", ".json")}

    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        first, second = outputs(Path(a)), outputs(Path(b))
    csvs = [n for n in first if n.endswith(".csv")]
    same = first.keys() == second.keys() and all(first[n] == second[n] for n in first)
    ok = same and len(csvs) == 3
    return ok, f"two consecutive runs byte-identical for {', '.join(csvs)} and sidecars: {same}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("n", range(1, 10))
def test_criterion(n, capsys):
    ok, text = CRITERIA[n - 1]()
    with capsys.disabled():
        print("\n" + _line(n, ok, text))
    assert ok, text


if __name__ == "__main__":
    results = [(n, *fn()) for n, fn in enumerate(CRITERIA, start=1)]
    for n, ok, text in results:
        print(_line(n, ok, text))
    sys.exit(0 if all(ok for _, ok, _ in results) else 1)
