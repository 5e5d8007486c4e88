"""Command-line interface.

Exit codes: 0 success, 1 validation error (malformed model/table/file),
2 precondition refusal (e.g. inadmissible adjustment set, zero-probability
evidence, unrandomized parents).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..core import Table, Variable
from ..counterfactuals import (
    CounterfactualQuery,
    approx_counterfactual,
    counterfactual_certificate,
    exact_counterfactual,
    generalized_approx_counterfactual,
)
from ..errors import PreconditionError, ValidationError
from ..models import CausalModel, FunctionalModel, interventional_query, query, sample, sample_randomized, validate
from ..pipelines import (
    DebugQuery,
    Policy,
    StakeholderDisclosure,
    Utility,
    debug_query,
    integrate_sandbox,
    optimize_policy,
    pick_shared_context,
    predict_outcome,
)
from ..transport import approx_transport, transport_bound, transport_certificate
from . import io as fio
from .experiments import DEFAULT_GRID, run_debug_experiment, run_privacy_sweep
from .scenarios import LatencyParams, transport_inputs_from_model


def _pairs(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"expected NAME=STATE, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def _cgm(model) -> CausalModel:
    return model.induced if isinstance(model, FunctionalModel) else model


def _fcm(model) -> FunctionalModel:
    if not isinstance(model, FunctionalModel):
        raise ValidationError("this command needs a functional model (a model file with a background block)")
    return model


def _table_json(t: Table) -> dict:
    return {
        "scope": list(t.scope_names),
        "given": list(t.given_names),
        "rows": [[float(x) for x in row] for row in t.rows()],
    }


def _emit(args, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands ------------------------------------------------------------------------


def cmd_validate(args):
    model = fio.load_model(args.model)
    report = validate(model.model if isinstance(model, FunctionalModel) else model)
    _emit(args, {
        "ok": report.ok,
        "kind": "fcm" if isinstance(model, FunctionalModel) else "cgm",
        "variables": report.n_variables,
        "edges": report.n_edges,
        "max_residual": report.max_residual,
    })


def cmd_query(args):
    m = _cgm(fio.load_model(args.model))
    t = query(m, args.target, m.assignment(_pairs(args.evidence)))
    _emit(args, _table_json(t))


def cmd_do(args):
    m = _cgm(fio.load_model(args.model))
    t = interventional_query(m, args.target, m.assignment(_pairs(args.do)), m.assignment(_pairs(args.evidence)))
    _emit(args, _table_json(t))


def cmd_counterfactual(args):
    model = fio.load_model(args.model)
    m = _cgm(model)
    q = CounterfactualQuery(m.assignment(_pairs(args.do)), tuple(args.target), m.assignment(_pairs(args.evidence)))
    if args.exact:
        t = exact_counterfactual(_fcm(model), q)
    elif args.zset:
        t = generalized_approx_counterfactual(m, args.zset, q)
    else:
        t = approx_counterfactual(m, q)
    _emit(args, _table_json(t))


def cmd_certificate(args):
    model = fio.load_model(args.model)
    if args.kind == "cf":
        f = _fcm(model)
        cert = counterfactual_certificate(
            f, f.induced.assignment(_pairs(args.do)), args.target, args.evidence_vars, args.zset or None
        )
        details = {
            "W": list(cert.details["W"]),
            "per_evidence": {",".join(map(str, k)): v for k, v in cert.details["per_evidence"].items()},
        }
    else:
        m = _cgm(model)
        t = transport_inputs_from_model(m, args.outcome, tuple(args.sources), args.context, args.x0)
        full = query(m, (args.outcome, *args.sources, args.context))
        cert = transport_certificate(full, t, include_x0=args.include_x0)
        details = {
            "terms": {k: float(v) for k, v in cert.details["terms"].items()},
            "include_x0": args.include_x0,
            "ci_gap": cert.details["ci_gap"],
        }
    _emit(args, {
        "divergence_bits": float(cert.divergence),
        "bound_bits": float(cert.bound),
        "slack_bits": cert.slack,
        "preconditions_ok": cert.preconditions_ok,
        "holds": cert.holds,
        "details": details,
    })


def cmd_transport(args):
    m = _cgm(fio.load_model(args.model))
    t = transport_inputs_from_model(m, args.outcome, tuple(args.sources), args.context, args.x0)
    _emit(args, {
        "p_bar": _table_json(approx_transport(t)),
        "bound_bits": float(transport_bound(t, args.include_x0)),
    })


def cmd_sample(args):
    model = fio.load_model(args.model)
    if args.randomize:
        d = sample_randomized(model, args.randomize, args.n, args.seed)
    else:
        d = sample(model, args.n, args.seed)
    if not args.out:
        raise ValidationError("sample needs --out")
    fio.save_dataset(d, args.out)


def cmd_sandbox(args):
    model = _cgm(fio.load_model(args.model))
    data = fio.load_dataset(args.data, tuple(model.variables.values()))
    completed = integrate_sandbox(model.drop_mechanism(args.missing), data, args.missing, args.smoothing)
    text = fio.dump_model(completed)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_optimize(args):
    m = _cgm(fio.load_model(args.model))
    cards = [m.variables[t].card for t in args.utility_target]
    values = np.array([float(x) for x in args.utility.split(",")]).reshape(cards)
    policy, value = optimize_policy(m, args.control, Utility(tuple(args.utility_target), values),
                                    args.space, args.step)
    _emit(args, {"policy": _table_json(policy.table), "expected_utility": value})


def cmd_debug(args):
    m = _cgm(fio.load_model(args.model))
    xv, yv = m.variables[args.x], m.variables[args.y]
    q = DebugQuery(args.x, xv.index(args.x_value), xv.index(args.x_prime),
                   args.y, yv.index(args.y_value), yv.index(args.y_prime), m.assignment(_pairs(args.side)))
    ans = debug_query(m, q, args.zset or None, args.threshold)
    _emit(args, {"probability": ans.probability, "bound_bits": float(ans.bound),
                 "low_confidence": ans.low_confidence})


def _load_protocol(path):
    doc = json.loads(Path(path).read_text())
    variables = {v["name"]: Variable(v["name"], tuple(v["states"])) for v in doc.get("variables", [])}

    def cpt(spec):
        return Table.from_rows(variables[spec["variable"]], [variables[p] for p in spec.get("parents", [])],
                               spec["rows"])

    disclosures = []
    for d in doc["disclosures"]:
        revealed = {
            c: Table.from_rows(variables[d["variable"]], [variables[c]], rows)
            for c, rows in d.get("revealed", {}).items()
        }
        disclosures.append(StakeholderDisclosure(
            str(d["stakeholder"]), d["variable"], frozenset(d["candidates"]), d["entropies"], revealed
        ))
    return doc, variables, cpt, disclosures


def cmd_pick_context(args):
    _, _, _, disclosures = _load_protocol(args.protocol)
    choice = pick_shared_context(disclosures)
    _emit(args, {"context": choice, "canceled": choice is None})


def cmd_predict_outcome(args):
    doc, variables, cpt, disclosures = _load_protocol(args.protocol)
    context = args.context or doc.get("context") or pick_shared_context(disclosures)
    if context is None:
        raise PreconditionError("no shared context: the protocol is canceled")
    prior = Table((variables[context],), doc["context_prior"])
    policies = [Policy(p["variable"], cpt(p)) for p in doc.get("policies", [])]
    p_bar, bound = predict_outcome(cpt(doc["mechanism"]), policies, disclosures, prior,
                                   doc.get("x0"), args.include_x0)
    _emit(args, {"context": context, "p_bar": _table_json(p_bar), "bound_bits": float(bound)})


def cmd_experiment(args):
    if args.which == "privacy":
        steps = round(0.5 / args.step)
        grid = tuple(round(i * args.step, 10) for i in range(steps + 1)) if args.step != 0.01 else DEFAULT_GRID
        result = run_privacy_sweep(grid, args.n, args.seed)
        text = fio.sweep_csv(result)
        meta = {"experiment": "privacy", "seed": args.seed, "n": args.n, "step": args.step}
    else:
        rows = run_debug_experiment(LatencyParams(seed=args.seed), args.n_obs, args.n_int, args.seed)
        text = fio.latency_csv(rows)
        meta = {"experiment": "latency", "seed": args.seed, "n_obs": args.n_obs, "n_int": args.n_int}
    if args.out:
        fio.write_with_meta(text, args.out, meta)
    else:
        sys.stdout.write(text)


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cloudcausal", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write output here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    p = add("validate", cmd_validate, "check a model file")
    p.add_argument("model")

    p = add("query", cmd_query, "p(targets | evidence)")
    p.add_argument("model")
    p.add_argument("--target", nargs="+", required=True)
    p.add_argument("--evidence", nargs="*", default=[], metavar="NAME=STATE")

    p = add("do", cmd_do, "p(targets | do(...), evidence)")
    p.add_argument("model")
    p.add_argument("--target", nargs="+", required=True)
    p.add_argument("--do", nargs="+", required=True, metavar="NAME=STATE")
    p.add_argument("--evidence", nargs="*", default=[], metavar="NAME=STATE")

    p = add("counterfactual", cmd_counterfactual, "exact or approximate counterfactual")
    p.add_argument("model")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--approx", action="store_true")
    p.add_argument("--target", nargs="+", required=True)
    p.add_argument("--do", nargs="+", required=True, metavar="NAME=STATE")
    p.add_argument("--evidence", nargs="*", default=[], metavar="NAME=STATE")
    p.add_argument("--zset", nargs="*", help="separating set for the generalized approximation")

    p = add("certificate", cmd_certificate, "error certificate for either approximation")
    p.add_argument("kind", choices=["cf", "transport"])
    p.add_argument("model")
    p.add_argument("--target", nargs="+", help="cf: target variables")
    p.add_argument("--do", nargs="*", default=[], metavar="NAME=STATE", help="cf: intervention")
    p.add_argument("--evidence-vars", nargs="*", default=[], help="cf: evidence variables E")
    p.add_argument("--zset", nargs="*")
    p.add_argument("--outcome", help="transport: outcome variable Z")
    p.add_argument("--sources", nargs="+", help="transport: source variables X_k")
    p.add_argument("--context", help="transport: context variable C")
    p.add_argument("--x0")
    p.add_argument("--include-x0", action="store_true")

    p = add("transport", cmd_transport, "approximate prediction p_bar(Z) and its bound")
    p.add_argument("model")
    p.add_argument("--outcome", required=True)
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--context", required=True)
    p.add_argument("--x0")
    p.add_argument("--include-x0", action="store_true")

    p = add("sample", cmd_sample, "draw a dataset from a model")
    p.add_argument("model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--randomize", nargs="*", help="randomize these variables (interventional data)")

    p = add("sandbox-integrate", cmd_sandbox, "fit a missing mechanism from randomized data")
    p.add_argument("model")
    p.add_argument("--missing", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--smoothing", type=float, default=1.0)

    p = add("optimize-policy", cmd_optimize, "exhaustive policy search")
    p.add_argument("model")
    p.add_argument("--control", required=True)
    p.add_argument("--utility-target", nargs="+", required=True)
    p.add_argument("--utility", required=True, help="comma-separated values, row-major over targets")
    p.add_argument("--space", choices=["deterministic", "stochastic"], default="deterministic")
    p.add_argument("--step", type=float, default=0.1)

    p = add("debug-query", cmd_debug, "approximate counterfactual debugging query")
    p.add_argument("model")
    for name in ("x", "x-value", "x-prime", "y", "y-value", "y-prime"):
        p.add_argument("--" + name, required=True)
    p.add_argument("--side", nargs="*", default=[], metavar="NAME=STATE")
    p.add_argument("--zset", nargs="*")
    p.add_argument("--threshold", type=float, default=0.5)

    p = add("pick-context", cmd_pick_context, "choose the shared context C")
    p.add_argument("protocol")

    p = add("predict-outcome", cmd_predict_outcome, "predict p_bar(Z | policies)")
    p.add_argument("protocol")
    p.add_argument("--context")
    p.add_argument("--include-x0", action="store_true")

    p = add("experiment", cmd_experiment, "run an experiment and write CSV")
    p.add_argument("which", choices=["privacy", "latency"])
    p.add_argument("--n", type=int, default=1000, help="privacy: samples per grid point")
    p.add_argument("--step", type=float, default=0.01, help="privacy: grid step in r")
    p.add_argument("--n-obs", type=int, default=100_000)
    p.add_argument("--n-int", type=int, default=100_000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except PreconditionError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
