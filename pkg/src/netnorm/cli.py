"""Command-line entry point, instance files and report serialization.

Exit codes: 0 success, 2 malformed or invalid input, 3 budget or parameter
errors (including a sparsification that found no verified sample).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict
from importlib import resources

import numpy as np

from . import __version__
from .feascheck import SolverConfig
from .matlib import ParameterError
from .model import (
    EBChannel,
    GeneralDecomposition,
    MultipartiteLOCC,
    Node,
    OneWayLOCC,
    ValidationError,
    banach_constants,
    validate,
)
from .nets import DEFAULT_BUDGET, BudgetExceeded

EXIT_OK, EXIT_INVALID, EXIT_PARAM = 0, 2, 3
KINDS = ("locc", "multiparty", "channel", "matrix", "general", "injective")


class InstanceError(ValueError):
    """A malformed instance file; ``where`` locates the problem."""

    def __init__(self, where, msg):
        self.where = where
        super().__init__(f"{where}: {msg}")


# -- matrices -----------------------------------------------------------------


def decode_array(obj, where="matrix"):
    """``{"dim"|"rows"/"cols"|"length", "entries": [[re, im], ...]}`` to a complex array."""
    if "dim" in obj:
        shape = (obj["dim"], obj["dim"])
    elif "length" in obj:
        shape = (obj["length"],)
    else:
        shape = (obj["rows"], obj["cols"])
    entries = obj["entries"]
    size = int(np.prod(shape))
    if len(entries) != size:
        raise InstanceError(where, f"expected {size} entries for shape {shape}, got {len(entries)}")
    arr = np.asarray(entries, dtype=float).reshape(-1, 2) if size else np.zeros((0, 2))
    if not np.all(np.isfinite(arr)):
        raise InstanceError(where, "entries must be finite")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(shape)


def encode_array(a):
    a = np.asarray(a, dtype=complex)
    entries = [[float(z.real), float(z.imag)] for z in a.ravel()]
    if a.ndim == 1:
        return {"length": a.shape[0], "entries": entries}
    if a.shape[0] == a.shape[1]:
        return {"dim": a.shape[0], "entries": entries}
    return {"rows": a.shape[0], "cols": a.shape[1], "entries": entries}


def _elements(arrs):
    """Stack decoded elements; purely real stacks come back real."""
    out = np.asarray(arrs)
    if np.iscomplexobj(out) and np.all(out.imag == 0):
        out = out.real
    return out


# -- instances ----------------------------------------------------------------


def load_schema(name="instance"):
    return json.loads(resources.files("netnorm").joinpath(f"schemas/{name}.schema.json").read_text())


def check_schema(doc):
    import jsonschema

    validator = jsonschema.Draft202012Validator(load_schema("instance"))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise InstanceError(where, e.message)


def _target(t):
    param = math.inf if t["param"] == "inf" else float(t["param"])
    return t["family"], param


def _node(obj, where):
    terms = []
    for i, t in enumerate(obj["terms"]):
        X = decode_array(t["X"], f"{where}/terms/{i}/X")
        child = t.get("child")
        terms.append((X, None if child is None else _node(child, f"{where}/terms/{i}/child")))
    return Node(tuple(terms))


def parse_instance(doc):
    """Schema-check ``doc`` and build ``(kind, payload)``.

    Payloads: OneWayLOCC, EBChannel, MultipartiteLOCC, a matrix, and for
    ``general`` / ``injective`` a dict with the decoded pieces and target.
    """
    check_schema(doc)
    kind = doc["kind"]
    if kind in ("locc", "channel"):
        d1, d2 = doc["d1"], doc["d2"]
        X = [decode_array(t["X"], f"terms/{i}/X") for i, t in enumerate(doc["terms"])]
        Y = [decode_array(t["Y"], f"terms/{i}/Y") for i, t in enumerate(doc["terms"])]
        for i, (x, y) in enumerate(zip(X, Y)):
            if x.shape != (d1, d1):
                raise InstanceError(f"terms/{i}/X", f"expected {d1}x{d1}, got {x.shape}")
            if y.shape != (d2, d2):
                raise InstanceError(f"terms/{i}/Y", f"expected {d2}x{d2}, got {y.shape}")
        cls = OneWayLOCC if kind == "locc" else EBChannel
        return kind, cls.from_terms(list(zip(X, Y)), d1, d2)
    if kind == "multiparty":
        return kind, MultipartiteLOCC(tuple(doc["dims"]), _node(doc["root"], "root"))
    if kind == "matrix":
        return kind, decode_array(doc["matrix"], "matrix")
    if kind == "general":
        X = np.asarray([decode_array(t["X"], f"terms/{i}/X") for i, t in enumerate(doc["terms"])])
        Y = _elements([decode_array(t["Y"], f"terms/{i}/Y") for i, t in enumerate(doc["terms"])])
        family, param = _target(doc["target"])
        g = GeneralDecomposition(doc["d1"], X.reshape(-1, doc["d1"], doc["d1"]), Y)
        return kind, {"decomposition": g, "family": family, "param": param}
    # injective
    xs = _elements([decode_array(t["xstar"], f"terms/{i}/xstar") for i, t in enumerate(doc["terms"])])
    ys = _elements([decode_array(t["y"], f"terms/{i}/y") for i, t in enumerate(doc["terms"])])
    family, param = _target(doc["target"])
    return kind, {"A": doc["A"], "xstar": xs, "y": ys, "family": family, "param": param}


def _target_doc(family, param):
    return {"family": family, "param": "inf" if math.isinf(param) else float(param)}


def _node_doc(node):
    return {"terms": [{"X": encode_array(X), "child": None if c is None else _node_doc(c)} for X, c in node.terms]}


def instance_doc(kind, payload):
    """Inverse of :func:`parse_instance`."""
    if kind in ("locc", "channel"):
        return {"kind": kind, "d1": payload.d1, "d2": payload.d2,
                "terms": [{"X": encode_array(X), "Y": encode_array(Y)} for X, Y in zip(payload.X, payload.Y)]}
    if kind == "multiparty":
        return {"kind": kind, "dims": list(payload.dims), "root": _node_doc(payload.root)}
    if kind == "matrix":
        return {"kind": kind, "matrix": encode_array(payload)}
    if kind == "general":
        g = payload["decomposition"]
        return {"kind": kind, "d1": g.d1, "target": _target_doc(payload["family"], payload["param"]),
                "terms": [{"X": encode_array(X), "Y": encode_array(Y)} for X, Y in zip(g.X, g.Y)]}
    if kind == "injective":
        return {"kind": kind, "A": payload["A"], "target": _target_doc(payload["family"], payload["param"]),
                "terms": [{"xstar": encode_array(x), "y": encode_array(y)}
                          for x, y in zip(payload["xstar"], payload["y"])]}
    raise ValueError(f"unknown kind {kind!r}")


def read_instance(path):
    """Load and parse an instance file; JSON syntax errors report line and column."""
    text = open(path).read() if path != "-" else sys.stdin.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceError(f"line {e.lineno} column {e.colno}", e.msg) from None
    kind, payload = parse_instance(doc)
    return kind, payload, hashlib.sha256(text.encode()).hexdigest()


# -- reports --------------------------------------------------------------------


def _clean(x):
    """JSON-safe copy: non-finite floats become null or "inf" strings, numpy scalars become Python."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float):
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def dump_report(doc):
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def _wrap(rep, command, sha, args):
    doc = rep.to_dict()
    doc["tool_version"] = __version__
    doc["command"] = command
    doc["instance_sha256"] = sha
    doc["config"] = dict(doc.get("config", {}))
    doc["config"]["cli"] = {
        "delta": args.delta, "budget": args.budget, "seed": args.seed, "k": args.k,
        "solver_iters": args.solver_iters, "restarts": args.restarts,
        "alpha": getattr(args, "alpha", None), "q": getattr(args, "q", None),
    }
    return doc


# -- subcommands ------------------------------------------------------------------


def _expect(kind, allowed):
    if kind not in allowed:
        raise InstanceError("kind", f"this command takes {' or '.join(allowed)}, got {kind!r}")


def _cfg(args):
    cfg = SolverConfig()
    if args.solver_iters is not None:
        cfg = SolverConfig(**{**asdict(cfg), "max_iters": args.solver_iters})
    if args.restarts is not None:
        cfg = SolverConfig(**{**asdict(cfg), "restarts": args.restarts})
    return cfg


def _common(args):
    return dict(budget=args.budget, cfg=_cfg(args), seed=args.seed, threads=args.threads)


def _needs_delta(args):
    if args.delta is None and args.k is None:
        raise ParameterError("--delta is required")


def cmd_validate(args):
    kind, payload, _ = read_instance(args.instance)
    if kind in ("locc", "channel", "multiparty"):
        violations = validate(payload)
    elif kind == "general":
        desc = banach_constants(payload["family"], payload["param"], 2)
        violations = validate(payload["decomposition"], desc)
    else:
        violations = []
    doc = {"tool_version": __version__, "command": "validate", "kind": kind, "valid": not violations,
           "violations": [{"rule": v.rule, "index": list(v.index) if v.index else None, "magnitude": v.magnitude}
                          for v in violations]}
    return doc, EXIT_OK if not violations else EXIT_INVALID


def cmd_hsep(args):
    from .algorithms import hsep_basic

    kind, m, sha = read_instance(args.instance)
    _expect(kind, ("locc",))
    _needs_delta(args)
    rep = hsep_basic(m, args.delta, k=args.k, **_common(args))
    return _wrap(rep, "hsep", sha, args), EXIT_OK


def cmd_hsep_sparse(args):
    from .algorithms import hsep_sparse

    kind, m, sha = read_instance(args.instance)
    _expect(kind, ("locc",))
    if args.delta is None:
        raise ParameterError("--delta is required")
    rep = hsep_sparse(m, args.delta, k=args.k, **_common(args))
    return _wrap(rep, "hsep-sparse", sha, args), EXIT_OK


def cmd_hsep_multi(args):
    from .algorithms import hsep_multipartite

    kind, t, sha = read_instance(args.instance)
    _expect(kind, ("multiparty", "locc"))
    if kind == "locc":
        t = MultipartiteLOCC.from_locc(t)
    _needs_delta(args)
    rep = hsep_multipartite(t, args.delta, k=args.k, **_common(args))
    return _wrap(rep, "hsep-multi", sha, args), EXIT_OK


def cmd_channel_norm(args):
    from .algorithms import s1_to_banach
    from .apps import eb_channel_max_output_norm

    kind, payload, sha = read_instance(args.instance)
    _expect(kind, ("channel", "general"))
    _needs_delta(args)
    kw = _common(args)
    if kind == "channel":
        if args.alpha is None:
            raise ParameterError("--alpha is required for channel instances")
        rep = eb_channel_max_output_norm(payload, args.alpha, args.delta, k=args.k, **kw)
    else:
        g = payload["decomposition"]
        dim = g.Y.shape[-1]
        desc = banach_constants(payload["family"], payload["param"], dim)
        rep = s1_to_banach(g, desc, args.delta, k=args.k, **kw)
    return _wrap(rep, "channel-norm", sha, args), EXIT_OK


def cmd_two_to_q(args):
    from .apps import two_to_q_even, two_to_q_norm

    kind, A, sha = read_instance(args.instance)
    _expect(kind, ("matrix",))
    if args.q is None:
        raise ParameterError("--q is required")
    _needs_delta(args)
    fn = two_to_q_even if args.even else two_to_q_norm
    rep = fn(A, args.q, args.delta, k=args.k, **_common(args))
    return _wrap(rep, "two-to-q", sha, args), EXIT_OK


def cmd_injective(args):
    from .algorithms import injective_norm

    kind, payload, sha = read_instance(args.instance)
    _expect(kind, ("injective",))
    _needs_delta(args)
    y = payload["y"]
    dim = y.shape[-1]
    desc = banach_constants(payload["family"], payload["param"], dim)
    rep = injective_norm(payload["xstar"], y, payload["A"], desc, args.delta, k=args.k, **_common(args))
    return _wrap(rep, "injective", sha, args), EXIT_OK


def cmd_oracle(args):
    """Reference value from the local-search oracles (no nets, no solver)."""
    from . import oracle

    kind, payload, sha = read_instance(args.instance)
    r = args.restarts
    if kind == "locc":
        value = oracle.hsep_alternating(payload.operator(), payload.d1, payload.d2, restarts=r or 50, seed=args.seed)[0]
        what = "h_Sep"
    elif kind == "multiparty":
        value = oracle.hsep_multi_alternating(payload.operator(), payload.dims, restarts=r or 50, seed=args.seed)[0]
        what = "h_Sep"
    elif kind == "channel":
        if args.alpha is None:
            raise ParameterError("--alpha is required for channel instances")
        desc = banach_constants("schatten", args.alpha, payload.d2)
        value = oracle.channel_output_oracle(payload.X, payload.Y, desc, restarts=r or 200, seed=args.seed,
                                             grid=20)[0]
        what = f"max output S_{args.alpha} norm"
    elif kind == "general":
        g = payload["decomposition"]
        desc = banach_constants(payload["family"], payload["param"], g.Y.shape[-1])
        value = oracle.channel_output_oracle(g.X, g.Y, desc, restarts=r or 200, seed=args.seed)[0]
        what = "max ||sum tr[X_i rho] Y_i||_B"
    elif kind == "matrix":
        if args.q is None:
            raise ParameterError("--q is required for matrix instances")
        value = oracle.two_to_q_gradient(payload, args.q, restarts=r or 500, seed=args.seed)
        what = f"||A||_(2->{args.q})"
    else:
        desc = banach_constants(payload["family"], payload["param"], payload["y"].shape[-1])
        value = oracle.injective_oracle(payload["xstar"], payload["y"], payload["A"], desc,
                                        restarts=r or 200, seed=args.seed)
        what = "injective norm"
    doc = {"tool_version": __version__, "command": "oracle", "kind": kind, "quantity": what, "value": value,
           "seed": args.seed, "instance_sha256": sha, "restarts": r,
           "notes": ["local search from many starts: a lower bound that is usually tight at desk scale"]}
    return doc, EXIT_OK


def cmd_lemma_check(args):
    from .oracle import run_lemma_suite

    results = run_lemma_suite(seed=args.seed, quick=args.quick)
    doc = {"tool_version": __version__, "command": "lemma-check", "seed": args.seed, "quick": args.quick,
           "passed": all(r.passed for r in results),
           "checks": [{"name": r.name, "passed": r.passed, "info": r.info, "rows": r.rows} for r in results]}
    return doc, EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "hsep": cmd_hsep,
    "hsep-sparse": cmd_hsep_sparse,
    "hsep-multi": cmd_hsep_multi,
    "channel-norm": cmd_channel_norm,
    "two-to-q": cmd_two_to_q,
    "injective": cmd_injective,
    "oracle": cmd_oracle,
    "lemma-check": cmd_lemma_check,
}


def build_parser():
    p = argparse.ArgumentParser(prog="netnorm", description="Net-based estimates of h_Sep and related norms.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        if name != "lemma-check":
            s.add_argument("instance", help="instance JSON file ('-' for stdin)")
        s.add_argument("--delta", type=float)
        s.add_argument("--alpha", type=float)
        s.add_argument("--q", type=float)
        s.add_argument("--k", type=int, help="net resolution; overrides the value derived from --delta")
        s.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="maximum net points")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--solver-iters", type=int)
        s.add_argument("--restarts", type=int)
        s.add_argument("--threads", type=int, help="worker threads (default: logical cores)")
        s.add_argument("--out", help="write the report here instead of standard output")
        s.add_argument("--format", choices=["json"], default="json")
        if name == "two-to-q":
            s.add_argument("--even", action="store_true", help="use the multipartite route (even q >= 4)")
        if name == "lemma-check":
            s.add_argument("--quick", action="store_true", help="fewer trials")
    return p


def _emit(doc, args):
    text = dump_report(doc)
    if getattr(args, "out", None):
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    """Parse ``argv``, run the command and return the exit code."""
    args = build_parser().parse_args(argv)
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_PARAM
    try:
        doc, code = COMMANDS[args.command](args)
    except InstanceError as e:
        print(f"error: malformed instance: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as e:
        print("error: invalid instance:", file=sys.stderr)
        for v in e.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAM
    except ParameterError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAM
    except RuntimeError as e:  # sparsification without a verified sample
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAM
    _emit(doc, args)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
