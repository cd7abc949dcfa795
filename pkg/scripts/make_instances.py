"""Write the sample instance files and their run manifest into instances/.

    python3 scripts/make_instances.py [outdir]

Every file is a deterministic function of the seeds below.  The manifest
lists, per file, the subcommand and flags used by the determinism and CLI
tests; flags are chosen so that each run takes a few seconds at most.
"""

import json
import sys
from pathlib import Path

import numpy as np

from netnorm import rng
from netnorm.cli import dump_report, instance_doc
from netnorm.model import EBChannel, GeneralDecomposition, MultipartiteLOCC, Node, OneWayLOCC
from netnorm.oracle import random_locc, random_povm


def basis(d, i):
    P = np.zeros((d, d), dtype=complex)
    P[i, i] = 1
    return P


def diag(v):
    return np.diag(np.asarray(v, dtype=complex))


def chain(ops):
    """Single-branch tree ``ops[0] (x) ops[1] (x) ...``."""
    node = None
    for X in reversed(ops):
        node = Node(((X, node),))
    return node


def samples():
    out = {}
    I2 = np.eye(2, dtype=complex)
    out["projector_n1"] = ("locc", OneWayLOCC.from_terms([(I2, basis(2, 0))]),
                           [["hsep", "--delta", "0.5"]])
    out["classical_locc"] = ("locc", OneWayLOCC.from_terms([(basis(2, i), basis(2, i)) for i in range(2)]),
                             [["hsep", "--delta", "0.5"], ["hsep-multi", "--delta", "1.0"]])
    out["random_locc_n3"] = ("locc", random_locc(rng.stream(7, "sample"), 3, 2, 2, complete=False),
                             [["hsep", "--k", "20"], ["hsep-sparse", "--delta", "1.0", "--k", "12"]])
    for d in (2, 3):
        ch = EBChannel.from_terms([(np.eye(d, dtype=complex), np.eye(d, dtype=complex) / d)])
        out[f"depolarizing_d{d}"] = ("channel", ch, [["channel-norm", "--alpha", "2", "--delta", "0.1"]])
    out["dephasing_d2"] = ("channel", EBChannel.from_terms([(basis(2, i), basis(2, i)) for i in range(2)]),
                           [["channel-norm", "--alpha", "2", "--delta", "0.3"]])
    gen = rng.stream(9, "sample")
    X = random_povm(gen, 3, 2)
    Y = []
    for _ in range(3):
        v = gen.standard_normal(2) + 1j * gen.standard_normal(2)
        Y.append(np.outer(v, v.conj()) / np.vdot(v, v).real)
    out["random_channel"] = ("channel", EBChannel(2, 2, X, np.asarray(Y)),
                             [["channel-norm", "--alpha", "3", "--delta", "0.5"]])
    out["identity_2"] = ("matrix", np.eye(2, dtype=complex), [["two-to-q", "--q", "2", "--delta", "0.1"],
                                                             ["two-to-q", "--q", "4", "--delta", "0.5"]])
    A = rng.stream(10, "sample").standard_normal((3, 3)).astype(complex)
    out["random_3x3"] = ("matrix", A, [["two-to-q", "--q", "4", "--delta", "0.5"],
                                       ["two-to-q", "--q", "4", "--delta", "1.0", "--even"]])
    P0 = basis(2, 0)
    out["product_projector_l3"] = ("multiparty", MultipartiteLOCC((2, 2, 2), chain([P0, P0, P0])),
                                   [["hsep-multi", "--delta", "1.0"]])
    g = rng.stream(11, "sample")

    def classical(depth):
        if depth == 2:
            return Node(((diag(g.uniform(0, 1, 2)), None),))
        return Node(tuple((basis(2, i), classical(depth + 1)) for i in range(2)))

    out["classical_l3"] = ("multiparty", MultipartiteLOCC((2, 2, 2), classical(0)),
                           [["hsep-multi", "--delta", "1.5"]])
    gl = rng.stream(12, "sample")
    Xg = random_povm(gl, 3, 2)
    Yg = gl.uniform(0, 1, (3, 3))
    Yg /= np.linalg.norm(Yg, 3, axis=1, keepdims=True)
    out["general_ell3"] = ("general", {"decomposition": GeneralDecomposition(2, Xg, Yg), "family": "ell",
                                       "param": 3.0}, [["channel-norm", "--delta", "0.5"]])
    gi = rng.stream(13, "sample")
    xs = gi.standard_normal((2, 3))
    xs /= np.abs(xs).sum() * 1.5  # sum_i |x_i(a)| <= sum of all |entries| <= 1 on the l2 ball
    ys = gi.standard_normal((2, 2))
    ys /= np.linalg.norm(ys, axis=1, keepdims=True)
    out["injective_l2_l2"] = ("injective", {"A": "l2", "xstar": xs, "y": ys, "family": "ell", "param": 2.0},
                              [["injective", "--k", "6"]])
    # sum X_i = 1.5 I: fails validation
    bad = OneWayLOCC.from_terms([(0.75 * I2, basis(2, 0)), (0.75 * I2, basis(2, 1))])
    out["invalid_povm"] = ("locc", bad, [])
    return out


def main(outdir="instances"):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name, (kind, payload, runs) in samples().items():
        (outdir / f"{name}.json").write_text(dump_report(instance_doc(kind, payload)))
        manifest[name] = {"kind": kind, "runs": runs, "valid": name != "invalid_povm"}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(manifest)} instances to {outdir}")


if __name__ == "__main__":
    main(*sys.argv[1:])
