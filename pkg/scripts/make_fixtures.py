"""Regenerate the fixture corpus under data/.

    python scripts/make_fixtures.py [--out data]
"""

from __future__ import annotations

import argparse
import json
import random
from fractions import Fraction
from pathlib import Path

from twostage import generators as gen
from twostage import io as tio
from twostage.gadgets import Graph

RANDOM_GRAPHS = 50


def named_graphs():
    for n in range(2, 9):
        yield f"path-{n}", Graph.from_edges(n, [(i, i + 1) for i in range(1, n)])
        yield f"star-{n}", Graph.from_edges(n, [(1, i) for i in range(2, n + 1)])
        yield f"complete-{n}", Graph.from_edges(n, [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)])
        if n >= 3:
            yield f"cycle-{n}", Graph.from_edges(n, [(i, i + 1) for i in range(1, n)] + [(1, n)])
    yield "two-edge-star-3", Graph.from_edges(3, [(1, 2), (1, 3)])


def random_graphs():
    for seed in range(RANDOM_GRAPHS):
        n = 2 + seed % 7
        yield f"random-{seed:02d}", Graph.from_edges(n, gen.random_graph(seed, n, 0.5)), {"seed": seed, "p": 0.5}


def integer_systems():
    yield "strip", [[1, 1]], [Fraction(3, 2)]
    yield "cube-corner", [[1, 0], [0, 1]], [Fraction(1, 2), Fraction(1, 3)]
    for seed in range(10):
        rng = random.Random(1000 + seed)
        m, d = rng.randint(1, 3), rng.randint(1, 3)
        system = gen.random_integer_system(1000 + seed, m, d, 3)
        b = [Fraction(rng.randint(-4, 12), 4) for _ in range(m)]
        yield f"random-{seed:02d}", system.A, b


MALFORMED = {
    # name: (expected exit code, raw text)
    "not-json": (2, '{"kind": "graph", "payload": '),
    "not-utf8-json": (2, "[1, 2,]"),
    "zero-denominator": (3, json.dumps({"kind": "integer-system", "payload": {"A": [[1]], "b": ["1/0"]}})),
    "extra-denominator-field": (
        3,
        json.dumps({"kind": "polytope", "payload": {"dim": 1, "rows": [{"a": ["1"], "rhs": "1", "denominator": 0}]}}),
    ),
    "unknown-kind": (3, json.dumps({"kind": "hypergraph", "payload": {}})),
    "edge-out-of-range": (3, json.dumps({"kind": "graph", "payload": {"n": 2, "edges": [[1, 3]]}})),
    "self-loop": (3, json.dumps({"kind": "graph", "payload": {"n": 3, "edges": [[2, 2]]}})),
    "ragged-matrix": (3, json.dumps({"kind": "integer-system", "payload": {"A": [[1, 2], [3]], "b": ["0", "0"]}})),
    "non-integer-matrix": (3, json.dumps({"kind": "integer-system", "payload": {"A": [["1/2"]], "b": ["0"]}})),
    "float-rational": (3, json.dumps({"kind": "integer-system", "payload": {"A": [[1]], "b": [0.5]}})),
}


def malformed_sslp_wrong_w():
    """2 x 3 W against n2 = 2."""
    doc = tio.sslp_instance(gen.newsvendor()).to_json()
    p = doc["payload"]
    p["m2"], p["n2"] = 2, 2
    p["W"] = [["1", "-1", "0"], ["0", "1", "1"]]
    return json.dumps(doc)


def write(path: Path, inst: tio.InstanceFile) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        tio.dump(inst, fh)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data"))
    out = Path(ap.parse_args().out)
    for name, g in named_graphs():
        write(out / "graphs" / f"{name}.json", tio.graph_instance(g, {"family": name.rsplit("-", 1)[0]}))
    for name, g, meta in random_graphs():
        write(out / "graphs" / f"{name}.json", tio.graph_instance(g, {"family": "random", **meta}))
    for name, A, b in integer_systems():
        from twostage.volume_dp import IntegerSystem

        write(out / "integer-systems" / f"{name}.json", tio.integer_system_instance(IntegerSystem(tuple(map(tuple, A))), b))
    for c in (Fraction(0), Fraction(1, 4), Fraction(1, 2)):
        write(
            out / "sslp" / f"newsvendor-c{c.numerator}-{c.denominator}.json",
            tio.sslp_instance(gen.newsvendor(c), {"family": "newsvendor", "c": str(c)}),
        )
    write(out / "sslp" / "incomplete.json", tio.sslp_instance(gen.incomplete_example(), {"family": "incomplete"}))
    write(out / "sslp" / "unbounded.json", tio.sslp_instance(gen.unbounded_example(), {"family": "unbounded"}))
    for seed in range(3):
        write(out / "sslp" / f"random-{seed}.json", tio.sslp_instance(gen.random_sslp(seed), {"seed": seed}))
    write(
        out / "polytopes" / "triangle.json",
        tio.InstanceFile("polytope", {"dim": 2, "rows": [{"a": ["1", "1"], "rhs": "1"}], "box": {"lower": ["0", "0"], "upper": ["1", "1"]}}),
    )
    bad = out / "malformed"
    bad.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name, (code, text) in {**MALFORMED, "sslp-wrong-w": (3, malformed_sslp_wrong_w())}.items():
        (bad / f"{name}.json").write_text(text + "\n", encoding="utf-8")
        manifest[f"{name}.json"] = code
    (bad / "bad-bytes.json").write_bytes(b'{"kind": "graph\xff"}\n')
    manifest["bad-bytes.json"] = 2
    (bad / "expected-exit-codes.txt").write_text(
        "".join(f"{k} {v}\n" for k, v in sorted(manifest.items())), encoding="utf-8"
    )


if __name__ == "__main__":
    main()
