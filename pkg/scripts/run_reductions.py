"""Run both reductions on small instances: volume recovered from expected
recourse values, and the expectation enclosed by first-stage bisection."""

from __future__ import annotations

import argparse
import random
from dataclasses import dataclass

from twostage.gadgets import (
    Graph,
    bisection_expectation,
    envelope_expectation,
    polygon_first_stage_oracle,
    sslp_oracle,
    volume_via_recourse,
)
from twostage.generators import random_graph, random_integer_system
from twostage.volume_dp import volume_dp

from run_volume_oracles import sample_b


@dataclass
class Config:
    volume_seeds: int = 10
    graph_sizes: tuple[int, ...] = (2, 3, 4, 5)
    exact_oracle_max_n: int = 4


def run(cfg: Config) -> None:
    print("volume via recourse")
    for seed in range(cfg.volume_seeds):
        rng = random.Random(seed)
        m, d = rng.randint(1, 3), rng.randint(1, 3)
        s = random_integer_system(seed, m, d, 2)
        b = sample_b(rng, s.A)
        res = volume_via_recourse(s.A, b)
        print(f"  seed={seed} m={m} d={d} volume={res.volume} dp_agrees={res.volume == volume_dp(s, b)} deg(p)={res.p.total_degree()}")
    print("expectation via bisection")
    for n in cfg.graph_sizes:
        g = Graph.from_edges(n, random_graph(n, n))
        oracle = sslp_oracle(g) if n <= cfg.exact_oracle_max_n else polygon_first_stage_oracle(g)
        res = bisection_expectation(g, oracle)
        env = envelope_expectation(g)
        print(
            f"  n={n} edges={len(g.edges)} calls={res.calls} "
            f"interval=[{float(res.interval.lo):.8f}, {float(res.interval.hi):.8f}] "
            f"envelope={float(env.mid):.8f} contains={res.interval.overlaps(env)}"
        )


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--volume-seeds", type=int, default=Config.volume_seeds)
    ap.add_argument("--sizes", type=int, nargs="+", default=list(Config.graph_sizes))
    a = ap.parse_args()
    run(Config(volume_seeds=a.volume_seeds, graph_sizes=tuple(a.sizes)))


if __name__ == "__main__":
    main()
