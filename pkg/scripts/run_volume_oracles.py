"""Compare the volume DP with Lasserre, triangulation and Monte Carlo on
seeded integer systems."""

from __future__ import annotations

import argparse
import random
import time
from dataclasses import dataclass
from fractions import Fraction

from twostage.generators import random_integer_system
from twostage.numerics import Polynomial
from twostage.polytope import integrate_quadratic_triangulated, lasserre_volume, mc_volume
from twostage.volume_dp import volume_dp


@dataclass
class Config:
    seeds: int = 20
    dims: tuple[int, ...] = (1, 2, 3, 4, 5)
    max_rows: int = 3
    norm: int = 3
    mc_samples: int = 10**6


def sample_b(rng: random.Random, A) -> list[Fraction]:
    out = []
    for row in A:
        lo = sum(min(0, v) for v in row)
        hi = sum(max(0, v) for v in row)
        out.append(lo + Fraction(rng.randint(1, 4 * (hi - lo) - 1), 4))
    return out


def run(cfg: Config) -> None:
    print("d  m  seed  volume_dp            check                    seconds")
    for d in cfg.dims:
        for seed in range(cfg.seeds):
            rng = random.Random(1000 * d + seed)
            m = rng.randint(1, cfg.max_rows)
            s = random_integer_system(1000 * d + seed, m, d, cfg.norm)
            b = sample_b(rng, s.A)
            t0 = time.perf_counter()
            v = volume_dp(s, b)
            if d <= 3:
                p = s.polytope(b)
                ok = v == lasserre_volume(p) == integrate_quadratic_triangulated(p, Polynomial.constant(d, 1))
                check = "exact match" if ok else "MISMATCH"
            else:
                est, err = mc_volume(s.polytope(b), cfg.mc_samples, seed)
                z = float(abs(est - v) / err) if err else 0.0
                check = f"mc |z|={z:.2f}"
            print(f"{d}  {m}  {seed:4d}  {float(v):.12f}  {check:24s} {time.perf_counter() - t0:.2f}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=Config.seeds)
    ap.add_argument("--dims", type=int, nargs="+", default=list(Config.dims))
    ap.add_argument("--mc-samples", type=int, default=Config.mc_samples)
    a = ap.parse_args()
    run(Config(seeds=a.seeds, dims=tuple(a.dims), mc_samples=a.mc_samples))


if __name__ == "__main__":
    main()
