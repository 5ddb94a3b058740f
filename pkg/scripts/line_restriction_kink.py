"""Show that t -> vol P(b + t b') can have a kink inside [0, 1/||b'||_inf]
and count how often a degree-d fit misses a held-out sample."""

from __future__ import annotations

import argparse
import random
from dataclasses import dataclass
from fractions import Fraction

from twostage.generators import random_integer_system
from twostage.numerics import interpolate_univariate
from twostage.volume_dp import IntegerSystem, VolumeDP


@dataclass
class Config:
    seeds: int = 50
    base_seed: int = 20_000


def held_out_ok(s: IntegerSystem, b, bdir) -> bool:
    d = s.d
    t_max = Fraction(1, max(abs(v) for v in bdir))
    ts = [t_max * Fraction(2 * j + 1, 2 * d + 4) for j in range(d + 2)]
    dp = VolumeDP(s)
    vals = [dp.volume([bi + t * di for bi, di in zip(b, bdir)]) for t in ts]
    fit = interpolate_univariate(list(zip(ts[:-1], vals[:-1])))
    return fit.evaluate((ts[-1],)) == vals[-1]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=Config.seeds)
    cfg = Config(seeds=ap.parse_args().seeds)
    s = IntegerSystem(((1,), (-2,), (2,)))
    dp = VolumeDP(s)
    print("A = [[1],[-2],[2]], b = (3,0,1), b' = (-2,-2,-1)")
    for k in range(7):
        t = Fraction(k, 12)
        print(f"  t={t}  vol={dp.volume([3 - 2 * t, -2 * t, 1 - t])}")
    fails = []
    for seed in range(cfg.seeds):
        rng = random.Random(cfg.base_seed + seed)
        m, d = rng.randint(1, 3), rng.randint(1, 3)
        sys_ = random_integer_system(cfg.base_seed + seed, m, d, 3)
        b = [rng.randint(-2, 3) for _ in range(m)]
        bdir = [0] * m
        while not any(bdir):
            bdir = [rng.randint(-2, 2) for _ in range(m)]
        if not held_out_ok(sys_, b, bdir):
            fails.append(seed)
    print(f"held-out mismatches: {len(fails)}/{cfg.seeds} (seeds {fails})")


if __name__ == "__main__":
    main()
