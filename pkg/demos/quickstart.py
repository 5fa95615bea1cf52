"""Sample one stable looptree, map it to a planar map and estimate dimensions.

    python3 demos/quickstart.py [n] [seed]
"""
import sys

from levymaps.levy import LevyTriplet, bg_exponents
from levymaps.pipeline import build_replica, measure_replica, sample_replica

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1 << 14
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1

print("Blumenthal-Getoor exponents of the 1.5-stable exponent:",
      bg_exponents(LevyTriplet.stable(1.5)))

path, info = sample_replica({"law": "stable", "alpha": 1.5}, n, seed, 0)
lt, gl, m, audit = build_replica(path, seed, 0)
print(f"looptree: {lt.N} vertices, {lt.n} edges")
print(f"map: V={m.V} E={m.E} F={m.F}, audit all-pass: {all(v for k, v in audit.items() if k != 'quadrangulation')}")

est, _ = measure_replica(lt, gl, m, seed, 0, sample_points=256)
for key in ("looptree_dim", "map_dim", "holder_looptree", "holder_map"):
    e = est[key]
    print(f"{key:16s} {e['slope']:.3f} +- {e['stderr']:.3f}")
