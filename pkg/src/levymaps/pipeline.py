"""Per-replica stages shared by the command line and the test batteries.

Every replica ``r`` of a run seeded with ``seed`` draws from its own
streams: ``(seed, r, 0)`` for the path, ``(seed, r, 1)`` for labels and
``(seed, r, 2)`` for the metric sample.
"""

from __future__ import annotations

import numpy as np

from .dimension import (
    ball_volume_profile,
    covering_curve,
    default_eps_grid,
    graph_metric_sample,
    holder_estimate,
    minkowski_estimate,
    volume_estimate,
)
from .errors import ValidationError
from .labels import label_process, sample_good_labelling
from .looptree import FormulaDistance, build_looptree
from .maps import audit_bijection, looptree_to_map
from .paths import (
    StepLaw,
    boltzmann_stable_law,
    k_n_details,
    sample_excursion,
    simple_walk_law,
    stable_gw_law,
)
from .rng import make_rng, stream_id

__all__ = [
    "STAGE_PATH",
    "STAGE_LABELS",
    "STAGE_SAMPLE",
    "make_law",
    "sample_replica",
    "build_replica",
    "measure_replica",
]

STAGE_PATH, STAGE_LABELS, STAGE_SAMPLE = 0, 1, 2


def make_law(model):
    """Step law from a model dict ``{"law": simple|stable|boltzmann|pmf, ...}``."""
    kind = model.get("law", "stable")
    needed = {"stable": "alpha", "boltzmann": "alpha", "pmf": "pmf"}.get(kind)
    if needed and needed not in model:
        raise ValidationError(f"step law {kind!r} needs {needed!r}")
    if kind == "simple":
        return simple_walk_law()
    if kind == "stable":
        return stable_gw_law(model["alpha"], laziness=model.get("laziness", 0.0))
    if kind == "boltzmann":
        return boltzmann_stable_law(model["alpha"])
    if kind == "pmf":
        return StepLaw.from_pmf(model["pmf"], normalize=model.get("normalize", False))
    raise ValidationError(f"unknown step law {kind!r}")


def conditioning(model, law, n):
    """Number of -1 steps to condition on, or ``None`` when unconditioned."""
    theta = model.get("theta")
    if theta is None:
        return None, {}
    if "alpha" not in model:
        raise ValidationError("theta conditioning needs alpha")
    info = k_n_details(law, model["alpha"], theta, n)
    return info["K"], info


def sample_replica(model, n, seed, r, law=None):
    law = make_law(model) if law is None else law
    K, info = conditioning(model, law, n)
    rng = make_rng(seed, r, STAGE_PATH)
    path = sample_excursion(law, n, rng, K=K)
    return path, {"stream": stream_id(seed, r, STAGE_PATH), "K": K, **info}


def build_replica(path, seed, r, audit=True):
    """Looptree, uniform good labelling, map and (optionally) the audit report."""
    lt = build_looptree(path)
    gl = sample_good_labelling(lt, make_rng(seed, r, STAGE_LABELS))
    m = looptree_to_map(lt, gl)
    report = audit_bijection(lt, gl, m) if audit else None
    return lt, gl, m, report


def measure_replica(lt, gl, m, seed, r, sample_points=512, centers=32):
    """Covering, ball-volume and Hoelder estimates of one replica.

    Sample points are uniform contour times; the looptree metric is read
    on their vertices and the map metric on the corresponding map
    vertices.  Ball volumes use the first ``centers`` sample points.
    """
    n = lt.n
    if not 1 <= sample_points <= n:
        raise ValidationError(f"sample_points must lie in [1, n={n}]")
    rng = make_rng(seed, r, STAGE_SAMPLE)
    times = rng.integers(0, n, sample_points)
    mult = np.bincount(lt.contour[:n], minlength=lt.N).astype(float)
    out = {"stream": stream_id(seed, r, STAGE_SAMPLE)}
    curves = {}
    for name, adj, verts, weights in (
        ("looptree", lt.adjacency, lt.contour[times], mult),
        ("map", m.adjacency, lt.contour[times] + 1, np.concatenate(([0.0], mult))),
    ):
        ms, rows = graph_metric_sample(adj, verts, full_rows=True)
        est = minkowski_estimate(ms)
        eps = default_eps_grid(ms)
        curves[name] = (eps, covering_curve(ms, eps))
        radii = default_eps_grid(ms)
        prof = ball_volume_profile(rows[:centers], weights, radii)
        vol = volume_estimate(prof, r_min=1.0, r_max=ms.diameter / 4)
        out[f"{name}_dim"] = est.to_dict()
        out[f"{name}_volume"] = vol.to_dict()
        out[f"{name}_diameter"] = ms.diameter
    fd = FormulaDistance(lt.path)
    Z = label_process(lt, gl)
    for stat, suffix in (("max", ""), ("median", "_median")):
        est = holder_estimate(n=n, distance=fd, statistic=stat)
        out[f"holder_looptree{suffix}"] = est.to_dict()
        out[f"holder_map{suffix}"] = holder_estimate(values=Z, statistic=stat).to_dict()
    return out, curves
