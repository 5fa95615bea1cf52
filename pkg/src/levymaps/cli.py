"""Command line: sample | build | dimension | spine-check | experiment.

Stages talk to each other only through files under ``--out``::

    manifest.json                 config, versions and rng streams
    paths/replica_0000.luka       sampled excursions
    build/replica_0000/...        looptree, labels, map and audit report
    dimension/estimates.json      estimator output, plus CSV and SVG curves

Exit codes: 0 ok, 2 validation failure, 3 infeasible model, 4 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as lio
from .dimension import (
    circle_sample,
    covering_curve,
    default_eps_grid,
    minkowski_estimate,
    segment_sample,
    square_sample,
)
from .errors import BudgetExceededError, InfeasibleModelError, ValidationError
from .labels import GoodLabelling, label_process
from .levy import LevyTriplet
from .looptree import build_looptree
from .maps import audit_bijection
from .pipeline import STAGE_LABELS, STAGE_PATH, STAGE_SAMPLE, build_replica, make_law
from .pipeline import measure_replica, sample_replica
from .rng import make_rng, stream_id
from .spine import (
    PROCESSES,
    empirical_exponent,
    sample_spine_values,
    spine_exponents,
    truncation_correction,
)

log = logging.getLogger("levymaps")

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 2, 3, 4
STAGE_VERSIONS = {"sample": 1, "build": 1, "dimension": 1, "spine": 1}


@dataclass
class ExperimentConfig:
    seed: int = 0
    model: dict = field(default_factory=lambda: {"law": "stable", "alpha": 1.5})
    n: int = 1024
    replicas: int = 1
    sample_points: int = 512
    outputs: str = "out"
    stages: tuple = ("path", "looptree", "labels", "map", "dimension")

    def validate(self):
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.replicas < 1:
            raise ValidationError(f"replicas must be >= 1, got {self.replicas}")
        if self.sample_points > self.n:
            raise ValidationError(f"sample_points={self.sample_points} exceeds n={self.n}")
        return self


# helpers -----------------------------------------------------------------


def _replica_name(r):
    return f"replica_{r:04d}"


def _read_manifest(out):
    f = Path(out) / "manifest.json"
    if not f.exists():
        raise ValidationError(f"no manifest in {out}; run 'sample' first")
    return json.loads(f.read_text())


def _write_json(path, obj):
    lio.atomic_write(path, lio.dump_json(obj))


def _pool_map(fn, args, jobs):
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*args)))


def _plot_covering(curves, fname, title):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "levymaps"
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, (eps, counts) in curves:
        ax.plot(np.log(1.0 / eps), np.log(counts), marker=".", lw=1, label=label)
    ax.set_xlabel("log(1/eps)")
    ax.set_ylabel("log N")
    ax.set_title(title)
    if len(curves) <= 8:
        ax.legend(fontsize=7)
    fig.tight_layout()
    Path(fname).parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(fname).with_suffix(".tmp.svg")
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    tmp.replace(fname)


# stages ------------------------------------------------------------------


def _sample_worker(model, n, seed, r, out):
    path, info = sample_replica(model, n, seed, r)
    fname = Path(out) / "paths" / f"{_replica_name(r)}.luka"
    lio.write_path(fname, path)
    return {"replica": r, "file": str(fname.relative_to(out)), **info}


def cmd_sample(cfg, jobs=1):
    cfg.validate()
    out = Path(cfg.outputs)
    make_law(cfg.model)  # fail early on a bad model
    args = [(cfg.model, cfg.n, cfg.seed, r, str(out)) for r in range(cfg.replicas)]
    records = _pool_map(_sample_worker, args, jobs)
    manifest = {
        "package": "levymaps",
        "version": __version__,
        "stage_versions": STAGE_VERSIONS,
        "config": asdict(cfg),
        "streams": {"path": STAGE_PATH, "labels": STAGE_LABELS, "sample": STAGE_SAMPLE},
        "replicas": records,
    }
    manifest["config"]["stages"] = list(cfg.stages)
    # the output location is not part of the run's identity
    del manifest["config"]["outputs"]
    _write_json(out / "manifest.json", manifest)
    return manifest


def _build_worker(out, seed, r, file):
    out = Path(out)
    path = lio.read_path(out / file)
    lt, gl, m, report = build_replica(path, seed, r)
    d = out / "build" / _replica_name(r)
    _write_json(d / "audit.json", report)
    failed = [k for k, ok in report.items() if not ok and k != "quadrangulation"]
    if failed:
        raise ValidationError(f"replica {r}: bijection audit failed: {', '.join(failed)}")
    lio.atomic_write(d / "looptree_edges.csv", lio.looptree_edges_csv(lt))
    _write_json(d / "looptree.json", lt.metadata())
    lio.write_labels(d / "labels.labl", label_process(lt, gl))
    lio.write_map(d / "map.pmap", m)
    lio.atomic_write(d / "map_edges.csv", lio.map_edges_csv(m))
    _write_json(d / "map.json", m.metadata())
    return {"replica": r, "audit": report, "stream": stream_id(seed, r, STAGE_LABELS)}


def cmd_build(out, jobs=1):
    manifest = _read_manifest(out)
    seed = manifest["config"]["seed"]
    args = [(str(out), seed, rec["replica"], rec["file"]) for rec in manifest["replicas"]]
    results = _pool_map(_build_worker, args, jobs)
    _write_json(Path(out) / "build" / "audit.json", results)
    return results


def _load_built(out, r):
    out = Path(out)
    manifest = _read_manifest(out)
    rec = manifest["replicas"][r]
    path = lio.read_path(out / rec["file"])
    lt = build_looptree(path)
    d = out / "build" / _replica_name(r)
    m = lio.read_map(d / "map.pmap")
    Z = lio.read_labels(d / "labels.labl").values.astype(np.int64)
    labels = np.empty(lt.N, dtype=np.int64)
    labels[lt.contour] = Z
    gl = GoodLabelling(labels)
    report = audit_bijection(lt, gl, m)
    if not report["labels_are_distances"]:
        raise ValidationError(f"replica {r}: stored map and labels disagree")
    return lt, gl, m


def _dimension_worker(out, seed, r, sample_points):
    lt, gl, m = _load_built(out, r)
    est, curves = measure_replica(lt, gl, m, seed, r, sample_points=sample_points)
    d = Path(out) / "dimension"
    for name, (eps, counts) in curves.items():
        lio.atomic_write(d / f"{_replica_name(r)}_{name}_covering.csv",
                         lio.covering_csv(eps, counts))
    return {"replica": r, **est}, {k: (v[0].tolist(), v[1].tolist()) for k, v in curves.items()}


def _summary(records, key):
    vals = np.array([rec[key]["slope"] for rec in records])
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float(
        records[0][key]["stderr"])
    return {"mean": float(vals.mean()), "stderr": se, "replicas": int(vals.size)}


SUMMARY_KEYS = ("looptree_dim", "map_dim", "holder_looptree", "holder_map",
                "looptree_volume", "map_volume")


def cmd_dimension(out, sample_points=512, jobs=1):
    manifest = _read_manifest(out)
    seed = manifest["config"]["seed"]
    args = [(str(out), seed, rec["replica"], sample_points) for rec in manifest["replicas"]]
    results = _pool_map(_dimension_worker, args, jobs)
    records = [r for r, _ in results]
    report = {
        "replicas": records,
        "summary": {k: _summary(records, k) for k in SUMMARY_KEYS},
        "sample_points": sample_points,
    }
    d = Path(out) / "dimension"
    _write_json(d / "estimates.json", report)
    for name in ("looptree", "map"):
        curves = [(f"replica {rec['replica']}", tuple(np.asarray(c[name][i]) for i in (0, 1)))
                  for rec, c in results]
        _plot_covering(curves, d / f"{name}_covering.svg", f"{name} covering numbers")
    return report


FIXTURES = {"segment": segment_sample, "circle": circle_sample, "square": square_sample}


def cmd_fixture(name, out, sample_points=512, seed=0):
    if name not in FIXTURES:
        raise ValidationError(f"unknown fixture {name!r}")
    kwargs = {"rng": make_rng(seed)} if name == "square" else {}
    ms = FIXTURES[name](sample_points, **kwargs)
    est = minkowski_estimate(ms)
    eps = default_eps_grid(ms)
    counts = covering_curve(ms, eps)
    d = Path(out) / "dimension"
    report = {"fixture": name, "sample_points": sample_points, "estimate": est.to_dict()}
    _write_json(d / f"fixture_{name}.json", report)
    lio.atomic_write(d / f"fixture_{name}_covering.csv", lio.covering_csv(eps, counts))
    _plot_covering([(name, (eps, counts))], d / f"fixture_{name}_covering.svg", name)
    return report


def cmd_spine_check(alpha, seed, replicas=100_000, x_min=1e-3, beta=0.0, out=None,
                    lams=(0.5, 1.0, 2.0), tol=0.05):
    tr = LevyTriplet.stable(alpha, gaussian=beta)
    vals = sample_spine_values(tr, 1.0, x_min, make_rng(seed, 0, 0), replicas)
    rows = []
    for lam in lams:
        exact = spine_exponents(tr, lam)
        corr = truncation_correction(tr, lam, x_min)
        for name in PROCESSES:
            target = exact[name] - corr[name]
            emp = empirical_exponent(vals[name], lam, 1.0)
            rows.append({"process": name, "lam": lam, "empirical": emp, "formula": exact[name],
                         "correction": corr[name], "rel_error": abs(emp / target - 1.0)})
    report = {"alpha": alpha, "beta": beta, "x_min": x_min, "replicas": replicas,
              "seed": seed, "rows": rows, "pass": all(r["rel_error"] < tol for r in rows)}
    if out is not None:
        _write_json(Path(out) / "spine_check.json", report)
    return report


def cmd_experiment_stable_drift(alpha, thetas, n, replicas, seed, out, laziness=0.1,
                                sample_points=512, jobs=1):
    out = Path(out)
    rows, per_theta = [], {}
    for theta in thetas:
        sub = out / f"theta_{theta:+g}"
        cfg = ExperimentConfig(seed=seed, n=n, replicas=replicas, sample_points=sample_points,
                               outputs=str(sub),
                               model={"law": "stable", "alpha": alpha, "theta": theta,
                                      "laziness": laziness})
        manifest = cmd_sample(cfg, jobs)
        cmd_build(sub, jobs)
        report = cmd_dimension(sub, sample_points, jobs)
        per_theta[theta] = report["summary"]
        for rec, prec in zip(report["replicas"], manifest["replicas"]):
            rows.append([theta, rec["replica"], prec["K"]]
                        + [rec[k]["slope"] for k in SUMMARY_KEYS])
    header = ["theta", "replica", "K"] + list(SUMMARY_KEYS)
    lio.atomic_write(out / "summary.csv", lio.table_csv(header, rows))
    spread = {}
    for k in SUMMARY_KEYS:
        worst = 0.0
        for i, a in enumerate(thetas):
            for b in thetas[i + 1:]:
                sa, sb = per_theta[a][k], per_theta[b][k]
                pooled = float(np.hypot(sa["stderr"], sb["stderr"]))
                worst = max(worst, abs(sa["mean"] - sb["mean"]) / pooled if pooled else np.inf)
        spread[k] = worst
    summary = {"alpha": alpha, "n": n, "laziness": laziness,
               "per_theta": {f"{t:+g}": per_theta[t] for t in thetas},
               "max_difference_in_pooled_stderr": spread}
    _write_json(out / "summary.json", summary)
    return summary


# argument parsing ----------------------------------------------------------


def _model_from_args(args, config):
    model = dict(config.get("model", {}))
    if args.law is not None:
        model["law"] = args.law
    model.setdefault("law", "stable")
    if args.alpha is not None:
        model["alpha"] = args.alpha
    if model["law"] in ("stable", "boltzmann"):
        model.setdefault("alpha", 1.5)
    if args.theta is not None:
        model["theta"] = args.theta
    if args.laziness is not None:
        model["laziness"] = args.laziness
    return model


def _config(args):
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise ValidationError("config file must hold a JSON object")

    def pick(name, default):
        v = getattr(args, name, None)
        return v if v is not None else config.get(name, default)

    return ExperimentConfig(
        seed=pick("seed", 0),
        model=_model_from_args(args, config),
        n=pick("n", 1024),
        replicas=pick("replicas", 1),
        sample_points=pick("sample_points", min(512, pick("n", 1024))),
        outputs=pick("out", config.get("outputs", "out")),
    )


def build_parser():
    p = argparse.ArgumentParser(prog="levymaps", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--law", choices=("stable", "simple", "boltzmann", "pmf"))
        sp.add_argument("--laziness", type=float)
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--sample-points", type=int)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--out")
        sp.add_argument("--config", help="JSON file with defaults for the flags")
        sp.add_argument("-v", "--verbose", action="store_true")

    for name, helptext in (
        ("sample", "sample excursions and write LUKA files plus a manifest"),
        ("build", "build looptrees, labels and maps from sampled paths"),
        ("dimension", "run the dimension estimators on built artifacts"),
        ("spine-check", "compare spinal subordinators with their Laplace exponents"),
        ("experiment", "stable drift battery across several theta values"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        if name == "dimension":
            sp.add_argument("--fixture", choices=sorted(FIXTURES))
        if name == "spine-check":
            sp.add_argument("--x-min", type=float, default=1e-3)
            sp.add_argument("--beta", type=float, default=0.0)
        if name == "experiment":
            sp.add_argument("--thetas", type=float, nargs="+", default=[-20.0, 0.0, 7.0])
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = _config(args)
    out = cfg.outputs
    if args.command == "sample":
        manifest = cmd_sample(cfg, args.jobs)
        print(f"sampled {len(manifest['replicas'])} path(s) into {out}")
    elif args.command == "build":
        results = cmd_build(out, args.jobs)
        print(f"built {len(results)} replica(s); audit all-pass")
    elif args.command == "dimension":
        if args.fixture:
            rep = cmd_fixture(args.fixture, out, cfg.sample_points, cfg.seed)
            e = rep["estimate"]
            print(f"{args.fixture}: slope {e['slope']:.3f} +- {e['stderr']:.3f}")
        else:
            rep = cmd_dimension(out, cfg.sample_points, args.jobs)
            for k, s in rep["summary"].items():
                print(f"{k:16s} {s['mean']:.3f} +- {s['stderr']:.3f} ({s['replicas']} replicas)")
    elif args.command == "spine-check":
        rep = cmd_spine_check(cfg.model.get("alpha", 1.5), cfg.seed,
                              args.replicas or 100_000, args.x_min, args.beta, out)
        for row in rep["rows"]:
            print(f"{row['process']:7s} lam={row['lam']:<4g} empirical {row['empirical']:.5f}"
                  f"  formula {row['formula'] - row['correction']:.5f}"
                  f"  rel.err {row['rel_error']:.4f}")
        if not rep["pass"]:
            raise ValidationError("spine exponents differ by more than 5%")
    elif args.command == "experiment":
        rep = cmd_experiment_stable_drift(cfg.model.get("alpha", 1.5), args.thetas, cfg.n,
                                          cfg.replicas, cfg.seed, out,
                                          cfg.model.get("laziness", 0.1),
                                          cfg.sample_points, args.jobs)
        for k, v in rep["max_difference_in_pooled_stderr"].items():
            print(f"{k:16s} max spread {v:.2f} pooled stderr")
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except InfeasibleModelError as exc:
        print(f"infeasible model: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValidationError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
