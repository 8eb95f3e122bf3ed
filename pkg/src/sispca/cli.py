"""Command-line interface: ``sispca {fit,tune,simulate,metrics}``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
The worker count for ``tune`` defaults to the ``SISPCA_WORKERS`` environment
variable (else 1) and ``--workers`` takes precedence over both.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from dataclasses import replace
from typing import List, Optional

import numpy as np

from . import __version__, _backend
from . import config as config_mod
from .errors import ConfigError, DimensionError, NumericalError, SisPCAError, UndefinedMetricError
from .io import (
    column_values,
    ensure_dir,
    load_experiment,
    read_matrix,
    read_table,
    write_csv,
    write_json,
    write_matrix,
)
from .metrics import (
    HSIC_GAUSSIAN_CONVENTION,
    max_abs_spearman,
    pairwise_grassmann,
    score_affinity,
    score_grassmann,
    silhouette,
    subspace_hsic_report,
)
from .model import fit, objective, top_features
from .simulate import N_FEATURES, SimulationOptions, generate
from .tuning import LambdaGrid, lambda_scan, spectral_cluster, truncation_ranks

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
SCORE_SPACE_NOTE = "distances and affinities use orthonormalized centered score matrices (sample space)"

log = logging.getLogger("sispca")


def _manifest(command: str, seed: int, config_hash: Optional[str] = None, **extra) -> dict:
    m = {
        "command": command,
        "seed": int(seed),
        "version": __version__,
        "kernel_backend": _backend.NAME,
    }
    if config_hash is not None:
        m["config_hash"] = config_hash
    m.update(extra)
    return m


def _component_names(name: str, d: int) -> List[str]:
    return [f"{name}_{k + 1}" for k in range(d)]


def _model_metrics(model, exp) -> dict:
    cfg = exp.config
    out = {
        "lambda": model.config.lam,
        "objective_trace": model.objective_trace,
        "converged": model.converged,
        "n_iter": model.n_iter,
        "update_order": [model.names[i] for i in model.order],
        "explained_variance": {s.name: s.explained_variance for s in model.subspaces},
        "hsic": subspace_hsic_report(model),
        "hsic_gaussian_convention": HSIC_GAUSSIAN_CONVENTION,
        "grassmann": pairwise_grassmann(model),
        "geometry": SCORE_SPACE_NOTE,
    }
    obj = objective(exp.data, model.subspaces, model.specs, model.config.lam, model.bandwidths or None)
    out["objective"] = {"value": obj.value, "supervision": obj.supervision, "disentanglement": obj.disentanglement}
    out["top_features"] = {
        s.name: [f._asdict() for f in top_features(s, 0, 10, exp.data.feature_names)] for s in model.subspaces
    }
    m = cfg.metrics
    if m.silhouette_labels is not None:
        labels = np.asarray(exp.frame[m.silhouette_labels].astype(str))
        out["silhouette"] = {
            s.name: silhouette(s.Z[:, : min(m.silhouette_components, s.Z.shape[1])], labels)
            for s in model.subspaces
        }
        out["silhouette_labels"] = m.silhouette_labels
    if m.spearman_targets:
        out["spearman"] = {
            col: {s.name: max_abs_spearman(s.Z, column_values(exp.frame, col)) for s in model.subspaces}
            for col in m.spearman_targets
        }
    return out


# -- subcommands --------------------------------------------------------------


def cmd_fit(args) -> int:
    cfg = config_mod.load(args.config)
    if args.seed is not None:
        cfg.fit = replace(cfg.fit, seed=args.seed)
    exp = load_experiment(cfg)
    model = fit(exp.data, exp.specs, cfg.fit)
    out = ensure_dir(args.out)

    names = list(exp.data.feature_names)
    for s in model.subspaces:
        write_matrix(os.path.join(out, f"loadings_{s.name}.csv"), s.U, _component_names(s.name, s.U.shape[1]),
                     index=names, index_name="feature")
    header = [h for s in model.subspaces for h in _component_names(s.name, s.Z.shape[1])]
    Z = np.hstack(model.scores)
    index = exp.ids if exp.ids is not None else list(range(exp.data.n))
    write_matrix(os.path.join(out, "scores.csv"), Z, header, index=index,
                 index_name=cfg.data.id_column or "row")
    write_json(os.path.join(out, "metrics.json"), _model_metrics(model, exp))
    write_json(os.path.join(out, "manifest.json"),
               _manifest("fit", cfg.fit.seed, cfg.canonical_hash(), config=cfg.to_dict()))
    print(f"fit: {len(model.subspaces)} subspaces, {model.n_iter} iterations, "
          f"converged={model.converged}; wrote {out}")
    return EXIT_OK


def _workers(flag: Optional[int]) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("SISPCA_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SISPCA_WORKERS must be an integer, got {env!r}") from exc
    return 1


def cmd_tune(args) -> int:
    cfg = config_mod.load(args.config)
    if cfg.tune is None:
        raise ConfigError("config has no 'tune' section with a lambda grid")
    if args.seed is not None:
        cfg.fit = replace(cfg.fit, seed=args.seed)
    exp = load_experiment(cfg)
    grid = LambdaGrid(tuple(cfg.tune.grid))
    scan = lambda_scan(exp.data, exp.specs, grid, cfg.fit, workers=_workers(args.workers))
    out = ensure_dir(args.out)

    ok = scan.ok_index
    if not ok:
        raise NumericalError("every fit in the lambda grid failed: " + "; ".join(scan.errors.values()))
    pairs = [(i, j) for j in range(len(exp.specs)) for i in range(j + 1, len(exp.specs))]
    pair_names = [f"{exp.specs[j].name}:{exp.specs[i].name}" for i, j in pairs]
    header = ["lambda", "status", "objective", "supervision", "disentanglement", "n_iter", "converged"]
    header += [f"hsic_linear[{p}]" for p in pair_names] + [f"hsic_gaussian[{p}]" for p in pair_names]
    header += [f"grassmann[{p}]" for p in pair_names]
    rows = []
    for k, lam in enumerate(grid):
        m = scan.models[k]
        if m is None:
            rows.append([lam, "failed"] + [float("nan")] * (len(header) - 2))
            continue
        obj = objective(exp.data, m.subspaces, m.specs, lam, m.bandwidths or None)
        rep = {tuple(r["pair"]): r for r in subspace_hsic_report(m)}
        gr = {tuple(r["pair"]): r["grassmann"] for r in pairwise_grassmann(m)}
        keys = [(exp.specs[j].name, exp.specs[i].name) for i, j in pairs]
        rows.append(
            [lam, "ok", obj.value, obj.supervision, obj.disentanglement, m.n_iter, int(m.converged)]
            + [rep[k_]["hsic_linear"] for k_ in keys]
            + [rep[k_]["hsic_gaussian"] for k_ in keys]
            + [gr[k_] for k_ in keys]
        )
    write_csv(os.path.join(out, "tune_table.csv"), header, [list(c) for c in zip(*rows)])

    lams = list(scan.affinity.grid.values)
    labels = [f"{v!r}" for v in lams]
    write_matrix(os.path.join(out, "affinity.csv"), scan.affinity.values, labels, index=labels,
                 index_name="lambda")

    if len(ok) >= 2:
        cl = spectral_cluster(scan.affinity, cfg.tune.n_clusters, seed=cfg.fit.seed)
        clusters = {
            "labels": cl.labels,
            "n_clusters": cl.n_clusters,
            "representatives": cl.representatives,
            "recommended_lambda": cl.recommended_lambda,
            "laplacian_eigenvalues": cl.laplacian_eigenvalues,
            "degenerate": cl.degenerate,
        }
    else:
        clusters = {"labels": [0], "n_clusters": 1, "representatives": [lams[0]],
                    "recommended_lambda": lams[0], "laplacian_eigenvalues": [0.0], "degenerate": True}
    report = {
        "grid": list(grid.values),
        "fitted_lambdas": lams,
        "failed": {f"{grid.values[i]!r}": msg for i, msg in scan.errors.items()},
        "truncation_ranks": dict(zip([s.name for s in exp.specs], truncation_ranks(scan.models[ok[0]]))),
        "clusters": clusters,
        "geometry": SCORE_SPACE_NOTE,
        "hsic_gaussian_convention": HSIC_GAUSSIAN_CONVENTION,
    }
    write_json(os.path.join(out, "tune_report.json"), report)
    write_json(os.path.join(out, "manifest.json"),
               _manifest("tune", cfg.fit.seed, cfg.canonical_hash(), config=cfg.to_dict()))
    print(f"tune: {len(ok)}/{len(grid)} fits ok, {clusters['n_clusters']} cluster(s), "
          f"recommended lambda = {clusters['recommended_lambda']!r}; wrote {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    opts = SimulationOptions(
        gaussian_offset=args.gaussian_offset,
        grid_span=args.grid_span,
        grid_jitter=args.grid_jitter,
        ring_radius=args.ring_radius,
        ring_jitter=args.ring_jitter,
        observation_noise=args.noise,
    )
    ds = generate(args.n, args.seed, opts)
    out = ensure_dir(args.out)
    rows = list(range(ds.n))
    write_matrix(os.path.join(out, "X.csv"), ds.X, [f"x{j + 1}" for j in range(N_FEATURES)],
                 index=rows, index_name="row")
    write_csv(os.path.join(out, "targets.csv"), ["row", "label_S1", "S2_1", "S2_2"],
              [rows, [int(v) for v in ds.labels_S1], list(ds.coords_S2[:, 0]), list(ds.coords_S2[:, 1])])
    L = ds.latents
    truth = np.column_stack([L["S1"], L["S2"], L["S3"], ds.angle_S3])
    write_matrix(os.path.join(out, "truth.csv"), truth,
                 ["S1_1", "S1_2", "S2_1", "S2_2", "S3_1", "S3_2", "angle_S3"], index=rows, index_name="row")
    write_matrix(os.path.join(out, "mixing.csv"), ds.mixing, [f"x{j + 1}" for j in range(N_FEATURES)],
                 index=["S1_1", "S1_2", "S2_1", "S2_2", "S3_1", "S3_2"], index_name="latent")
    with open(os.path.join(out, "config.yaml"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_simulation_config(args.seed))
    write_json(os.path.join(out, "manifest.json"),
               _manifest("simulate", args.seed, n=args.n, options=opts.__dict__))
    print(f"simulate: n={ds.n}, seed={args.seed}; wrote {out}")
    return EXIT_OK


def _simulation_config(seed: int) -> str:
    cfg = {
        "data": {"path": "X.csv", "id_column": "row", "targets_path": "targets.csv"},
        "preprocess": {"center": True, "scale": False},
        "subspaces": [
            {"name": "S1", "dim": 2, "target": {"labels": "label_S1"}},
            {"name": "S2", "dim": 2, "target": {"columns": ["S2_1", "S2_2"]}, "kernel": "linear"},
            {"name": "S3", "dim": 2, "target": "none"},
        ],
        "fit": {"lambda": 1.0, "max_iter": 1000, "seed": seed},
        "tune": {"grid": [0.0, 1.0, 10.0]},
        "metrics": {"silhouette_labels": "label_S1"},
    }
    return config_mod.from_dict(cfg).to_yaml()


def cmd_metrics(args) -> int:
    Z, zcols = read_matrix(args.scores, prefix=args.select)
    out = {"scores": {"path": os.path.basename(args.scores), "columns": zcols}}

    if args.labels is not None:
        labels = _read_vector(args.labels, args.labels_column, Z.shape[0], numeric=False)
        k = min(args.components, Z.shape[1])
        out["silhouette"] = silhouette(Z[:, :k], labels)
        out["silhouette_components"] = k
    if args.target is not None:
        y = _read_vector(args.target, args.target_column, Z.shape[0], numeric=True)
        out["max_abs_spearman"] = max_abs_spearman(Z, y)
    if args.against is not None:
        W, wcols = read_matrix(args.against, prefix=args.against_select)
        if W.shape[0] != Z.shape[0]:
            raise DimensionError(f"row mismatch: {Z.shape[0]} score rows vs {W.shape[0]} in --against")
        k = args.k_trunc or min(Z.shape[1], W.shape[1])
        out["against"] = {"path": os.path.basename(args.against), "columns": wcols}
        out["grassmann"] = score_grassmann(Z, W)
        out["affinity"] = score_affinity(Z, W, k)
        out["k_trunc"] = k
        out["geometry"] = SCORE_SPACE_NOTE
    if len(out) == 1:
        raise ConfigError("nothing to compute: pass --labels, --target and/or --against")

    if args.out:
        parent = os.path.dirname(os.path.abspath(args.out))
        ensure_dir(parent)
        write_json(args.out, out)
    else:
        import json

        from .io import _jsonable

        print(json.dumps(_jsonable(out), sort_keys=True, indent=2))
    return EXIT_OK


def _read_vector(path: str, column: Optional[str], n: int, numeric: bool):
    df = read_table(path)
    if column is None:
        cols = [c for c in df.columns if c not in ("row", "id")]
        if len(cols) != 1:
            raise ConfigError(f"{path}: pick a column with --*-column (candidates: {cols})")
        column = cols[0]
    if column not in df.columns:
        raise ConfigError(f"{path}: column {column!r} not found")
    if len(df) != n:
        raise DimensionError(f"row mismatch: {n} score rows vs {len(df)} in {path}")
    if numeric:
        from .io import numeric_block

        return numeric_block(df[[column]], path)[:, 0]
    return np.asarray(df[column].astype(str))


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sispca", description="Supervised independent subspace PCA.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit one model from a YAML experiment config")
    f.add_argument("config")
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--seed", type=int, default=None, help="override fit.seed")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("tune", help="fit a lambda grid and cluster the models")
    t.add_argument("config")
    t.add_argument("--out", required=True)
    t.add_argument("--workers", type=int, default=None, help="parallel fits (default: $SISPCA_WORKERS or 1)")
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=cmd_tune)

    s = sub.add_parser("simulate", help="write a synthetic three-subspace dataset")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    d = SimulationOptions()
    s.add_argument("--gaussian-offset", type=float, default=d.gaussian_offset)
    s.add_argument("--grid-span", type=float, default=d.grid_span)
    s.add_argument("--grid-jitter", type=float, default=d.grid_jitter)
    s.add_argument("--ring-radius", type=float, default=d.ring_radius)
    s.add_argument("--ring-jitter", type=float, default=d.ring_jitter)
    s.add_argument("--noise", type=float, default=d.observation_noise, help="observation noise sd")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("metrics", help="score saved score matrices")
    m.add_argument("--scores", required=True, help="CSV of scores")
    m.add_argument("--select", default=None, help="use only columns named PREFIX_k")
    m.add_argument("--labels", default=None, help="CSV holding class labels")
    m.add_argument("--labels-column", default=None)
    m.add_argument("--components", type=int, default=3, help="leading components for silhouette")
    m.add_argument("--target", default=None, help="CSV holding a continuous target")
    m.add_argument("--target-column", default=None)
    m.add_argument("--against", default=None, help="second score CSV for Grassmann / affinity")
    m.add_argument("--against-select", default=None)
    m.add_argument("--k-trunc", type=int, default=None)
    m.add_argument("--out", default=None, help="write JSON here instead of stdout")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        return args.func(args)
    except (ConfigError, DimensionError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SisPCAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
