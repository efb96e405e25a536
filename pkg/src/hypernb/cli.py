"""Command-line interface: sample / spectrum / cluster / weights / verify /
tree / pipeline.

Every invocation writes its outputs deterministically (identical command,
config, and seed give byte-identical files) and emits a run manifest with
the resolved configuration, seed, version, wall time, and output paths;
wall-clock data lives only in the manifest.  Exit codes: 0 success, 1 input
error, 2 numerical failure, 3 regime warning escalated by --strict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import (
    choose_gamma,
    default_threshold,
    overlap,
    round_randomized,
    round_sign,
    select_informative,
)
from .config import config_to_params, load_config
from .errors import HypernbError, InputError, RegimeWarning
from .hypergraph import (
    read_assignment,
    read_hypergraph,
    write_assignment,
    write_hypergraph,
)
from .model import weighted_signal
from .operators import (
    ReducedNB,
    bethe_hessian,
    build_nb,
    eigvec_lift_and_aggregate,
    ihara_bass_verify,
    j_spectrum_counts,
    parity_time_residual,
)
from .sampler import SampleConfig, sample_hsbm
from .spectral import detect_outliers, top_eigs
from .treecheck import martingale_check
from .weights import weights_numeric, weights_optimal_r2, weights_unit

_EXIT_INPUT = 1
_EXIT_NUMERICAL = 2
_EXIT_REGIME = 3


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_manifest(args, outputs: list[str], started: float) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "subcommand": args.subcommand,
        "config": resolved,
        "seed": args.seed,
        "version": __version__,
        "wall_time_sec": time.time() - started,
        "outputs": outputs,
    }
    if args.out_dir:
        path = Path(args.out_dir) / "manifest.json"
    elif outputs:
        path = Path(outputs[0] + ".manifest.json")
    else:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    _json_dump(manifest, path)


def _resolve(path_arg: str, args) -> Path:
    path = Path(path_arg)
    if args.out_dir and not path.is_absolute():
        path = Path(args.out_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _parse_weights(args, g=None):
    if args.weights:
        w = np.array([float(x) for x in args.weights.split(",")])
    elif getattr(args, "config", None):
        w = np.array(load_config(args.config).weights, dtype=float)
    else:
        raise InputError("need --weights or --config to fix layer weights")
    if g is not None and w.size != g.K:
        raise InputError(f"{w.size} weights for a {g.K}-layer hypergraph")
    return w


def _consts_if_config(args):
    if getattr(args, "config", None):
        params = config_to_params(load_config(args.config))
        return params, weighted_signal(params)
    return None, None


def _ritz_entry(pair, is_outlier):
    return {
        "re": pair.value.real,
        "im": pair.value.imag,
        "residual": pair.residual,
        "converged": pair.converged,
        "outlier": is_outlier,
    }


def _cmd_sample(args):
    params = config_to_params(load_config(args.config))
    cfg = SampleConfig(params=params, n=args.n, seed=args.seed, label_mode=args.label_mode)
    g, labels = sample_hsbm(cfg)
    out = _resolve(args.out, args)
    out.write_text(write_hypergraph(g), encoding="utf-8")
    outputs = [str(out)]
    if args.labels_out:
        lab_path = _resolve(args.labels_out, args)
        lab_path.write_text(write_assignment(labels), encoding="utf-8")
        outputs.append(str(lab_path))
    return outputs


def _spectrum_summary(g, w, args, consts=None):
    reduced = ReducedNB(g, w)
    pairs, meta = top_eigs(reduced, k=args.k, tol=args.tol, seed=args.seed)
    return detect_outliers(pairs, g, w, consts=consts, delta_bulk=args.delta_bulk,
                           metadata=meta)


def _cmd_spectrum(args):
    g = read_hypergraph(Path(args.infile).read_text(encoding="utf-8"))
    w = _parse_weights(args, g)
    _, consts = _consts_if_config(args)
    summary = _spectrum_summary(g, w, args, consts)
    report = {
        "n": g.n,
        "edge_counts": list(g.edge_counts),
        "sqrt_vartheta": float(np.sqrt(summary.vartheta_used)),
        "threshold": summary.threshold,
        "bulk_radius_est": summary.bulk_radius_est,
        "ritz": [_ritz_entry(p, i in summary.outliers) for i, p in enumerate(summary.ritz)],
        "outlier_values": [summary.ritz[i].value.real for i in summary.outliers],
        "matched_mu_index": summary.matched_mu,
    }
    if args.emit_vectors:
        report["y_vectors"] = [y.tolist() for y in summary.y_vectors]
    out = _resolve(args.out, args)
    _json_dump(report, out)
    outputs = [str(out)]
    if args.csv:
        csv_path = _resolve(args.csv, args)
        lines = [f"{p.value.real!r},{p.value.imag!r}" for p in summary.ritz]
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        outputs.append(str(csv_path))
    return outputs


def _cluster_vectors(g, w, args, consts):
    reduced = ReducedNB(g, w)
    pairs, meta = top_eigs(reduced, k=args.k, tol=args.tol, seed=args.seed)
    summary = detect_outliers(pairs, g, w, consts=consts, delta_bulk=args.delta_bulk,
                              metadata=meta)
    ys = list(summary.y_vectors)
    if len(ys) < 2:
        from .operators import aggregate_from_reduced
        for i, pair in enumerate(summary.ritz):
            if len(ys) >= 2:
                break
            if i in summary.outliers:
                continue
            if abs(pair.value.imag) <= 1e-6 * max(1.0, abs(pair.value.real)):
                vec = pair.vector.real
                ys.append(aggregate_from_reduced(g, w, vec))
    if len(ys) < 2:
        raise InputError("fewer than two usable spectral directions")
    return summary, ys[0], ys[1]


def _cmd_cluster(args):
    g = read_hypergraph(Path(args.infile).read_text(encoding="utf-8"))
    w = _parse_weights(args, g)
    params, consts = _consts_if_config(args)
    if params is not None and not np.allclose(params.pi, params.pi[0]):
        warnings.warn("reconstruction guarantees assume balanced communities",
                      RegimeWarning, stacklevel=2)
    summary, y1, y2 = _cluster_vectors(g, w, args, consts)
    u, which = select_informative(y1, y2)
    if args.mode == "sign":
        est = round_sign(u, seed=args.seed)
    else:
        if args.T is not None:
            T = args.T
        elif consts is not None:
            T = default_threshold(params.r, choose_gamma(consts, y1, g.n))
        else:
            raise InputError("alg1 mode needs --T or --config to set the threshold")
        est = round_randomized(u, T, seed=args.seed)
    out = _resolve(args.out, args)
    out.write_text(write_assignment(est), encoding="utf-8")
    if args.labels:
        truth = read_assignment(Path(args.labels).read_text(encoding="utf-8"))
        r = params.r if params is not None else int(max(truth.labels.max(), 1)) + 1
        print(f"overlap {overlap(truth, est, r)!r}")
    return [str(out)]


def _cmd_weights(args):
    params = config_to_params(load_config(args.config))
    if args.method == "unit":
        res = weights_unit(params)
    elif args.method == "r2":
        res = weights_optimal_r2(params)
    else:
        res = weights_numeric(params, restarts=args.restarts, seed=args.seed)
    out = _resolve(args.out, args)
    _json_dump({
        "w": res.w.tolist(),
        "achieved_snr": res.achieved_snr,
        "above_ks": res.above_ks,
        "method": res.method,
        "tie": res.tie,
    }, out)
    return [str(out)]


def _cmd_verify(args):
    g = read_hypergraph(Path(args.infile).read_text(encoding="utf-8"))
    w = _parse_weights(args, g)
    rng = np.random.default_rng(args.seed)
    failures = 0
    lines = []
    if args.check == "j-spectrum":
        counts = j_spectrum_counts(g)
        op = build_nb(g, w)
        if op.m and op.m <= 2000:
            dense = np.zeros((op.m, op.m))
            basis = np.zeros(op.m)
            for j in range(op.m):
                basis[j] = 1.0
                dense[:, j] = op.reversal_apply(basis)
                basis[j] = 0.0
            ev = np.linalg.eigvalsh(dense)
            from collections import Counter
            observed = Counter(int(round(x)) for x in ev)
            ok = dict(observed) == {k: v for k, v in counts.items() if v}
        else:
            ok = True
        failures += not ok
        lines.append(f"j-spectrum multiplicities {counts}: {'PASS' if ok else 'FAIL'}")
    elif args.check == "parity-time":
        for k in range(args.max_power + 1):
            resid = parity_time_residual(g, w, k, seed=args.seed)
            bound = 1e-10 * max(np.max(np.abs(w)), 1.0) ** k * max(g.oriented_count, 1)
            ok = resid <= bound
            failures += not ok
            lines.append(f"parity-time k={k}: residual {resid:.3e} "
                         f"(bound {bound:.3e}) {'PASS' if ok else 'FAIL'}")
    elif args.check == "ihara-bass":
        for t in range(args.trials):
            lam = complex(rng.uniform(-3, 3), rng.uniform(-3, 3) if t % 2 else 0.0)
            res = ihara_bass_verify(g, w, lam)
            failures += not res.ok
            lines.append(f"ihara-bass lambda={lam:.3f}: logmod diff {res.logmod_rel_diff:.2e} "
                         f"phase diff {res.phase_diff:.2e} {'PASS' if res.ok else 'FAIL'}")
    elif args.check == "eig-relation":
        op = build_nb(g, w)
        if op.m == 0 or op.m > 2000:
            raise InputError(f"eig-relation check needs 0 < m <= 2000, got {op.m}")
        evals, evecs = np.linalg.eig(op.to_dense())
        reduced = ReducedNB(g, w).to_sparse()
        from .errors import PoleError
        checked = 0
        worst = 0.0
        for lam, v in zip(evals, evecs.T):
            try:
                tv, y = eigvec_lift_and_aggregate(g, w, complex(lam), v)
            except PoleError:
                continue
            r1 = float(np.linalg.norm(reduced @ tv - lam * tv))
            H = bethe_hessian(g, w, complex(lam), allow_complex=True).H
            r2 = float(np.linalg.norm(H @ y))
            worst = max(worst, r1, r2)
            checked += 1
        ok = worst <= 1e-8
        failures += not ok
        lines.append(f"eig-relation: {checked} eigenpairs, worst residual {worst:.3e} "
                     f"{'PASS' if ok else 'FAIL'}")
    print("\n".join(lines))
    if failures:
        raise HypernbError(f"{failures} verification check(s) failed")
    return []


def _cmd_tree(args):
    params = config_to_params(load_config(args.config))
    consts = weighted_signal(params)
    i, j = (int(x) for x in args.eig.split(","))
    report = martingale_check(params, consts, i, j, t_max=args.depth,
                              M=args.samples, seed=args.seed)
    payload = {
        "i": report.i, "j": report.j, "t_max": report.t_max,
        "samples": report.M, "seed": report.seed, "ok": report.ok,
        "per_root": {
            str(a): {key: (val.tolist() if isinstance(val, np.ndarray) else val)
                     for key, val in stats.items()}
            for a, stats in report.root_stats.items()
        },
    }
    out = _resolve(args.out, args)
    _json_dump(payload, out)
    return [str(out)]


def _cmd_pipeline(args):
    params = config_to_params(load_config(args.config))
    consts = weighted_signal(params)
    if not np.allclose(params.pi, params.pi[0]):
        warnings.warn("reconstruction guarantees assume balanced communities",
                      RegimeWarning, stacklevel=2)
    g, truth = sample_hsbm(SampleConfig(params=params, n=args.n, seed=args.seed,
                                        label_mode=args.label_mode))
    w = params.weights
    summary, y1, y2 = _cluster_vectors(g, w, args, consts)
    u, which = select_informative(y1, y2)
    gamma = choose_gamma(consts, y1, g.n)
    if args.mode == "sign":
        est = round_sign(u, seed=args.seed)
    else:
        est = round_randomized(u, default_threshold(params.r, gamma), seed=args.seed)
    ov = overlap(truth, est, params.r)
    report = {
        "n": g.n,
        "edge_counts": list(g.edge_counts),
        "theory": {
            "mu": consts.mu.tolist(),
            "sqrt_vartheta": float(np.sqrt(consts.vartheta)),
            "tau": consts.tau.tolist(),
            "r0": consts.r0,
            "gamma": consts.gamma.tolist(),
        },
        "observed": {
            "ritz": [_ritz_entry(p, i in summary.outliers)
                     for i, p in enumerate(summary.ritz)],
            "outlier_values": [summary.ritz[i].value.real for i in summary.outliers],
            "n_outliers": len(summary.outliers),
            "informative_vector": which,
        },
        "mode": args.mode,
        "overlap": ov,
    }
    out = _resolve(args.out, args)
    _json_dump(report, out)
    print(f"overlap {ov!r}")
    return [str(out)]


def _add_common(sub, *, config=False, infile=False, weights=False, spectrum=False):
    if config:
        sub.add_argument("--config", required=config == "required", help="model config JSON")
    if infile:
        sub.add_argument("--in", dest="infile", required=True, help="hypergraph file")
    if weights:
        sub.add_argument("--weights", help="comma-separated layer weights")
    if spectrum:
        sub.add_argument("--k", type=int, default=8, help="Ritz pairs to compute")
        sub.add_argument("--tol", type=float, default=1e-8)
        sub.add_argument("--delta-bulk", type=float, default=0.05)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypernb", description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("HYPERNB_THREADS", "0")))
    parser.add_argument("--strict", action="store_true",
                        help="escalate regime warnings to exit code 3")
    parser.add_argument("--out-dir", default=None)
    subs = parser.add_subparsers(dest="subcommand", required=True)

    s = subs.add_parser("sample", help="sample a block-model hypergraph")
    _add_common(s, config="required")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--labels-out", default=None)
    s.add_argument("--label-mode", default="deterministic-blocks",
                   choices=["deterministic-blocks", "shuffled"])
    s.set_defaults(func=_cmd_sample)

    s = subs.add_parser("spectrum", help="Ritz values and outliers of the reduced operator")
    _add_common(s, config=True, infile=True, weights=True, spectrum=True)
    s.add_argument("--out", required=True)
    s.add_argument("--emit-vectors", action="store_true")
    s.add_argument("--csv", default=None, help="write (re, im) scatter data")
    s.set_defaults(func=_cmd_spectrum)

    s = subs.add_parser("cluster", help="two-way reconstruction from the spectrum")
    _add_common(s, config=True, infile=True, weights=True, spectrum=True)
    s.add_argument("--mode", default="sign", choices=["sign", "alg1"])
    s.add_argument("--T", type=float, default=None, help="rounding threshold for alg1")
    s.add_argument("--labels", default=None, help="ground-truth labels to score against")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_cluster)

    s = subs.add_parser("weights", help="layer-weight selection")
    _add_common(s, config="required")
    s.add_argument("--method", default="numeric", choices=["unit", "r2", "numeric"])
    s.add_argument("--restarts", type=int, default=32)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_weights)

    s = subs.add_parser("verify", help="runtime verification of exact identities")
    _add_common(s, config=True, infile=True, weights=True)
    s.add_argument("--check", required=True,
                   choices=["ihara-bass", "parity-time", "eig-relation", "j-spectrum"])
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--max-power", type=int, default=6)
    s.set_defaults(func=_cmd_verify)

    s = subs.add_parser("tree", help="branching-process functional verification")
    _add_common(s, config="required")
    s.add_argument("--eig", default="0,0", help="eigen indices i,j (0-based)")
    s.add_argument("--depth", type=int, default=4)
    s.add_argument("--samples", type=int, default=10 ** 5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_tree)

    s = subs.add_parser("pipeline", help="sample, eigensolve, cluster, score")
    _add_common(s, config="required", spectrum=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--mode", default="sign", choices=["sign", "alg1"])
    s.add_argument("--label-mode", default="deterministic-blocks",
                   choices=["deterministic-blocks", "shuffled"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
        os.environ.setdefault("OPENBLAS_NUM_THREADS", str(args.threads))
    started = time.time()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            outputs = args.func(args)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return _EXIT_INPUT
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return _EXIT_INPUT
        except HypernbError as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            return _EXIT_NUMERICAL
    regime = [w for w in caught if issubclass(w.category, RegimeWarning)]
    for w in regime:
        print(f"warning: {w.message}", file=sys.stderr)
    _write_manifest(args, outputs, started)
    if regime and args.strict:
        return _EXIT_REGIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
