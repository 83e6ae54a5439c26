"""Command-line frontend.

Every subcommand takes ``--config FILE`` (JSON) and per-flag overrides; flags
win over the file. The resolved config, with all defaults filled in, is echoed
into a provenance sidecar next to the primary output. ``--check SIDECAR``
recomputes a recorded run and compares output hashes.

Config schema (all keys optional unless the command needs them)::

    family         {"kind": "gauss1d" | "gauss" | "gauss-unknown-var" | "trinomial" | "bivariate",
                    "params": {...}, "replicate": m}
    dissimilarity  {"kind": "KL" | "BP" | "CD", "S": ..., "g": ..., "backend": {"type": ...}}
    epsilon        float
    grid           grid geometry, e.g. {"type": "rectangular", "bounds": [[-3, 3]], "counts": 601}
    hypothesis     {"theta0": [...]} for a point, or a grid geometry for a composite set
    theta0, thetastar          parameter vectors (dissim)
    prior, data, hpd_level     (test)
    m_list                     (convergence)
    scale, shift               (invariance)

Exit codes: 0 success, 2 config error, 3 numeric error, 4 reproduction mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import agnostic as ag
from . import dissimilarity as dis
from . import grid as gr
from . import pragmatic as pg
from . import provenance as prov
from .errors import ConfigError, DegeneratePosteriorError, DomainError, GridMismatchError, NumericError, UnsupportedKindError
from .family import TrinomialCounts, base_and_replication, family_from_config, replicate

log = logging.getLogger("pragma")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_MISMATCH = 4
STDOUT = "<stdout>"


@dataclass
class Result:
    primary: str
    mirror: str | None = None
    summary: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK


# ---------------------------------------------------------------------------
# config plumbing


def _parse_vector(text: str) -> list[float]:
    text = text.strip()
    try:
        val = json.loads(text) if text.startswith("[") else [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse parameter vector {text!r}") from None
    return [float(v) for v in np.atleast_1d(val)]


def _parse_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what}: invalid JSON ({exc.msg})") from None


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"--config: no such file {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config {path}: invalid JSON at line {exc.lineno} ({exc.msg})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"--config {path}: top level must be an object")
    return cfg


def _apply_family_flags(cfg: dict, args) -> None:
    fam = dict(cfg.get("family", {}))
    params = dict(fam.get("params", {}))
    if args.family is not None:
        if fam.get("kind") not in (None, args.family):
            params = {}
        fam["kind"] = args.family
    for flag, key in (("sigma0", "sigma0"), ("sigma", "sigma"), ("M2", "M2"), ("trials", "m")):
        val = getattr(args, flag)
        if val is not None:
            params[key] = val
    if args.cov is not None:
        params["cov"] = _parse_json(args.cov, "--cov")
    if args.replicate is not None:
        fam["replicate"] = args.replicate
    if params:
        fam["params"] = params
    if fam:
        cfg["family"] = fam


def _apply_dissim_flags(cfg: dict, args) -> None:
    d = cfg.get("dissimilarity", {})
    d = {"kind": d} if isinstance(d, str) else dict(d)
    if args.kind is not None:
        d["kind"] = args.kind
    if args.S is not None:
        d["S"] = _parse_json(args.S, "--S") if args.S.startswith("[") else args.S
    if args.g is not None:
        d["g"] = args.g
    backend = dict(d.get("backend", {}))
    for flag, key in (("backend", "type"), ("abs_tol", "abs_tol"), ("mc_n", "n"), ("seed", "seed")):
        val = getattr(args, flag)
        if val is not None:
            backend[key] = val
    if backend:
        d["backend"] = backend
    if d:
        cfg["dissimilarity"] = d


def _apply_common_flags(cfg: dict, args) -> None:
    if getattr(args, "family", None) is not None or any(
        getattr(args, f, None) is not None for f in ("sigma0", "sigma", "M2", "trials", "cov", "replicate")
    ):
        _apply_family_flags(cfg, args)
    if hasattr(args, "kind"):
        _apply_dissim_flags(cfg, args)
    if getattr(args, "epsilon", None) is not None:
        cfg["epsilon"] = args.epsilon
    if getattr(args, "grid", None) is not None:
        cfg["grid"] = _parse_json(args.grid, "--grid")
    if getattr(args, "hypothesis", None) is not None:
        cfg["hypothesis"] = _parse_json(args.hypothesis, "--hypothesis")
    if getattr(args, "theta0", None) is not None:
        if hasattr(args, "hypothesis"):
            cfg["hypothesis"] = {"theta0": _parse_vector(args.theta0)}
        else:
            cfg["theta0"] = _parse_vector(args.theta0)


def _require(cfg: dict, *keys) -> None:
    for k in keys:
        if k not in cfg:
            raise ConfigError(f"missing field {k!r} (give it in --config or by flag)")


def _hypothesis(cfg: dict, family):
    """Return (kind, theta0 or grid, resolved config)."""
    h = cfg.get("hypothesis")
    if h is None and "theta0" in cfg:
        h = {"theta0": cfg["theta0"]}
    if h is None:
        raise ConfigError("missing field 'hypothesis' (a {'theta0': [...]} point or a grid geometry)")
    if "theta0" in h:
        theta0 = family.check_theta(np.asarray(h["theta0"], dtype=float))
        return "point", theta0, {"theta0": theta0.tolist()}
    hgrid = gr.make_grid(h)
    return "set", hgrid, hgrid.to_config()


def _region_for(spec: pg.PragmaticSpec, hkind, hyp, grid):
    if hkind == "point":
        return pg.singleton_region(spec, hyp, grid)
    return pg.composite_region(spec, hyp, grid)


def _pragmatic(cfg: dict):
    _require(cfg, "family", "dissimilarity", "epsilon", "grid")
    spec = pg.pragmatic_from_config(cfg)
    grid = gr.make_grid(cfg["grid"])
    hkind, hyp, hcfg = _hypothesis(cfg, spec.family)
    resolved = {**spec.to_config(), "grid": grid.to_config(), "hypothesis": hcfg}
    return spec, grid, hkind, hyp, resolved


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


def _json_text(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


# ---------------------------------------------------------------------------
# commands: each takes a raw config and returns (resolved config, Result)


def cmd_dissim(cfg: dict):
    _require(cfg, "family", "dissimilarity", "theta0")
    family = family_from_config(cfg["family"])
    spec = dis.dissimilarity_from_config(cfg["dissimilarity"])
    theta0 = family.check_theta(np.asarray(cfg["theta0"], dtype=float))
    resolved = {"family": family.to_config(), "dissimilarity": spec.to_config(), "theta0": theta0.tolist()}
    if "thetastar" in cfg:
        ts = family.check_theta(np.asarray(cfg["thetastar"], dtype=float))
        resolved["thetastar"] = ts.tolist()
        value = dis.evaluate(family, theta0, ts, spec)
        stderr = getattr(value, "stderr", None)
        summary = {"value": float(value)}
        if stderr is not None:
            summary["stderr"] = float(stderr)
        return resolved, Result(_fmt(value) + "\n", _json_text(summary), summary)
    _require(cfg, "grid")
    grid = gr.make_grid(cfg["grid"])
    resolved["grid"] = grid.to_config()
    d = dis.pairwise(family, theta0, grid.points, spec)[0]
    rows = [[_fmt(v) for v in p] + [_fmt(x)] for p, x in zip(grid.points, d)]
    primary = _csv_text(list(grid.axis_names) + ["d"], rows)
    mirror = _json_text({"points": grid.points.tolist(), "d": [float(x) for x in d]})
    return resolved, Result(primary, mirror, {"n_points": len(grid)})


def cmd_region(cfg: dict):
    spec, grid, hkind, hyp, resolved = _pragmatic(cfg)
    region = _region_for(spec, hkind, hyp, grid)
    summary = {"mode": "singleton" if hkind == "point" else "composite", "member_count": region.count, "n_points": len(grid)}
    return resolved, Result(gr.region_csv(region), gr.region_json(region), summary)


def _data_family(cfg: dict, family, data):
    if "data_family" in cfg:
        return family_from_config(cfg["data_family"])
    base, _ = base_and_replication(family)
    if isinstance(base, TrinomialCounts):
        return TrinomialCounts(int(round(float(np.sum(data)))))
    return base


def cmd_test(cfg: dict):
    spec, grid, hkind, hyp, resolved = _pragmatic(cfg)
    _require(cfg, "data")
    data = np.asarray(cfg["data"], dtype=float)
    dfam = _data_family(cfg, spec.family, data)
    default_prior = {"kind": "dirichlet", "alpha": [1, 1, 1]} if isinstance(dfam, TrinomialCounts) else {"kind": "uniform"}
    prior = ag.prior_from_config(cfg.get("prior", default_prior))
    level = float(cfg.get("hpd_level", 0.95))
    resolved.update(
        data=data.tolist(), data_family=dfam.to_config(), prior=prior.to_config(), hpd_level=level
    )
    weights = ag.posterior_grid(dfam, prior, data, grid)
    est = ag.hpd_region(weights, grid, level)
    hregion = _region_for(spec, hkind, hyp, grid)
    decision = ag.agnostic_test(est, hregion)
    doc = {
        "decision": decision.label,
        "value": decision.value,
        "hpd_points": est.region.count,
        "hpd_mass": est.posterior_mass_captured,
        "hypothesis_points": hregion.count,
        "overlap": (est.region & hregion).count,
        "outside": (est.region & hregion.complement()).count,
    }
    return resolved, Result(_json_text(doc), None, doc)


HW_COLUMNS_FIXED = ["group", "AA", "AD", "DD", "Decision"]


def cmd_reproduce_hw(cfg: dict):
    study = ag.HWStudyConfig.from_config(cfg)
    rows = ag.run_hw_study(study)
    kinds = [d.kind for d in study.dissimilarities]
    header = (
        HW_COLUMNS_FIXED
        + [f"decision_{k}" for k in kinds]
        + ["hpd_points", "hpd_mass"]
        + [f"{c}_{k}" for k in kinds for c in ("inside", "outside")]
    )
    body = []
    for r in rows:
        body.append(
            [r.group, *r.counts, r.published or ""]
            + [r.decisions[k].label for k in kinds]
            + [r.hpd_points, _fmt(r.hpd_mass)]
            + [v for k in kinds for v in (r.inside[k], r.outside[k])]
        )
    summary = ag.hw_reproduction_summary(rows)
    summary["mismatches"] = [
        {
            "group": r.group,
            "published": r.published,
            "decisions": {k: r.decisions[k].label for k in kinds},
            "hpd_points": r.hpd_points,
            "inside": r.inside,
            "outside": r.outside,
        }
        for r in rows
        if r.published and not all(r.matches(k) for k in kinds)
    ]
    mirror = _json_text({"columns": header, "rows": body, "summary": summary})
    return study.to_config(), Result(_csv_text(header, body), mirror, summary)


def cmd_convergence(cfg: dict):
    spec, grid, hkind, hyp, resolved = _pragmatic(cfg)
    if hkind == "point":
        hyp = gr.from_points(hyp[None, :])
    m_list = [int(m) for m in cfg.get("m_list", [1, 2, 5, 10, 20])]
    resolved["m_list"] = m_list
    regions = pg.shrinkage_sequence(spec, hyp, grid, m_list)
    header = ["m", "member_count", "member_fraction"]
    kl = spec.dissimilarity.kind == "KL"
    if kl:
        header += ["rescaled_count", "rescaled_equal"]
    body = []
    for m, reg in zip(m_list, regions):
        row = [m, reg.count, _fmt(reg.count / len(grid))]
        if kl:
            base = base_and_replication(spec.family)[0]
            ref = pg.composite_region(pg.PragmaticSpec(base, spec.dissimilarity, spec.epsilon / (m * _replication(spec))), hyp, grid)
            row += [ref.count, int(ref == reg)]
        body.append(row)
    counts = [r.count for r in regions]
    summary = {"counts": counts, "non_increasing": all(b <= a for a, b in zip(counts, counts[1:]))}
    if kl:
        summary["rescaled_all_equal"] = all(row[-1] == 1 for row in body)
    return resolved, Result(_csv_text(header, body), _json_text({"columns": header, "rows": body, **summary}), summary)


def _replication(spec) -> int:
    return base_and_replication(spec.family)[1]


def cmd_invariance(cfg: dict):
    spec, grid, hkind, hyp, resolved = _pragmatic(cfg)
    if hkind == "point":
        hyp = gr.from_points(hyp[None, :])
    scale = float(cfg.get("scale", 1.0))
    shift = float(cfg.get("shift", 0.0))
    resolved.update(scale=scale, shift=shift)
    base, m = base_and_replication(spec.family)
    fam_star, f, f_inv = pg.affine_reparametrization(base, scale, shift)
    spec_star = spec.with_family(replicate(fam_star, m))
    report = pg.check_invariance(spec, spec_star, hyp, f, f_inv, grid)
    doc = report.to_dict()
    return resolved, Result(_json_text(doc), None, {k: v for k, v in doc.items() if k != "mismatches"})


COMMANDS = {
    "dissim": cmd_dissim,
    "region": cmd_region,
    "test": cmd_test,
    "reproduce-hw": cmd_reproduce_hw,
    "convergence": cmd_convergence,
    "invariance": cmd_invariance,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_family_args(p):
    g = p.add_argument_group("family")
    g.add_argument("--family", help="family kind (gauss1d, gauss, gauss-unknown-var, trinomial, bivariate)")
    g.add_argument("--sigma0", type=float, help="known standard deviation (gauss1d)")
    g.add_argument("--sigma", type=float, help="per-coordinate standard deviation (bivariate)")
    g.add_argument("--cov", help="known covariance matrix as JSON (gauss)")
    g.add_argument("--M2", type=float, help="variance upper bound (gauss-unknown-var)")
    g.add_argument("--trials", type=int, help="number of trials m (trinomial)")
    g.add_argument("--replicate", type=int, help="i.i.d. replications of the future experiment")


def _add_dissim_args(p):
    g = p.add_argument_group("dissimilarity")
    g.add_argument("--kind", choices=dis.KINDS)
    g.add_argument("--S", help="BP loss matrix: identity, inverse-cov, or a JSON matrix")
    g.add_argument("--g", choices=sorted(dis.TRANSFORMS))
    g.add_argument("--backend", choices=dis.BACKENDS)
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--mc-n", dest="mc_n", type=int)
    g.add_argument("--seed", type=int)


def _add_io_args(p, mirror=True):
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--out", help="primary output file (default: stdout)")
    if mirror:
        p.add_argument("--json", help="JSON mirror of the primary output")
    p.add_argument("--sidecar", help="provenance sidecar path (default: OUT" + prov.SIDECAR_SUFFIX + ")")
    p.add_argument("--check", metavar="SIDECAR", help="recompute a recorded run and compare output hashes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pragma", description="Pragmatic hypotheses and agnostic tests.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dissim", help="evaluate a dissimilarity for one pair or over a grid")
    _add_family_args(p)
    _add_dissim_args(p)
    p.add_argument("--theta0")
    p.add_argument("--thetastar")
    p.add_argument("--grid", help="grid geometry JSON for a sweep over theta*")
    _add_io_args(p)

    for name, helptext in (
        ("region", "build a pragmatic region on a grid"),
        ("test", "run the agnostic test of a pragmatic hypothesis"),
        ("convergence", "member counts of the pragmatic region over replication counts"),
        ("invariance", "compare a region with its affine reparametrization"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_family_args(p)
        _add_dissim_args(p)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--grid", help="evaluation grid geometry JSON")
        p.add_argument("--hypothesis", help="hypothesis: grid geometry JSON or {\"theta0\": [...]}")
        p.add_argument("--theta0", help="point hypothesis (shorthand)")
        if name == "test":
            p.add_argument("--data", help="observations as JSON (a count vector or a list of reals)")
            p.add_argument("--prior", help="prior JSON, e.g. {\"kind\": \"dirichlet\", \"alpha\": [1, 1, 1]}")
            p.add_argument("--hpd-level", dest="hpd_level", type=float)
        if name == "convergence":
            p.add_argument("--m-list", dest="m_list", help="comma-separated replication counts")
        if name == "invariance":
            p.add_argument("--scale", type=float)
            p.add_argument("--shift", type=float)
        _add_io_args(p, mirror=name in ("region", "convergence"))

    p = sub.add_parser("reproduce-hw", help="Hardy-Weinberg study over the ten genotype groups")
    _add_dissim_args(p)
    p.add_argument("--epsilon", type=float, help="epsilon for the single --kind")
    p.add_argument("--alpha", help="Dirichlet prior concentrations, comma-separated")
    p.add_argument("--hpd-level", dest="hpd_level", type=float)
    p.add_argument("--m", dest="replication_m", type=int, help="replications in the pragmatic region")
    p.add_argument("--resolution", dest="simplex_resolution", type=int)
    p.add_argument("--knots", dest="curve_knots", type=int)
    p.add_argument("--strict", action="store_true", help="exit 4 unless the acceptance bar is met")
    _add_io_args(p)
    return parser


def resolve_config(args) -> dict:
    cfg = _load_config(args.config)
    if args.command == "reproduce-hw":
        if args.kind is not None:
            _apply_dissim_flags(cfg, args)
            cfg.pop("dissimilarities", None)
            if args.epsilon is not None:
                cfg["epsilon"] = args.epsilon
        elif args.epsilon is not None:
            raise ConfigError("--epsilon needs --kind")
        if args.alpha is not None:
            cfg["prior"] = {"kind": "dirichlet", "alpha": _parse_vector(args.alpha)}
        for key in ("hpd_level", "replication_m", "simplex_resolution", "curve_knots"):
            if getattr(args, key) is not None:
                cfg[key] = getattr(args, key)
        return cfg
    _apply_common_flags(cfg, args)
    if getattr(args, "thetastar", None) is not None:
        cfg["thetastar"] = _parse_vector(args.thetastar)
    if getattr(args, "data", None) is not None:
        cfg["data"] = _parse_json(args.data, "--data")
    if getattr(args, "prior", None) is not None:
        cfg["prior"] = _parse_json(args.prior, "--prior")
    if getattr(args, "hpd_level", None) is not None:
        cfg["hpd_level"] = args.hpd_level
    if getattr(args, "m_list", None) is not None:
        cfg["m_list"] = [int(v) for v in args.m_list.split(",")]
    for key in ("scale", "shift"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    return cfg


# ---------------------------------------------------------------------------
# running


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _write(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def run(args) -> int:
    if args.check:
        return run_check(args.command, args.check)
    resolved, result = COMMANDS[args.command](resolve_config(args))
    outputs = {}
    if args.out:
        _write(args.out, result.primary)
        outputs["primary"] = (os.path.basename(args.out), _sha(result.primary))
    else:
        sys.stdout.write(result.primary)
        outputs["primary"] = (STDOUT, _sha(result.primary))
    if getattr(args, "json", None) and result.mirror is not None:
        _write(args.json, result.mirror)
        outputs["json"] = (os.path.basename(args.json), _sha(result.mirror))
    sidecar = args.sidecar or (prov.sidecar_path(args.out) if args.out else None)
    if sidecar:
        doc = {
            "schema": prov.SCHEMA,
            "command": args.command,
            "config": resolved,
            "outputs": {name: digest for name, digest in outputs.values()},
            "files": {role: name for role, (name, _) in outputs.items()},
            "summary": result.summary,
            "versions": prov.versions(),
        }
        prov.write_sidecar(sidecar, doc)
    if args.command == "reproduce-hw":
        for mm in result.summary.get("mismatches", []):
            print(f"mismatch group {mm['group']}: published {mm['published']}, got {mm['decisions']}, "
                  f"HPD {mm['hpd_points']} points, inside {mm['inside']}, outside {mm['outside']}", file=sys.stderr)
        if args.strict and not result.summary["ok"]:
            print(f"reproduction below acceptance bar: {result.summary['matches']}", file=sys.stderr)
            return EXIT_MISMATCH
    return result.exit_code


def run_check(command: str, sidecar: str) -> int:
    try:
        doc = prov.read_sidecar(sidecar)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"--check: {exc}") from None
    if doc["command"] != command:
        raise ConfigError(f"--check: sidecar records command {doc['command']!r}, not {command!r}")
    _, result = COMMANDS[command](doc["config"])
    files = doc.get("files", {})
    recomputed = {}
    if "primary" in files:
        recomputed[files["primary"]] = _sha(result.primary)
    if "json" in files and result.mirror is not None:
        recomputed[files["json"]] = _sha(result.mirror)
    bad = prov.compare_outputs(doc["outputs"], recomputed)
    if bad:
        print(f"check failed: outputs differ: {', '.join(bad)}", file=sys.stderr)
        return EXIT_MISMATCH
    # recorded files still on disk must also be unmodified
    base = os.path.dirname(os.path.abspath(sidecar))
    stale = []
    for name in recomputed:
        path = os.path.join(base, name)
        if name != STDOUT and os.path.isfile(path):
            with open(path, "rb") as fh:
                if hashlib.sha256(fh.read()).hexdigest() != doc["outputs"][name]:
                    stale.append(name)
    if stale:
        print(f"check failed: files on disk differ from the record: {', '.join(stale)}", file=sys.stderr)
        return EXIT_MISMATCH
    print(f"check ok: {len(recomputed)} output(s) reproduced")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, DomainError, GridMismatchError, UnsupportedKindError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, DegeneratePosteriorError) as exc:
        extra = ""
        if getattr(exc, "point", None) is not None:
            extra = f" at theta0={np.asarray(exc.point).tolist()}"
        if getattr(exc, "achieved_tol", None) is not None:
            extra += f" (achieved tolerance {exc.achieved_tol:.3g})"
        print(f"numeric error: {exc}{extra}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
