"""Command-line front end.

Usage::

    mrct design   --config cfg.json [--out DIR] [--format json|csv|both]
    mrct cp       --config cfg.json
    mrct bound    --config cfg.json
    mrct profile  --config cfg.json
    mrct analyze  --config cfg.json
    mrct simulate --config cfg.json [--seed N] [--m-design N] [--m-verify N]

``--dry-run`` validates the configuration and prints diagnostics without
computing anything.  Exit status is 0 on success, 1 for domain errors
(infeasible designs, unavailable bounds, failed estimation) and 2 for I/O or
configuration errors.
"""

import argparse
import math
from pathlib import Path
import sys

from . import config as cfgmod
from . import reports
from .design import (
    check_feasibility,
    consistency_probability,
    cp_equal_allocation,
    cp_lower_bound,
    cp_profile,
    lower_bound_design,
    regional_sizes,
    solve_overall_n0,
)
from .errors import MRCTError, NotAvailableError

__all__ = ["main", "build_parser", "run"]

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2
COMMANDS = ("design", "cp", "bound", "profile", "analyze", "simulate")


def build_parser():
    p = argparse.ArgumentParser(
        prog="mrct",
        description="Sample size, consistency probability and analysis for "
                    "multi-regional trials under a random effects model.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="JSON configuration file")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, help="master seed (simulate)")
    p.add_argument("--format", choices=("json", "csv", "both"), default="json")
    p.add_argument("--m-design", type=int, dest="m_design")
    p.add_argument("--m-verify", type=int, dest="m_verify")
    p.add_argument("--n-jobs", type=int, dest="n_jobs")
    p.add_argument("--dry-run", action="store_true",
                   help="validate the configuration and exit")
    return p


def _write(args, stem, doc, header=None, rows=None):
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.format in ("json", "both"):
        path = args.out / f"{stem}.json"
        reports.write_json(path, doc)
        written.append(path)
    if args.format in ("csv", "both") and header is not None:
        path = args.out / f"{stem}.csv"
        reports.write_csv(path, header, rows)
        written.append(path)
    return written


_REGION_HEADER = ("region_id", "fraction", "omega", "n0", "n1", "cp", "meets_assurance")


def _region_csv(doc):
    return _REGION_HEADER, [[r[k] for k in _REGION_HEADER] for r in doc["regions"]]


def _design(args, doc):
    config = cfgmod.design_config(doc)
    prior = cfgmod.prior_params(doc, config)
    regions = cfgmod.region_inputs(doc, config)
    rounding = doc.get("design", {}).get("rounding", "ceil")
    result = solve_overall_n0(prior, config, regions, rounding=rounding)
    out = reports.design_report(doc, config, prior, regions, result)
    return _write(args, "design", out, *_region_csv(out))


def _cp(args, doc):
    config = cfgmod.design_config(doc)
    prior = cfgmod.prior_params(doc, config)
    regions = cfgmod.region_inputs(doc, config)
    rounding = doc.get("design", {}).get("rounding", "ceil")
    if "n0" in doc:
        n0 = doc["n0"]
        check_feasibility(prior, config, config.n_regions)
    else:
        n0 = solve_overall_n0(prior, config, regions, with_cp=False).n0
    wanted = [doc["region"]] if "region" in doc else range(config.n_regions)
    cps = [
        consistency_probability(prior, config, regions, n0, r) if r in wanted else None
        for r in range(config.n_regions)
    ]
    reg0 = regional_sizes(n0, config.fractions, rounding)
    reg1 = tuple(math.ceil(config.ell * x - 1e-9) for x in reg0)
    out = reports.cp_report(doc, config, prior, regions, n0, reg0, reg1, cps)
    return _write(args, "cp", out, *_region_csv(out))


def _bound(args, doc):
    config = cfgmod.design_config(doc)
    prior = cfgmod.prior_params(doc, config)
    value, tag = cp_lower_bound(prior, config)
    feas = check_feasibility(prior, config, 2)
    section = doc.get("bound", {})
    designs = []
    for f_r in section.get("f_r", ()):
        try:
            designs.append({"f_r": f_r, "n0": lower_bound_design(
                prior, config, section.get("omega", 1.0), f_r)})
        except NotAvailableError as exc:
            designs.append({"f_r": f_r, "n0": None, "message": str(exc)})
    equal = []
    for n in section.get("n_regions", ()):
        try:
            equal.append({"n_regions": n, "cp": cp_equal_allocation(prior, config, n),
                          "available": True})
        except NotAvailableError as exc:
            equal.append({"n_regions": n, "cp": None, "available": False,
                          "message": str(exc)})
    out = reports.bound_report(
        doc, config, prior, value, tag, feas.attainability_threshold, designs, equal
    )
    header = ("kind", "key", "value", "note")
    rows = [("lower_bound", tag, value, "")]
    rows += [("design", d["f_r"], d["n0"], d.get("message", "")) for d in designs]
    rows += [("equal_allocation", e["n_regions"], e["cp"], e.get("message", ""))
             for e in equal]
    return _write(args, "bound", out, header, rows)


def _profile(args, doc):
    config = cfgmod.design_config(doc)
    prior = cfgmod.prior_params(doc, config)
    regions = cfgmod.region_inputs(doc, config)
    section = cfgmod._require(doc, "profile", "profile")
    r = section.get("region", doc.get("region", 0))
    points = cp_profile(prior, config, regions, r, section["grid"])
    out = reports.profile_report(doc, config, prior, r, points)
    header = ("f_r", "n0", "n0_region", "cp", "rho_inv")
    rows = [[p[k] for k in header] for p in out["points"]]
    return _write(args, "profile", out, header, rows)


def _analyze(args, doc):
    from .analysis import analyze_trial

    result = analyze_trial(cfgmod.analysis_input(doc))
    out = reports.analysis_report(doc, result)
    header = ("region_id", "d_tilde_r", "sd", "estimate", "lower", "upper",
              "consistent_superiority", "consistent_ni")
    rows = [[r[k] for k in header] for r in out["regions"]]
    pooled = out["pooled"]
    rows.append(["overall", pooled["d_tilde"], pooled["variance"] ** 0.5,
                 pooled["estimate"], pooled["lower"], pooled["upper"], "", ""])
    return _write(args, "analysis", out, header, rows)


def _simulate(args, doc):
    from .simulation import simulate_study

    sim_cfg, n_jobs = cfgmod.simulation_config(
        doc, seed=args.seed, m_design=args.m_design, m_verify=args.m_verify
    )
    report = simulate_study(sim_cfg, n_jobs=args.n_jobs or n_jobs)
    summary = reports.simulation_summary(doc, report)
    written = []
    args.out.mkdir(parents=True, exist_ok=True)
    if args.format in ("json", "both"):
        path = args.out / "simulate_summary.json"
        reports.write_json(path, summary)
        written.append(path)
    if args.format in ("csv", "both"):
        path = args.out / "simulate_replications.csv"
        reports.write_csv(path, reports.REPLICATION_COLUMNS, reports.replication_rows(report))
        written.append(path)
    return written


_HANDLERS = {
    "design": _design,
    "cp": _cp,
    "bound": _bound,
    "profile": _profile,
    "analyze": _analyze,
    "simulate": _simulate,
}


def run(args):
    """Execute parsed arguments; returns the exit status."""
    try:
        if args.dry_run:
            diagnostics = cfgmod.validate_config(args.config)
            for line in diagnostics:
                print(line)
            return EXIT_OK if diagnostics[0] == "ok" else EXIT_IO
        doc = cfgmod.load_config(args.config)
        written = _HANDLERS[args.command](args, doc)
    except cfgmod.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MRCTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    for path in written:
        print(path)
    return EXIT_OK


def main(argv=None):
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
