"""Report documents, their JSON schemas, and deterministic file writers.

Every JSON report carries ``schema_version`` and ``command``.  Reports contain
no timestamps or host details, so identical inputs give byte-identical files.
Non-finite floats are written as ``null`` in JSON and as empty cells in CSV.
"""

import csv
import json
import math

from .config import SCHEMA_VERSION

__all__ = [
    "REPORT_SCHEMAS",
    "design_report",
    "cp_report",
    "bound_report",
    "profile_report",
    "analysis_report",
    "simulation_summary",
    "REPLICATION_COLUMNS",
    "replication_rows",
    "write_json",
    "write_csv",
]

_NUM_OR_NULL = {"type": ["number", "null"]}
_HEADER = {
    "schema_version": {"const": SCHEMA_VERSION},
    "command": {"type": "string"},
    "units": {"type": "object"},
}


def _schema(command, required, properties):
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "required": ["schema_version", "command", *required],
        "properties": {**_HEADER, "command": {"const": command}, **properties},
    }


_REGION_ROW = {
    "type": "object",
    "required": ["region_id", "fraction", "omega", "n0", "n1", "cp"],
    "properties": {
        "region_id": {"type": "string"},
        "fraction": {"type": "number"},
        "omega": {"type": "number"},
        "n0": {"type": "integer"},
        "n1": {"type": "integer"},
        "cp": _NUM_OR_NULL,
        "meets_assurance": {"type": ["boolean", "null"]},
    },
}

_INPUTS = {
    "type": "object",
    "required": ["alpha", "beta", "pi", "ell", "margin", "fractions", "delta", "tau"],
}

REPORT_SCHEMAS = {
    "design": _schema("design", ["inputs", "n0", "n1", "n0_continuous", "regions"], {
        "inputs": _INPUTS,
        "n0": {"type": "integer", "minimum": 1},
        "n1": {"type": "integer", "minimum": 1},
        "n0_continuous": {"type": "number"},
        "regions": {"type": "array", "items": _REGION_ROW},
    }),
    "cp": _schema("cp", ["inputs", "n0", "regions"], {
        "inputs": _INPUTS,
        "n0": {"type": "integer", "minimum": 1},
        "regions": {"type": "array", "items": _REGION_ROW},
    }),
    "bound": _schema("bound", ["inputs", "lower_bound", "attainment"], {
        "inputs": _INPUTS,
        "lower_bound": {"type": "number", "minimum": 0, "maximum": 1},
        "attainment": {"enum": ["attained", "unattained"]},
        "attainability_threshold": {"type": "number"},
        "designs": {"type": "array", "items": {
            "type": "object", "required": ["f_r", "n0"],
            "properties": {"f_r": {"type": "number"}, "n0": {"type": ["integer", "null"]},
                           "message": {"type": "string"}},
        }},
        "equal_allocation": {"type": "array", "items": {
            "type": "object", "required": ["n_regions", "cp", "available"],
            "properties": {"n_regions": {"type": "integer"}, "cp": _NUM_OR_NULL,
                           "available": {"type": "boolean"}, "message": {"type": "string"}},
        }},
    }),
    "profile": _schema("profile", ["inputs", "region", "points"], {
        "inputs": _INPUTS,
        "region": {"type": "integer"},
        "points": {"type": "array", "items": {
            "type": "object", "required": ["f_r", "n0", "n0_region", "cp", "rho_inv"],
        }},
    }),
    "analyze": _schema("analyze", ["tau2_hat", "pooled", "regions"], {
        "tau2_hat": {"type": "number", "minimum": 0},
        "scale": {"enum": ["identity", "log_hr"]},
        "pooled": {"type": "object", "required": ["d_tilde", "variance", "estimate", "lower", "upper"]},
        "regions": {"type": "array", "items": {
            "type": "object",
            "required": ["region_id", "d_tilde_r", "sd", "estimate", "lower", "upper",
                         "consistent_superiority", "consistent_ni"],
        }},
    }),
    "simulate": _schema("simulate", [
        "benchmark_n0", "benchmark_cp", "median_n0_design", "mad_n0_design",
        "mean_cp_design", "mean_dev_power", "mean_dev_cp", "m_design", "m_verify",
        "n_design_flagged", "n_verify_flagged", "master_seed",
    ], {
        "benchmark_n0": {"type": "integer"},
        "benchmark_cp": {"type": "number"},
        "median_n0_design": _NUM_OR_NULL,
        "mad_n0_design": _NUM_OR_NULL,
        "mean_cp_design": _NUM_OR_NULL,
        "mean_dev_power": {"type": ["number", "null"], "minimum": 0},
        "mean_dev_cp": {"type": ["number", "null"], "minimum": 0},
        "m_design": {"type": "integer", "minimum": 1},
        "m_verify": {"type": "integer", "minimum": 1},
        "n_design_flagged": {"type": "integer", "minimum": 0},
        "n_design_infeasible": {"type": "integer", "minimum": 0},
        "n_verify_flagged": {"type": "integer", "minimum": 0},
        "master_seed": {"type": "integer"},
    }),
}


def _header(command, doc):
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "units": dict(doc.get("units", {})),
    }


def _inputs(config, prior):
    return {
        "alpha": config.alpha,
        "beta": config.beta,
        "pi": config.pi,
        "ell": config.ell,
        "margin": config.margin,
        "fractions": list(config.fractions),
        "delta": prior.delta,
        "tau": prior.tau,
    }


def _region_rows(config, regions, n0_regions, n1_regions, cps):
    rows = []
    for i, reg in enumerate(regions):
        cp = cps[i] if cps else None
        rows.append({
            "region_id": reg.region_id,
            "fraction": config.fractions[i],
            "omega": reg.omega,
            "n0": n0_regions[i],
            "n1": n1_regions[i],
            "cp": cp,
            "meets_assurance": None if cp is None else bool(cp >= config.assurance),
        })
    return rows


def design_report(doc, config, prior, regions, result):
    out = _header("design", doc)
    out.update({
        "inputs": _inputs(config, prior),
        "n0": result.n0,
        "n1": result.n1,
        "n0_continuous": result.n0_continuous,
        "regions": _region_rows(config, regions, result.regional_n0,
                                result.regional_n1, result.cp_per_region),
    })
    return out


def cp_report(doc, config, prior, regions, n0, n0_regions, n1_regions, cps):
    out = _header("cp", doc)
    out.update({
        "inputs": _inputs(config, prior),
        "n0": int(n0),
        "regions": _region_rows(config, regions, n0_regions, n1_regions, cps),
    })
    return out


def bound_report(doc, config, prior, value, tag, threshold, designs, equal):
    out = _header("bound", doc)
    out.update({
        "inputs": _inputs(config, prior),
        "lower_bound": value,
        "attainment": tag,
        "attainability_threshold": threshold,
        "designs": designs,
        "equal_allocation": equal,
    })
    return out


def profile_report(doc, config, prior, region, points):
    out = _header("profile", doc)
    out.update({
        "inputs": _inputs(config, prior),
        "region": region,
        "points": [
            {"f_r": p.f_r, "n0": p.n0, "n0_region": p.n0_region, "cp": p.cp,
             "rho_inv": p.rho_inv}
            for p in points
        ],
    })
    return out


def analysis_report(doc, report):
    out = _header("analyze", doc)
    out.update(report.to_dict())
    return out


def simulation_summary(doc, report):
    out = _header("simulate", doc)
    out.update(report.summary())
    return out


REPLICATION_COLUMNS = (
    "index", "n0_design", "cp_design", "delta_design", "tau_design",
    "empirical_power", "empirical_cp", "dev_power", "dev_cp",
    "n_significant", "n_consistent", "n_verify_valid", "n_verify_flagged",
    "n_clamped", "flag",
)


def replication_rows(report):
    return [[getattr(rec, c) for c in REPLICATION_COLUMNS] for rec in report.records]


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def _cell(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ""
    return "" if x is None else str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["schema_version", *header])
        for row in rows:
            w.writerow([SCHEMA_VERSION, *(_cell(x) for x in row)])
