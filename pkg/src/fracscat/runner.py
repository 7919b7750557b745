"""Batch experiment driver.

A YAML config names a list of experiments; the driver validates it
against a JSON schema (unknown keys rejected, defaults filled in), runs
every experiment, and writes four artifacts into the output directory:

* results.csv      long format, one row per (cell, metric) record with
                   the columns experiment, kind, cell, metric, value,
                   verdict, config_hash, code_version; UTF-8, LF line
                   endings, floats via repr so reruns are byte-identical;
* summary.json     per-experiment status, scalar metrics, and verdicts,
                   every verdict citing the thresholds it used;
* plot.gp          a gnuplot script that reads only results.csv;
* config.resolved  the validated config with all defaults materialized.

Exit codes: 0 all experiments ran, 2 config invalid, 3 a numerical
guard tripped, 4 an iterative solver failed, 5 unexpected errors and
I/O failures while writing artifacts.  The worst code across
experiments wins.  FRACSCAT_THREADS (or --threads) sizes a thread
pool over experiments; artifact assembly is single-threaded in config
order regardless.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
import yaml

from . import __version__
from .dynamics import (
    band_packet,
    born_term,
    cook_profile,
    drift_probe_packet,
    gaussian_packet,
    nonexistence_drift,
    scattering_band,
    wave_operator_estimate,
)
from .eigen import (
    characterization_pair,
    decay_profile,
    eigen_solve,
    lambda_scan,
)
from .errors import GuardError, SolverConvergenceError
from .grid import GridSpec, as_fourier_field, as_physical_field, l2_norm
from .potentials import (
    EpsRule,
    PotentialSpec,
    TailThresholds,
    evaluate_potential,
    series_proxy_verdict,
    shortrange_series,
)
from .resolvent import (
    completeness_check,
    lap_sweep,
    spacing_scaled_ladder,
    stone_jump_residual,
    weighted_lap_check,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_SOLVER = 4
EXIT_INTERNAL = 5

# ---------------------------------------------------------------------------
# schema

_GRID = {
    "type": "object",
    "additionalProperties": False,
    "required": ["L", "N"],
    "properties": {
        "dim": {"type": "integer", "enum": [1, 2, 3], "default": 1},
        "L": {"type": "number", "exclusiveMinimum": 0},
        "N": {"type": "integer", "minimum": 2},
    },
}

_EPS_RULE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "value"],
    "properties": {
        "kind": {"enum": ["constant", "power"]},
        "value": {"type": "number"},
    },
}

_POTENTIAL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["variant"],
    "properties": {
        "variant": {"enum": ["power_tail", "annulus_tail", "gaussian_well", "compact_bump"]},
        "kappa": {"type": "number", "default": 1.0},
        "gamma": {"type": "number", "default": 2.0},
        "depth": {"type": "number", "default": 1.0},
        "width": {"type": "number", "default": 1.0},
        "radius": {"type": "number", "default": 1.0},
        "height": {"type": "number", "default": 1.0},
        "eps_rule": _EPS_RULE,
    },
}

_GAUSS_PACKET = {
    "type": "object",
    "additionalProperties": False,
    "required": ["xi_center", "sigma_x"],
    "properties": {
        "xi_center": {"type": "number", "exclusiveMinimum": 0},
        "sigma_x": {"type": "number", "exclusiveMinimum": 0},
        "x_center": {"type": "number", "default": 0.0},
    },
}

# a wave packet is either a Gaussian (xi_center, sigma_x) or a flat-top
# band (band: [xi_lo, xi_hi]); waveop defaults to the per-s band table
_ANY_PACKET = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "xi_center": {"type": "number", "exclusiveMinimum": 0},
        "sigma_x": {"type": "number", "exclusiveMinimum": 0},
        "x_center": {"type": "number", "default": 0.0},
        "band": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 2,
            "maxItems": 2,
        },
    },
}


def _params_schema(props: dict, required: list) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "required": required,
        "properties": props,
    }


_KIND_SCHEMAS = {
    "shortrange": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "grid": dict(_GRID, default={"L": 256.0, "N": 4096}),
            "potential": _POTENTIAL,
            "decay_threshold": {"type": "number", "default": -0.1},
            "flat_threshold": {"type": "number", "default": -0.05},
        },
        ["s", "potential"],
    ),
    "cook": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "grid": dict(_GRID, default={"L": 4096.0, "N": 16384}),
            "packet": dict(_GAUSS_PACKET, default={"xi_center": 1.5, "sigma_x": 16.0}),
            "potential": _POTENTIAL,
            "t_min": {"type": "number", "default": 32.0},
            "t_max": {"type": "number", "default": 512.0},
            "n_points": {"type": "integer", "default": 25},
        },
        ["s", "potential"],
    ),
    "waveop": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "grid": dict(_GRID, default={"L": 512.0, "N": 8192}),
            "packet": dict(_ANY_PACKET, default={}),
            "potential": _POTENTIAL,
            "T_ladder": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 2,
                "default": [2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            },
            "dt": {"type": "number", "default": 0.0125},
            "tol": {"type": "number", "default": 1e-3},
            "born_check": {"type": "boolean", "default": False},
            "born_quad": {"type": "integer", "default": 4097},
        },
        ["s", "potential"],
    ),
    "nonexistence": _params_schema(
        {
            "s": {"type": "number", "default": 1.2},
            "grid": dict(_GRID, default={"L": 32768.0, "N": 16384}),
            "eps_rule": _EPS_RULE,
            "kappa": {"type": "number", "default": 1.0},
            "j_start": {"type": "integer", "default": 12},
            "j_stop": {"type": "integer", "default": 16},
            "n_quad": {"type": "integer", "default": 25},
            "spread_max": {"type": "number", "default": 4.0},
            "cumulative_factor": {"type": "number", "default": 0.5},
        },
        ["eps_rule"],
    ),
    "lap": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "lam": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
            "grid": dict(_GRID, default={"L": 131072.0, "N": 1048576}),
            "n_per_decade": {"type": "integer", "default": 4},
            "growth_min": {"type": "number", "default": 9.5},
            "spread_max": {"type": "number", "default": 2.0},
        },
        ["s"],
    ),
    "weighted_lap": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "lam": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
            "grid": dict(_GRID, default={"L": 256.0, "N": 4096}),
            "probe_sigma": {"type": "number", "exclusiveMinimum": 0, "default": 2.0},
            "eps_ladder": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 2,
                "default": [0.1, 0.01, 0.001],
            },
            "deltas": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 2,
                "default": [1.0, 0.6, 0.36],
            },
            "weight_exponent": {"type": ["number", "null"], "default": None},
            "spread_max": {"type": "number", "default": 2.0},
        },
        ["s"],
    ),
    "stone": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "lam": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
            "grid": dict(_GRID, default={"L": 256.0, "N": 4096}),
            "f_sigma": {"type": "number", "default": 1.0},
            "eps_max": {"type": "number", "default": 0.1},
            "eps_min": {"type": "number", "default": 0.003},
            "n_eps": {"type": "integer", "default": 9},
        },
        ["s"],
    ),
    "eigen": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "grid": dict(_GRID, default={"L": 256.0, "N": 4096}),
            "potential": _POTENTIAL,
            "k": {"type": "integer", "minimum": 1, "default": 3},
            "dense_check": {"type": "boolean", "default": True},
            "scan_check": {"type": "boolean", "default": True},
            "scan_points": {"type": "integer", "default": 48},
        },
        ["s", "potential"],
    ),
    "decay": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "grid": dict(_GRID, default={"L": 256.0, "N": 4096}),
            "potential": _POTENTIAL,
            "which": {"type": "integer", "minimum": 0, "default": 0},
            "eps_list": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 1,
                "default": [0.1, 0.5],
            },
            "saturation_limit": {"type": "number", "default": 1.05},
        },
        ["s", "potential"],
    ),
    "completeness": _params_schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0},
            "grid": dict(_GRID, default={"L": 256.0, "N": 4096}),
            "potential": dict(_POTENTIAL, type=["object", "null"], default=None),
            "packet": dict(_GAUSS_PACKET, default={"xi_center": 1.0, "sigma_x": 8.0}),
            "xi_window": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 2,
                "maxItems": 2,
            },
            "eps_rule": {"enum": ["fixed", "spacing"], "default": "spacing"},
            "eps_pair": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 2,
                "maxItems": 4,
                "default": [5.0, 2.5, 1.25],
            },
            "eps_floor": {"type": "number", "exclusiveMinimum": 0, "default": 0.00625},
            "n_nodes": {"type": "integer", "default": 40},
            "k_bound": {"type": "integer", "default": 3},
            "defect_tol": {"type": "number", "default": 1e-2},
        },
        ["s", "xi_window"],
    ),
}

_TOP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "experiments"],
    "properties": {
        "schema_version": {"const": 1},
        "seed": {"type": "integer", "default": 1234},
        "output_dir": {"type": "string", "default": "fracscat_out"},
        "threads": {"type": "integer", "minimum": 1, "default": 1},
        "experiments": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "kind"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "kind": {"enum": sorted(_KIND_SCHEMAS)},
                    "params": {"type": "object", "default": {}},
                },
            },
        },
    },
}


def _extend_with_defaults(validator_class):
    validate_properties = validator_class.VALIDATORS["properties"]

    def set_defaults(validator, properties, instance, schema):
        if isinstance(instance, dict):
            for prop, subschema in properties.items():
                if isinstance(subschema, dict) and "default" in subschema:
                    instance.setdefault(prop, copy.deepcopy(subschema["default"]))
        yield from validate_properties(validator, properties, instance, schema)

    return jsonschema.validators.extend(validator_class, {"properties": set_defaults})


_Validator = _extend_with_defaults(jsonschema.Draft202012Validator)


class ConfigError(ValueError):
    pass


def resolve_config(raw: dict) -> dict:
    """Validate, fill defaults, and return the resolved config."""
    cfg = copy.deepcopy(raw)
    try:
        _Validator(_TOP_SCHEMA).validate(cfg)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config: {exc.message} (at {'/'.join(map(str, exc.absolute_path))})")
    names = [e["name"] for e in cfg["experiments"]]
    if len(set(names)) != len(names):
        raise ConfigError("experiment names must be unique")
    for exp in cfg["experiments"]:
        schema = _KIND_SCHEMAS[exp["kind"]]
        try:
            _Validator(schema).validate(exp["params"])
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"experiment {exp['name']!r}: {exc.message}")
    return cfg


def config_hash(cfg: dict) -> str:
    """Hash of the physics-relevant part of a resolved config."""
    core = {k: cfg[k] for k in ("schema_version", "seed", "experiments")}
    blob = json.dumps(core, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# experiment bodies
#
# Each body returns (records, verdicts, curves):
#   records  list of (cell, metric, value) tuples; cell "" for scalars,
#            a numeric string for sweep rows (that is the plot abscissa);
#   verdicts dict name -> {"verdict": str, "thresholds": {...}};
#   curves   metric names whose rows form plottable sweeps.


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _grid(p: dict) -> GridSpec:
    return GridSpec(dim=p["dim"], L=float(p["L"]), N=int(p["N"]))


def _potential_spec(p: dict) -> PotentialSpec:
    kwargs = {k: p[k] for k in ("kappa", "gamma", "depth", "width", "radius", "height")}
    rule = p.get("eps_rule")
    if rule is not None:
        kwargs["eps_rule"] = EpsRule(rule["kind"], rule["value"])
    return PotentialSpec(variant=p["variant"], **kwargs)


def _make_packet(p: dict, grid: GridSpec, s: float):
    if "band" in p:
        lo, hi = p["band"]
        return band_packet(grid, s, float(lo), float(hi), x_center=p.get("x_center", 0.0))
    if "xi_center" in p:
        if "sigma_x" not in p:
            raise ConfigError("gaussian packet needs sigma_x with xi_center")
        return gaussian_packet(grid, s, p["xi_center"], p["sigma_x"], p.get("x_center", 0.0))
    lo, hi = scattering_band(s)
    return band_packet(grid, s, lo, hi)


def _run_shortrange(p: dict, seed: int):
    grid = _grid(p["grid"])
    spec = _potential_spec(p["potential"])
    thr = TailThresholds(decay=p["decay_threshold"], flat=p["flat_threshold"])
    rep = shortrange_series(spec, grid, p["s"], thresholds=thr)
    rec = []
    for j, (M, term, S) in enumerate(zip(rep.M, rep.terms, rep.partial_sums), start=1):
        c = _cell(j)
        rec += [(c, "annulus_norm", M), (c, "series_term", term), (c, "partial_sum", S)]
    rec += [
        ("", "p", rep.p),
        ("", "tail_exponent", rep.tail_exponent),
        ("", "r_squared", rep.r_squared),
        ("", "fit_points", rep.fit_points),
        ("", "verdict", rep.verdict),
    ]
    verdicts = {
        "tail": {
            "verdict": rep.verdict,
            "thresholds": {"decay": thr.decay, "flat": thr.flat},
        }
    }
    if spec.variant == "annulus_tail":
        proxy = series_proxy_verdict(spec.eps_rule, len(rep.radii), thr)
        rec.append(("", "proxy_verdict", proxy))
        verdicts["series_proxy"] = {
            "verdict": proxy,
            "thresholds": {"decay": thr.decay, "flat": thr.flat},
        }
    return rec, verdicts, ["series_term", "partial_sum"]


def _run_cook(p: dict, seed: int):
    grid = _grid(p["grid"])
    pkt = gaussian_packet(
        grid, p["s"], p["packet"]["xi_center"], p["packet"]["sigma_x"], p["packet"]["x_center"]
    )
    V = evaluate_potential(_potential_spec(p["potential"]), grid)
    rep = cook_profile(pkt, V, p["t_min"], p["t_max"], p["n_points"])
    rec = [(_cell(t), "deviation_norm", v) for t, v in zip(rep.times, rep.values)]
    rec += [
        ("", "tail_exponent", rep.tail_exponent),
        ("", "integral", rep.integral),
        ("", "verdict", rep.verdict),
    ]
    verdicts = {
        "integrability": {
            "verdict": rep.verdict,
            "thresholds": {"integrable_below": -1.1, "nonintegrable_above": -0.95},
        }
    }
    return rec, verdicts, ["deviation_norm"]


def _run_waveop(p: dict, seed: int):
    grid = _grid(p["grid"])
    pkt = _make_packet(p["packet"], grid, p["s"])
    spec = _potential_spec(p["potential"])
    V = evaluate_potential(spec, grid)
    rep = wave_operator_estimate(pkt, V, p["T_ladder"], p["dt"], p["tol"])
    rec = [(_cell(T), "cauchy_drift", d) for T, d in zip(rep.T_ladder[1:], rep.drifts)]
    rec += [
        ("", "final_drift", rep.final_drift),
        ("", "isometry_residual", rep.isometry_residual),
        ("", "intertwining_residual", rep.intertwining_residual),
        ("", "verdict", rep.verdict),
    ]
    verdicts = {
        "convergence": {"verdict": rep.verdict, "thresholds": {"final_drift": p["tol"]}}
    }
    if p["born_check"]:
        T = float(p["T_ladder"][-1])
        half = evaluate_potential(
            PotentialSpec(
                variant=spec.variant, kappa=spec.kappa, gamma=spec.gamma,
                depth=spec.depth / 2.0, width=spec.width, radius=spec.radius,
                height=spec.height / 2.0, eps_rule=spec.eps_rule,
            ),
            grid,
        )
        rep_half = wave_operator_estimate(pkt, half, p["T_ladder"], p["dt"], p["tol"])
        r_full = _born_remainder(pkt, V, rep, T, p["born_quad"])
        r_half = _born_remainder(pkt, half, rep_half, T, p["born_quad"])
        ratio = r_full / r_half if r_half > 0 else float("inf")
        rec += [
            ("", "born_remainder", r_full),
            ("", "born_remainder_half", r_half),
            ("", "born_ratio", ratio),
        ]
        verdicts["born_scaling"] = {
            "verdict": "quadratic" if 3.6 <= ratio <= 4.4 else "off_quadratic",
            "thresholds": {"ratio_lo": 3.6, "ratio_hi": 4.4},
        }
    return rec, verdicts, ["cauchy_drift"]


def _born_remainder(pkt, V, rep, T: float, n_quad: int) -> float:
    first = born_term(pkt, V, T, n_quad)
    w = rep.omega_final
    resid = w.with_values(w.values - pkt.field.values - first.values)
    return l2_norm(resid)


def _run_nonexistence(p: dict, seed: int):
    grid = _grid(p["grid"])
    pkt = drift_probe_packet(grid, p["s"])
    rule = EpsRule(p["eps_rule"]["kind"], p["eps_rule"]["value"])
    spec = PotentialSpec(variant="annulus_tail", kappa=p["kappa"], eps_rule=rule)
    V = evaluate_potential(spec, grid)
    rep = nonexistence_drift(pkt, V, rule, p["j_start"], p["j_stop"], p["n_quad"])
    rec = []
    for j, D, proxy, cum in zip(rep.blocks, rep.D, rep.proxy, rep.cumulative):
        c = _cell(int(j))
        rec += [(c, "block_drift", D), (c, "block_proxy", proxy), (c, "cumulative", cum)]
    n_blocks = len(rep.blocks)
    min_D = float(rep.D.min())
    required = p["cumulative_factor"] * n_blocks * min_D
    cumulative = float(rep.cumulative[-1])
    growing = cumulative >= required and rep.ratio_spread < p["spread_max"]
    rec += [
        ("", "ratio_spread", rep.ratio_spread),
        ("", "min_block_drift", min_D),
        ("", "cumulative_final", cumulative),
        ("", "cumulative_required", required),
    ]
    verdicts = {
        "drift_growth": {
            "verdict": "divergent" if growing else "inconclusive",
            "thresholds": {
                "spread_max": p["spread_max"],
                "cumulative_factor": p["cumulative_factor"],
            },
        }
    }
    return rec, verdicts, ["block_drift", "cumulative"]


def _run_lap(p: dict, seed: int):
    grid = _grid(p["grid"])
    rep = lap_sweep(
        grid, p["s"], p["lam"],
        n_per_decade=p["n_per_decade"],
        growth_min=p["growth_min"],
        spread_max=p["spread_max"],
    )
    rec = []
    curves = []
    for k, name in enumerate(rep.names):
        plain, dual = f"plain.{name}", f"dual.{name}"
        curves += [plain, dual]
        for i, e in enumerate(rep.eps):
            c = _cell(e)
            rec += [(c, plain, rep.unweighted[k, i]), (c, dual, rep.weighted[k, i])]
    for k, name in enumerate(rep.names):
        rec += [
            ("", f"growth.{name}", rep.growth[k]),
            ("", f"spread.{name}", rep.spread[k]),
            ("", f"exponent.{name}", rep.exponent[k]),
        ]
    rec += [
        ("", "ladder_floor", rep.ladder_floor),
        ("", "usable_floor", rep.usable_floor),
        ("", "all_bounded", bool(rep.all_bounded)),
    ]
    verdicts = {
        "contrast": {
            "verdict": "bounded" if rep.all_bounded else "unbounded",
            "thresholds": {
                "growth_min": rep.growth_min,
                "spread_max": rep.spread_max,
            },
        }
    }
    return rec, verdicts, curves


def _run_weighted_lap(p: dict, seed: int):
    grid = _grid(p["grid"])
    sig = p["probe_sigma"]
    g = as_physical_field(grid, np.exp(-grid.x_norm**2 / (2.0 * sig**2)))
    rep = weighted_lap_check(
        grid, p["s"], p["lam"], g,
        eps_ladder=p["eps_ladder"],
        deltas=p["deltas"],
        weight_exponent=p["weight_exponent"],
        spread_max=p["spread_max"],
    )
    rec = []
    curves = []
    for i, e in enumerate(rep.eps):
        mp = f"ratio_plus.eps{i}"
        mm = f"ratio_minus.eps{i}"
        curves += [mp, mm]
        for m, d in enumerate(rep.deltas):
            c = _cell(d)
            rec += [(c, mp, rep.ratios[0, i, m]), (c, mm, rep.ratios[1, i, m])]
        rec.append((_cell(e), "stabilization", rep.stabilization[i]))
    curves.append("stabilization")
    rec += [
        ("", "weight_exponent", rep.exponent),
        ("", "spread_plus", rep.spread_plus),
        ("", "spread_minus", rep.spread_minus),
        ("", "skipped", bool(rep.skipped)),
    ]
    verdicts = {
        "weight_family": {
            "verdict": "skipped" if rep.skipped else ("admissible" if rep.bounded else "overrun"),
            "thresholds": {"spread_max": p["spread_max"]},
        }
    }
    return rec, verdicts, curves


def _run_stone(p: dict, seed: int):
    grid = _grid(p["grid"])
    sig = p["f_sigma"]
    vals = sig * np.sqrt(2.0 * np.pi) * np.exp(-(sig**2) * grid.xi_norm**2 / 2.0)
    f = as_fourier_field(grid, vals.astype(complex))
    eps = np.geomspace(p["eps_max"], p["eps_min"], p["n_eps"])
    rep = stone_jump_residual(grid, p["s"], p["lam"], f, eps_ladder=eps)
    rec = []
    for e, r, a in zip(rep.eps, rep.residuals, rep.algebraic_residuals):
        c = _cell(e)
        rec += [(c, "limit_residual", r), (c, "algebraic_residual", a)]
    alg_max = float(rep.algebraic_residuals.max())
    rec += [
        ("", "limit_re", rep.limit.real),
        ("", "limit_im", rep.limit.imag),
        ("", "order", rep.order),
        ("", "algebraic_max", alg_max),
    ]
    verdicts = {
        "jump_identity": {
            "verdict": "exact" if alg_max < 1e-12 else "inexact",
            "thresholds": {"algebraic_max": 1e-12},
        },
        "limit_order": {
            "verdict": "first_order" if 0.8 <= rep.order <= 1.2 else "off_order",
            "thresholds": {"order_lo": 0.8, "order_hi": 1.2},
        },
    }
    return rec, verdicts, ["limit_residual", "algebraic_residual"]


def _run_eigen(p: dict, seed: int):
    grid = _grid(p["grid"])
    V = evaluate_potential(_potential_spec(p["potential"]), grid)
    s = p["s"]
    res = eigen_solve(V, s, k=p["k"], method="sparse", seed=seed)
    rec = []
    n_bound = int(np.count_nonzero(res.values < -1e-6))
    char_max = 0.0
    for i, (lam, phi) in enumerate(zip(res.values, res.states)):
        c = _cell(i)
        rec += [(c, "eigenvalue", float(lam)), (c, "residual", float(res.residuals[i]))]
        if lam < -1e-6:
            plus, minus = characterization_pair(V, s, float(lam), phi)
            char_max = max(char_max, plus, minus)
            rec += [(c, "char_plus", plus), (c, "char_minus", minus)]
    rec += [
        ("", "n_bound", n_bound),
        ("", "max_residual", float(res.residuals.max()) if len(res.residuals) else 0.0),
        ("", "char_max", char_max),
        ("", "orthonormality_defect", res.orthonormality_defect),
        ("", "converged", bool(res.converged)),
    ]
    verdicts = {
        "eigenpairs": {
            "verdict": "certified"
            if (len(res.residuals) == 0 or res.residuals.max() < 1e-8) and char_max < 1e-6
            else "uncertified",
            "thresholds": {"residual_max": 1e-8, "char_max": 1e-6},
        }
    }
    if p["dense_check"] and grid.dim == 1 and grid.N <= 4096:
        dense = eigen_solve(V, s, k=p["k"], method="dense")
        gap = float(np.max(np.abs(dense.values - res.values)))
        rec.append(("", "dense_gap", gap))
        verdicts["dense_oracle"] = {
            "verdict": "agree" if gap < 1e-8 else "disagree",
            "thresholds": {"gap_max": 1e-8},
        }
    if p["scan_check"] and n_bound > 0:
        lam_lo = min(1.5 * float(res.values[0]), -2e-3)
        scan = lambda_scan(V, s, lam_lo, -1e-3, n_grid=p["scan_points"], seed=seed)
        rec.append(("", "scan_count", len(scan.candidates)))
        if len(scan.candidates):
            gaps = [
                float(np.min(np.abs(res.values[:n_bound] - c))) for c in scan.candidates
            ]
            gap = max(gaps)
            rec.append(("", "scan_gap", gap))
            verdicts["scan_crosscheck"] = {
                "verdict": "agree" if gap < 1e-4 else "disagree",
                "thresholds": {"gap_max": 1e-4},
            }
    return rec, verdicts, []


def _run_decay(p: dict, seed: int):
    grid = _grid(p["grid"])
    V = evaluate_potential(_potential_spec(p["potential"]), grid)
    which = p["which"]
    res = eigen_solve(V, p["s"], k=which + 1, method="sparse", seed=seed)
    if len(res.values) <= which or res.values[which] >= -1e-6:
        raise GuardError("no_bound_state", f"state {which} is not bound")
    rep = decay_profile(
        res.states[which], p["s"], V=V,
        eps_list=p["eps_list"], saturation_limit=p["saturation_limit"],
    )
    rec = [("", "eigenvalue", float(res.values[which]))]
    curves = []
    for k in range(len(rep.exponents)):
        tag = f"x{rep.exponents[k]:g}.j{rep.sprimes[k]:g}"
        curves.append(f"W.{tag}")
        for r, w in zip(rep.radii, rep.W[k]):
            rec.append((_cell(r), f"W.{tag}", w))
        rec.append(("", f"saturation.{tag}", float(rep.saturation_ratios[k])))
    rec += [
        ("", "all_saturated", bool(rep.all_saturated)),
        ("", "bstar_weighted", rep.bstar_weighted),
        ("", "finiteness_ratio", rep.finiteness_ratio),
    ]
    verdicts = {
        "saturation": {
            "verdict": "saturated" if rep.all_saturated else "truncated",
            "thresholds": {"ratio_max": p["saturation_limit"]},
        }
    }
    return rec, verdicts, curves


def _run_completeness(p: dict, seed: int):
    grid = _grid(p["grid"])
    pkt = gaussian_packet(
        grid, p["s"], p["packet"]["xi_center"], p["packet"]["sigma_x"], p["packet"]["x_center"]
    )
    bound = ()
    V = None
    if p["potential"] is not None:
        V = evaluate_potential(_potential_spec(p["potential"]), grid)
        res = eigen_solve(V, p["s"], k=p["k_bound"], method="sparse", seed=seed)
        n_bound = int(np.count_nonzero(res.values < -1e-6))
        bound = res.states[:n_bound]
    if p["eps_rule"] == "spacing":
        # entries of eps_pair are multipliers of the local level spacing
        eps = spacing_scaled_ladder(grid, p["s"], tuple(p["eps_pair"]), p["eps_floor"])
    else:
        eps = tuple(p["eps_pair"])
    rep = completeness_check(
        V,
        p["s"],
        pkt.field,
        (p["xi_window"][0], p["xi_window"][1]),
        eps_pair=eps,
        n_nodes=p["n_nodes"],
        bound_states=bound,
        grid=grid,
    )
    rec = [(_cell(lam), "density", d) for lam, d in zip(rep.lam_nodes, rep.node_densities)]
    rec += [
        ("", "total_mass", rep.total_mass),
        ("", "scattering_mass", rep.scattering_mass),
        ("", "bound_mass", rep.bound_mass),
        ("", "defect", rep.defect),
        ("", "excluded_nodes", len(rep.excluded)),
    ]
    verdicts = {
        "mass_identity": {
            "verdict": "complete" if rep.defect < p["defect_tol"] else "defective",
            "thresholds": {"defect_tol": p["defect_tol"]},
        }
    }
    return rec, verdicts, ["density"]


_RUNNERS = {
    "shortrange": _run_shortrange,
    "cook": _run_cook,
    "waveop": _run_waveop,
    "nonexistence": _run_nonexistence,
    "lap": _run_lap,
    "weighted_lap": _run_weighted_lap,
    "stone": _run_stone,
    "eigen": _run_eigen,
    "decay": _run_decay,
    "completeness": _run_completeness,
}

_LOGSCALE = {
    "shortrange": "y",
    "cook": "xy",
    "waveop": "xy",
    "nonexistence": "y",
    "lap": "xy",
    "weighted_lap": "",
    "stone": "xy",
    "eigen": "",
    "decay": "x",
    "completeness": "",
}


# ---------------------------------------------------------------------------
# artifact writing


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _sanitize(v):
    if isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return str(v)


_CSV_HEADER = "experiment,kind,cell,metric,value,verdict,config_hash,code_version"


def _write_csv(path: Path, rows: list, chash: str) -> None:
    lines = [_CSV_HEADER]
    for r in rows:
        base = [r["name"], r["kind"]]
        lines.append(",".join(base + ["", "status", r["status"], "", chash, __version__]))
        for cell, metric, value in r["records"]:
            lines.append(
                ",".join(base + [cell, metric, _fmt(value), "", chash, __version__])
            )
        for vname, v in r["verdicts"].items():
            lines.append(
                ",".join(
                    base + ["", f"verdict.{vname}", v["verdict"], v["verdict"], chash, __version__]
                )
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_summary(path: Path, rows: list, chash: str, code: int) -> None:
    out = {
        "schema_version": 1,
        "code_version": __version__,
        "config_hash": chash,
        "exit_code": code,
        "experiments": {
            r["name"]: {
                "kind": r["kind"],
                "status": r["status"],
                "metrics": {
                    metric: _sanitize(value)
                    for cell, metric, value in r["records"]
                    if cell == ""
                },
                "verdicts": r["verdicts"],
            }
            for r in rows
        },
    }
    path.write_text(
        json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )


def _write_plot(path: Path, rows: list) -> None:
    lines = [
        "# generated plotting script; run from the output directory: gnuplot plot.gp",
        "# every series is filtered straight out of results.csv",
        "set datafile separator ','",
        "set terminal pngcairo size 960,640",
        "set key left top",
    ]
    for r in rows:
        if not r["curves"]:
            continue
        scales = _LOGSCALE.get(r["kind"], "")
        lines.append("")
        lines.append("unset logscale")
        if scales:
            lines.append(f"set logscale {scales}")
        lines.append(f"set output '{r['name']}.png'")
        plots = ", ".join(
            "'results.csv' using "
            f"(strcol(1) eq '{r['name']}' && strcol(4) eq '{m}' && strcol(3) ne '' "
            f"? real(strcol(3)) : NaN):(real(strcol(5))) "
            f"with linespoints title '{m}'"
            for m in r["curves"]
        )
        lines.append(f"plot {plots}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# driving


def _execute(exp: dict, seed: int) -> dict:
    row = {
        "name": exp["name"],
        "kind": exp["kind"],
        "records": [],
        "verdicts": {},
        "curves": [],
    }
    try:
        records, verdicts, curves = _RUNNERS[exp["kind"]](exp["params"], seed)
        row.update(records=records, verdicts=verdicts, curves=curves, status="ok")
    except GuardError as exc:
        row["status"] = f"guard:{exc.guard}"
    except SolverConvergenceError:
        row["status"] = "solver_error"
    except Exception as exc:  # pragma: no cover - defensive
        row["status"] = f"error:{type(exc).__name__}"
        row["error"] = str(exc)
    return row


def run_config(cfg: dict, out_dir: Path, threads: int) -> int:
    chash = config_hash(cfg)
    seed = cfg["seed"]
    experiments = cfg["experiments"]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda e: _execute(e, seed), experiments))
    else:
        rows = [_execute(e, seed) for e in experiments]
    statuses = [r["status"] for r in rows]
    if any(s.startswith("error:") for s in statuses):
        code = EXIT_INTERNAL
    elif any(s == "solver_error" for s in statuses):
        code = EXIT_SOLVER
    elif any(s.startswith("guard:") for s in statuses):
        code = EXIT_GUARD
    else:
        code = EXIT_OK
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / "results.csv", rows, chash)
        _write_summary(out_dir / "summary.json", rows, chash, code)
        _write_plot(out_dir / "plot.gp", rows)
        (out_dir / "config.resolved").write_text(
            yaml.safe_dump(cfg, sort_keys=True), encoding="utf-8", newline="\n"
        )
    except OSError as exc:
        print(f"artifact write failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    for r in rows:
        detail = f" ({r['error']})" if "error" in r else ""
        print(f"{r['name']}: {r['status']}{detail}")
    return code


def _load_yaml(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(prog="fracscat", description="scattering experiment driver")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a config and write artifacts")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (default from config)")
    p_run.add_argument("--threads", type=int, default=None)
    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")
    sub.add_parser("list-experiments", help="list experiment kinds")
    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for kind in sorted(_RUNNERS):
            print(kind)
        return EXIT_OK

    try:
        cfg = resolve_config(_load_yaml(args.config))
    except (ConfigError, yaml.YAMLError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(f"ok (hash {config_hash(cfg)})")
        return EXIT_OK

    threads = args.threads
    if threads is None:
        env = os.environ.get("FRACSCAT_THREADS")
        threads = int(env) if env else cfg["threads"]
    out_dir = Path(args.out) if args.out else Path(cfg["output_dir"])
    return run_config(cfg, out_dir, threads)


if __name__ == "__main__":
    sys.exit(main())
