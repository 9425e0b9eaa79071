"""Command line front end.

Runs one experiment described by a flat key-value config file and writes a
JSON summary plus CSV tables.  Output bytes are a pure function of the config
and the flags: no timestamps, keys sorted, floats via repr, and the worker
count never changes results (it only spreads sampling over threads).

Exit codes: 0 all checks passed, 1 a physics check failed, 2 the run could
not decide (unreliable truncation, degenerate histogram, sampler trouble),
3 the config or flags are invalid.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .birthdeath import (
    BiasSpec,
    bd_divergence_scan,
    bd_free_energy,
    bd_tft_check,
)
from .enumeration import CoordinatePermutation, DiscreteChain, exact_verify
from .likelihood import backward_measure_bc1, backward_measure_bc2
from .process import (
    Hamiltonian,
    InitialDistribution,
    ProcessMeasure,
    StateSpace,
    build_ldb_protocol,
    gibbs_distribution,
)
from .sampler import path_to_line, sample_ensemble
from .transforms import HoldingPermutation, TimeReversal, cyclic_family
from .verify import distributional_test, estimate_mgf_pair, integral_ft_check

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_CONFIG = 3

_STATUS = {EXIT_PASS: "pass", EXIT_FAIL: "fail", EXIT_INCONCLUSIVE: "inconclusive"}

_MISSING = object()

Table = Tuple[List[str], List[list]]


class ConfigError(Exception):
    """The config file cannot be parsed or asks for something unsupported."""


@dataclass
class Config:
    """Flat key-value config: one `key = value` per line, `#` comments,
    matrix values as whitespace-separated rows joined by `;`."""

    entries: Dict[str, str]
    used: Set[str] = field(default_factory=set)

    @classmethod
    def parse(cls, text: str) -> "Config":
        entries: Dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"line {lineno}: empty key")
            if key in entries:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            entries[key] = val
        return cls(entries=entries)

    def has(self, key: str) -> bool:
        return key in self.entries

    def get(self, key: str, default=_MISSING) -> str:
        if key in self.entries:
            self.used.add(key)
            return self.entries[key]
        if default is _MISSING:
            raise ConfigError(f"missing key {key!r}")
        return default

    def get_str(self, key: str, choices: Sequence[str], default=_MISSING) -> str:
        val = self.get(key, default)
        if val not in choices:
            raise ConfigError(f"{key!r} must be one of {', '.join(choices)} (got {val!r})")
        return val

    def get_int(self, key: str, default=_MISSING) -> int:
        val = self.get(key, default)
        if isinstance(val, int):
            return val
        try:
            return int(val)
        except ValueError:
            raise ConfigError(f"{key!r} must be an integer (got {val!r})") from None

    def get_float(self, key: str, default=_MISSING) -> float:
        val = self.get(key, default)
        if isinstance(val, float):
            return val
        try:
            return float(val)
        except ValueError:
            raise ConfigError(f"{key!r} must be a number (got {val!r})") from None

    def get_floats(self, key: str, default=_MISSING) -> np.ndarray:
        val = self.get(key, default)
        try:
            return np.array([float(tok) for tok in val.split()], dtype=float)
        except ValueError:
            raise ConfigError(f"{key!r} must be a list of numbers (got {val!r})") from None

    def get_ints(self, key: str, default=_MISSING) -> List[int]:
        val = self.get(key, default)
        try:
            return [int(tok) for tok in val.split()]
        except ValueError:
            raise ConfigError(f"{key!r} must be a list of integers (got {val!r})") from None

    def get_matrix(self, key: str) -> np.ndarray:
        val = self.get(key)
        rows = [row.split() for row in val.split(";")]
        widths = {len(r) for r in rows}
        if len(widths) != 1 or 0 in widths:
            raise ConfigError(f"{key!r} rows must all have the same nonzero length")
        try:
            return np.array([[float(tok) for tok in row] for row in rows], dtype=float)
        except ValueError:
            raise ConfigError(f"{key!r} must contain numbers only") from None

    def check_consumed(self) -> None:
        stray = sorted(set(self.entries) - self.used)
        if stray:
            raise ConfigError(f"unknown keys: {', '.join(stray)}")


def _jsonable(v):
    """numpy scalars to python, non-finite floats to null, containers deep."""
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    return v


def _fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(out_dir: str, fmt: str, summary: dict, tables: Dict[str, Table]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    if fmt in ("json", "both"):
        with open(os.path.join(out_dir, "summary.json"), "w", newline="") as fh:
            json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if fmt in ("csv", "both"):
        for name in sorted(tables):
            header, rows = tables[name]
            with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_fmt_cell(v) for v in row])


def _build_system(cfg: Config) -> Tuple[ProcessMeasure, Hamiltonian, str]:
    """Shared process block: LDB rates from a (piecewise) energy table, with
    either Gibbs ('work') or configurable ('entropy') boundary data."""
    beta = cfg.get_float("beta")
    base_rate = cfg.get_float("base_rate")
    horizon = cfg.get_float("horizon")
    energies = cfg.get_matrix("energies")
    if energies.shape[0] == 1:
        grid = np.array([0.0, horizon])
    else:
        grid = cfg.get_floats("energy_breakpoints")
        if len(grid) != energies.shape[0] + 1 or grid[0] != 0.0 or grid[-1] != horizon:
            raise ConfigError(
                "energy_breakpoints must run from 0 to horizon with one interval per energies row"
            )
    h = Hamiltonian.piecewise(grid, energies, beta)
    protocol = build_ldb_protocol(h, base_rate, horizon, breakpoints=grid)
    boundary = cfg.get_str("boundary", choices=("work", "entropy"), default="work")
    if boundary == "work":
        if cfg.has("initial"):
            raise ConfigError("the work boundary fixes the initial law; drop 'initial'")
        init, _ = gibbs_distribution(h, 0.0)
    elif cfg.has("initial"):
        init = InitialDistribution(cfg.get_floats("initial"))
    else:
        init, _ = gibbs_distribution(h, 0.0)
    space = StateSpace.finite(h.n_states)
    return ProcessMeasure(space=space, protocol=protocol, initial=init), h, boundary


def _run_verify(cfg: Config, seed: int, workers: int) -> Tuple[int, dict, Dict[str, Table]]:
    P, h, boundary = _build_system(cfg)
    transform = cfg.get_str("transform", choices=("reversal", "holding-cyclic"), default="reversal")
    lams = cfg.get_floats("lambdas", default="-1 -0.75 -0.5 -0.25 0")
    n = cfg.get_int("n_paths", default=20000)
    bins = cfg.get_int("bins", default=0) or None
    functionals = cfg.get("functionals", default=boundary).split()
    for f in functionals:
        if f not in ("entropy", "work", "heat"):
            raise ConfigError(f"unknown functional {f!r}")
    cfg.check_consumed()

    Q = backward_measure_bc2(P, h) if boundary == "work" else backward_measure_bc1(P)
    phi = TimeReversal() if transform == "reversal" else HoldingPermutation(cyclic_family())
    ens = (
        sample_ensemble(P, n, seed, lane=0, workers=workers),
        sample_ensemble(Q, n, seed, lane=1, workers=workers),
    )

    grid = estimate_mgf_pair(P, Q, phi, lams, n, seed, ensembles=ens)
    integral = integral_ft_check(P, Q, phi, n, seed, ensembles=ens)
    reports = {
        f: distributional_test(P, Q, phi, functional=f, n=n, seed=seed, bins=bins, ensembles=ens)
        for f in functionals
    }

    failed = not (grid.all_agree and integral.passed) or any(
        not r.passed and not r.inconclusive for r in reports.values()
    )
    inconclusive = any(r.inconclusive for r in reports.values())
    code = EXIT_FAIL if failed else (EXIT_INCONCLUSIVE if inconclusive else EXIT_PASS)

    mgf_rows = [
        {
            "lambda": grid.lambdas[i], "lhs": grid.lhs[i], "lhs_se": grid.lhs_se[i],
            "rhs": grid.rhs[i], "rhs_se": grid.rhs_se[i], "pass": grid.agree[i],
        }
        for i in range(len(grid.lambdas))
    ]
    summary = {
        "boundary": boundary,
        "transform": transform,
        "n_paths": n,
        "mgf": mgf_rows,
        "integral_ft": {"estimate": integral.estimate, "se": integral.se, "pass": integral.passed},
        "distribution": [
            {
                "functional": f, "bins_scored": int(r.scored.sum()),
                "frac_within": r.frac_within, "signed_bias": r.signed_bias,
                "pass": r.passed, "inconclusive": r.inconclusive,
            }
            for f, r in reports.items()
        ],
    }
    tables: Dict[str, Table] = {
        "mgf": (
            ["lambda", "lhs", "lhs_se", "rhs", "rhs_se", "pass"],
            [[row["lambda"], row["lhs"], row["lhs_se"], row["rhs"], row["rhs_se"], row["pass"]]
             for row in mgf_rows],
        )
    }
    for f, r in reports.items():
        centers = r.centers
        tables[f"distribution_{f}"] = (
            ["bin_lo", "bin_hi", "center", "count_f", "count_g",
             "log_ratio", "se", "deviation", "scored"],
            [[r.edges[i], r.edges[i + 1], centers[i], int(r.count_f[i]), int(r.count_g[i]),
              r.log_ratio[i], r.se[i], r.deviation[i], bool(r.scored[i])]
             for i in range(len(centers))],
        )
    return code, summary, tables


def _parse_sigma(cfg: Config, n_steps: int) -> CoordinatePermutation:
    toks = cfg.get("sigma", default="reversal").split()
    if toks == ["reversal"]:
        return CoordinatePermutation.reversal(n_steps)
    if toks == ["identity"]:
        return CoordinatePermutation.identity(n_steps)
    if toks[0] == "cyclic":
        shift = int(toks[1]) if len(toks) > 1 else 1
        return CoordinatePermutation.cyclic(n_steps, shift=shift)
    try:
        perm = [int(t) for t in toks]
    except ValueError:
        raise ConfigError("sigma must be reversal, identity, cyclic [k], or a permutation") from None
    return CoordinatePermutation(np.asarray(perm, dtype=int))


def _read_chain(cfg: Config, tag: str) -> Optional[DiscreteChain]:
    if not cfg.has(f"initial_{tag}"):
        return None
    init = cfg.get_floats(f"initial_{tag}")
    mats = []
    step = 1
    while cfg.has(f"matrix_{tag}_{step}"):
        mats.append(cfg.get_matrix(f"matrix_{tag}_{step}"))
        step += 1
    if not mats:
        raise ConfigError(f"chain {tag!r} needs matrix_{tag}_1, matrix_{tag}_2, ...")
    return DiscreteChain(initial=init, matrices=np.stack(mats))


def _run_enumerate(cfg: Config, seed: int, workers: int) -> Tuple[int, dict, Dict[str, Table]]:
    chain_f = _read_chain(cfg, "f")
    if chain_f is None:
        raise ConfigError("enumerate needs initial_f and matrix_f_1, ...")
    chain_g = _read_chain(cfg, "g") or chain_f
    sigma = _parse_sigma(cfg, chain_f.n_steps)
    lams = cfg.get_floats("lambdas", default="-1 -0.75 -0.5 -0.25 0")
    cfg.check_consumed()

    report = exact_verify(chain_f, chain_g, sigma, lam_grid=lams)
    code = EXIT_PASS if report.all_ok else EXIT_FAIL
    summary = {
        "n_states": chain_f.n_states,
        "n_steps": chain_f.n_steps,
        "support_points": len(report.support),
        "ratio_max_rel_err": report.ratio_max_rel_err,
        "mgf_max_rel_err": report.mgf_max_rel_err,
        "integral_ft": report.integral_ft,
        "ratio_ok": report.ratio_ok,
        "mgf_ok": report.mgf_ok,
        "integral_ok": report.integral_ok,
    }
    per_point = np.abs(report.mass_f - np.exp(report.support) * report.mass_g) / report.mass_f
    tables: Dict[str, Table] = {
        "support": (
            ["score", "mass_f", "mass_g", "rel_err"],
            [[report.support[i], report.mass_f[i], report.mass_g[i], per_point[i]]
             for i in range(len(report.support))],
        ),
        "mgf_exact": (
            ["lambda", "lhs", "rhs"],
            [[report.mgf_lambdas[i], report.mgf_lhs[i], report.mgf_rhs[i]]
             for i in range(len(report.mgf_lambdas))],
        ),
    }
    return code, summary, tables


def _free_energy_rows(est_list) -> Table:
    header = ["lambda", "t", "N_max", "partial_sum_log", "tail_bound_log",
              "converged", "lower_bound", "upper_bound", "estimate"]
    rows = [[e.lam, e.t, e.n_used, e.log_mgf, e.log_tail, e.reliable,
             e.lower_bound, e.upper_bound, e.estimate] for e in est_list]
    return header, rows


def _run_bd_constant(cfg: Config, seed: int, workers: int) -> Tuple[int, dict, Dict[str, Table]]:
    alpha = cfg.get_float("alpha")
    t = cfg.get_float("t")
    lams = cfg.get_floats("lambdas", default="-1 -0.5 0 0.5 1")
    rel_tail = cfg.get_float("rel_tail", default=1e-8)
    n_max = cfg.get_int("n_max", default=0) or None
    cfg.check_consumed()

    b = BiasSpec.constant(alpha)
    ests = [bd_free_energy(b, lam, t, n_max=n_max, rel_tail=rel_tail) for lam in lams]
    if any(e.reliable and not e.inside for e in ests):
        code = EXIT_FAIL
    elif any(not e.reliable for e in ests):
        code = EXIT_INCONCLUSIVE
    else:
        code = EXIT_PASS
    summary = {
        "alpha": alpha,
        "t": t,
        "free_energy": [
            {
                "lambda": e.lam, "estimate": e.estimate, "lower": e.lower_bound,
                "upper": e.upper_bound, "inside": e.inside, "reliable": e.reliable,
                "n_used": e.n_used,
            }
            for e in ests
        ],
    }
    return code, summary, {"free_energy": _free_energy_rows(ests)}


def _run_bd_strong(cfg: Config, seed: int, workers: int) -> Tuple[int, dict, Dict[str, Table]]:
    t = cfg.get_float("t", default=1.0)
    scan_lams = cfg.get_floats("scan_lambdas", default="0.25 -0.5")
    n_list = cfg.get_ints("n_list", default="100 200")
    strip_lams = cfg.get_floats("strip_lambdas", default="")
    n_paths = cfg.get_int("n_paths", default=200000)
    cfg.check_consumed()

    b = BiasSpec.strong()
    scans = [bd_divergence_scan(b, lam, t, n_list) for lam in scan_lams]
    code = EXIT_PASS
    if any(not (s.diverged or s.converged) for s in scans):
        code = EXIT_INCONCLUSIVE

    summary = {
        "t": t,
        "eta": scans[0].eta if scans else None,
        "scan": [
            {
                "lambda": s.lam,
                "diverged": s.diverged,
                "converged": s.converged,
                "log_growth": s.log_growth_factor(n_list[0], n_list[-1]) if len(n_list) > 1 else 0.0,
                "log_tail_estimate": s.log_tail_estimate,
            }
            for s in scans
        ],
    }
    tables: Dict[str, Table] = {
        "divergence": (
            ["lambda", "n", "log_partial_sum"],
            [[s.lam, int(n), s.log_partials_at[j]]
             for s in scans for j, n in enumerate(s.n_list)],
        )
    }
    if len(strip_lams):
        strip = bd_tft_check(b, t, strip_lams, n_paths, seed)
        if not strip.all_agree:
            code = EXIT_FAIL
        summary["strip"] = {
            "n_paths": n_paths,
            "finite_fraction": strip.finite_fraction,
            "all_agree": strip.all_agree,
        }
        tables["strip"] = (
            ["lambda", "lhs", "lhs_se", "rhs", "rhs_se", "pass"],
            [[strip.lambdas[i], strip.lhs[i], strip.lhs_se[i],
              strip.rhs[i], strip.rhs_se[i], strip.agree[i]]
             for i in range(len(strip.lambdas))],
        )
    return code, summary, tables


def _run_sample_dump(cfg: Config, seed: int, workers: int) -> Tuple[int, dict, Dict[str, Table]]:
    P, _, _ = _build_system(cfg)
    n = cfg.get_int("n_paths", default=100)
    lane = cfg.get_int("lane", default=0)
    cfg.check_consumed()

    paths = sample_ensemble(P, n, seed, lane=lane, workers=workers)
    jumps = np.array([w.n_jumps for w in paths])
    finals = np.array([w.final_state for w in paths])
    hist = np.bincount(finals, minlength=P.space.size)
    summary = {
        "n_paths": n,
        "lane": lane,
        "mean_jumps": float(jumps.mean()),
        "max_jumps": int(jumps.max()),
        "final_state_counts": [int(c) for c in hist],
    }
    tables = {
        "paths": (["index", "path"], [[i, path_to_line(w)] for i, w in enumerate(paths)])
    }
    return EXIT_PASS, summary, tables


_RUNNERS = {
    "verify-tft": _run_verify,
    "enumerate": _run_enumerate,
    "bd-constant": _run_bd_constant,
    "bd-strong": _run_bd_strong,
    "sample-dump": _run_sample_dump,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tftlab",
        description="Run a fluctuation-identity experiment from a config file.",
    )
    parser.add_argument("--config", required=True, help="path to the key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--workers", type=int, default=1, help="sampling threads (results identical)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=("json", "csv", "both"), default="both")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        cfg = Config.parse(text)
        kind = cfg.get_str("experiment", choices=tuple(_RUNNERS))
        cfg_seed = cfg.get_int("seed", default=0)  # consume even when overridden
        seed = args.seed if args.seed is not None else cfg_seed
        code, payload, tables = _RUNNERS[kind](cfg, seed=seed, workers=args.workers)
    except (ConfigError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"error: run did not complete: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE

    summary = {"experiment": kind, "seed": seed, "status": _STATUS[code], **payload}
    write_outputs(args.out, args.format, summary, tables)
    print(f"{kind}: {_STATUS[code]}")
    return code


if __name__ == "__main__":
    sys.exit(main())
