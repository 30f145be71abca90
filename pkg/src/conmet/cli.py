"""Command line pipeline: collocation solve, CPA interpolation and
constraint verification, driven by a single TOML config.

Subcommands
    solve    compute the optimal recovery and serialize it
    verify   re-check a serialized recovery on a (new) triangulation
    run      full pipeline; strict mode refines until verified or capped

Exit codes: 0 success, 2 configuration or input error, 3 numerical
failure, 4 refinement caps exhausted in strict mode.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                   # Python < 3.11
    import tomli as tomllib

from .collocation import (CollocationSet, HalfplaneRegion, PolygonRegion,
                          fill_distance, hexagonal_grid, rectangular_grid,
                          vanderpol_orbit_region)
from .cpa import interpolate_metric
from .errors import ConfigurationError, ConmetError, InputError, NumericalError
from .kernel import build_wendland
from .mesh import standard_triangulation
from .recovery import RecoverySolution, solve_recovery
from .systems import PolynomialSystem, get_system
from .verify import VerificationConfig, verify_all

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CAPPED = 4


class RunLog:
    """Collects timestamped messages and writes them to run.log."""

    def __init__(self):
        self.lines = []
        self._t0 = time.perf_counter()

    def note(self, msg: str) -> None:
        line = "[%8.2fs] %s" % (time.perf_counter() - self._t0, msg)
        self.lines.append(line)
        print(line, file=sys.stderr)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.lines) + "\n")


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file {path} not found")
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}")
    cfg["_dir"] = path.parent
    return cfg


def _system_from_table(tab: dict):
    if "name" not in tab:
        raise ConfigurationError("[system] table needs a 'name' key")
    name = tab["name"]
    if name == "polynomial":
        if "components" not in tab:
            raise ConfigurationError(
                "polynomial system needs a 'components' list")
        comps = [[(tuple(int(e) for e in exps), float(coef))
                  for exps, coef in comp] for comp in tab["components"]]
        return PolynomialSystem(len(comps), comps,
                                name=tab.get("label", "polynomial"))
    params = {k: v for k, v in tab.items() if k not in ("name", "label")}
    return get_system(name, **params)


def _region_from_table(tab: dict, cfg_dir: Path):
    poly = tab.get("region_polygon")
    if poly is not None:
        if poly == "builtin:vanderpol_orbit":
            return vanderpol_orbit_region()
        path = Path(poly)
        if not path.is_absolute():
            path = cfg_dir / path
        if not path.is_file():
            raise InputError(f"region polygon file {path} not found")
        return PolygonRegion.from_csv(path)
    half = tab.get("region_halfplanes")
    if half is not None:
        return HalfplaneRegion(half["A"], half["b"])
    return None


def _box(tab: dict, key: str = "box") -> np.ndarray:
    if key not in tab:
        raise ConfigurationError(f"missing '{key}' entry")
    box = np.asarray(tab[key], dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 0] >= box[:, 1]):
        raise ConfigurationError(
            f"'{key}' must be a list of [lo, hi] pairs with lo < hi")
    return box


def build_collocation(cfg: dict) -> CollocationSet:
    tab = cfg.get("collocation")
    if tab is None:
        raise ConfigurationError("missing [collocation] table")
    region = _region_from_table(tab, cfg["_dir"])
    box = _box(tab)
    spacing = float(tab.get("spacing", 0.0))
    grid = tab.get("grid", "hexagonal")
    if grid == "hexagonal":
        return hexagonal_grid(box, spacing, region=region)
    if grid == "rectangular":
        return rectangular_grid(box, spacing, region=region)
    raise ConfigurationError(f"unknown grid type {grid!r}")


def build_verification_config(cfg: dict, n: int) -> VerificationConfig:
    tab = cfg.get("verification", {})
    C = np.asarray(tab.get("C", np.eye(n)), dtype=float)
    return VerificationConfig(
        eps0=tab.get("eps0"), C=C,
        bound_granularity=tab.get("bound_granularity", "per-simplex"))


def verification_system(cfg: dict, default_sys):
    """System the constraints are checked against; normally the one the
    recovery was computed for, overridable for perturbation studies."""
    tab = cfg.get("verification", {})
    if "system" in tab:
        sub = dict(tab.get("system_params", {}))
        sub["name"] = tab["system"]
        return _system_from_table(sub)
    return default_sys


def _solve_stage(cfg, sys, log, threads):
    ktab = cfg.get("kernel", {})
    kernel = build_wendland(sys.n, int(ktab.get("k", 4)),
                            float(ktab.get("c", 1.0)))
    cset = build_collocation(cfg)
    log.note(f"collocation: {cset.n_points} points "
             f"(grid={cfg['collocation'].get('grid', 'hexagonal')}, "
             f"spacing={cfg['collocation'].get('spacing')})")
    rtab = cfg.get("recovery", {})
    rec = solve_recovery(sys, kernel, cset.points,
                         build_verification_config(cfg, sys.n).C,
                         max_condition=float(rtab.get("max_condition", 1e16)),
                         jitter=float(rtab.get("jitter", 0.0)))
    log.note("recovery solved: condition estimate %.3e, residual %.3e"
             % (rec.gram_condition, rec.residual))
    return cset, rec


def _verify_stage(cfg, rec, vsys, rho, log, threads):
    ttab = cfg.get("triangulation")
    if ttab is None:
        raise ConfigurationError("missing [triangulation] table")
    box = _box(ttab)
    tri = standard_triangulation(
        box, rho, max_vertices=int(ttab.get("max_vertices", 20_000_000)))
    d = float(ttab.get("d", 2.0 * np.sqrt(tri.n)))
    if d < 2.0 * np.sqrt(tri.n) - 1e-12:
        raise ConfigurationError("degeneracy bound d must be >= 2 sqrt(n)")
    if not np.all(tri.deg <= d * (1.0 + 1e-9)):
        raise NumericalError(
            "triangulation violates the configured degeneracy bound")
    log.note(f"triangulation: {tri.n_vertices} vertices, "
             f"{tri.n_simplices} simplices, rho={rho:g}")
    cpa = interpolate_metric(tri, rec, threads=threads)
    log.note("CPA interpolation done")
    rep = verify_all(cpa, vsys, build_verification_config(cfg, rec.n))
    log.note("verification: C1 %.2f%%, C4 %.2f%% of %d simplices"
             % (100 * rep.summary["c1_fraction"],
                100 * rep.summary["c4_fraction"], tri.n_simplices))
    return cpa, rep


def _write_artifacts(out: Path, cpa, rep, log):
    cpa.export_csv(out / "vertices.csv", out / "simplices.csv")
    rep.write_vertex_csv(out / "report_vertices.csv", cpa.tri.vertices)
    rep.write_simplex_csv(out / "report_simplices.csv")
    rep.write_summary_json(out / "summary.json")
    log.note("artifacts written to %s" % out)


def run_pipeline(cfg: dict, out: Path, mode: str, threads: int,
                 log: RunLog) -> int:
    sys_model = _system_from_table(cfg.get("system", {}))
    vsys = verification_system(cfg, sys_model)
    rtab = cfg.get("run", {})
    max_iter = int(rtab.get("max_iterations", 3))
    c_refine = float(rtab.get("collocation_refine", 2.0))
    t_refine = float(rtab.get("triangulation_refine", 8.0))
    rho = float(cfg.get("triangulation", {}).get("rho", 0.0))
    if rho <= 0:
        raise ConfigurationError("[triangulation] rho must be positive")
    if "collocation" not in cfg:
        raise ConfigurationError("missing [collocation] table")
    spacing0 = cfg["collocation"].get("spacing")

    cpa = rep = rec = None
    tried_tri_refine = False
    for it in range(max_iter):
        log.note(f"iteration {it + 1}: collocation spacing "
                 f"{cfg['collocation'].get('spacing')}, rho {rho:g}")
        cset, rec = _solve_stage(cfg, sys_model, log, threads)
        cpa, rep = _verify_stage(cfg, rec, vsys, rho, log, threads)
        if mode == "relaxed" or rep.verified:
            break
        # strict refinement: definiteness failures need more collocation
        # points; negativity failures get a finer triangulation first
        if not rep.c1_pass.all() or tried_tri_refine:
            cfg["collocation"]["spacing"] = \
                float(cfg["collocation"]["spacing"]) / c_refine
            tried_tri_refine = False
        else:
            rho = rho / t_refine
            tried_tri_refine = True

    out.mkdir(parents=True, exist_ok=True)
    rec.to_json(out / "recovery.json")
    _write_artifacts(out, cpa, rep, log)
    if spacing0 is not None:
        cfg["collocation"]["spacing"] = spacing0
    if mode == "strict" and not rep.verified:
        log.note("refinement caps exhausted without full verification")
        return EXIT_CAPPED
    return EXIT_OK


def solve_only(cfg: dict, out: Path, threads: int, log: RunLog) -> int:
    sys_model = _system_from_table(cfg.get("system", {}))
    cset, rec = _solve_stage(cfg, sys_model, log, threads)
    out.mkdir(parents=True, exist_ok=True)
    cset.to_csv(out / "collocation.csv")
    rec.to_json(out / "recovery.json")
    log.note("recovery written to %s" % (out / "recovery.json"))
    return EXIT_OK


def verify_from_file(cfg: dict, out: Path, threads: int, log: RunLog) -> int:
    tab = cfg.get("verification", {})
    rec_path = Path(tab.get("recovery", "recovery.json"))
    if not rec_path.is_absolute():
        cand = cfg["_dir"] / rec_path
        rec_path = cand if cand.is_file() else rec_path
    declared = _system_from_table(cfg.get("system", {}))
    rec = RecoverySolution.from_json(rec_path, system=declared)
    log.note(f"loaded recovery for system {rec.system.name!r} "
             f"({rec.points.shape[0]} points) from {rec_path}")
    vsys = verification_system(cfg, rec.system)
    rho = float(cfg.get("triangulation", {}).get("rho", 0.0))
    if rho <= 0:
        raise ConfigurationError("[triangulation] rho must be positive")
    cpa, rep = _verify_stage(cfg, rec, vsys, rho, log, threads)
    out.mkdir(parents=True, exist_ok=True)
    _write_artifacts(out, cpa, rep, log)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="conmet",
        description="contraction metric computation and CPA verification")
    parser.add_argument("command", choices=["solve", "verify", "run"])
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker pool size for the evaluation sweeps")
    parser.add_argument("--mode", choices=["strict", "relaxed"], default=None,
                        help="strict refinement loop or single relaxed pass")
    args = parser.parse_args(argv)

    log = RunLog()
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        rtab = cfg.get("run", {})
        threads = args.threads if args.threads is not None \
            else int(rtab.get("threads", 1))
        mode = args.mode if args.mode is not None \
            else rtab.get("mode", "relaxed")
        if mode not in ("strict", "relaxed"):
            raise ConfigurationError(f"unknown mode {mode!r}")
        if args.command == "run":
            status = run_pipeline(cfg, out, mode, threads, log)
        elif args.command == "solve":
            status = solve_only(cfg, out, threads, log)
        else:
            status = verify_from_file(cfg, out, threads, log)
    except (ConfigurationError, InputError) as exc:
        log.note(f"configuration error: {exc}")
        return EXIT_CONFIG
    except NumericalError as exc:
        log.note(f"numerical failure: {exc}")
        if out.is_dir():
            log.write(out / "run.log")
        return EXIT_NUMERICAL
    except ConmetError as exc:
        log.note(f"error: {exc}")
        return EXIT_NUMERICAL
    log.write(out / "run.log")
    return status


if __name__ == "__main__":
    sys.exit(main())
