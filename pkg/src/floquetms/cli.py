"""Command-line front end.

Every command takes an optional JSON run configuration (``--config``);
flags given on the command line override its entries. Inputs are JSON
manifests that point at per-slice Matrix Market files. Outputs are
written only after the whole computation has succeeded; on failure a JSON
error record goes to stderr and the exit code names the error class.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np
import scipy.io
import scipy.sparse as sp

from . import bench, dae
from .errors import ConfigError, FloquetError, ManifestError
from .floquet import (CONVERGENCE_HEADER, EIGEN_HEADER, FloquetSolution, _fmt,
                      eigenvalue_rows, solve)
from .grid import PeriodicGrid, build_pattern, build_uniform, from_times
from .lptv import SampledLptvSystem
from .multistep import SCHEME_NAMES, scheme as scheme_by_name
from .spurious import SPURIOUS, scalar_roots

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MANIFEST = 3
EXIT_SOLVER = 4
EXIT_NUMERICAL = 5

_EXIT_BY_CATEGORY = {
    "config-error": EXIT_CONFIG,
    "invalid-argument": EXIT_CONFIG,
    "manifest-error": EXIT_MANIFEST,
    "io-error": EXIT_MANIFEST,
    "iteration-limit": EXIT_SOLVER,
    "reorder-failure": EXIT_SOLVER,
    "breakdown": EXIT_SOLVER,
    "orbit-not-found": EXIT_SOLVER,
}

COMMANDS = ("solve", "convergence", "spurious", "dae", "fixture")
# below this size samples are kept dense; dense LU is faster there
DENSE_SAMPLE_LIMIT = 200

_num_list = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "manifest": {"type": "string"},
        "scheme": {"enum": list(SCHEME_NAMES)},
        "schemes": {"type": "array", "items": {"enum": list(SCHEME_NAMES)}, "minItems": 1},
        "solver": {"enum": ["dense", "ptoar"]},
        "k": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_cycles": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "transpose": {"type": "boolean"},
        "alpha": {"type": "number"},
        "beta": {"type": "number"},
        "p": {"type": "integer", "minimum": 1},
        "p_values": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "pattern": _num_list,
        "kind": {"enum": ["toy", "zero", "dae-toy"]},
        "n": {"type": "integer", "minimum": 1},
        "n2": {"type": "integer", "minimum": 1},
    },
}

MANIFEST_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "period": {"type": "number", "exclusiveMinimum": 0},
        "times": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "times_file": {"type": "string"},
        "pattern": _num_list,
        "repeats": {"type": "integer", "minimum": 1},
        "ratio_band": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "samples": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "C": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "G": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "differential": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    },
}

DEFAULTS = {
    "scheme": "gear2", "solver": "dense", "tol": 1e-10, "max_cycles": 20, "seed": 0,
    "out": ".", "transpose": True, "alpha": 0.1, "beta": 0.1,
    "schemes": ["be", "gear2", "gear3"], "p_values": [64, 128, 256, 512, 1024],
    "kind": "toy", "p": 64, "n": 2, "n2": 3,
}
PATTERN_DEFAULTS = {"convergence": [1.0, 2.0], "spurious": [1.0], "fixture": [1.0, 2.0]}


# ---------------------------------------------------------------------------
# configuration


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def resolve_config(command: str, cfg: dict, overrides: dict) -> dict:
    """Defaults, then the config file, then command line flags."""
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for command {cfg['command']!r}, not {command!r}")
    merged = dict(DEFAULTS)
    if command in PATTERN_DEFAULTS:
        merged["pattern"] = PATTERN_DEFAULTS[command]
    merged.update(cfg)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    merged["command"] = command
    validate_config(merged)
    if command in ("solve", "dae") and "manifest" not in merged:
        raise ConfigError(f"{command} needs a manifest (config key or --manifest)")
    return merged


# ---------------------------------------------------------------------------
# manifests and Matrix Market files


def _read_matrix(path: Path):
    if not path.is_file():
        raise ManifestError(f"matrix file not found: {path}")
    try:
        A = scipy.io.mmread(str(path))
    except FileNotFoundError as exc:
        raise ManifestError(f"matrix file not found: {path}") from exc
    except (OSError, ValueError) as exc:
        raise ManifestError(f"cannot read matrix file {path}: {exc}") from exc
    A = sp.csc_matrix(A, dtype=float) if sp.issparse(A) else sp.csc_matrix(np.asarray(A, dtype=float))
    return A


def _as_sample(A: sp.csc_matrix):
    return A.toarray() if A.shape[0] <= DENSE_SAMPLE_LIMIT else A


def load_manifest(path) -> tuple:
    """Parsed manifest and its directory (relative paths resolve there)."""
    path = Path(path)
    try:
        with open(path) as fh:
            man = json.load(fh)
    except FileNotFoundError as exc:
        raise ManifestError(f"manifest not found: {path}") from exc
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc.msg}") from exc
    try:
        jsonschema.validate(man, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ManifestError(f"manifest invalid at {where}: {exc.message}") from exc
    return man, path.parent


def manifest_grid(man: dict, base: Path, p: int) -> PeriodicGrid:
    band = tuple(man.get("ratio_band", (0.2, 5.0)))
    try:
        if "times" in man:
            grid = from_times(man["times"], band)
        elif "times_file" in man:
            try:
                times = np.loadtxt(base / man["times_file"], ndmin=1)
            except (OSError, ValueError) as exc:
                raise ManifestError(f"cannot read times file: {exc}") from exc
            grid = from_times(times, band)
        elif "pattern" in man:
            if "period" not in man or "repeats" not in man:
                raise ManifestError("a pattern grid needs period and repeats")
            grid = build_pattern(man["period"], man["pattern"], man["repeats"], band)
        elif "period" in man:
            grid = build_uniform(p, man["period"], band)
        else:
            raise ManifestError("manifest needs times, times_file, pattern or period")
    except FloquetError as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"bad grid: {exc}") from exc
    if grid.p != p:
        raise ManifestError(f"grid has {grid.p} slices but {p} matrices are listed")
    return grid


def read_lptv_manifest(path) -> SampledLptvSystem:
    man, base = load_manifest(path)
    if "samples" not in man:
        raise ManifestError("an ODE manifest needs a 'samples' list")
    grid = manifest_grid(man, base, len(man["samples"]))
    mats = [_as_sample(_read_matrix(base / f)) for f in man["samples"]]
    try:
        return SampledLptvSystem(grid, mats)
    except FloquetError as exc:
        raise ManifestError(str(exc)) from exc


def read_dae_manifest(path) -> dae.SampledDaeSystem:
    man, base = load_manifest(path)
    for key in ("C", "G", "differential"):
        if key not in man:
            raise ManifestError(f"a DAE manifest needs {key!r}")
    if len(man["C"]) != len(man["G"]):
        raise ManifestError("C and G lists differ in length")
    grid = manifest_grid(man, base, len(man["G"]))
    C = [_read_matrix(base / f) for f in man["C"]]
    G = [_read_matrix(base / f) for f in man["G"]]
    try:
        return dae.SampledDaeSystem.from_full(grid, C, G, man["differential"])
    except dae.IndexViolation:
        raise
    except FloquetError as exc:
        raise ManifestError(str(exc)) from exc


def _mm_text(A) -> str:
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, sp.coo_matrix(A), precision=17)
    return buf.getvalue().decode()


def _grid_entries(grid: PeriodicGrid) -> dict:
    return {"times": [float(t) for t in grid.times]}


# ---------------------------------------------------------------------------
# output helpers


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _eigenvector_rows(sol: FloquetSolution) -> list:
    rows = []
    for m, slices in enumerate(sol.eigenvectors):
        for i, v in enumerate(slices):
            for c, z in enumerate(np.asarray(v, dtype=complex)):
                rows.append([m, i, c, float(z.real), float(z.imag)])
    return rows


def _summary(sol: FloquetSolution) -> dict:
    out = {"solver": sol.solver, "scheme": sol.scheme.name, "n": sol.n, "p": sol.p,
           "k": len(sol.multipliers)}
    if sol.gap is not None:
        g = sol.gap
        out["gap"] = {"k": g.k, "mag_k": g.mag_k, "mag_k1": g.mag_k1, "ratio": g.gap,
                      "ill_separated": g.ill_separated, "advisory": g.advisory}
    keys = ("sweeps", "restarts", "k_final", "n_solves", "n_matvecs", "basis_scalars")
    for key in keys:
        if key in sol.diagnostics:
            out[key] = int(sol.diagnostics[key])
    if "below_spurious_bound" in sol.diagnostics:
        out["below_spurious_bound"] = list(sol.diagnostics["below_spurious_bound"])
    return out


def _solution_files(sol: FloquetSolution) -> dict:
    return {
        "eigenvalues.csv": _csv_text(EIGEN_HEADER, eigenvalue_rows(sol)),
        "eigenvectors.csv": _csv_text(["multiplier", "slice", "component", "re", "im"],
                                      _eigenvector_rows(sol)),
        "summary.json": _json_text(_summary(sol)),
    }


def write_outputs(out_dir, files: dict) -> None:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).parent.mkdir(parents=True, exist_ok=True)
            (out / name).write_text(text)
    except OSError as exc:
        err = FloquetError(f"cannot write outputs to {out}: {exc.strerror}")
        err.category = "io-error"
        raise err from exc


# ---------------------------------------------------------------------------
# commands; each returns {relative file name: text}


def _run_solver(system, cfg) -> FloquetSolution:
    return solve(system, cfg["scheme"], solver=cfg["solver"], k=cfg.get("k"),
                 tol=cfg["tol"], max_cycles=cfg["max_cycles"], seed=cfg["seed"])


def cmd_solve(cfg: dict) -> dict:
    system = read_lptv_manifest(cfg["manifest"])
    return _solution_files(_run_solver(system, cfg))


def cmd_convergence(cfg: dict) -> dict:
    exact = bench.stuart_landau_exact(cfg["alpha"], cfg["beta"])
    study = bench.run_convergence(exact, cfg["schemes"], cfg["p_values"],
                                  pattern=tuple(cfg["pattern"]), solver=cfg["solver"])
    slope_rows = [[name, s["e_val"], s["e_vec"], s["angle"]] for name, s in study.slopes.items()]
    return {
        "convergence.csv": _csv_text(CONVERGENCE_HEADER, study.rows()),
        "slopes.csv": _csv_text(["scheme", "slope_e_val", "slope_e_vec", "slope_angle"],
                                slope_rows),
    }


def cmd_spurious(cfg: dict) -> dict:
    """Predicted parasitic magnitudes, and the spurious part of the toy spectrum."""
    name = cfg["scheme"]
    sch = scheme_by_name(name)
    exact = bench.stuart_landau_exact(cfg["alpha"], cfg["beta"])
    pred_rows, comp_rows = [], []
    for p in cfg["p_values"]:
        grid = bench.toy_grid(p, tuple(cfg["pattern"]))
        pred = scalar_roots(sch, grid)
        for t, (nu, pw) in enumerate(zip(pred.spurious_roots, pred.powers), start=1):
            pred_rows.append([name, p, t, nu.real, nu.imag, abs(nu), pw.log10_abs()])
        sol = solve(bench.sample(exact, grid), sch, solver="dense")
        spur = sorted((v.log10_abs() for v, tag in zip(sol.spectrum, sol.spectrum_tags)
                       if tag == SPURIOUS), reverse=True)
        comp_rows += [[name, p, j, v] for j, v in enumerate(spur)]
    return {
        "spurious_predicted.csv": _csv_text(
            ["scheme", "p", "root", "nu_re", "nu_im", "abs_nu", "log10_abs_nu_p"], pred_rows),
        "spurious_computed.csv": _csv_text(["scheme", "p", "index", "log10_abs"], comp_rows),
    }


def cmd_dae(cfg: dict) -> dict:
    dsys = read_dae_manifest(cfg["manifest"])
    red = dae.decouple(dsys, transpose=cfg["transpose"])
    sol = _run_solver(red, cfg)
    rows = []
    for m, slices in enumerate(sol.eigenvectors):
        worst = 0.0
        for i, y1 in enumerate(slices):
            y2 = dae.recover_algebraic(dsys, i, y1, cfg["transpose"])
            worst = max(worst, dae.algebraic_residual(dsys, i, y1, y2, cfg["transpose"]))
        rows.append([m, worst])
    files = _solution_files(sol)
    files["algebraic.csv"] = _csv_text(["multiplier", "max_algebraic_residual"], rows)
    return files


def _lptv_fixture(grid: PeriodicGrid, samples, prefix: str = "G") -> dict:
    files, names = {}, []
    for i, G in enumerate(samples, start=1):
        name = f"{prefix}_{i:05d}.mtx"
        files[name] = _mm_text(G)
        names.append(name)
    man = dict(_grid_entries(grid), samples=names)
    return files, man


def cmd_fixture(cfg: dict) -> dict:
    """Matrix Market fixtures with a manifest.

    ``toy``: the Stuart-Landau toy samples. ``zero``: ``G = 0`` of size
    ``n``. ``dae-toy``: an index-1 DAE embedding the toy samples
    (``manifest.json``) together with the core itself (``core_manifest.json``).
    """
    grid = bench.toy_grid(cfg["p"], tuple(cfg["pattern"]))
    kind = cfg["kind"]
    if kind == "zero":
        files, man = _lptv_fixture(grid, [sp.csc_matrix((cfg["n"], cfg["n"]))] * grid.p)
        files["manifest.json"] = _json_text(man)
        return files
    core, _ = bench.stuart_landau(cfg["alpha"], cfg["beta"], grid)
    files, man = _lptv_fixture(grid, core.samples)
    if kind == "toy":
        files["manifest.json"] = _json_text(man)
        return files
    files["core_manifest.json"] = _json_text(man)
    dsys = dae.embed_core(core, n2=cfg["n2"], seed=cfg["seed"], transpose=cfg["transpose"])
    Cn, Gn = [], []
    for i in range(1, grid.p + 1):
        C, G = dae.assemble_full(dsys, i)
        Cn.append(f"C_{i:05d}.mtx")
        Gn.append(f"DG_{i:05d}.mtx")
        files[Cn[-1]] = _mm_text(C)
        files[Gn[-1]] = _mm_text(G)
    files["manifest.json"] = _json_text(dict(_grid_entries(grid), C=Cn, G=Gn,
                                             differential=list(range(dsys.n1))))
    return files


HANDLERS = {"solve": cmd_solve, "convergence": cmd_convergence, "spurious": cmd_spurious,
            "dae": cmd_dae, "fixture": cmd_fixture}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--manifest", help="input manifest (overrides the config)")
    common.add_argument("--solver", choices=["dense", "ptoar"])
    common.add_argument("--scheme", choices=list(SCHEME_NAMES))
    common.add_argument("--k", type=int, help="number of dominant multipliers")
    common.add_argument("--tol", type=float)
    common.add_argument("--max-cycles", dest="max_cycles", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    parser = _Parser(prog="floquetms", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "solve": "dominant multipliers of a sampled system",
        "convergence": "convergence study on the Stuart-Landau toy model",
        "spurious": "parasitic root magnitudes against p",
        "dae": "multipliers of an index-1 DAE through its decoupled ODE",
        "fixture": "write Matrix Market test fixtures",
    }
    for name in COMMANDS:
        sp_ = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "fixture":
            sp_.add_argument("--kind", choices=["toy", "zero", "dae-toy"])
            sp_.add_argument("--p", type=int)
    return parser


def _fail(exc: FloquetError) -> int:
    code = _EXIT_BY_CATEGORY.get(exc.category, EXIT_NUMERICAL)
    rec = {"error": exc.category, "message": str(exc), "exit_code": code}
    for attr in ("slice_index", "block"):
        if hasattr(exc, attr):
            rec[attr] = getattr(exc, attr)
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        cfg = resolve_config(args.command, cfg, overrides)
        files = HANDLERS[args.command](cfg)
        write_outputs(cfg["out"], files)
    except FloquetError as exc:
        return _fail(exc)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
