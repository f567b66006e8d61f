"""``branchtail`` command line: classify / tail / laplace / verify.

Spec files are line based::

    # comment
    offspring = {1:0.5, 2:0.5}
    immigration = {0:0.5, 1:0.5}
    variant = curlyW
    pipeline = tail
    eps_min = 0.02
    eps_max = 0.3
    eps_points = 10
    replicates = 1000000
    seed = 1

Exit codes: 0 all checks pass, 1 a check failed, 2 parse error,
3 degenerate regime, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import laplace as lt
from . import verify as vf
from .asymptotics import Regime, UnclassifiedError, Variant, classify
from .distributions import (
    DistributionError,
    ImmigrationSpec,
    LiteralParseError,
    NotSupercriticalError,
    OffspringSpec,
    parse_literal,
)
from .estimate import InsufficientDataError
from .simulate import CappedPathError, SimConfig

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_DEGENERATE, EXIT_NUMERIC = 0, 1, 2, 3, 4

PIPELINES = ("classify", "tail", "laplace", "verify")
CHECKS = ("rate", "rate_W", "exp_oracle", "atom", "minimal_tree", "identities", "functional")


class SpecParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DegenerateSpecError(RuntimeError):
    pass


@dataclass
class ExperimentSpec:
    offspring: OffspringSpec
    immigration: ImmigrationSpec | None = None
    variant: Variant = Variant.CURLY_W
    pipeline: str = "classify"
    eps_min: float = 1e-3
    eps_max: float = 1e-1
    eps_points: int = 10
    lambda_min: float = 1e4
    lambda_max: float = 1e12
    lambda_points: int = 40
    replicates: int = 100_000
    generations: int = 20
    seed: int = 0
    tolerance: float = 0.10
    checks: tuple[str, ...] = ("rate",)
    hs_offspring: OffspringSpec | None = None
    source: str = ""
    raw: dict = field(default_factory=dict)

    @property
    def epsilons(self) -> np.ndarray:
        return np.geomspace(self.eps_min, self.eps_max, self.eps_points)

    @property
    def lambdas(self) -> np.ndarray:
        return np.geomspace(self.lambda_min, self.lambda_max, self.lambda_points)

    def sim_config(self, workers: int = 1) -> SimConfig:
        return SimConfig(self.generations, self.replicates, self.seed, workers=workers)

    def echo(self) -> dict:
        return {"tool": f"branchtail {__version__}", **self.raw}


_FLOATS = ("eps_min", "eps_max", "lambda_min", "lambda_max", "tolerance")
_INTS = ("eps_points", "lambda_points", "replicates", "generations", "seed")


def parse_spec(text: str, source: str = "") -> ExperimentSpec:
    raw: dict[str, tuple[str, int, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            raise SpecParseError("expected 'key = value'", lineno, len(body) - len(body.lstrip()) + 1)
        key, value = body.split("=", 1)
        key = key.strip()
        col = body.index("=") + 2 + (len(value) - len(value.lstrip()))
        if not key.isidentifier():
            raise SpecParseError(f"bad key {key!r}", lineno)
        if key in raw:
            raise SpecParseError(f"duplicate key {key!r}", lineno)
        raw[key] = (value.strip(), lineno, col)

    def literal(key):
        value, lineno, col = raw[key]
        try:
            return parse_literal(value)
        except LiteralParseError as exc:
            raise SpecParseError(str(exc), lineno, col + exc.column - 1) from None

    if "offspring" not in raw:
        raise SpecParseError("missing key 'offspring'", 1)
    kw: dict = {}
    known = set(_FLOATS) | set(_INTS) | {"offspring", "immigration", "variant", "pipeline", "checks", "hs_offspring"}
    for key, (value, lineno, col) in raw.items():
        if key not in known:
            raise SpecParseError(f"unknown key {key!r}", lineno)
        try:
            if key in _FLOATS:
                kw[key] = float(value)
            elif key in _INTS:
                kw[key] = int(value)
        except ValueError:
            raise SpecParseError(f"bad number {value!r} for {key}", lineno, col) from None
    def law(key, cls):
        pmf = literal(key)
        try:
            return cls(pmf)
        except DistributionError as exc:
            raise SpecParseError(str(exc), raw[key][1], raw[key][2]) from None

    kw["offspring"] = law("offspring", OffspringSpec)
    if "immigration" in raw and raw["immigration"][0] != "none":
        kw["immigration"] = law("immigration", ImmigrationSpec)
    if "hs_offspring" in raw:
        kw["hs_offspring"] = law("hs_offspring", OffspringSpec)
    if "variant" in raw:
        try:
            kw["variant"] = Variant(raw["variant"][0])
        except ValueError:
            raise SpecParseError(f"unknown variant {raw['variant'][0]!r}", raw["variant"][1], raw["variant"][2]) from None
    elif "immigration" not in kw:
        kw["variant"] = Variant.W_ONLY
    if "pipeline" in raw:
        if raw["pipeline"][0] not in PIPELINES:
            raise SpecParseError(f"unknown pipeline {raw['pipeline'][0]!r}", raw["pipeline"][1], raw["pipeline"][2])
        kw["pipeline"] = raw["pipeline"][0]
    if "checks" in raw:
        checks = tuple(c.strip() for c in raw["checks"][0].split(",") if c.strip())
        for c in checks:
            if c not in CHECKS:
                raise SpecParseError(f"unknown check {c!r}", raw["checks"][1], raw["checks"][2])
        kw["checks"] = checks
    spec = ExperimentSpec(**kw, source=source, raw={k: v[0] for k, v in raw.items()})
    if kw.get("variant", spec.variant) is not Variant.W_ONLY and spec.immigration is None:
        raise SpecParseError(f"variant {spec.variant.value} needs an immigration law", 1)
    if not spec.eps_min < spec.eps_max or not spec.lambda_min < spec.lambda_max:
        raise SpecParseError("grid needs min < max", 1)
    if spec.eps_points < 2 or spec.lambda_points < 2 or spec.replicates < 1 or spec.generations < 1:
        raise SpecParseError("grid points >= 2, replicates >= 1, generations >= 1 required", 1)
    return spec


def load_spec(path) -> ExperimentSpec:
    return parse_spec(Path(path).read_text(), source=str(path))


def _header(spec: ExperimentSpec, **extra) -> dict:
    return {**spec.echo(), **extra}


def run_pipeline(spec: ExperimentSpec, out_dir: Path, workers: int = 1) -> list[vf.Check]:
    """Execute one spec and write its artifacts. Returns the checks evaluated."""
    out_dir.mkdir(parents=True, exist_ok=True)
    report = classify(spec.offspring, spec.immigration, spec.variant)
    (out_dir / "regime.txt").write_text(report.to_text())
    if report.regime is Regime.DEGENERATE:
        raise DegenerateSpecError(report.warnings[0])
    if spec.pipeline == "classify":
        return []
    checks: list[vf.Check] = []
    cfg = spec.sim_config(workers)
    off, imm = spec.offspring, spec.immigration
    rate_route = spec.pipeline
    if rate_route == "verify":
        rate_route = "tail" if report.model == "power" else "laplace"
    for name in spec.checks if spec.pipeline == "verify" else ("rate",):
        if name == "rate":
            if report.regime is Regime.UNCLASSIFIED:
                raise DegenerateSpecError("unclassified regime: " + "; ".join(report.warnings))
            if rate_route == "tail":
                if spec.variant is Variant.W_ONLY and report.rho > 0:
                    checks += vf.atom_frequency(off, cfg, spec.tolerance)
                    continue
                got, curve = vf.tail_rate(off, imm, spec.variant, cfg, spec.epsilons, spec.tolerance)
                curve.to_csv(out_dir / "tail.csv", _header(spec, case=report.regime.value))
            else:
                got, curve = vf.laplace_rate(off, imm, spec.variant, spec.lambdas, spec.tolerance)
                curve.to_csv(out_dir / "laplace.csv", _header(spec, case=report.regime.value))
            checks += got
        elif name == "rate_W":
            got, _ = vf.laplace_rate(off, None, Variant.W_ONLY, spec.lambdas, spec.tolerance, "laplace rate (W alone)")
            checks += got
        elif name == "exp_oracle":
            checks += vf.exp_oracle(cfg, spec.epsilons, tol_rate=spec.tolerance)
        elif name == "atom":
            checks += vf.atom_frequency(off, replace(cfg, replicates=min(cfg.replicates, 100_000)))
        elif name == "minimal_tree":
            checks += vf.minimal_tree_oracle(seed=spec.seed)
        elif name == "identities":
            hs_off = spec.hs_offspring or OffspringSpec(parse_literal("{0:0.25, 2:0.75}"))
            checks += vf.identities(off, imm, hs_off, cfg)
        elif name == "functional":
            checks += vf.functional()
    lines = [f"# {k} = {v}" for k, v in _header(spec, case=report.regime.value).items()]
    lines += [c.line() for c in checks]
    lines.append("RESULT " + ("PASS" if all(c.passed for c in checks) else "FAIL"))
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n")
    return checks


def run(spec_path, out_dir=None, pipeline=None, seed=None, replicates=None, threads=1, stream=sys.stdout) -> int:
    """Run one spec file; returns the exit status."""
    try:
        spec = load_spec(spec_path)
    except (SpecParseError, OSError) as exc:
        print(f"error: {spec_path}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if pipeline:
        spec.pipeline = pipeline
    if seed is not None:
        spec.seed = seed
        spec.raw["seed"] = str(seed)
    if replicates is not None:
        spec.replicates = replicates
        spec.raw["replicates"] = str(replicates)
    out = Path(out_dir) if out_dir else Path(spec_path).with_suffix("")
    code, _ = _execute(spec, out, threads, stream)
    return code


def _execute(spec, out: Path, threads: int, stream) -> tuple[int, list[vf.Check]]:
    try:
        checks = run_pipeline(spec, out, threads)
    except (DegenerateSpecError, lt.DegenerateError, UnclassifiedError, NotSupercriticalError) as exc:
        print(f"degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE, []
    except (CappedPathError, lt.DepthExceededError, InsufficientDataError, FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, []
    for c in checks:
        print(c.line(), file=stream)
    return (EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL), checks


def verify_all(suite_dir, out_dir=None, threads=1, stream=sys.stdout) -> int:
    """Run every ``*.spec`` in a directory through ``verify``; write ``summary.csv``."""
    suite = Path(suite_dir)
    specs = sorted(suite.glob("*.spec")) if suite.is_dir() else []
    if not specs:
        print(f"error: no .spec files in {suite_dir}", file=sys.stderr)
        return EXIT_PARSE
    out_root = Path(out_dir) if out_dir else suite / "out"
    rows, worst = [], EXIT_OK
    header = "spec,case,predicted,fitted,tolerance,status,exit,wall_s"
    print(header, file=stream)
    for path in specs:
        t0 = time.perf_counter()
        case, predicted, fitted, tol = "", "", "", ""
        try:
            spec = load_spec(path)
            spec.pipeline = "verify"
            try:
                case = classify(spec.offspring, spec.immigration, spec.variant).regime.value
            except Exception:
                case = "?"
            code, checks = _execute(spec, out_root / path.stem, threads, io.StringIO())
        except SpecParseError as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            code, checks = EXIT_PARSE, []
        if checks:
            head = checks[0]
            predicted, fitted, tol = f"{head.predicted:.6g}", f"{head.observed:.6g}", f"{head.tolerance:g}"
        status = "PASS" if code == EXIT_OK else "FAIL"
        row = f"{path.stem},{case},{predicted},{fitted},{tol},{status},{code},{time.perf_counter() - t0:.1f}"
        print(row, file=stream)
        rows.append(row)
        worst = max(worst, code)
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "summary.csv").write_text(header + "\n" + "\n".join(rows) + "\n")
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="branchtail", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"branchtail {__version__}")
    parser.add_argument("command", choices=PIPELINES)
    parser.add_argument("spec", help="spec file (verify also accepts a directory of .spec files)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--out-dir")
    parser.add_argument("--threads", type=int, default=1, help="worker processes; never changes output values")
    args = parser.parse_args(argv)
    if args.command == "verify" and Path(args.spec).is_dir():
        return verify_all(args.spec, args.out_dir, args.threads)
    return run(args.spec, args.out_dir, args.command, args.seed, args.replicates, args.threads)


if __name__ == "__main__":
    sys.exit(main())
