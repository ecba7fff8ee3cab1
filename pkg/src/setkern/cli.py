"""Batch command-line front-end.

Subcommands load one YAML config, run a fixed suite of checks, and emit a
JSON-lines report (optionally also CSV).  Exit codes: 0 all checks passed,
1 at least one check failed, 2 config or parse error.  Reports are
byte-deterministic for fixed (config, seed), including across ``--workers``
settings; pass ``--timings`` to record per-check runtimes at the cost of
that determinism.
"""

from __future__ import annotations

import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .config import ExperimentConfig, load_config
from .errors import ConfigError, SetKernError
from .factorization import (
    Factorization,
    RkhsElement,
    b_range_dimension,
    build_T,
    check_absolute_continuity,
    coisometry_b_star,
    isometry_b,
    onb_factorization,
    realize,
    reverse_direction,
    write_factorization,
)
from .field import cross_moment_check, ito_isometry_check, refinement_sweep
from .kernels import SetKernel, gram
from .markov import (
    MarkovChain,
    check_transient,
    contractivity_check,
    green,
    green_kernel,
    green_root,
    reversibility_defect,
    spectral_gap,
)
from .measure import MeasurableSet
from .report import RunReport

DEFAULT_TOLERANCES: dict[str, float] = {
    "symmetry": 1e-12,
    "gram-psd": 1e-10,
    "schwarz": 1e-10,
    "absolute-continuity": 1e-10,
    "detailed-balance": 1e-10,
    "contractivity": 1e-10,
    "transience-gap": 1e-10,
    "realization": 1e-8,
    "density": 1e-9,
    "isometry": 1e-9,
    "adjoint": 1e-9,
    "parseval": 1e-9,
    "parseval-invariance": 1e-10,
    "green-identity": 1e-9,
    "series-solve": 1e-8,
    "green-factor": 1e-8,
    "fundamental-match": 1e-8,
    "mc-sigma": 5.0,
    "q-monotone": 1e-10,
    "q-final": 1e-9,
}


@dataclass
class RunContext:
    cfg: ExperimentConfig
    tol: dict[str, float]
    seed: int
    samples: int
    workers: int
    timings: bool

    def tick(self) -> float | None:
        return time.perf_counter() if self.timings else None

    def tock(self, t0: float | None) -> float | None:
        return time.perf_counter() - t0 if t0 is not None else None

    def probe_family(self) -> list[MeasurableSet]:
        """Singletons plus the configured family; decisive for biadditive kernels."""
        pool = list(self.cfg.space.singletons())
        for A in self.cfg.family:
            if A not in pool:
                pool.append(A)
        return pool


def _resolve_tolerances(cfg: ExperimentConfig, overrides: tuple[str, ...]) -> dict[str, float]:
    tol = dict(DEFAULT_TOLERANCES)
    for name, value in cfg.tolerances.items():
        if name not in tol:
            raise ConfigError(f"unknown tolerance {name!r}")
        tol[name] = float(value)
    for item in overrides:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects NAME=VALUE, got {item!r}")
        if name not in tol:
            raise ConfigError(f"unknown tolerance {name!r}")
        try:
            tol[name] = float(value)
        except ValueError:
            raise ConfigError(f"--tol {name}: {value!r} is not a number") from None
    return tol


# ---------------------------------------------------------------------------
# check suites


def _chain_checks(report: RunReport, ctx: RunContext, chain: MarkovChain) -> None:
    cfg = ctx.cfg
    if cfg.enabled("detailed-balance"):
        t0 = ctx.tick()
        defect = reversibility_defect(chain)
        report.add(
            "detailed-balance",
            "detailed-balance",
            defect <= ctx.tol["detailed-balance"],
            value=defect,
            bound=ctx.tol["detailed-balance"],
            runtime=ctx.tock(t0),
        )
    if cfg.enabled("contractivity"):
        t0 = ctx.tick()
        ok = contractivity_check(chain, seed=ctx.seed, tol=ctx.tol["contractivity"])
        report.add("contractivity", "contractivity", ok, runtime=ctx.tock(t0))
    if cfg.enabled("transience"):
        t0 = ctx.tick()
        try:
            rho = check_transient(chain)
            ok = True
        except SetKernError as e:
            rho = getattr(e, "spectral_bound", None)
            ok = False
        report.add(
            "transience",
            "transience",
            ok,
            value=rho,
            bound=1 - ctx.tol["transience-gap"],
            runtime=ctx.tock(t0),
        )


def _kernel_checks(report: RunReport, ctx: RunContext, kernel: SetKernel | None) -> None:
    cfg = ctx.cfg
    pool = ctx.probe_family()
    pairs = [(A, B) for i, A in enumerate(pool) for B in pool[i:]]

    if cfg.enabled("symmetry"):
        t0 = ctx.tick()
        value = None
        if kernel is not None:
            value = max(abs(kernel(A, B) - kernel(B, A)) for A, B in pairs)
        report.add(
            "symmetry",
            "kernel-symmetry",
            kernel is not None and value <= ctx.tol["symmetry"],
            value=value,
            bound=ctx.tol["symmetry"],
            runtime=ctx.tock(t0),
        )
    if cfg.enabled("gram-psd"):
        t0 = ctx.tick()
        value = bound = None
        ok = False
        if kernel is not None:
            g = gram(kernel, pool)
            scale = max(1.0, abs(float(np.trace(g.entries))))
            value = g.min_eigenvalue
            bound = -ctx.tol["gram-psd"] * scale
            ok = value >= bound
        report.add("gram-psd", "positive-definite", ok, value=value, bound=bound, runtime=ctx.tock(t0))
    if cfg.enabled("schwarz"):
        t0 = ctx.tick()
        value = None
        ok = False
        if kernel is not None:
            value = max(kernel(A, B) ** 2 - kernel(A, A) * kernel(B, B) for A, B in pairs)
            ok = value <= ctx.tol["schwarz"]
        report.add("schwarz", "schwarz", ok, value=value, bound=ctx.tol["schwarz"], runtime=ctx.tock(t0))
    if cfg.enabled("absolute-continuity"):
        t0 = ctx.tick()
        value = None
        ok = False
        if kernel is not None:
            ac = check_absolute_continuity(kernel, cfg.family, tol=ctx.tol["absolute-continuity"])
            value = max((v for _, v in ac.violations), default=0.0)
            ok = ac.ok
        report.add(
            "absolute-continuity",
            "absolute-continuity",
            ok,
            value=value,
            bound=ctx.tol["absolute-continuity"],
            runtime=ctx.tock(t0),
        )


def _validate_suite(report: RunReport, ctx: RunContext) -> SetKernel | None:
    if ctx.cfg.chain is not None:
        _chain_checks(report, ctx, ctx.cfg.chain)
    kernel = None
    if ctx.cfg.kernel_type is not None:
        try:
            kernel = ctx.cfg.kernel()
        except ConfigError:
            raise
        except SetKernError:
            kernel = None  # dependent checks are recorded as failed
        _kernel_checks(report, ctx, kernel)
    return kernel


def _random_element(rng: np.random.Generator, pool: list[MeasurableSet]) -> RkhsElement:
    k = int(rng.integers(1, 5))
    idx = rng.integers(0, len(pool), size=k)
    coefs = rng.uniform(-2.0, 2.0, size=k)
    return RkhsElement(tuple((float(c), pool[int(i)]) for c, i in zip(coefs, idx)))


def _factorize_suite(report: RunReport, ctx: RunContext, kernel: SetKernel | None) -> Factorization | None:
    cfg = ctx.cfg
    space = cfg.space
    pool = ctx.probe_family()

    fact = None
    if cfg.enabled("realization"):
        t0 = ctx.tick()
        value = None
        ok = False
        if kernel is not None:
            try:
                fact = realize(kernel, tol=ctx.tol["realization"])
                value = fact.residual
                ok = True
            except SetKernError:
                fact = None
        report.add(
            "realization",
            "realization",
            ok,
            value=value,
            bound=ctx.tol["realization"],
            runtime=ctx.tock(t0),
        )
    elif kernel is not None:
        try:
            fact = realize(kernel, tol=ctx.tol["realization"])
        except SetKernError:
            fact = None

    if cfg.enabled("density-consistency"):
        t0 = ctx.tick()
        value = None
        ok = False
        if fact is not None:
            rep = reverse_direction(fact, tol=math.inf)
            value = rep.max_residual
            ok = value <= ctx.tol["density"] and rep.absolute_continuity_ok
        report.add(
            "density-consistency",
            "density",
            ok,
            value=value,
            bound=ctx.tol["density"],
            runtime=ctx.tock(t0),
        )

    rng = np.random.default_rng(ctx.seed)
    if cfg.enabled("isometry"):
        t0 = ctx.tick()
        value = None
        ok = False
        if fact is not None:
            worst = 0.0
            for _ in range(1000):
                el = _random_element(rng, pool)
                image = isometry_b(fact, el)
                n2 = el.norm_squared(kernel)
                defect = abs(space.norm_squared(image) - n2) / max(1.0, abs(n2))
                worst = max(worst, defect)
            value = worst
            ok = value <= ctx.tol["isometry"]
        report.add("isometry", "isometry", ok, value=value, bound=ctx.tol["isometry"], runtime=ctx.tock(t0))

    if cfg.enabled("adjoint"):
        t0 = ctx.tick()
        value = None
        ok = False
        if fact is not None:
            worst = 0.0
            for _ in range(200):
                phi = rng.standard_normal(space.size)
                el = _random_element(rng, pool)
                lhs = sum(c * coisometry_b_star(fact, phi, A) for c, A in el.terms)
                rhs = space.inner(phi, isometry_b(fact, el))
                worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
            value = worst
            ok = value <= ctx.tol["adjoint"]
        report.add("adjoint", "adjoint", ok, value=value, bound=ctx.tol["adjoint"], runtime=ctx.tock(t0))

    if cfg.enabled("parseval") or cfg.enabled("parseval-invariance"):
        t0 = ctx.tick()
        match = invariance = None
        ok_match = ok_inv = False
        if fact is not None:
            w = space.weight_array
            pos = np.flatnonzero(space.positive)
            basis1 = []
            for i in pos:
                v = np.zeros(space.size)
                v[i] = 1.0 / np.sqrt(w[i])
                basis1.append(v)
            Q, _ = np.linalg.qr(rng.standard_normal((len(pos), len(pos))))
            basis2 = []
            for j in range(len(pos)):
                v = np.zeros(space.size)
                v[pos] = Q[:, j] / np.sqrt(w[pos])
                basis2.append(v)
            match = invariance = 0.0
            for A, B in [(A, B) for i, A in enumerate(pool) for B in pool[i:]]:
                s1 = onb_factorization(fact, basis1, A, B)
                s2 = onb_factorization(fact, basis2, A, B)
                k = kernel(A, B)
                match = max(match, abs(s1 - k), abs(s2 - k))
                invariance = max(invariance, abs(s1 - s2))
            ok_match = match <= ctx.tol["parseval"]
            ok_inv = invariance <= ctx.tol["parseval-invariance"]
        runtime = ctx.tock(t0)
        if cfg.enabled("parseval"):
            report.add("parseval", "parseval", ok_match, value=match, bound=ctx.tol["parseval"], runtime=runtime)
        if cfg.enabled("parseval-invariance"):
            report.add(
                "parseval-invariance",
                "parseval",
                ok_inv,
                value=invariance,
                bound=ctx.tol["parseval-invariance"],
                runtime=runtime,
            )

    if cfg.enabled("range-rank"):
        t0 = ctx.tick()
        value = None
        expected = cfg.expect.get("range-rank")
        ok = False
        if fact is not None:
            rank = b_range_dimension(fact, cfg.family)
            value = float(rank)
            ok = expected is None or rank == int(expected)
        report.add("range-rank", "range-rank", ok, value=value, bound=expected, runtime=ctx.tock(t0))

    return fact


def _green_suite(report: RunReport, ctx: RunContext) -> None:
    cfg = ctx.cfg
    chain = cfg.chain
    _chain_checks(report, ctx, chain)

    if cfg.enabled("spectral-gap"):
        t0 = ctx.tick()
        gap = spectral_gap(chain)
        report.add(
            "spectral-gap",
            "spectral-gap",
            gap >= ctx.tol["transience-gap"],
            value=gap,
            bound=ctx.tol["transience-gap"],
            runtime=ctx.tock(t0),
        )

    data = None
    try:
        data = green(chain)
    except SetKernError:
        data = None

    if cfg.enabled("green-identity"):
        t0 = ctx.tick()
        value = None
        ok = False
        if data is not None:
            n = cfg.space.size
            P = chain.transitions
            value = float(np.abs((np.eye(n) - P) @ data.G - np.eye(n)).max())
            ok = value <= ctx.tol["green-identity"]
        report.add(
            "green-identity",
            "green-identity",
            ok,
            value=value,
            bound=ctx.tol["green-identity"],
            runtime=ctx.tock(t0),
        )
    if cfg.enabled("series-solve"):
        t0 = ctx.tick()
        value = data.series_agreement if data is not None else None
        ok = data is not None and value <= ctx.tol["series-solve"]
        report.add(
            "series-solve",
            "series-agreement",
            ok,
            value=value,
            bound=ctx.tol["series-solve"],
            runtime=ctx.tock(t0),
        )

    kernel = None
    if data is not None:
        try:
            kernel = green_kernel(chain)
        except SetKernError:
            kernel = None

    if cfg.enabled("green-psd"):
        t0 = ctx.tick()
        value = bound = None
        ok = False
        if kernel is not None:
            g = gram(kernel, ctx.probe_family())
            scale = max(1.0, abs(float(np.trace(g.entries))))
            value = g.min_eigenvalue
            bound = -ctx.tol["gram-psd"] * scale
            ok = value >= bound
        report.add("green-psd", "positive-definite", ok, value=value, bound=bound, runtime=ctx.tock(t0))

    if cfg.enabled("green-factor"):
        t0 = ctx.tick()
        value = None
        ok = False
        if kernel is not None:
            space = cfg.space
            if space.size <= 6:
                sets = [
                    MeasurableSet(frozenset(i for i in range(space.size) if mask >> i & 1))
                    for mask in range(2**space.size)
                ]
            else:
                sets = ctx.probe_family()
            C = np.array([space.indicator(A) for A in sets])
            kvecs = C @ green_root(chain).T
            inner = kvecs @ (space.weight_array[:, None] * kvecs.T)
            target = C @ (space.weight_array[:, None] * data.G) @ C.T
            value = float(np.abs(inner - target).max())
            ok = value <= ctx.tol["green-factor"]
        report.add(
            "green-factor",
            "green-factorization",
            ok,
            value=value,
            bound=ctx.tol["green-factor"],
            runtime=ctx.tock(t0),
        )

    if cfg.enabled("fundamental-match"):
        t0 = ctx.tick()
        value = None
        ok = False
        if kernel is not None:
            T = build_T(kernel)
            value = float(np.abs(T - data.G).max())
            ok = value <= ctx.tol["fundamental-match"]
        report.add(
            "fundamental-match",
            "fundamental-matrix",
            ok,
            value=value,
            bound=ctx.tol["fundamental-match"],
            runtime=ctx.tock(t0),
        )


def _sweep_records(report: RunReport, ctx: RunContext, kernel: SetKernel, fact: Factorization) -> None:
    cfg = ctx.cfg
    t0 = ctx.tick()
    qs = refinement_sweep(kernel, fact, cfg.phi, cfg.partitions)
    runtime = ctx.tock(t0)
    for i, q in enumerate(qs):
        if cfg.enabled(f"q-level-{i}"):
            report.add(f"q-level-{i}", "projection-moment", True, value=q, runtime=runtime)
    exact = fact.s_norm_squared(cfg.phi)
    if cfg.enabled("q-monotone"):
        worst = max((qs[i] - qs[i + 1] for i in range(len(qs) - 1)), default=0.0)
        report.add(
            "q-monotone",
            "projection-monotone",
            worst <= ctx.tol["q-monotone"],
            value=worst,
            bound=ctx.tol["q-monotone"],
        )
    if cfg.enabled("q-bound"):
        excess = qs[-1] - exact
        report.add(
            "q-bound",
            "projection-limit",
            excess <= ctx.tol["q-final"],
            value=excess,
            bound=ctx.tol["q-final"],
        )
    finest = cfg.partitions[-1]
    if set(finest.blocks) == set(cfg.space.singletons()) and cfg.enabled("q-attained"):
        report.add(
            "q-attained",
            "projection-limit",
            abs(qs[-1] - exact) <= ctx.tol["q-final"],
            value=abs(qs[-1] - exact),
            bound=ctx.tol["q-final"],
        )


def _mc_records(report: RunReport, ctx: RunContext, kernel: SetKernel, fact: Factorization) -> None:
    cfg = ctx.cfg
    if cfg.enabled("ito-isometry"):
        t0 = ctx.tick()
        res = ito_isometry_check(
            kernel, fact, cfg.phi, ctx.samples, seed=ctx.seed, workers=ctx.workers
        )
        report.add(
            "ito-isometry",
            "ito-isometry",
            res.within(ctx.tol["mc-sigma"]),
            value=res.deviation_sigmas,
            bound=ctx.tol["mc-sigma"],
            runtime=ctx.tock(t0),
        )
    if cfg.psi is not None and cfg.enabled("cross-moment"):
        t0 = ctx.tick()
        res = cross_moment_check(
            kernel, fact, cfg.phi, cfg.psi, ctx.samples, seed=ctx.seed, workers=ctx.workers
        )
        report.add(
            "cross-moment",
            "cross-moment",
            res.within(ctx.tol["mc-sigma"]),
            value=res.deviation_sigmas,
            bound=ctx.tol["mc-sigma"],
            runtime=ctx.tock(t0),
        )


# ---------------------------------------------------------------------------
# command plumbing


def _common_options(f):
    options = [
        click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False)),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Override mc.seed."),
        click.option("--samples", type=click.IntRange(1), default=None, help="Override mc.samples."),
        click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Report JSONL path."),
        click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Also write a CSV table."),
        click.option("--tol", "tol_overrides", multiple=True, metavar="NAME=VALUE", help="Override a tolerance (repeatable)."),
        click.option("--workers", type=click.IntRange(1), default=1, show_default=True, help="Worker threads for sampling."),
        click.option("--timings", is_flag=True, help="Record per-check runtimes (breaks byte-determinism)."),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


def _out_dir() -> Path:
    return Path(os.environ.get("SETKERN_OUT", "."))


def _prepare(command, config_path, seed, samples, tol_overrides, workers, timings):
    cfg = load_config(config_path)
    tol = _resolve_tolerances(cfg, tol_overrides)
    ctx = RunContext(
        cfg=cfg,
        tol=tol,
        seed=cfg.seed if seed is None else seed,
        samples=cfg.samples if samples is None else samples,
        workers=workers,
        timings=timings,
    )
    report = RunReport(
        command=command, seed=ctx.seed, samples=ctx.samples, tolerances=tol
    )
    return ctx, report


def _finish(report: RunReport, command: str, out_path, csv_path) -> None:
    out = Path(out_path) if out_path else _out_dir() / f"{command}-report.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_jsonl(out)
    if csv_path:
        report.write_csv(csv_path)
    for line in report.summary_lines():
        click.echo(line)
    click.echo(f"report written to {out}")
    sys.exit(0 if report.all_passed else 1)


def _config_abort(e: ConfigError) -> None:
    click.echo(f"config error: {e}", err=True)
    sys.exit(2)


@click.group()
def main():
    """Validate, factorize, and simulate set-indexed kernels from config files."""


@main.command()
@_common_options
def validate(config_path, seed, samples, out_path, csv_path, tol_overrides, workers, timings):
    """Kernel sanity checks: symmetry, positivity, Schwarz, null sets, chain balance."""
    try:
        ctx, report = _prepare("validate", config_path, seed, samples, tol_overrides, workers, timings)
        _validate_suite(report, ctx)
    except ConfigError as e:
        _config_abort(e)
    _finish(report, "validate", out_path, csv_path)


@main.command()
@_common_options
@click.option(
    "--export",
    "export_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Factorization export path (JSON).",
)
def factorize(config_path, seed, samples, out_path, csv_path, tol_overrides, workers, timings, export_path):
    """Realize the kernel in weighted L2 and verify the isometry calculus."""
    try:
        ctx, report = _prepare("factorize", config_path, seed, samples, tol_overrides, workers, timings)
        kernel = _validate_suite(report, ctx)
        fact = None
        if report.all_passed:
            fact = _factorize_suite(report, ctx, kernel)
        if fact is not None:
            export = Path(export_path) if export_path else _out_dir() / "factorization.json"
            export.parent.mkdir(parents=True, exist_ok=True)
            write_factorization(fact, export, family=ctx.cfg.family)
            click.echo(f"factorization written to {export}")
    except ConfigError as e:
        _config_abort(e)
    _finish(report, "factorize", out_path, csv_path)


@main.command("markov-green")
@_common_options
def markov_green(config_path, seed, samples, out_path, csv_path, tol_overrides, workers, timings):
    """Chain checks plus Green function, Green kernel, and its factorization."""
    try:
        ctx, report = _prepare("markov-green", config_path, seed, samples, tol_overrides, workers, timings)
        if ctx.cfg.chain is None:
            raise ConfigError("markov-green requires a chain section")
        _green_suite(report, ctx)
    except ConfigError as e:
        _config_abort(e)
    _finish(report, "markov-green", out_path, csv_path)


@main.command()
@_common_options
def simulate(config_path, seed, samples, out_path, csv_path, tol_overrides, workers, timings):
    """Monte Carlo second-moment checks (and the projection sweep when configured)."""
    try:
        ctx, report = _prepare("simulate", config_path, seed, samples, tol_overrides, workers, timings)
        if ctx.cfg.phi is None:
            raise ConfigError("simulate requires a phi section")
        kernel = _validate_suite(report, ctx)
        fact = None
        if report.all_passed:
            fact = _factorize_suite(report, ctx, kernel)
        if fact is not None:
            _mc_records(report, ctx, kernel, fact)
            if ctx.cfg.partitions:
                _sweep_records(report, ctx, kernel, fact)
    except ConfigError as e:
        _config_abort(e)
    _finish(report, "simulate", out_path, csv_path)


@main.command("refine-sweep")
@_common_options
def refine_sweep(config_path, seed, samples, out_path, csv_path, tol_overrides, workers, timings):
    """Projection second moments along the configured partition chain."""
    try:
        ctx, report = _prepare("refine-sweep", config_path, seed, samples, tol_overrides, workers, timings)
        if ctx.cfg.phi is None:
            raise ConfigError("refine-sweep requires a phi section")
        if not ctx.cfg.partitions:
            raise ConfigError("refine-sweep requires a partitions section")
        fact = None
        try:
            kernel = ctx.cfg.kernel()
            fact = realize(kernel, tol=ctx.tol["realization"])
        except ConfigError:
            raise
        except SetKernError:
            report.add("realization", "realization", False, bound=ctx.tol["realization"])
        if fact is not None:
            _sweep_records(report, ctx, kernel, fact)
    except ConfigError as e:
        _config_abort(e)
    _finish(report, "refine-sweep", out_path, csv_path)


if __name__ == "__main__":
    main()
