"""Command-line front end: verification subcommands with run manifests.

Every subcommand writes its numeric outputs (CSV/JSON) plus a JSON manifest
recording the subcommand, the fully resolved parameter map, the tool version,
and a SHA-256 digest per output file; `replay-manifest` re-executes the run
and verifies the digests bit-exactly.

Exit codes: 0 all checks pass, 1 check failure, 2 usage error, 3 solver failure.
"""
from __future__ import annotations

import concurrent.futures
import datetime
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import asymfit, doubledelta, leaky2d, ops1d
from .numcore import EigensolveError, RejectedInputError

EXIT_PASS, EXIT_CHECK_FAIL, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_manifest(outdir: Path, subcommand: str, params: dict,
                    outputs: list[Path]) -> Path:
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "tool_version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path = outdir / f"{subcommand}.manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2) + "\n")
    return path


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    config = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"bad config line: {line!r}")
        key, value = line.split("=", 1)
        config[key.strip().replace("-", "_")] = value.strip()
    return config


def _apply_config(ctx: click.Context) -> None:
    """Fill parameters from the config file where no flag was given."""
    config = ctx.obj.get("config", {})
    for name, value in config.items():
        if name not in ctx.params:
            continue
        src = ctx.get_parameter_source(name)
        if src is not None and src.name == "DEFAULT":
            param = next(p for p in ctx.command.params if p.name == name)
            if param.multiple:
                ctx.params[name] = tuple(
                    param.type.convert(v, param, ctx) for v in value.split(","))
            else:
                ctx.params[name] = param.type.convert(value, param, ctx)


@click.group(name="cuspspec")
@click.option("--output-dir", envvar="CUSPSPEC_OUTPUT_DIR", default=".",
              type=click.Path(file_okay=False), help="directory for outputs")
@click.option("--config", default=None, type=click.Path(exists=True, dir_okay=False),
              help="flat key=value configuration file (flags win)")
@click.version_option(__version__)
@click.pass_context
def main(ctx, output_dir, config):
    """Numerical laboratory for delta-well spectra on a power cusp."""
    ctx.ensure_object(dict)
    ctx.obj["outdir"] = Path(output_dir)
    ctx.obj["outdir"].mkdir(parents=True, exist_ok=True)
    ctx.obj["config"] = _load_config(config)


def _fmt17(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# core runners (shared by subcommands and manifest replay)

def _run_model_a(params: dict, outdir: Path) -> tuple[list[Path], int, str]:
    result = ops1d.model_a_eigenvalues(params["p"], params["n"],
                                       params["cells"])
    lines = ["n,eigenvalue"]
    lines += [f"{i+1},{_fmt17(v)}" for i, v in enumerate(result.eigenvalues)]
    out = outdir / "model_a.csv"
    _atomic_write(out, "\n".join(lines) + "\n")
    table = "\n".join(f"E_{i+1} = {v:.8g}"
                      for i, v in enumerate(result.eigenvalues))
    return [out], EXIT_PASS, table


def _run_sigma(params: dict, outdir: Path) -> tuple[list[Path], int, str]:
    rows = doubledelta.sigma_table(params["x_values"])
    lines = ["x,sigma,kappa_even,kappa_odd"]
    for r in rows:
        odd = "" if r["kappa_odd"] is None else _fmt17(r["kappa_odd"])
        lines.append(f"{_fmt17(r['x'])},{_fmt17(r['sigma'])},"
                     f"{_fmt17(r['kappa_even'])},{odd}")
    out = outdir / "sigma.csv"
    _atomic_write(out, "\n".join(lines) + "\n")
    table = "\n".join(
        f"x = {r['x']:.8g}  sigma = {r['sigma']:.8g}  "
        f"second bound state: {'yes' if r['kappa_odd'] is not None else 'no'}"
        for r in rows)
    return [out], EXIT_PASS, table


def _run_scaling_check(params: dict, outdir: Path) -> tuple[list[Path], int, str]:
    check = (ops1d.check_scaling_K_to_C if params["which"] == "k-to-c"
             else ops1d.check_scaling_Z_to_B)
    kwargs = dict(n_cells=params["cells"], rhs_fault=params["inject_fault"])
    if params["which"] == "k-to-c":
        kwargs["variant"] = params["variant"]
    report = check(params["p"], params["h"], params["k"], **kwargs)
    out = outdir / "scaling_check.json"
    _atomic_write(out, report.to_json() + "\n")
    status = "PASS" if report.passed else "FAIL"
    table = (f"{report.identity}: defect = {report.defect:.8g} -> {status}")
    return [out], EXIT_PASS if report.passed else EXIT_CHECK_FAIL, table


def _run_c_to_a_rate(params: dict, outdir: Path) -> tuple[list[Path], int, str]:
    report = ops1d.rate_C_to_A(params["p"], params["n"], params["mu_values"])
    out = outdir / "c_to_a_rate.json"
    _atomic_write(out, report.to_json() + "\n")
    lines = [f"reference level {report.n}: {report.reference:.8g}"]
    for mu, en, ed in zip(report.mu_list, report.errors_neumann,
                          report.errors_dirichlet):
        lines.append(f"mu = {mu:.8g}  err_N = {en:.8g}  err_D = {ed:.8g}")
    lines.append(f"log-log slopes: N {report.slope_neumann:.8g}, "
                 f"D {report.slope_dirichlet:.8g}")
    lines.append("PASS" if report.passed else "FAIL")
    return [out], EXIT_PASS if report.passed else EXIT_CHECK_FAIL, \
        "\n".join(lines)


def _sweep_worker(args):
    p, eps, alpha, k_eigs, base_cells, band_levels, quad_order = args
    curve = leaky2d.CuspCurve(p, eps)
    try:
        mesh = leaky2d.build_mesh(curve, base_cells, band_levels,
                                  alpha_target=alpha)
        assembly = leaky2d.assemble(curve, mesh, alpha, quad_order)
        result = leaky2d.solve_leaky(assembly, k_eigs)
        return alpha, [float(v) for v in result.eigenvalues], None
    except EigensolveError as exc:
        return alpha, None, str(exc)


def _run_leaky_sweep(params: dict, outdir: Path) -> tuple[list[Path], int, str]:
    alphas = sorted(params["alpha_values"])
    jobs = params.get("jobs", 1)
    work = [(params["p"], params["eps"], a, params["k_eigs"],
             params["base_cells"], params["band_levels"],
             params["quad_order"]) for a in alphas]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(_sweep_worker, work))
    else:
        raw = [_sweep_worker(w) for w in work]
    lines = ["alpha,n,eigenvalue,secondary"]
    records = []
    failures = []
    for alpha, values, error in raw:
        if error is not None:
            failures.append(f"alpha = {alpha}: {error}")
            continue
        records.append(asymfit.SweepRecord(alpha, tuple(values)))
        for n, v in enumerate(values, start=1):
            lines.append(f"{_fmt17(alpha)},{n},{_fmt17(v)},"
                         f"{_fmt17(v + alpha ** 2)}")
    out_csv = outdir / "leaky_sweep.csv"
    _atomic_write(out_csv, "\n".join(lines) + "\n")
    outputs = [out_csv]
    text = [f"solved {len(records)}/{len(alphas)} couplings"] + failures
    code = EXIT_PASS
    if failures:
        code = EXIT_SOLVER
    if params["fit"] and len(records) >= 4:
        try:
            fit = asymfit.fit_power_law(records, params["p"], 1)
        except RejectedInputError as exc:
            text.append(f"fit rejected: {exc}")
            code = max(code, EXIT_CHECK_FAIL)
        else:
            out_fit = outdir / "leaky_fit.json"
            _atomic_write(out_fit, fit.to_json() + "\n")
            outputs.append(out_fit)
            text.append(fit.table())
            ok = fit.exponent_in(1.35, 1.65) and fit.prefactor_within(0.25)
            text.append("fit windows: " + ("PASS" if ok else "FAIL"))
            if not ok:
                code = max(code, EXIT_CHECK_FAIL)
    return outputs, code, "\n".join(text)


def _run_chain(params: dict, outdir: Path) -> tuple[list[Path], int, str]:
    report = asymfit.effective_chain_report(
        params["p"], params["h_values"], params["k"],
        n_levels=params["n"], n_cells=params["cells"])
    out = outdir / "chain.csv"
    _atomic_write(out, report.CSV_HEADER + "\n"
                  + "\n".join(report.to_csv_rows()) + "\n")
    ok = all(report.monotone(n, w)
             for n in range(1, params["n"] + 1) for w in ("K", "Z"))
    text = report.table() + "\nmonotone deviations: " + ("PASS" if ok else "FAIL")
    return [out], EXIT_PASS if ok else EXIT_CHECK_FAIL, text


_RUNNERS = {
    "model-a": _run_model_a,
    "sigma": _run_sigma,
    "scaling-check": _run_scaling_check,
    "c-to-a-rate": _run_c_to_a_rate,
    "leaky-sweep": _run_leaky_sweep,
    "chain": _run_chain,
}


def _execute(ctx, subcommand: str, params: dict) -> None:
    outdir = ctx.obj["outdir"]
    try:
        outputs, code, text = _RUNNERS[subcommand](params, outdir)
    except RejectedInputError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except EigensolveError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    _write_manifest(outdir, subcommand, params, outputs)
    click.echo(text)
    sys.exit(code)


# ---------------------------------------------------------------------------
# subcommands

@main.command("model-a")
@click.option("--p", type=float, default=2.0, help="cusp exponent (> 1)")
@click.option("--n", type=int, default=3, help="number of eigenvalues")
@click.option("--cells", type=int, default=4096, help="grid cells before extrapolation")
@click.pass_context
def cmd_model_a(ctx, p, n, cells):
    """Lowest eigenvalues of the half-line model operator -f'' + x^p f."""
    _apply_config(ctx)
    _execute(ctx, "model-a", dict(ctx.params))


@main.command("sigma")
@click.argument("x_values", type=float, nargs=-1)
@click.option("--scan", type=(float, float, int), default=None,
              help="A B STEPS: log-spaced scan of x in [A, B]")
@click.pass_context
def cmd_sigma(ctx, x_values, scan):
    """Ground energy of the unit two-delta well versus half-separation."""
    _apply_config(ctx)
    if scan is not None:
        a, b, steps = scan
        if not (0 < a < b and steps >= 2):
            raise click.UsageError("scan needs 0 < A < B and STEPS >= 2")
        x_values = tuple(np.geomspace(a, b, steps))
    if not x_values:
        raise click.UsageError("provide x values or --scan")
    if any(x <= 0 for x in x_values):
        raise click.UsageError("x values must be positive")
    _execute(ctx, "sigma", {"x_values": [float(x) for x in x_values]})


@main.command("scaling-check")
@click.option("--which", type=click.Choice(["k-to-c", "z-to-b"]),
              required=True, help="which exact identity to validate")
@click.option("--p", type=float, default=2.0)
@click.option("--h", type=float, default=0.1)
@click.option("--k", type=float, default=0.2)
@click.option("--variant", type=click.Choice(["N", "D"]), default="D",
              help="right boundary condition for the k-to-c identity")
@click.option("--cells", type=int, default=1024)
@click.option("--inject-fault", type=float, default=0.0,
              help="debug: multiply the rescaled side by 1 + this value")
@click.pass_context
def cmd_scaling_check(ctx, which, p, h, k, variant, cells, inject_fault):
    """Validate an exact eigenvalue rescaling identity (PASS/FAIL)."""
    _apply_config(ctx)
    _execute(ctx, "scaling-check", dict(ctx.params))


@main.command("c-to-a-rate")
@click.option("--p", type=float, default=2.0)
@click.option("--n", type=int, default=1, help="eigenvalue index")
@click.option("--mu", "mu_values", type=float, multiple=True,
              default=(2.0, 3.0, 4.0), help="ascending truncation lengths")
@click.pass_context
def cmd_c_to_a_rate(ctx, p, n, mu_values):
    """Truncation-error decay of the interval model versus the half-line."""
    _apply_config(ctx)
    _execute(ctx, "c-to-a-rate",
             {"p": p, "n": n, "mu_values": sorted(mu_values)})


@main.command("leaky-sweep")
@click.option("--p", type=float, default=2.0)
@click.option("--eps", type=float, default=0.5)
@click.option("--alpha", "alpha_values", type=float, multiple=True,
              default=(8.0, 12.0, 16.0, 20.0, 24.0))
@click.option("--k-eigs", type=int, default=2)
@click.option("--base-cells", type=int, default=48)
@click.option("--band-levels", type=int, default=4)
@click.option("--quad-order", type=int, default=4)
@click.option("--jobs", type=int, default=1, help="parallel sweep workers")
@click.option("--fit/--no-fit", default=True)
@click.pass_context
def cmd_leaky_sweep(ctx, **kwargs):
    """Sweep the 2D cusp operator over couplings and fit the secondary term."""
    _apply_config(ctx)
    params = dict(ctx.params)
    params["alpha_values"] = sorted(params["alpha_values"])
    _execute(ctx, "leaky-sweep", params)


@main.command("chain")
@click.option("--p", type=float, default=2.0)
@click.option("--k", type=float, default=1.0 / 3.0)
@click.option("--h", "h_values", type=float, multiple=True,
              default=(1e-1, 1e-2, 1e-3))
@click.option("--n", type=int, default=1, help="levels per operator")
@click.option("--cells", type=int, default=4096)
@click.pass_context
def cmd_chain(ctx, p, k, h_values, n, cells):
    """Convergence of the rescaled effective operators to the model levels."""
    _apply_config(ctx)
    _execute(ctx, "chain", {"p": p, "k": k, "n": n, "cells": cells,
                            "h_values": sorted(h_values, reverse=True)})


@main.command("replay-manifest")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def cmd_replay(ctx, manifest_path):
    """Re-run a recorded manifest and verify output digests bit-exactly."""
    manifest = json.loads(Path(manifest_path).read_text())
    sub = manifest["subcommand"]
    if sub not in _RUNNERS:
        raise click.UsageError(f"unknown subcommand in manifest: {sub}")
    with tempfile.TemporaryDirectory() as tmp:
        tmpdir = Path(tmp)
        try:
            outputs, _, _ = _RUNNERS[sub](manifest["parameters"], tmpdir)
        except RejectedInputError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        except EigensolveError as exc:
            click.echo(f"solver failure: {exc}", err=True)
            sys.exit(EXIT_SOLVER)
        produced = {p.name: _sha256(p) for p in outputs}
    expected = manifest["outputs"]
    mismatched = sorted(set(expected) ^ set(produced)
                        | {k for k in expected
                           if k in produced and expected[k] != produced[k]})
    if mismatched:
        click.echo("digest mismatch: " + ", ".join(mismatched))
        sys.exit(EXIT_CHECK_FAIL)
    click.echo(f"replay OK: {len(produced)} outputs reproduced bit-exactly")
    sys.exit(EXIT_PASS)


if __name__ == "__main__":
    main()
