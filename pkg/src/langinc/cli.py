"""Command-line front end: ``langinc sample | fp | jko | gibbs | metrics | repro``.

Every command writes CSV tables (RFC 4180, "\\n" line endings), a JSON
metadata sidecar, and SVG figures rendered from the same data into the output
directory.  All outputs are pure functions of (config, seed): reruns are
byte-identical.  Exit codes: 0 success, 2 configuration errors, 3 numeric
divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_init
from .fokker_planck import (
    DensityField,
    SteadyStateError,
    build_grid,
    evolve,
    interface_residual,
    steady_state,
)
from .figures import save_hist_svg, save_line_svg
from .gibbs import GibbsDensity
from .jko import QuantileField, SolverError, density_from_quantiles, free_energy, jko_step, w2
from .metrics import histogram, w1_samples, w1_to_gibbs
from .potential import (
    PiecewisePotential1D,
    ReLUNetPotential,
    SelectionRule,
    example_potential,
    make_synthetic_regression,
)
from .sampler import (
    Chain,
    ChainConfig,
    DivergedError,
    SamplerKind,
    derive_chain_seed,
    run_mala,
    run_rwm,
    run_ula,
)

DEFAULT_SEED = 1234
REPRO_FIGURES = ("gibbs-pdf", "metro-hist", "ula-hist", "wasserstein-curve", "relu-toy")

_ULA_HIST_EPSILONS = (0.01, 0.001, 0.0001)
_ULA_HIST_STEPS = 2_000_000  # desk scale; the full-scale reference run is 1e7
_W1_CHECKPOINTS = (10_000, 30_000, 100_000, 300_000, 1_000_000, 2_000_000)
_RELU_TOY = {
    "widths": (5, 10, 10, 10, 1),
    "n_points": 200,
    "dim": 5,
    "data_seed": 7,
    "epsilon": 1e-5,
    "sigma": 0.01,
    "lam": 1e-4,
    "proposal_std": 0.25,
    "n_steps": 20_000,
}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _metadata(command: str, seed, extra=None) -> dict:
    meta = {
        "package": f"langinc {__version__}",
        "rng": "numpy Generator over Philox (counter-based); chain i uses seed XOR i",
        "command": command,
        "seed": seed,
    }
    if extra:
        meta.update(extra)
    return meta


def _chain_config(section: dict, seed_override) -> ChainConfig:
    seed = seed_override if seed_override is not None else section.get("seed", DEFAULT_SEED)
    try:
        return ChainConfig(
            epsilon=section.get("epsilon", 1e-3),
            sigma=section.get("sigma", 1.0),
            n_steps=int(section.get("steps", 10_000)),
            burn_in=int(section.get("burn_in", 0)),
            thin=int(section.get("thin", 1)),
            seed=int(seed),
            selection=section.get("selection", SelectionRule.MIN_NORM),
            init=section.get("init", 0.0),
            proposal_std=section.get("proposal_std"),
        )
    except ValueError as exc:
        raise ConfigError(f"bad sampler section: {exc}") from None


def _write_chain(out: Path, chain: Chain, stem: str):
    samples = chain.samples
    steps = chain.config.kept_step_indices()
    if samples.ndim == 1:
        write_csv(out / f"{stem}.csv", ["step", "x"], zip(steps, samples))
        lo, hi = float(samples.min()), float(samples.max())
        pad = 1e-9 + 0.01 * (hi - lo)
        hist = histogram(samples, np.linspace(lo - pad, hi + pad, 81))
        write_csv(
            out / f"{stem}_hist.csv",
            ["left_edge", "right_edge", "density"],
            zip(hist.edges[:-1], hist.edges[1:], hist.density),
        )
        save_hist_svg(out / f"{stem}_hist.svg", hist.edges, hist.density,
                      title=f"{chain.sampler_kind.value} samples")
    else:
        header = ["step"] + [f"x{i}" for i in range(samples.shape[1])]
        write_csv(out / f"{stem}.csv", header, (np.concatenate([[s], row]) for s, row in zip(steps, samples)))
        norms = np.linalg.norm(samples, axis=1)
        write_csv(out / f"{stem}_norm.csv", ["step", "norm"], zip(steps, norms))
        save_line_svg(out / f"{stem}_norm.svg", [("|x|", steps, norms)],
                      title=f"{chain.sampler_kind.value} state norm", xlabel="step", ylabel="|x|")


def cmd_sample(cfg: ExperimentConfig, out: Path, seed_override=None) -> int:
    section = cfg.sampler
    chain_cfg = _chain_config(section, seed_override)
    kind = section.get("kind", "ula")
    runner = {"ula": run_ula, "rwm": run_rwm, "mala": run_mala}[kind]
    chain = runner(cfg.potential, chain_cfg)
    _write_chain(out, chain, "samples")
    write_json(out / "metadata.json", _metadata("sample", chain_cfg.seed, {
        "potential": cfg.potential_spec,
        "sampler": {
            "kind": kind,
            "epsilon": chain_cfg.epsilon,
            "sigma": chain_cfg.sigma,
            "steps": chain_cfg.n_steps,
            "burn_in": chain_cfg.burn_in,
            "thin": chain_cfg.thin,
            "selection": chain_cfg.selection.value,
            "init": chain_cfg.init,
            "proposal_std": chain_cfg.proposal_std,
        },
        "accepted": chain.accepted,
        "acceptance_rate": chain.acceptance_rate,
        "n_kept": int(chain.config.n_kept),
    }))
    return 0


def cmd_gibbs(cfg: ExperimentConfig, out: Path, seed_override=None) -> int:
    section = cfg.gibbs
    if not isinstance(cfg.potential, PiecewisePotential1D):
        raise ConfigError("gibbs needs a one-dimensional piecewise potential")
    sigma = section.get("sigma", 1.0)
    domain = tuple(section.get("domain", (-40.0, 40.0)))
    n = int(section.get("n_points", 1001))
    try:
        g = GibbsDensity(cfg.potential, sigma, domain)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    xs = np.linspace(domain[0], domain[1], n)
    pdf = g.pdf(xs)
    cdf = g.cdf(xs)
    write_csv(out / "gibbs_table.csv", ["x", "pdf", "cdf"], zip(xs, pdf, cdf))
    save_line_svg(out / "gibbs_pdf.svg", [("pdf", xs, pdf)],
                  title="stationary density", xlabel="x", ylabel="pdf")
    write_json(out / "metadata.json", _metadata("gibbs", None, {
        "potential": cfg.potential_spec, "sigma": sigma, "domain": domain, "Z": g.Z,
    }))
    return 0


def _initial_density(grid, spec) -> DensityField:
    kind, p1, p2 = parse_init(spec if isinstance(spec, dict) else {"kind": "gaussian"})
    if kind == "gaussian":
        return DensityField.from_function(grid, lambda x: np.exp(-((x - p1) ** 2) / (2 * p2**2)))
    return DensityField.from_function(
        grid, lambda x: ((x >= p1) & (x <= p2)).astype(float)
    )


def _density_rows(p: PiecewisePotential1D, grid, values):
    """Cell-center rows plus region-face ghost rows.

    The ghost rows make the trapezoid rule over the CSV reproduce the exact
    cell-average mass sum(values * dx).
    """
    faces = grid.faces
    centers = grid.centers
    cuts = np.concatenate([[faces[0]],
                           p.breakpoints[(p.breakpoints > faces[0]) & (p.breakpoints < faces[-1])],
                           [faces[-1]]])
    xs, ys = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        sel = (centers > lo) & (centers < hi)
        idx = np.nonzero(sel)[0]
        xs.extend([lo, *centers[idx], hi])
        ys.extend([values[idx[0]], *values[idx], values[idx[-1]]])
    return np.array(xs), np.array(ys)


def cmd_fp(cfg: ExperimentConfig, out: Path, seed_override=None) -> int:
    section = cfg.fp
    if not isinstance(cfg.potential, PiecewisePotential1D):
        raise ConfigError("fp needs a one-dimensional piecewise potential")
    sigma = section.get("sigma", 1.0)
    domain = tuple(section.get("domain", (-8.0, 8.0)))
    n_cells = int(section.get("n_cells", 1200))
    tol = section.get("tol", 1e-10)
    try:
        grid = build_grid(cfg.potential, domain, n_cells)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rho = steady_state(cfg.potential, sigma, grid, tol)
    xs, ys = _density_rows(cfg.potential, grid, rho.values)
    write_csv(out / "fp_steady.csv", ["x", "rho"], zip(xs, ys))
    residuals = interface_residual(cfg.potential, sigma, rho)
    write_csv(out / "fp_residuals.csv", ["breakpoint", "density_jump", "current_jump"], residuals)
    series = [("steady", xs, ys)]
    for t in section.get("times", []):
        init = _initial_density(grid, section.get("init", {"kind": "gaussian", "mean": 0.0, "std": 1.0}))
        snap = evolve(cfg.potential, sigma, init, float(t), section.get("dt", 1e-3))
        sx, sy = _density_rows(cfg.potential, grid, snap.values)
        write_csv(out / f"fp_rho_t{_fmt(float(t))}.csv", ["x", "rho"], zip(sx, sy))
        series.append((f"t={_fmt(float(t))}", sx, sy))
    save_line_svg(out / "fp_steady.svg", series, title="Fokker-Planck densities",
                  xlabel="x", ylabel="rho")
    write_json(out / "metadata.json", _metadata("fp", None, {
        "potential": cfg.potential_spec, "sigma": sigma, "domain": domain,
        "n_cells": n_cells, "tol": tol, "mass": rho.mass(),
        "times": list(section.get("times", [])),
    }))
    return 0


def _initial_quantiles(m: int, spec) -> QuantileField:
    kind, p1, p2 = parse_init(spec if isinstance(spec, dict) else {"kind": "gaussian"})
    if kind == "gaussian":
        return QuantileField.gaussian(m, p1, p2)
    return QuantileField.uniform(m, p1, p2)


def cmd_jko(cfg: ExperimentConfig, out: Path, seed_override=None) -> int:
    section = cfg.jko
    if not isinstance(cfg.potential, PiecewisePotential1D):
        raise ConfigError("jko needs a one-dimensional piecewise potential")
    sigma = section.get("sigma", 1.0)
    h = section.get("h", 0.01)
    n_steps = int(section.get("steps", 100))
    m = int(section.get("m", 400))
    q = _initial_quantiles(m, section.get("init", {"kind": "gaussian", "mean": 0.0, "std": 1.0}))
    p = cfg.potential
    rows = [(0, free_energy(p, sigma, q), 0.0)]
    times = sorted(float(t) for t in section.get("times", []))
    grid = build_grid(p, tuple(section.get("domain", (-8.0, 8.0))), int(section.get("n_cells", 800)))
    density_series = []
    next_time = 0
    for k in range(1, n_steps + 1):
        q_next = jko_step(p, sigma, h, q)
        rows.append((k, free_energy(p, sigma, q_next), w2(q, q_next)))
        q = q_next
        while next_time < len(times) and times[next_time] <= k * h + 1e-12:
            t = times[next_time]
            rho = density_from_quantiles(q, grid)
            write_csv(out / f"jko_rho_t{_fmt(t)}.csv", ["x", "rho"], zip(grid.centers, rho.values))
            density_series.append((f"t={_fmt(t)}", grid.centers, rho.values))
            next_time += 1
    write_csv(out / "jko_trace.csv", ["k", "free_energy", "w2_step"], rows)
    ks = [r[0] for r in rows]
    fes = [r[1] for r in rows]
    save_line_svg(out / "jko_trace.svg", [("free energy", ks, fes)],
                  title="JKO free-energy descent", xlabel="step k", ylabel="free energy")
    if density_series:
        save_line_svg(out / "jko_density.svg", density_series, title="JKO densities",
                      xlabel="x", ylabel="rho")
    write_json(out / "metadata.json", _metadata("jko", None, {
        "potential": cfg.potential_spec, "sigma": sigma, "h": h, "steps": n_steps,
        "m": m, "final_free_energy": rows[-1][1],
    }))
    return 0


def _read_samples_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        col = header.index("x") if "x" in header else len(header) - 1
        return np.array([float(row[col]) for row in reader])


def cmd_metrics(cfg: ExperimentConfig, out: Path, file_a, file_b=None, to_gibbs=False,
                seed_override=None) -> int:
    a = _read_samples_csv(file_a)
    if to_gibbs:
        section = cfg.gibbs
        g = GibbsDensity(cfg.potential, section.get("sigma", 1.0),
                         tuple(section.get("domain", (-40.0, 40.0))))
        result = {"w1": w1_to_gibbs(a, g), "n_a": int(len(a)), "n_b": None}
    else:
        if file_b is None:
            raise ConfigError("metrics needs a second sample file or --to-gibbs")
        b = _read_samples_csv(file_b)
        result = {"w1": w1_samples(a, b), "n_a": int(len(a)), "n_b": int(len(b))}
    write_json(out / "metrics.json", result)
    return 0


# ---------------------------------------------------------------------------
# repro: one-command reproduction of the reference experiments at desk scale
# ---------------------------------------------------------------------------


def _repro_gibbs_pdf(out: Path, seed: int):
    p = example_potential()
    g = GibbsDensity(p, 1.0, (-40.0, 40.0))
    xs = np.linspace(-5.0, 5.0, 1001)
    pdf = g.pdf(xs)
    write_csv(out / "gibbs_pdf.csv", ["x", "pdf"], zip(xs, pdf))
    save_line_svg(out / "gibbs_pdf.svg", [("pdf", xs, pdf)],
                  title="stationary density", xlabel="x", ylabel="pdf")
    write_json(out / "metadata.json", _metadata("repro gibbs-pdf", seed, {"Z": g.Z}))


def _repro_metro_hist(out: Path, seed: int):
    p = example_potential()
    cfg = ChainConfig(epsilon=1.0, sigma=1.0, n_steps=100_000, seed=seed,
                      init=0.0, proposal_std=1.0)
    chain = run_rwm(p, cfg)
    _write_chain(out, chain, "metro")
    write_json(out / "metadata.json", _metadata("repro metro-hist", seed, {
        "proposal_std": 1.0, "init": 0.0, "n_steps": cfg.n_steps,
        "acceptance_rate": chain.acceptance_rate,
        "note": "proposal scale and init are defaults, not reference values",
    }))


def _ula_chain(eps: float, n_steps: int, seed: int, burn_in: int = 0) -> Chain:
    cfg = ChainConfig(epsilon=eps, sigma=1.0, n_steps=n_steps, burn_in=burn_in,
                      seed=seed, init=0.0)
    return run_ula(example_potential(), cfg)


def _repro_ula_hist(out: Path, seed: int):
    edges = np.linspace(-3.0, 3.0, 121)
    for i, eps in enumerate(_ULA_HIST_EPSILONS):
        chain = _ula_chain(eps, _ULA_HIST_STEPS, derive_chain_seed(seed, i))
        hist = histogram(chain.samples, edges)
        tag = _fmt(eps)
        write_csv(out / f"ula_hist_eps{tag}.csv",
                  ["left_edge", "right_edge", "density"],
                  zip(hist.edges[:-1], hist.edges[1:], hist.density))
        save_hist_svg(out / f"ula_hist_eps{tag}.svg", hist.edges, hist.density,
                      title=f"ULA samples, eps={tag}")
    write_json(out / "metadata.json", _metadata("repro ula-hist", seed, {
        "epsilons": list(_ULA_HIST_EPSILONS),
        "n_steps": _ULA_HIST_STEPS,
        "scaling": "desk scale: 2e6 steps per chain; reference runs used 1e7",
    }))


def _repro_wasserstein_curve(out: Path, seed: int):
    p = example_potential()
    g = GibbsDensity(p, 1.0, (-40.0, 40.0))
    rows = []
    series = []
    for i, eps in enumerate(_ULA_HIST_EPSILONS):
        chain = _ula_chain(eps, _ULA_HIST_STEPS, derive_chain_seed(seed, i))
        ns, ws = [], []
        for n in _W1_CHECKPOINTS:
            if n > len(chain.samples):
                continue
            w = w1_to_gibbs(chain.samples[:n], g)
            rows.append((eps, n, w))
            ns.append(n)
            ws.append(w)
        series.append((f"eps={_fmt(eps)}", ns, ws))
    write_csv(out / "wasserstein_curve.csv", ["epsilon", "n_samples", "w1"], rows)
    save_line_svg(out / "wasserstein_curve.svg", series, title="W1 to the stationary law",
                  xlabel="samples", ylabel="W1", logx=True, logy=True)
    write_json(out / "metadata.json", _metadata("repro wasserstein-curve", seed, {
        "checkpoints": list(_W1_CHECKPOINTS),
        "scaling": "desk scale: 2e6 steps per chain; reference runs used 1e7",
    }))


def _repro_relu_toy(out: Path, seed: int):
    t = _RELU_TOY
    x_tr, y_tr, x_te, y_te = make_synthetic_regression(t["n_points"], t["dim"], t["data_seed"])
    potential = ReLUNetPotential(t["widths"], x_tr, y_tr, lam=t["lam"])
    init = potential.init_params(t["data_seed"])
    base = ChainConfig(epsilon=t["epsilon"], sigma=t["sigma"], n_steps=t["n_steps"],
                       seed=derive_chain_seed(seed, 0), init=init)
    ula = run_ula(potential, base)
    rwm = run_rwm(potential, replace(base, seed=derive_chain_seed(seed, 1),
                                     proposal_std=t["proposal_std"]))
    ula_loss = np.array([potential.test_loss(s, x_te, y_te) for s in ula.samples])
    rwm_loss = np.array([potential.test_loss(s, x_te, y_te) for s in rwm.samples])
    steps = base.kept_step_indices()
    write_csv(out / "relu_toy.csv", ["step", "ula_test_loss", "rwm_test_loss"],
              zip(steps, ula_loss, rwm_loss))
    save_line_svg(out / "relu_toy.svg",
                  [("ULA", steps, ula_loss), ("RWM", steps, rwm_loss)],
                  title="test loss along the chains", xlabel="step", ylabel="test MSE",
                  logy=True)
    write_json(out / "metadata.json", _metadata("repro relu-toy", seed, {
        **{k: (list(v) if isinstance(v, tuple) else v) for k, v in t.items()},
        "rwm_acceptance_rate": rwm.acceptance_rate,
        "note": "synthetic regression stands in for the full-scale datasets",
    }))


_REPROS = {
    "gibbs-pdf": _repro_gibbs_pdf,
    "metro-hist": _repro_metro_hist,
    "ula-hist": _repro_ula_hist,
    "wasserstein-curve": _repro_wasserstein_curve,
    "relu-toy": _repro_relu_toy,
}


def cmd_repro(figure: str, out: Path, seed: int) -> int:
    if figure not in _REPROS:
        raise ConfigError(f"unknown figure {figure!r}; choose from {', '.join(REPRO_FIGURES)}")
    _REPROS[figure](out, seed)
    return 0


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="langinc", description=__doc__)
    parser.add_argument("--config", type=Path, help="TOML experiment config")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sample", "fp", "jko", "gibbs"):
        sub.add_parser(name)
    m = sub.add_parser("metrics")
    m.add_argument("file_a", type=Path)
    m.add_argument("file_b", type=Path, nargs="?")
    m.add_argument("--to-gibbs", action="store_true", help="compare against the Gibbs oracle")
    r = sub.add_parser("repro")
    r.add_argument("figure", choices=REPRO_FIGURES)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.from_dict({})
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sample":
            return cmd_sample(cfg, out, args.seed)
        if args.command == "fp":
            return cmd_fp(cfg, out, args.seed)
        if args.command == "jko":
            return cmd_jko(cfg, out, args.seed)
        if args.command == "gibbs":
            return cmd_gibbs(cfg, out, args.seed)
        if args.command == "metrics":
            return cmd_metrics(cfg, out, args.file_a, args.file_b, args.to_gibbs, args.seed)
        if args.command == "repro":
            return cmd_repro(args.figure, out, args.seed if args.seed is not None else DEFAULT_SEED)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergedError, SolverError, SteadyStateError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
