"""Command-line interface: surrogate training, fitting, simulation,
prediction, and simulation studies.

Every command writes a canonical ``config_echo.json`` next to its outputs
with the full effective configuration (including seeds), sufficient to
reproduce the run. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
import time
import warnings
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import __version__
from .diagnostics import (
    PAPER_SETTINGS,
    StudyConfig,
    format_study_tables,
    run_study,
)
from .errors import KrignetError
from .inference import (
    Chain,
    McmcConfig,
    MleConfig,
    PriorSpec,
    chain_to_rows,
    fit_mle,
    fit_variogram,
    logit,
    run_mcmc,
    summarize_chain,
)
from .kernel import CovarianceParams, FullParams
from .predict import predict_bayes, predict_sites
from .spatial import LocationSet, build_graph, scale_to_unit_square
from .surrogate import (
    DataGenConfig,
    SurrogateProvider,
    TrainConfig,
    load_bank,
    save_bank,
    train_bank,
)
from .vecchia import ExactProvider, TabulatedExactProvider, simulate_field

_FLOAT_FMT = "%.17g"


def _echo_config(out_dir: Path, command: str, config: dict) -> None:
    payload = {"command": command, "version": __version__, "config": config}
    with open(out_dir / "config_echo.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_out_dir(path: Path) -> Path:
    parent = path if path.suffix == "" else path.parent
    if not parent.exists():
        raise click.UsageError(f"output directory does not exist: {parent}")
    return path


def read_xyz_csv(path, need_z=True):
    """Read x,y[,z][,covariate...] CSV; returns (coords, z, cov, cov_names).

    Malformed rows raise a usage-level error naming the line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise click.ClickException(f"{path}: empty file (header required)")
        cols = [c.strip().lower() for c in header]
        if "x" not in cols or "y" not in cols:
            raise click.ClickException(f"{path}: header must contain x and y columns")
        ix, iy = cols.index("x"), cols.index("y")
        iz = cols.index("z") if "z" in cols else None
        if need_z and iz is None:
            raise click.ClickException(f"{path}: header must contain a z column")
        cov_idx = [
            (i, c) for i, c in enumerate(cols) if i not in (ix, iy, iz)
        ]
        coords, zs, covs = [], [], []
        for ln, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                coords.append((float(row[ix]), float(row[iy])))
                if iz is not None:
                    zs.append(float(row[iz]))
                covs.append([float(row[i]) for i, _ in cov_idx])
            except (ValueError, IndexError):
                raise click.ClickException(f"{path}: malformed row at line {ln}")
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    z = np.asarray(zs, dtype=float) if iz is not None else None
    cov = np.asarray(covs, dtype=float) if cov_idx else None
    names = [c for _, c in cov_idx]
    return coords, z, cov, names


def write_xyz_csv(path, coords, z=None, cov=None, cov_names=()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["x", "y"] + (["z"] if z is not None else []) + list(cov_names)
        w.writerow(header)
        for i in range(coords.shape[0]):
            row = [_FLOAT_FMT % coords[i, 0], _FLOAT_FMT % coords[i, 1]]
            if z is not None:
                row.append(_FLOAT_FMT % z[i])
            if cov is not None:
                row.extend(_FLOAT_FMT % v for v in cov[i])
            w.writerow(row)


def _parse_theta(text: str) -> CovarianceParams:
    try:
        phi, nu, r = (float(v) for v in text.split(","))
        return CovarianceParams(phi, nu, r)
    except (ValueError, TypeError) as exc:
        raise click.UsageError(f"--theta must be 'phi,nu,r': {exc}")


@click.group()
@click.version_option(__version__)
def main():
    """Scalable GP geostatistics with amortized Vecchia likelihoods."""


@main.command("simulate")
@click.option("--n", type=int, required=True, help="Number of sites.")
@click.option("--theta", required=True, help="phi,nu,r (e.g. 0.1,1.5,0.9).")
@click.option("--m", type=int, default=80, show_default=True,
              help="Conditioning-set size for the sequential simulation.")
@click.option("--mu", type=float, default=0.0, show_default=True)
@click.option("--sigma2", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output CSV path.")
def cmd_simulate(n, theta, m, mu, sigma2, seed, out):
    """Simulate a GP field on uniform random sites in the unit square."""
    if n < 2:
        raise click.UsageError("--n must be at least 2")
    if m < 1:
        raise click.UsageError("--m must be at least 1")
    th = _parse_theta(theta)
    _require_out_dir(out)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x73697465)))
    coords = rng.uniform(0.0, 1.0, size=(n, 2))
    locs = LocationSet(coords, (0.0, 0.0, 1.0))
    graph = build_graph(locs, min(m, n - 1))
    z = simulate_field(graph, FullParams(mu, sigma2, th), seed=seed)
    write_xyz_csv(out, coords, z)
    _echo_config(out.parent, "simulate", {
        "n": n, "theta": list(th.as_tuple()), "m": m, "mu": mu,
        "sigma2": sigma2, "seed": seed, "out": str(out),
    })
    click.echo(f"wrote {n} sites to {out}")


_SCALES = {
    "desk": {
        "gen": DataGenConfig(n_fields=20, n_range=(1500, 3000), thetas_per_field=24),
        "train": TrainConfig(
            epochs=5, batch_size=125, standardize_targets=True, dtype="float32"
        ),
    },
    "paper": {
        "gen": DataGenConfig(n_fields=200, n_range=(5000, 15000), thetas_per_field=1),
        "train": TrainConfig(
            epochs=25, batch_size=500, standardize_targets=True, dtype="float32"
        ),
    },
}


@main.command("train-surrogate")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output model-bank file (single-file container).")
@click.option("--scale", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
@click.option("--m", type=int, default=30, show_default=True)
@click.option("--fields", type=int, default=None,
              help="Override the number of simulated fields per bin.")
@click.option("--epochs", type=int, default=None)
@click.option("--thetas-per-field", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_train_surrogate(out, scale, m, fields, epochs, thetas_per_field, seed):
    """Generate training data and train all 12 networks (6 r bins x 2)."""
    _require_out_dir(out)
    gen = _SCALES[scale]["gen"]
    train_cfg = _SCALES[scale]["train"]
    kw = {"m": m}
    if fields is not None:
        kw["n_fields"] = fields
    if thetas_per_field is not None:
        kw["thetas_per_field"] = thetas_per_field
    from dataclasses import replace

    gen = replace(gen, **kw)
    if epochs is not None:
        train_cfg = replace(train_cfg, epochs=epochs)
    _echo_config(out.parent, "train-surrogate", {
        "scale": scale, "seed": seed, "m": gen.m,
        "generation": asdict(gen), "training": asdict(train_cfg),
        "out": str(out),
    })
    t0 = time.perf_counter()
    try:
        bank = train_bank(gen, train_cfg, seed, progress=click.echo)
    except KrignetError as exc:
        raise click.ClickException(f"training failed, bank not written: {exc}")
    tmp = out.with_suffix(out.suffix + ".tmp")
    save_bank(bank, tmp)
    os.replace(tmp, out)
    click.echo(f"bank written to {out} in {time.perf_counter() - t0:.1f}s")


def _standardize(z, cov):
    """Regression-residual standardization; returns (z_std, record)."""
    if cov is not None and cov.shape[1] > 0:
        design = np.column_stack([np.ones(z.shape[0]), cov])
        beta, *_ = np.linalg.lstsq(design, z, rcond=None)
        resid = z - design @ beta
        scale = float(resid.std())
        if scale < 1e-12:
            raise click.ClickException("regression residuals have zero variance")
        return resid / scale, {
            "kind": "regression",
            "coefficients": beta.tolist(),
            "scale": scale,
        }
    mean = float(z.mean())
    scale = float(z.std())
    if scale < 1e-12:
        raise click.ClickException("data has zero variance")
    return (z - mean) / scale, {"kind": "center", "mean": mean, "scale": scale}


def _destandardize_mean(mean_std, record, cov):
    if record["kind"] == "regression":
        design = np.column_stack([np.ones(mean_std.shape[0]), cov])
        return design @ np.asarray(record["coefficients"]) + record["scale"] * mean_std
    return record["mean"] + record["scale"] * mean_std


@main.command("fit")
@click.argument("data_csv", type=click.Path(exists=True, path_type=Path))
@click.option("--bank", type=click.Path(exists=True, path_type=Path),
              default=None, help="Model-bank file (surrogate likelihood).")
@click.option("--likelihood", type=click.Choice(["surrogate", "exact"]),
              default="surrogate", show_default=True)
@click.option("--mode", type=click.Choice(["mcmc", "mle"]), default="mcmc",
              show_default=True)
@click.option("--m", type=int, default=30, show_default=True)
@click.option("--iterations", type=int, default=12000, show_default=True)
@click.option("--burn-in", type=int, default=2000, show_default=True)
@click.option("--tune", type=float, default=0.1, show_default=True)
@click.option("--thin", type=int, default=1, show_default=True)
@click.option("--tol", type=float, default=1e-7, show_default=True,
              help="MLE convergence tolerance.")
@click.option("--test-fraction", type=float, default=0.0, show_default=True,
              help="Hold out this fraction of sites (90/10 workflow at 0.1).")
@click.option("--hierarchical", is_flag=True,
              help="Gibbs updates for regression coefficients and variance "
                   "(requires covariate columns).")
@click.option("--lonlat", is_flag=True,
              help="Treat x,y as longitude/latitude (plain unit-square "
                   "scaling; no great-circle distances).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output directory for fit artifacts.")
def cmd_fit(data_csv, bank, likelihood, mode, m, iterations, burn_in, tune,
            thin, tol, test_fraction, hierarchical, lonlat, seed, out):
    """Standardize a dataset, fit covariance parameters, write artifacts."""
    out.mkdir(parents=True, exist_ok=True)
    coords_raw, z_raw, cov, cov_names = read_xyz_csv(data_csv, need_z=True)
    if hierarchical and cov is None:
        raise click.UsageError("--hierarchical requires covariate columns")
    if not (0.0 <= test_fraction < 1.0):
        raise click.UsageError("--test-fraction must lie in [0, 1)")
    _echo_config(out, "fit", {
        "data": str(data_csv), "bank": str(bank) if bank else None,
        "likelihood": likelihood, "mode": mode, "m": m,
        "iterations": iterations, "burn_in": burn_in, "tune": tune,
        "thin": thin, "tol": tol, "test_fraction": test_fraction,
        "hierarchical": hierarchical, "lonlat": lonlat, "seed": seed,
        "covariates": cov_names,
    })

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x73706C69)))
    n = coords_raw.shape[0]
    if test_fraction > 0:
        n_test = max(1, int(round(test_fraction * n)))
        perm = rng.permutation(n)
        test_idx, train_idx = perm[:n_test], perm[n_test:]
        write_xyz_csv(out / "train.csv", coords_raw[train_idx], z_raw[train_idx],
                      None if cov is None else cov[train_idx], cov_names)
        write_xyz_csv(out / "test.csv", coords_raw[test_idx], z_raw[test_idx],
                      None if cov is None else cov[test_idx], cov_names)
        coords_raw, z_raw = coords_raw[train_idx], z_raw[train_idx]
        cov = None if cov is None else cov[train_idx]
        click.echo(f"split: {train_idx.size} train / {test_idx.size} test sites")

    locs = scale_to_unit_square(coords_raw)
    z_std, z_record = _standardize(z_raw, cov)
    x0, y0, s = locs.original_bounds
    with open(out / "standardization.json", "w") as fh:
        json.dump({
            "coords": {"x0": x0, "y0": y0, "scale": s, "lonlat": lonlat},
            "z": z_record,
            "covariates": cov_names,
            "m": m,
            "mode": mode,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")

    graph = build_graph(locs, m)
    vg = fit_variogram(z_std, locs)
    if vg.r <= 0.18 + 1e-9:
        click.echo(
            "warning: estimated proportion of spatial variance is at the 0.18 "
            "floor; with this much noise a spatial model may not be "
            "appropriate.", err=True,
        )
    click.echo(f"variogram init: phi={vg.phi:.4f} nu={vg.nu:.3f} r={vg.r:.3f}")

    if likelihood == "surrogate":
        if bank is None:
            raise click.UsageError("--bank is required for the surrogate likelihood")
        provider = load_bank(bank, expect_m=m)
    else:
        provider = TabulatedExactProvider(graph) if mode == "mcmc" else ExactProvider()

    if mode == "mle":
        res = fit_mle(z_std, graph, provider, MleConfig(tol=tol), init=tuple(vg))
        payload = {
            "estimates": {"phi": res.phi, "nu": res.nu, "r": res.r},
            "converged": res.converged,
            "iterations": res.iterations,
            "log_likelihood": res.objective,
            "variogram_init": {"phi": vg.phi, "nu": vg.nu, "r": vg.r},
            "bins": list(res.bin_sequence),
        }
        with open(out / "estimates.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        click.echo(json.dumps(payload["estimates"], sort_keys=True))
        if not res.converged:
            click.echo("warning: optimizer did not converge", err=True)
        return

    cfg = McmcConfig(iterations=iterations, burn_in=burn_in, tune=tune,
                     thin=thin, init=tuple(vg))
    chain = run_mcmc(z_std, graph, provider, PriorSpec(), cfg, seed,
                     covariates=cov if hierarchical else None)
    _write_chain_csv(chain, out / "chain.csv")
    summ = summarize_chain(chain)
    summ["chain"] = {"iterations": iterations, "burn_in": burn_in,
                     "thin": thin, "stored": chain.n_stored,
                     "sampling_seconds": chain.sampling_seconds}
    if chain.betas is not None:
        post = slice(chain.burn_in, None)
        summ["beta_mean"] = chain.betas[post].mean(axis=0).tolist()
        summ["sigma2_mean"] = float(chain.sigma2s[post].mean())
    with open(out / "summary.json", "w") as fh:
        json.dump(summ, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for p in ("phi", "nu", "r"):
        info = summ[p]
        click.echo(
            f"{p}: mean {info['mean']:.4f}  95% CI "
            f"({info['ci_2.5']:.4f}, {info['ci_97.5']:.4f})  "
            f"ESS {info['ess']:.0f}  ESS/min {info['ess_per_min']:.1f}"
        )


def _write_chain_csv(chain: Chain, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "phi", "nu", "r", "log_posterior", "bin",
                    "acc_phi", "acc_nu", "acc_r"])
        for row in chain_to_rows(chain):
            w.writerow(
                [row[0]] + [_FLOAT_FMT % v for v in row[1:5]] + list(row[5:])
            )


def _read_chain_csv(path: Path, burn_in_stored: int, thin: int) -> Chain:
    draws = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            draws.append((float(row["phi"]), float(row["nu"]),
                          logit(float(row["r"]))))
    arr = np.asarray(draws, dtype=float)
    n = arr.shape[0]
    return Chain(
        draws=arr, log_post=np.zeros(n), bins=np.full(n, -1, dtype=np.int32),
        accepted=np.zeros((n, 3), dtype=np.int8),
        accept_counts={p: 0 for p in ("phi", "nu", "r")},
        proposal_counts={p: n for p in ("phi", "nu", "r")},
        envelope_rejects={p: 0 for p in ("phi", "nu", "r")},
        burn_in=burn_in_stored, thin=thin, tune=(0.1,) * 3,
        sampling_seconds=float("nan"),
    )


@main.command("predict")
@click.argument("train_csv", type=click.Path(exists=True, path_type=Path))
@click.argument("test_csv", type=click.Path(exists=True, path_type=Path))
@click.option("--fit-dir", type=click.Path(exists=True, path_type=Path),
              required=True, help="Directory with fit artifacts.")
@click.option("--stride", type=int, default=50, show_default=True,
              help="Posterior draw thinning stride (Bayesian mode).")
@click.option("--m", type=int, default=None,
              help="Conditioning sites per prediction (default: fit m).")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def cmd_predict(train_csv, test_csv, fit_dir, stride, m, out):
    """Krige test sites from a fitted model, in original units."""
    _require_out_dir(out)
    std_path = fit_dir / "standardization.json"
    if not std_path.exists():
        raise click.ClickException(
            f"missing standardization record {std_path}; refusing to predict "
            "on an undefined scale"
        )
    with open(std_path) as fh:
        record = json.load(fh)
    m = m if m is not None else int(record.get("m", 30))
    coords_tr_raw, z_tr_raw, cov_tr, _ = read_xyz_csv(train_csv, need_z=True)
    coords_te_raw, _z_te, cov_te, _ = read_xyz_csv(test_csv, need_z=False)

    c = record["coords"]
    shift = np.array([c["x0"], c["y0"]])
    coords_tr = (coords_tr_raw - shift) / c["scale"]
    coords_te = (coords_te_raw - shift) / c["scale"]
    zrec = record["z"]
    if zrec["kind"] == "regression":
        if cov_tr is None or cov_te is None:
            raise click.ClickException(
                "fit used covariate regression; train and test CSVs need the "
                "covariate columns"
            )
        design = np.column_stack([np.ones(z_tr_raw.shape[0]), cov_tr])
        z_tr = (z_tr_raw - design @ np.asarray(zrec["coefficients"])) / zrec["scale"]
    else:
        z_tr = (z_tr_raw - zrec["mean"]) / zrec["scale"]

    if coords_te.shape[0] == 0:
        with open(out, "w", newline="") as fh:
            csv.writer(fh).writerow(["x", "y", "mean", "variance"])
        click.echo("empty test file; wrote header only")
        return

    chain_path = fit_dir / "chain.csv"
    est_path = fit_dir / "estimates.json"
    if chain_path.exists():
        with open(fit_dir / "summary.json") as fh:
            summ = json.load(fh)
        ch = summ["chain"]
        stored_burn = ch["burn_in"] // max(1, ch["thin"])
        chain = _read_chain_csv(chain_path, stored_burn, ch["thin"])
        res = predict_bayes(z_tr, coords_tr, coords_te, chain, stride=stride, m=m)
        bayes = True
    elif est_path.exists():
        with open(est_path) as fh:
            est = json.load(fh)["estimates"]
        theta = CovarianceParams(est["phi"], est["nu"], est["r"])
        res = predict_sites(z_tr, coords_tr, coords_te, theta, m=m)
        bayes = False
    else:
        raise click.ClickException(f"no chain.csv or estimates.json in {fit_dir}")

    mean_orig = _destandardize_mean(res.mean, zrec, cov_te)
    var_orig = res.variance * zrec["scale"] ** 2
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["x", "y", "mean", "variance"]
        if bayes:
            header += ["q2.5", "q97.5"]
        w.writerow(header)
        sd = np.sqrt(var_orig)
        for i in range(coords_te_raw.shape[0]):
            row = [
                _FLOAT_FMT % coords_te_raw[i, 0],
                _FLOAT_FMT % coords_te_raw[i, 1],
                _FLOAT_FMT % mean_orig[i],
                _FLOAT_FMT % var_orig[i],
            ]
            if bayes:
                row += [_FLOAT_FMT % (mean_orig[i] - 1.959963984540054 * sd[i]),
                        _FLOAT_FMT % (mean_orig[i] + 1.959963984540054 * sd[i])]
            w.writerow(row)
    _echo_config(out.parent, "predict", {
        "train": str(train_csv), "test": str(test_csv),
        "fit_dir": str(fit_dir), "stride": stride, "m": m,
        "bayesian": bayes, "out": str(out),
    })
    click.echo(f"wrote {coords_te_raw.shape[0]} predictions to {out}")


@main.command("study")
@click.option("--settings", default="paper3", show_default=True,
              help="'paper3' or semicolon-separated phi,nu,r triples.")
@click.option("--mode", type=click.Choice(["mcmc", "mle"]), default="mcmc",
              show_default=True)
@click.option("--scale", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
@click.option("--replicates", type=int, default=None)
@click.option("--bank", type=click.Path(exists=True, path_type=Path),
              default=None, help="Surrogate bank; exact likelihood if omitted.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output directory.")
def cmd_study(settings, mode, scale, replicates, bank, workers, seed, out):
    """Replicated simulation study with paper-layout metric tables."""
    out.mkdir(parents=True, exist_ok=True)
    if settings == "paper3":
        setting_list = list(PAPER_SETTINGS)
    else:
        setting_list = [_parse_theta(part) for part in settings.split(";")]
    cfg = StudyConfig() if scale == "desk" else StudyConfig.paper_scale(mode)
    from dataclasses import replace

    cfg = replace(cfg, mode=mode)
    if replicates is not None:
        cfg = replace(cfg, replicates=replicates)
    provider = load_bank(bank, expect_m=cfg.fit_m) if bank else None
    _echo_config(out, "study", {
        "settings": [list(t.as_tuple()) for t in setting_list],
        "mode": mode, "scale": scale, "replicates": cfg.replicates,
        "n_range": list(cfg.n_range), "fit_m": cfg.fit_m,
        "simulation_m": cfg.simulation_m, "bank": str(bank) if bank else None,
        "workers": workers, "seed": seed,
        "mcmc": {"iterations": cfg.mcmc.iterations, "burn_in": cfg.mcmc.burn_in,
                 "tune": cfg.mcmc.tune},
    })
    report = run_study(setting_list, cfg, seed, provider, workers=workers,
                       progress=click.echo)
    _write_replicates_csv(report, out / "replicates.csv")
    with open(out / "aggregates.json", "w") as fh:
        json.dump(report.aggregates, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    tables = format_study_tables(report)
    (out / "tables.txt").write_text(tables + "\n")
    click.echo(tables)
    total = len(report.records)
    failed = sum(1 for r in report.records if r.error is not None)
    if failed > 0.2 * total:
        raise click.ClickException(
            f"{failed}/{total} replicates failed (over the 20% budget)"
        )
    if failed:
        click.echo(f"note: {failed}/{total} replicates failed and were excluded")


def _write_replicates_csv(report, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "setting", "replicate", "n", "seed",
            "phi_true", "nu_true", "r_true",
            "phi_est", "nu_est", "r_est",
            "phi_sqerr", "nu_sqerr", "r_sqerr",
            "phi_cover", "nu_cover", "r_cover",
            "phi_ess_min", "nu_ess_min", "r_ess_min",
            "converged", "wall_seconds", "error",
        ])
        for r in report.records:
            def tup(v, k=3):
                return list(v) if v is not None else [""] * k

            w.writerow(
                [r.setting_index, r.replicate_index, r.n, r.seed]
                + list(r.truth)
                + tup(r.estimate) + tup(r.sq_error) + tup(r.covered)
                + tup(r.ess_per_min)
                + [r.converged if r.converged is not None else "",
                   f"{r.wall_seconds:.2f}",
                   (r.error or "").replace("\n", " | ")]
            )


if __name__ == "__main__":
    main()
