//! The four subcommands.

use std::f64::consts::TAU;
use std::path::Path;

use qwres::coin::kappa;
use qwres::laplacian::classify;
use qwres::linalg::{CMat, C64};
use qwres::perturbation::{Expansion, Reduction};
use qwres::scattering::{lambda_grid, transmission, Scatterer, TransmissionPoint};
use qwres::spectral::{build_e, spectral_decompose, SpectralData};
use qwres::verify::{self, loglog_slope, Outcome, Tolerances, CHECKS};
use qwres::{Error, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{RunConfig, VerifyArgs};
use crate::format::{emit, Cell, Format, Table};

fn io_err(e: std::io::Error) -> Error {
    Error::Input(format!("output: {e}"))
}

/// Writes the table to `cfg.out` with a sidecar, or to stdout.
fn output(cfg: &RunConfig, stem: &str, table: &Table, meta: &Value) -> Result<()> {
    let text = table.render(cfg.format);
    match &cfg.out {
        Some(dir) => {
            let path = emit(dir, &format!("{stem}.{}", cfg.format.ext()), &text, meta).map_err(io_err)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn c(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn cluster_meta(sd: &SpectralData) -> Value {
    json!({
        "clusters": sd.clusters.iter().map(|cl| json!({
            "value": c(cl.value),
            "multiplicity": cl.multiplicity,
            "semisimple": cl.is_semisimple(),
            "on_circle": cl.on_circle,
        })).collect::<Vec<_>>(),
        "warnings": sd.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
    })
}

pub fn resonances(cfg: &RunConfig) -> Result<()> {
    let spectra: Vec<SpectralData> = cfg
        .eps
        .par_iter()
        .map(|&eps| spectral_decompose(&build_e(&cfg.graph, eps)?, cfg.tol_cluster, cfg.tol_circle))
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "eps",
        "index",
        "cluster",
        "re",
        "im",
        "modulus",
        "arg",
        "lambda_re",
        "lambda_im",
        "multiplicity",
        "semisimple",
        "on_circle",
        "degenerate",
    ]);
    for (&eps, sd) in cfg.eps.iter().zip(&spectra) {
        let mut index = 0;
        for (k, cl) in sd.clusters.iter().enumerate() {
            let mu = cl.value;
            for _ in 0..cl.multiplicity {
                table.push(vec![
                    eps.into(),
                    index.into(),
                    k.into(),
                    mu.re.into(),
                    mu.im.into(),
                    mu.norm().into(),
                    mu.arg().into(),
                    (-mu.arg()).into(),
                    mu.norm().ln().into(),
                    cl.multiplicity.into(),
                    cl.is_semisimple().into(),
                    cl.on_circle.into(),
                    (cl.multiplicity > 1).into(),
                ]);
                index += 1;
            }
        }
    }
    let mut meta = cfg.meta("resonances");
    meta["decisions"] = Value::from(
        cfg.eps
            .iter()
            .zip(&spectra)
            .map(|(&eps, sd)| json!({ "eps": eps, "spectrum": cluster_meta(sd) }))
            .collect::<Vec<_>>(),
    );
    if let Some(sd0) = spectra.iter().zip(&cfg.eps).find(|(_, &e)| e == 0.0).map(|x| x.0) {
        meta["classification_eps0"] = match classify(&cfg.graph, &sd0.clusters) {
            Ok(cls) => serde_json::to_value(cls).expect("json"),
            Err(e) => Value::from(e.to_string()),
        };
    }
    output(cfg, "resonances", &table, &meta)?;
    if cfg.out.is_some() {
        let mut circle = Table::new(&["theta", "re", "im"]);
        for k in 0..256 {
            let t = TAU * k as f64 / 256.0;
            circle.push(vec![t.into(), t.cos().into(), t.sin().into()]);
        }
        output(cfg, "unit_circle", &circle, &cfg.meta("resonances"))?;
    }
    Ok(())
}

pub fn transmission_cmd(cfg: &RunConfig, grid: usize, inflow: usize) -> Result<()> {
    if grid < 8 {
        return Err(Error::Input(format!("grid size {grid} is below 8")));
    }
    let n = cfg.graph.num_tails();
    if inflow == 0 || inflow > n {
        return Err(Error::Input(format!("inflow port {inflow} outside 1..{n}")));
    }
    let lambdas = lambda_grid(grid);
    let scatterers: Vec<Scatterer> = cfg
        .eps
        .par_iter()
        .map(|&eps| Scatterer::new(&cfg.graph, eps, cfg.tol_cluster, cfg.tol_circle))
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["eps", "lambda", "z_re", "z_im", "transmission", "reflection", "flux"]);
    let mut meta = cfg.meta("transmission");
    meta["grid"] = Value::from(grid);
    meta["inflow"] = Value::from(inflow);
    let mut decisions = Vec::new();
    for sc in &scatterers {
        let chunks: Vec<Vec<TransmissionPoint>> = lambdas
            .par_chunks(64)
            .map(|ch| transmission(sc, inflow - 1, ch))
            .collect::<Result<_>>()?;
        for p in chunks.into_iter().flatten() {
            table.push(vec![
                sc.eps.into(),
                p.lambda.into(),
                p.z.re.into(),
                p.z.im.into(),
                p.tau_sq.into(),
                p.reflection_sq.into(),
                (p.tau_sq + p.reflection_sq).into(),
            ]);
        }
        decisions.push(json!({ "eps": sc.eps, "spectrum": cluster_meta(&sc.spectral) }));
    }
    meta["decisions"] = Value::from(decisions);
    output(cfg, "transmission", &table, &meta)
}

const PROBE_EPS: f64 = 0.01;

struct BranchErrors {
    first: Vec<f64>,
    second: Vec<f64>,
    motion: f64,
}

type Rows = Vec<Vec<Cell>>;

fn ledger_entry(ex: &Expansion, red: &Reduction, eps: &[f64], nonres: &[f64]) -> Result<(Value, Rows, Rows)> {
    let k = red.index;
    let tracks = eps.iter().map(|&e| ex.track(red, e)).collect::<Result<Vec<_>>>()?;
    let mut asym_rows = Vec::new();
    for (&e, tr) in eps.iter().zip(&tracks) {
        for t in tr {
            asym_rows.push(vec![
                e.into(),
                k.into(),
                t.group.into(),
                t.sub.into(),
                t.value.re.into(),
                t.value.im.into(),
                t.first.re.into(),
                t.first.im.into(),
                t.second.re.into(),
                t.second.im.into(),
                (t.value - t.first).norm().into(),
                (t.value - t.second).norm().into(),
            ]);
        }
    }
    let mut slope_rows = Vec::new();
    let mut groups = Vec::new();
    for (g, grp) in red.groups.iter().enumerate() {
        let cond = ex.resonance_conditions(red, g, PROBE_EPS)?;
        let mut seconds = Vec::new();
        for (s, so) in grp.second.iter().enumerate() {
            let mut be = BranchErrors {
                first: Vec::new(),
                second: Vec::new(),
                motion: 0.0,
            };
            for tr in &tracks {
                let mine: Vec<_> = tr.iter().filter(|t| t.group == g && t.sub == s).collect();
                be.first
                    .push(mine.iter().map(|t| (t.value - t.first).norm()).fold(0.0, f64::max));
                be.second
                    .push(mine.iter().map(|t| (t.value - t.second).norm()).fold(0.0, f64::max));
                be.motion = mine.iter().map(|t| (t.value - red.mu).norm()).fold(be.motion, f64::max);
            }
            let slope = |v: &[f64]| {
                if v.iter().all(|x| *x < verify::ROUNDOFF_FLOOR) {
                    f64::NAN
                } else {
                    loglog_slope(eps, v)
                }
            };
            slope_rows.push(vec![
                k.into(),
                g.into(),
                s.into(),
                red.mu.re.into(),
                red.mu.im.into(),
                grp.mu1.re.into(),
                grp.mu1.im.into(),
                so.mu2.re.into(),
                so.mu2.im.into(),
                so.multiplicity.into(),
                so.persistent.into(),
                be.motion.into(),
                slope(&be.first).into(),
                slope(&be.second).into(),
                cond.usable().into(),
            ]);
            seconds.push(json!({
                "mu2": c(so.mu2),
                "multiplicity": so.multiplicity,
                "jordan": so.jordan,
                "persistent": so.persistent,
            }));
        }
        let limit = if grp.mu1.norm() > 1e-9 && cond.usable() {
            let lim = ex.resonant_limit(red, g)?;
            let defects = [0.04, 0.02, 0.01]
                .iter()
                .map(|&e| lim.defect(&ex.tg, e))
                .collect::<Result<Vec<_>>>()?;
            json!({
                "rate": lim.c,
                "sigma1": lim.sigma.iter().map(|z| c(*z)).collect::<Vec<_>>(),
                "sigma1_shape": [lim.sigma.nrows(), lim.sigma.ncols()],
                "rho": lim.rhos.iter().map(|z| c(*z)).collect::<Vec<_>>(),
                "defect_eps": [0.04, 0.02, 0.01],
                "defect": defects,
            })
        } else {
            Value::Null
        };
        groups.push(json!({
            "mu1": c(grp.mu1),
            "multiplicity": grp.multiplicity,
            "second": seconds,
            "conditions": cond,
            "conditions_usable": cond.usable(),
            "resonant_limit": limit,
        }));
    }
    let order = ex.projection_order(k, kappa(0.04))?;
    let bound = ex.mu2_bound(k);
    let max_mu2 = red
        .groups
        .iter()
        .flat_map(|g| g.second.iter().map(|s| s.mu2.norm()))
        .fold(0.0, f64::max);
    let entry = json!({
        "mu": c(red.mu),
        "multiplicity": red.m,
        "gap": ex.gap(k),
        "projection_order": { "kappa_eps": 0.04, "error": order.0, "error_half": order.1, "order": order.2 },
        "mu2_bound": { "max_abs_mu2": max_mu2, "bound": bound, "holds": max_mu2 <= bound * (1.0 + 1e-9) },
        "groups": groups,
        "nonresonant_lambda": nonres,
    });
    Ok((entry, asym_rows, slope_rows))
}

pub fn perturb(cfg: &RunConfig) -> Result<()> {
    if cfg.eps.len() < 3 {
        return Err(Error::Input("perturb needs at least three eps values".into()));
    }
    if cfg.eps.iter().any(|&e| e <= 0.0) {
        return Err(Error::Input("perturb needs positive eps values".into()));
    }
    let ex = Expansion::new(&cfg.graph)?;
    let reductions = (0..ex.len())
        .into_par_iter()
        .map(|k| ex.reduce(k))
        .collect::<Result<Vec<_>>>()?;
    let nonres = verify::nonresonant_lambdas(&cfg.graph, 8)?;
    let entries = reductions
        .par_iter()
        .map(|red| ledger_entry(&ex, red, &cfg.eps, &nonres))
        .collect::<Result<Vec<_>>>()?;
    let mut asym = Table::new(&[
        "eps",
        "cluster",
        "group",
        "sub",
        "true_re",
        "true_im",
        "first_re",
        "first_im",
        "second_re",
        "second_im",
        "err_first",
        "err_second",
    ]);
    let mut slopes = Table::new(&[
        "cluster",
        "group",
        "sub",
        "mu_re",
        "mu_im",
        "mu1_re",
        "mu1_im",
        "mu2_re",
        "mu2_im",
        "multiplicity",
        "persistent",
        "max_motion",
        "slope_first",
        "slope_second",
        "conditions_usable",
    ]);
    let mut ledger = Vec::new();
    for (entry, a, s) in entries {
        ledger.push(entry);
        a.into_iter().for_each(|r| asym.push(r));
        s.into_iter().for_each(|r| slopes.push(r));
    }
    let mut sigma = Table::new(&["lambda", "eps", "deviation", "slope"]);
    let eps: Vec<f64> = cfg.eps.clone();
    let rows: Vec<Vec<Vec<Cell>>> = nonres
        .par_iter()
        .map(|&l| {
            let devs = eps
                .iter()
                .map(|&e| {
                    let s = Scatterer::new(&cfg.graph, e, cfg.tol_cluster, cfg.tol_circle)?.sigma(l);
                    let n = s.nrows();
                    Ok((s - CMat::identity(n, n)).norm())
                })
                .collect::<Result<Vec<f64>>>()?;
            let sl = loglog_slope(&eps, &devs);
            Ok(eps
                .iter()
                .zip(&devs)
                .map(|(&e, &d)| vec![l.into(), e.into(), d.into(), sl.into()])
                .collect())
        })
        .collect::<Result<_>>()?;
    rows.into_iter().flatten().for_each(|r| sigma.push(r));

    let mut meta = cfg.meta("perturb");
    meta["probe_eps"] = Value::from(PROBE_EPS);
    output(cfg, "slopes", &slopes, &meta)?;
    if let Some(dir) = &cfg.out {
        let text = asym.render(cfg.format);
        emit(dir, &format!("asymptotes.{}", cfg.format.ext()), &text, &meta).map_err(io_err)?;
        emit(
            dir,
            &format!("sigma_nonresonant.{}", cfg.format.ext()),
            &sigma.render(cfg.format),
            &meta,
        )
        .map_err(io_err)?;
        let mut s = serde_json::to_string_pretty(&json!({ "ledger": ledger })).expect("json");
        s.push('\n');
        emit(dir, "ledger.json", &s, &meta).map_err(io_err)?;
        eprintln!("wrote asymptotes, sigma_nonresonant and ledger to {}", dir.display());
    }
    Ok(())
}

/// Runs the checks; returns whether all passed.
pub fn verify_cmd(args: &VerifyArgs) -> Result<bool> {
    let fx = verify::select(&args.fixture)?;
    let tol = match args.tol {
        Some(t) if t.is_finite() && t > 0.0 => Tolerances::uniform(t),
        Some(t) => return Err(Error::Input(format!("tolerance {t} must be positive"))),
        None => Tolerances::default(),
    };
    let outcomes: Vec<Outcome> = CHECKS.par_iter().map(|check| check(&fx, &tol)).collect();
    let ok = outcomes.iter().all(Outcome::passed);
    let summary = json!({
        "software": format!("qwres {}", env!("CARGO_PKG_VERSION")),
        "fixtures": fx.iter().map(|f| f.name).collect::<Vec<_>>(),
        "tolerances": tol,
        "passed": ok,
        "criteria": outcomes,
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("json");
    text.push('\n');
    match args.format {
        Format::Json => print!("{text}"),
        Format::Csv => {
            for o in &outcomes {
                println!("{o}");
            }
        }
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        std::fs::write(Path::new(dir).join("verify.json"), text).map_err(io_err)?;
    }
    Ok(ok)
}
