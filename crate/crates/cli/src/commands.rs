use std::fs;

use anyhow::{Context, Result};
use pathcalc_core::dupire::{numerical_dupire_jet, FdConfig};
use pathcalc_core::frechet::{bilinear_atom, estimate_riesz_measure};
use pathcalc_core::functional::{analytic_dupire_jet, catalog};
use pathcalc_core::io::{convergence_csv, fmt_f64, read_path_csv, table_csv, to_json};
use pathcalc_core::path::stop_at;
use pathcalc_core::sfde::{check_bounded, check_lipschitz, simulate_map, NoisePlan};
use pathcalc_core::stats::McEstimate;
use pathcalc_core::verify::{
    coherence_report, generator_lhs, generator_rhs_dupire, generator_rhs_frechet, ito_convergence_study, Extrapolation,
};
use pathcalc_core::{DupireJet, Exec, Matrix, Smoothness, StoppedPath};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::accept::{self, Manifest};
use crate::config::{parse_list, usage, RunConfig};
use crate::{Report, UsageError};

const COHERENCE_TOL: f64 = 1e-3;

fn smooth_default(cfg: &RunConfig) -> Result<StoppedPath> {
    let grid = cfg.grid()?;
    Ok(StoppedPath::from_fn(grid, |s| 0.5 + 0.3 * (std::f64::consts::TAU * s).sin()))
}

/// The path from `--path`, or the built-in smooth path, stopped at `--t`.
fn input_path(cfg: &RunConfig) -> Result<StoppedPath> {
    let p = match &cfg.path {
        Some(file) => read_path_csv(file).map_err(usage)?,
        None => smooth_default(cfg)?,
    };
    match cfg.t {
        Some(t) => Ok(stop_at(&p, t).map_err(usage)?),
        None => Ok(p),
    }
}

#[derive(Serialize)]
struct DeriveOut {
    functional: String,
    smoothness: Smoothness,
    t: f64,
    value: f64,
    vertical_step: f64,
    jet: DupireJet,
    analytic: Option<DupireJet>,
}

pub fn derive(cfg: &RunConfig) -> Result<Report> {
    let f = cfg.functional()?;
    let fd = cfg.fd()?;
    let p = input_path(cfg)?;
    let v = p.view();
    let jet = numerical_dupire_jet(f.as_ref(), &v, &fd)?;
    let analytic = analytic_dupire_jet(f.as_ref(), &v).ok();
    let mut rows = vec![vec!["dt".into(), String::new(), String::new(), fmt_f64(jet.dt)]];
    for (i, g) in jet.dx.iter().enumerate() {
        rows.push(vec!["dx".into(), i.to_string(), String::new(), fmt_f64(*g)]);
    }
    for (i, r) in jet.dxx.rows().iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            rows.push(vec!["dxx".into(), i.to_string(), j.to_string(), fmt_f64(*x)]);
        }
    }
    let out = DeriveOut {
        functional: f.id(),
        smoothness: f.smoothness(),
        t: p.time(),
        value: f.eval(&v),
        vertical_step: fd.vertical_step(&v),
        jet,
        analytic,
    };
    Ok(Report { csv: Some(table_csv(&["component", "i", "j", "value"], &rows)), json: to_json(&out)?, pass: true })
}

#[derive(Serialize)]
struct FrechetOut {
    functional: String,
    t: f64,
    nodal_mass: Vec<f64>,
    atom: Vec<f64>,
    atom_block: Matrix,
    ramp_trace: Vec<pathcalc_core::frechet::RampPoint>,
}

pub fn frechet(cfg: &RunConfig) -> Result<Report> {
    let f = cfg.functional()?;
    let ramps = cfg.ramps()?;
    let p = input_path(cfg)?;
    let v = p.view();
    let rep = estimate_riesz_measure(f.as_ref(), &v, &ramps, cfg.h, Exec::default())?;
    let block = bilinear_atom(f.as_ref(), &v, &ramps, cfg.h)?;
    let mut rows = Vec::new();
    for i in 0..=rep.t_index {
        for j in 0..rep.dim {
            rows.push(vec![i.to_string(), fmt_f64(p.grid().node(i)), j.to_string(), fmt_f64(rep.weight(i, j))]);
        }
    }
    let out = FrechetOut {
        functional: f.id(),
        t: p.time(),
        nodal_mass: rep.nodal_mass(),
        atom: rep.atom.clone(),
        atom_block: block,
        ramp_trace: rep.ramp_trace.clone(),
    };
    Ok(Report { csv: Some(table_csv(&["node", "t", "coord", "weight"], &rows)), json: to_json(&out)?, pass: true })
}

#[derive(Serialize)]
struct SimOut {
    model: String,
    seed: u64,
    paths: usize,
    steps: usize,
    terminal_mean: Vec<f64>,
    terminal_stderr: Vec<f64>,
    lipschitz: pathcalc_core::sfde::AssumptionReport,
    bounded: pathcalc_core::sfde::AssumptionReport,
}

pub fn sfde_sim(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.seed()?;
    let model = cfg.model("bm")?;
    let grid = cfg.grid()?;
    let x0 = cfg.x0(model.state_dim)?;
    let start = StoppedPath::constant(grid, &x0).stopped_at(0)?;
    let plan = NoisePlan::new(seed, cfg.paths.unwrap_or(100));
    let d = model.state_dim;
    let rows = simulate_map(&model, &start, grid.horizon(), &plan, |j, x| {
        let vals = x.node_values();
        let lines: Vec<String> = (0..=grid.steps())
            .map(|i| {
                let mut r = vec![j.to_string(), fmt_f64(grid.node(i))];
                r.extend((0..d).map(|c| fmt_f64(vals[i * d + c])));
                r.join(",")
            })
            .collect();
        Ok((lines, x.endpoint_vec()))
    })?;
    let mut header = vec!["path".to_string(), "t".to_string()];
    header.extend((1..=d).map(|c| format!("x_{c}")));
    let mut csv = header.join(",");
    csv.push('\n');
    for (lines, _) in &rows {
        for l in lines {
            csv.push_str(l);
            csv.push('\n');
        }
    }
    let terminal: Vec<McEstimate> =
        (0..d).map(|c| McEstimate::from_samples(&rows.iter().map(|(_, e)| e[c]).collect::<Vec<_>>())).collect();
    let out = SimOut {
        model: model.name.clone(),
        seed,
        paths: plan.n_paths,
        steps: grid.steps(),
        terminal_mean: terminal.iter().map(|e| e.mean).collect(),
        terminal_stderr: terminal.iter().map(|e| e.stderr).collect(),
        lipschitz: check_lipschitz(&model, grid.horizon(), 200, seed),
        bounded: check_bounded(&model, grid.horizon(), 200, seed),
    };
    Ok(Report { csv: Some(csv), json: to_json(&out)?, pass: true })
}

#[derive(Serialize)]
struct ItoOut {
    functional: String,
    model: String,
    qv: String,
    fitted_order: Option<f64>,
    pass: bool,
}

pub fn verify_ito(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.seed()?;
    let f = cfg.functional()?;
    let model = cfg.model("bm")?;
    let horizon = cfg.horizon.unwrap_or(1.0);
    let resolutions: Vec<usize> = parse_list("resolutions", cfg.resolutions.as_deref().unwrap_or("256,1024,4096"))?;
    let qv = cfg.qv.as_deref().unwrap_or("dt");
    let realized = match qv {
        "realized" => true,
        "dt" => false,
        other => return Err(UsageError(format!("qv must be 'realized' or 'dt', got '{other}'")).into()),
    };
    let fd = match (realized, cfg.h) {
        // Exact central differences on quadratics, free of cancellation.
        (true, None) => FdConfig::default().with_h(0.5),
        _ => cfg.fd()?,
    };
    let plan = NoisePlan::new(seed, cfg.paths.unwrap_or(1000));
    let x0 = cfg.x0(model.state_dim)?;
    let report = ito_convergence_study(f.as_ref(), &model, &x0, horizon, &resolutions, &plan, &fd, realized)?;
    let pass = if realized {
        report.levels.iter().all(|l| l.value <= 1e-10)
    } else {
        report.fitted_order.is_some_and(|o| (0.4..=0.6).contains(&o))
    };
    let out = ItoOut {
        functional: f.id(),
        model: model.name.clone(),
        qv: qv.into(),
        fitted_order: report.fitted_order,
        pass,
    };
    Ok(Report { csv: Some(convergence_csv(&report)), json: to_json(&out)?, pass })
}

#[derive(Serialize)]
struct GeneratorOut {
    functional: String,
    model: String,
    t: f64,
    rhs_dupire: f64,
    rhs_frechet: f64,
    intercept: f64,
    intercept_stderr: f64,
    pass: bool,
}

pub fn verify_generator(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.seed()?;
    let f = cfg.functional()?;
    let model = cfg.model("bm")?;
    let fd = cfg.fd()?;
    let ramps = cfg.ramps()?;
    let horizon = cfg.horizon.unwrap_or(1.0);
    let fractions: Vec<f64> =
        parse_list("epsilons", cfg.epsilons.as_deref().unwrap_or("0.0625,0.03125,0.015625,0.0078125"))?;
    let epsilons: Vec<f64> = fractions.iter().map(|e| e * horizon).collect();
    let extrapolation = match cfg.extrapolation.as_deref().unwrap_or("polynomial") {
        "polynomial" => Extrapolation::Polynomial,
        "linear" => Extrapolation::Linear,
        other => {
            return Err(UsageError(format!("extrapolation must be 'polynomial' or 'linear', got '{other}'")).into())
        }
    };
    let cfg_t = RunConfig { t: Some(cfg.t.unwrap_or(0.5 * horizon)), ..cfg.clone() };
    let p = input_path(&cfg_t)?;
    let v = p.view();
    let d = generator_rhs_dupire(f.as_ref(), &model, &v, &fd)?;
    let fr = generator_rhs_frechet(f.as_ref(), &model, &v, &fd, &ramps, cfg.h)?;
    let plan = NoisePlan::new(seed, cfg.paths.unwrap_or(10_000));
    let lhs = generator_lhs(f.as_ref(), &model, &p, &epsilons, &plan, extrapolation)?;
    let gap = (lhs.intercept - d).abs();
    let lhs_ok = if lhs.intercept_stderr > 0.0 { gap <= 3.0 * lhs.intercept_stderr } else { gap <= 1e-6 };
    let pass = lhs_ok && (d - fr).abs() <= 1e-3 * (1.0 + d.abs());
    let out = GeneratorOut {
        functional: f.id(),
        model: model.name.clone(),
        t: p.time(),
        rhs_dupire: d,
        rhs_frechet: fr,
        intercept: lhs.intercept,
        intercept_stderr: lhs.intercept_stderr,
        pass,
    };
    Ok(Report { csv: Some(convergence_csv(&lhs)), json: to_json(&out)?, pass })
}

#[derive(Serialize)]
struct CoherenceOut {
    functionals: Vec<String>,
    paths: usize,
    pass: bool,
    max_abs_gap: f64,
}

pub fn coherence(cfg: &RunConfig) -> Result<Report> {
    let fs = cfg.functionals()?.unwrap_or_else(catalog);
    let fd = cfg.fd()?;
    let ramps = cfg.ramps()?;
    let paths = if cfg.path.is_some() {
        vec![input_path(cfg)?]
    } else {
        let seed = cfg.seed()?;
        let grid = cfg.grid()?;
        let widest = ramps.widths(&StoppedPath::constant(grid, &[0.0]).view()).map_err(usage)?;
        let min_stop = widest.into_iter().max().unwrap_or(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cfg.paths.unwrap_or(20)).map(|_| accept::random_smooth_path(&mut rng, grid, min_stop)).collect()
    };
    let mut rows = Vec::new();
    let mut worst = 0.0_f64;
    for f in &fs {
        for (j, p) in paths.iter().enumerate() {
            let r = coherence_report(f.as_ref(), &p.view(), &fd, &ramps)?;
            let dx_gap = r.atom_mu.iter().zip(&r.dx_dupire).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            rows.push(vec![
                f.id(),
                j.to_string(),
                fmt_f64((r.dt_frechet - r.dt_dupire).abs()),
                fmt_f64(dx_gap),
                fmt_f64(r.atom_lambda.max_abs_diff(&r.dxx_dupire)),
                fmt_f64(r.max_abs_gap),
            ]);
            worst = worst.max(r.max_abs_gap);
        }
    }
    let pass = worst <= COHERENCE_TOL;
    let out =
        CoherenceOut { functionals: fs.iter().map(|f| f.id()).collect(), paths: paths.len(), pass, max_abs_gap: worst };
    let csv = table_csv(&["functional", "path", "dt_gap", "dx_gap", "dxx_gap", "max_abs_gap"], &rows);
    Ok(Report { csv: Some(csv), json: to_json(&out)?, pass })
}

#[derive(Serialize)]
struct CriterionOut {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct AcceptOut {
    criteria: Vec<CriterionOut>,
    pass: bool,
}

pub fn accept(cfg: &RunConfig) -> Result<Report> {
    let file = cfg.manifest.as_ref().ok_or_else(|| UsageError("missing --manifest".into()))?;
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let mut m = Manifest::from_toml(&text).map_err(|e| UsageError(format!("{e:#}")))?;
    if let Some(seed) = cfg.seed {
        m.seed = seed;
    }
    let only = cfg.only()?;
    if !only.is_empty() {
        m.only = only;
    }
    let outcomes = accept::run(&m, |o| eprintln!("{}", o.line()));
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            vec![o.id.to_string(), o.name.into(), o.pass.to_string(), format!("\"{}\"", o.detail.replace('"', "'"))]
        })
        .collect();
    let pass = outcomes.iter().all(|o| o.pass);
    let out = AcceptOut {
        criteria: outcomes
            .into_iter()
            .map(|o| CriterionOut { id: o.id, name: o.name, pass: o.pass, detail: o.detail })
            .collect(),
        pass,
    };
    Ok(Report { csv: Some(table_csv(&["criterion", "name", "pass", "detail"], &rows)), json: to_json(&out)?, pass })
}
