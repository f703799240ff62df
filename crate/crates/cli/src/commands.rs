use std::fs;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use spectra_core::model::validate_assumptions;
use spectra_core::outliers::{check_nonoverlap, Analysis};
use spectra_core::shrinkage::{oracle_outlier_value, shrink_spectrum, Loss, Method, ShrinkOptions, ShrinkagePlan};
use spectra_core::sim::{rigidity_check, run_with, verify_theorems, SimulationConfig, SimulationResult};
use spectra_core::stieltjes::{check_edge_regularity, classical_locations, density_grid};
use spectra_core::{BulkStructure, Execution, PopulationModel, Thresholds};

use crate::config::{read_eigenvalues, ExperimentConfig};
use crate::{Command, Flags};

pub enum Status {
    Ok,
    AssumptionFailed,
}

const DEFAULT_GRID: usize = 512;

struct Session {
    cfg: ExperimentConfig,
    model: PopulationModel,
    analysis: Analysis,
    thresholds: Thresholds,
    assumptions_ok: bool,
}

fn prepare(flags: &Flags) -> Result<Session> {
    let path = flags.config.as_deref().ok_or_else(|| anyhow!("--config is required"))?;
    let cfg = ExperimentConfig::load(path)?;
    let mut th = cfg.thresholds();
    th.tau = flags.tau.unwrap_or(th.tau);
    th.eps0 = flags.eps0.unwrap_or(th.eps0);
    th.eps1 = flags.eps1.unwrap_or(th.eps1);
    th.slack = flags.slack.unwrap_or(th.slack);
    th.c0 = flags.c0.or(th.c0);
    let model = cfg.model.build().context("building the model")?;
    let analysis = Analysis::new(&model, th).context("analysing the model")?;
    let mut checks = validate_assumptions(&model, th.tau);
    checks.extend(check_edge_regularity(&analysis.structure, &analysis.f, th.tau));
    for c in checks.failures() {
        log::warn!("assumption check failed: {} ({})", c.name, c.detail);
    }
    Ok(Session {
        assumptions_ok: checks.all_passed(),
        cfg,
        model,
        analysis,
        thresholds: th,
    })
}

pub fn run(command: Command, flags: &Flags) -> Result<Status> {
    let ctx = prepare(flags)?;
    let outputs = match command {
        Command::Analyze => analyze(&ctx)?,
        Command::Density => density(&ctx, flags)?,
        Command::Simulate => simulate(&ctx, flags)?,
        Command::Shrink => shrink(&ctx)?,
        Command::Oracle => oracle(&ctx, flags)?,
    };
    fs::create_dir_all(&flags.out).with_context(|| format!("creating {}", flags.out.display()))?;
    for (name, body) in outputs {
        let path = flags.out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
    }
    Ok(if ctx.assumptions_ok {
        Status::Ok
    } else {
        Status::AssumptionFailed
    })
}

type Outputs = Vec<(&'static str, String)>;

fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn analyze(ctx: &Session) -> Result<Outputs> {
    let a = &ctx.analysis;
    let th = &ctx.thresholds;
    let nonoverlap: Vec<_> = a
        .classification
        .outliers()
        .map(|c| {
            json!({
                "spike": c.spike,
                "report": check_nonoverlap(&a.classification, &[c.spike], th.eps0),
            })
        })
        .collect();
    let report = json!({
        "M": ctx.model.m(),
        "N": ctx.model.n(),
        "c_n": ctx.model.c_n(),
        "thresholds": th,
        "structure": a.structure,
        "assumptions": validate_assumptions(&ctx.model, th.tau),
        "regularity": check_edge_regularity(&a.structure, &a.f, th.tau),
        "nonoverlap": nonoverlap,
        "outliers": a.report(),
    });
    Ok(vec![("analyze.json", to_json(&report)?)])
}

fn density(ctx: &Session, flags: &Flags) -> Result<Outputs> {
    let points = flags.grid.or(ctx.cfg.density.grid).unwrap_or(DEFAULT_GRID);
    if points < 2 {
        bail!("grid needs at least 2 points, got {points}");
    }
    let a = &ctx.analysis;
    let top = 1.1 * a.structure.top_edge();
    let grid: Vec<f64> = (0..points).map(|k| top * k as f64 / (points - 1) as f64).collect();
    let rho = density_grid(&a.f, &a.structure, &grid, Execution::default())?;
    let density = csv_text(
        &["E", "rho"],
        grid.iter().zip(&rho).map(|(e, r)| vec![e.to_string(), r.to_string()]),
    )?;
    let gammas = classical_locations(&a.f, &a.structure, ctx.model.n())?;
    let rows = gammas.iter().enumerate().flat_map(|(i, g)| {
        g.iter()
            .enumerate()
            .map(move |(j, v)| vec![(i + 1).to_string(), (j + 1).to_string(), v.to_string()])
    });
    let gamma = csv_text(&["component", "j", "gamma"], rows)?;
    Ok(vec![("density.csv", density), ("gamma.csv", gamma)])
}

/// 1-based component and rank of each global eigenvalue index; (0, 0) past the bulk counts.
fn labels(s: &BulkStructure, len: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(0, 0); len];
    for i in 1..=s.p {
        let base = s.offset(i);
        for j in 0..s.bulk_counts[i - 1] {
            if let Some(slot) = out.get_mut(base + j) {
                *slot = (i, j + 1);
            }
        }
    }
    out
}

fn simulation_csv(result: &SimulationResult, s: &BulkStructure) -> Result<String> {
    let mut rows = Vec::new();
    for rep in &result.replicates {
        for (idx, (&mu, (i, j))) in rep.mu.iter().zip(labels(s, rep.mu.len())).enumerate() {
            let lambda = rep.lambda.as_ref().map(|l| l[idx]);
            let overlap = rep
                .outliers
                .iter()
                .find(|o| o.component == i && o.rank == j)
                .map(|o| o.overlap);
            rows.push(vec![
                rep.replicate.to_string(),
                i.to_string(),
                j.to_string(),
                mu.to_string(),
                opt(lambda),
                opt(overlap),
            ]);
        }
    }
    csv_text(&["replicate", "component", "rank", "mu", "lambda", "overlap"], rows)
}

fn simulate(ctx: &Session, flags: &Flags) -> Result<Outputs> {
    let section = ctx
        .cfg
        .simulate
        .clone()
        .ok_or_else(|| anyhow!("config has no [simulate] section"))?;
    let a = &ctx.analysis;
    let th = &ctx.thresholds;
    let mut cfg = SimulationConfig::new(ctx.model.clone());
    cfg.replicates = section.replicates;
    cfg.seed = flags.seed.unwrap_or(section.seed);
    cfg.entry_law = section.law;
    cfg.coupled = section.coupled;
    cfg.thresholds = *th;
    let result = run_with(&cfg, a)?;
    let gammas = classical_locations(&a.f, &a.structure, ctx.model.n())?;
    let replicates: Vec<_> = result
        .replicates
        .iter()
        .map(|r| {
            json!({
                "replicate": r.replicate,
                "outliers": r.outliers,
                "extremal": r.extremal,
                "interlacing_violations": r.interlacing_violations,
                "relabel_mismatches": r.relabel_mismatches,
                "detected_outliers": r.detected_outliers,
            })
        })
        .collect();
    let report = json!({
        "seed": result.seed,
        "entry_law": result.entry_law,
        "coupled": result.coupled,
        "M": result.m,
        "N": result.n,
        "slack": th.slack,
        "verification": verify_theorems(&result, a, th.slack),
        "rigidity": rigidity_check(&result, &gammas, &a.structure, th.eps1, th.slack),
        "summary": result.summary,
        "replicates": replicates,
    });
    Ok(vec![
        ("simulate.json", to_json(&report)?),
        ("simulate.csv", simulation_csv(&result, &a.structure)?),
    ])
}

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn plan_for(ctx: &Session, eigs: &[f64], loss: Loss, eta: Option<f64>) -> Result<ShrinkagePlan> {
    let a = &ctx.analysis;
    let opts = ShrinkOptions {
        thresholds: ctx.thresholds,
        eta,
        ..ShrinkOptions::default()
    };
    Ok(shrink_spectrum(eigs, &ctx.model, &a.f, &a.structure, loss, &opts)?)
}

fn shrink(ctx: &Session) -> Result<Outputs> {
    let section = ctx
        .cfg
        .shrink
        .as_ref()
        .ok_or_else(|| anyhow!("config has no [shrink] section"))?;
    let loss = Loss::from_str(&section.loss).map_err(|e| anyhow!("{e}"))?;
    let eigs = descending(read_eigenvalues(&section.eigenvalues)?);
    let plan = plan_for(ctx, &eigs, loss, section.eta)?;
    for note in &plan.notes {
        log::info!("{note}");
    }
    let rows = plan.entries.iter().map(|e| {
        vec![
            e.index.to_string(),
            e.mu.to_string(),
            e.method.to_string(),
            opt(e.l),
            opt(e.c2),
            e.beta.to_string(),
        ]
    });
    Ok(vec![("shrink.csv", csv_text(&["index", "mu", "method", "l", "c2", "beta"], rows)?)])
}

fn sample(ctx: &Session, seed: u64) -> Result<Vec<f64>> {
    let mut cfg = SimulationConfig::new(ctx.model.clone());
    cfg.seed = seed;
    cfg.coupled = false;
    cfg.thresholds = ctx.thresholds;
    let r = run_with(&cfg, &ctx.analysis)?;
    Ok(r.replicates.into_iter().next().map(|r| r.mu).unwrap_or_default())
}

fn oracle(ctx: &Session, flags: &Flags) -> Result<Outputs> {
    let section = ctx.cfg.oracle.clone().unwrap_or_default();
    let seed = flags.seed.or(section.seed).unwrap_or(0);
    let (eigs, source) = match &section.eigenvalues {
        Some(path) => (descending(read_eigenvalues(path)?), json!({ "file": path })),
        None => (sample(ctx, seed)?, json!({ "simulated_seed": seed })),
    };
    let plan = plan_for(ctx, &eigs, Loss::FrobeniusOracle, section.eta)?;
    let a = &ctx.analysis;
    let outliers: Vec<_> = a
        .classification
        .outliers()
        .map(|c| -> Result<_> {
            let estimate = plan
                .entries
                .iter()
                .filter(|e| e.method == Method::OutlierFormula && e.component == Some(c.component))
                .nth(c.rank - 1)
                .map(|e| e.beta);
            Ok(json!({
                "spike": c.spike,
                "sigma_g": c.sigma_g,
                "component": c.component,
                "rank": c.rank,
                "model_value": oracle_outlier_value(&a.f, &a.structure, c.sigma_g)?,
                "estimate": estimate,
            }))
        })
        .collect::<Result<_>>()?;
    let report = json!({
        "source": source,
        "eta": plan.eta,
        "notes": plan.notes,
        "detected_outliers": plan.outliers,
        "outliers": outliers,
    });
    let rows = plan
        .entries
        .iter()
        .map(|e| vec![e.index.to_string(), e.mu.to_string(), e.method.to_string(), e.beta.to_string()]);
    Ok(vec![
        ("oracle.csv", csv_text(&["index", "mu", "method", "d_hat"], rows)?),
        ("oracle.json", to_json(&report)?),
    ])
}
