//! The six subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{AlphaPolicy, ExperimentConfig, SCHEMA};
use super::report::{exit_code_for, slug, Check, ExperimentReport, OrderRow, Output, EXIT_CHECK, EXIT_PASS};
use super::svg::{columns, Mark, Plot, Series};
use crate::algebra::StratifiedAlgebra;
use crate::catalog::{entry_from_id, parse_entry_id, spherical_eigenvalue, CatalogEntry, DiscrepancyClass};
use crate::error::{LabError, Result};
use crate::frequency::{
    default_cbar_grid, default_order_window, default_r_grid, energy_derivative_check, fit_min_cbar, identity_residuals, RESIDUAL_FLOOR,
    frequency_profile, height_derivative_check, positivity, adjusted_frequency, vanishing_order, FrequencyProfile,
};
use crate::geometry::{harmonicity_oracle, GaugeGeometry};
use crate::identities::{structural_suite, DEFAULT_SEED};
use crate::par;
use crate::quadrature::{least_squares_slope, QuadratureSpec};
use crate::solver::{convergence_study, discrete_frequency_pipeline, solve, GridProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Identities,
    Frequency,
    Monotonicity,
    Order,
    Solve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Identities => "identities",
            Command::Frequency => "frequency",
            Command::Monotonicity => "monotonicity",
            Command::Order => "order",
            Command::Solve => "solve",
        }
    }
}

#[derive(Serialize)]
struct Timings {
    command: String,
    seconds: f64,
    threads: usize,
}

/// Runs a command, writing its report, tables and plots under `out`.
/// Wall-clock time goes to a separate file so the report stays
/// byte-identical across runs.
pub fn run(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut sink = Output::new(out)?;
    let mut report = ExperimentReport::new(command.name(), cfg);
    match command {
        Command::Identities => identities(cfg, &mut sink, &mut report)?,
        Command::Frequency => frequency(cfg, &mut sink, &mut report)?,
        Command::Monotonicity => monotonicity(cfg, &mut sink, &mut report)?,
        Command::Order => order(cfg, &mut sink, &mut report)?,
        Command::Solve => solve_cmd(cfg, &mut sink, &mut report)?,
    }
    report.artifacts = sink.written.clone();
    report.finalize();
    sink.json(&format!("{}_report.json", command.name()), &report)?;
    let t = Timings { command: command.name().into(), seconds: start.elapsed().as_secs_f64(), threads: par::current_threads() };
    sink.json(&format!("{}_timings.json", command.name()), &t)?;
    Ok(report)
}

fn geometry_tag(id: &str) -> String {
    id.replace(':', "")
}

fn gate(geom: &GaugeGeometry, seed: u64) -> Result<()> {
    if geom.is_euclidean() {
        return Ok(());
    }
    let h = harmonicity_oracle(geom, 0.2, 1.0, 50, seed)?;
    if !h.passed {
        return Err(LabError::CheckFailed(format!(
            "gauge harmonicity residual {:e} on {}; downstream runs aborted",
            h.max_relative_residual,
            geom.id()
        )));
    }
    Ok(())
}

fn entries(cfg: &ExperimentConfig, command: Command) -> Result<Vec<(GaugeGeometry, CatalogEntry)>> {
    let ids: Vec<String> = if !cfg.entries.is_empty() {
        cfg.entries.clone()
    } else if !cfg.k_list.is_empty() {
        let tag = geometry_tag(&cfg.geometry);
        cfg.k_list
            .iter()
            .map(|&k| match command {
                Command::Order if cfg.geometry.starts_with("heisenberg") => {
                    let d = 2.0 * k.sqrt();
                    if d.fract() != 0.0 {
                        return Err(LabError::Config(format!("K = {k} needs an integer sqrt for the polyradial family")));
                    }
                    Ok(format!("{tag}/polyradial?degree={d}&lambda={k}"))
                }
                Command::Order => Err(LabError::Config("k_list generates order entries on Heisenberg geometries only".into())),
                _ => Ok(format!("{tag}/radial-eig?lambda={k}")),
            })
            .collect::<Result<_>>()?
    } else {
        return Err(LabError::Config("config lists no entries and no k_list".into()));
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for id in ids {
        if seen.insert(id.clone()) {
            out.push(entry_from_id(&id)?);
        }
    }
    Ok(out)
}

fn alpha_for(cfg: &ExperimentConfig, entry: &CatalogEntry) -> f64 {
    match cfg.alpha {
        AlphaPolicy::SqrtK => entry.k().sqrt(),
        AlphaPolicy::Explicit(a) => a,
    }
}

fn r_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.r_grid.clone().unwrap_or_else(default_r_grid)
}

fn seed(cfg: &ExperimentConfig) -> u64 {
    if cfg.seed == 0 {
        DEFAULT_SEED
    } else {
        cfg.seed
    }
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max.abs() <= 1e-300 {
        (max - min).abs()
    } else {
        (max - min) / max.abs()
    }
}

#[derive(Serialize)]
struct IdentityRow<'a> {
    geometry: &'a str,
    check: &'a str,
    max_error: f64,
    points: usize,
    tolerance: f64,
    passed: bool,
}

#[derive(Serialize)]
struct CatalogRow {
    entry: String,
    relative_residual: Option<f64>,
    relative_discrepancy: Option<f64>,
    max_v_ratio: Option<f64>,
    max_zv_ratio: Option<f64>,
    k: Option<f64>,
    passed: bool,
    error: String,
}

fn identities(cfg: &ExperimentConfig, sink: &mut Output, report: &mut ExperimentReport) -> Result<()> {
    let geom = match &cfg.algebra {
        Some(doc) => {
            let alg = StratifiedAlgebra::from_doc(doc)?;
            let v = alg.validate();
            if !v.is_valid() {
                let detail = serde_json::to_string(&v.violations)?;
                report.check(Check::new("algebra_valid", false).with_detail(detail));
                return Ok(());
            }
            report.check(Check::new("algebra_valid", true));
            GaugeGeometry::for_algebra(alg)?
        }
        None => GaugeGeometry::builtin(&cfg.geometry)?,
    };
    let suite = structural_suite(&geom, cfg.points, seed(cfg))?;
    let id = geom.id();
    let mut rows: Vec<IdentityRow> = suite
        .checks
        .iter()
        .map(|c| IdentityRow { geometry: &id, check: &c.name, max_error: c.max_error, points: c.points, tolerance: c.tolerance, passed: c.passed })
        .collect();
    if let Some(h) = &suite.harmonicity {
        rows.push(IdentityRow {
            geometry: &id,
            check: "gauge harmonicity",
            max_error: h.max_relative_residual,
            points: h.samples,
            tolerance: h.tolerance,
            passed: h.passed,
        });
    }
    sink.csv("identities.csv", &rows)?;
    if cfg.algebra.is_none() {
        report.check(Check::new("algebra_valid", suite.algebra_valid));
    }
    let max_err = worst(suite.checks.iter().map(|c| c.max_error));
    let failed: Vec<&str> = suite.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    report.check(
        Check::below("structural_identities", max_err, crate::identities::STRUCTURAL_TOL).with_detail(if failed.is_empty() {
            format!("{} checks at {} points", suite.checks.len(), cfg.points)
        } else {
            format!("failed: {}", failed.join(", "))
        }),
    );
    report.fit("structural_max_error", max_err);
    if let Some(h) = &suite.harmonicity {
        report.check(Check::below("gauge_harmonicity", h.max_relative_residual, h.tolerance));
        report.fit("harmonicity_residual", h.max_relative_residual);
    }
    if !cfg.entries.is_empty() {
        let mut rows = Vec::new();
        for id in &cfg.entries {
            rows.push(match entry_from_id(id) {
                Ok((_, e)) => {
                    let v = &e.verification;
                    CatalogRow {
                        entry: id.clone(),
                        relative_residual: Some(v.relative_residual),
                        relative_discrepancy: v.relative_discrepancy,
                        max_v_ratio: Some(v.potential.max_v_ratio),
                        max_zv_ratio: Some(v.potential.max_zv_ratio),
                        k: Some(e.k()),
                        passed: true,
                        error: String::new(),
                    }
                }
                Err(LabError::CheckFailed(msg)) => CatalogRow {
                    entry: id.clone(),
                    relative_residual: None,
                    relative_discrepancy: None,
                    max_v_ratio: None,
                    max_zv_ratio: None,
                    k: None,
                    passed: false,
                    error: msg,
                },
                Err(e) => return Err(e),
            });
        }
        sink.csv("catalog.csv", &rows)?;
        let bad: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.entry.as_str()).collect();
        report.check(Check::new("catalog_soundness", bad.is_empty()).with_detail(if bad.is_empty() {
            format!("{} entries verified", rows.len())
        } else {
            format!("failed: {}", bad.join(", "))
        }));
    }
    Ok(())
}

#[derive(Serialize)]
struct FrequencyRow {
    r: f64,
    height: f64,
    height_err: f64,
    energy: f64,
    energy_err: f64,
    frequency: Option<f64>,
    dh_fd: Option<f64>,
    dh_identity: Option<f64>,
    dh_residual: Option<f64>,
    di_fd: Option<f64>,
    di_identity: Option<f64>,
    di_residual: Option<f64>,
    rellich_residual: f64,
    positivity: f64,
    positivity_err: f64,
    remainder: f64,
    envelope: f64,
}

/// The spherical-harmonic degree if `id` names one.
fn spherical_kappa(id: &str) -> Option<u32> {
    let (geo, kind, params) = parse_entry_id(id).ok()?;
    if kind != "sph-harm" || !geo.starts_with("euclidean") {
        return None;
    }
    params.iter().find(|(k, _)| k == "kappa").and_then(|(_, v)| v.parse().ok())
}

fn frequency_rows(profile: &FrequencyProfile, entry: &CatalogEntry, dini: &crate::geometry::DiniModulus) -> Vec<FrequencyRow> {
    let dh = height_derivative_check(profile);
    let di = energy_derivative_check(profile);
    let pos = positivity(profile, entry.k());
    profile
        .integrals
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let inner = |rows: &Vec<crate::frequency::IdentityRow>| (i >= 1 && i + 1 < profile.r_grid.len()).then(|| rows[i - 1]);
            let h = inner(&dh);
            let e = inner(&di);
            FrequencyRow {
                r: x.r,
                height: x.height,
                height_err: x.height_error(),
                energy: x.energy,
                energy_err: x.energy_error(),
                frequency: profile.frequency[i],
                dh_fd: h.map(|h| h.finite_difference),
                dh_identity: h.map(|h| h.identity),
                dh_residual: h.map(|h| h.residual),
                di_fd: e.map(|h| h.finite_difference),
                di_identity: e.map(|h| h.identity),
                di_residual: e.map(|h| h.residual),
                rellich_residual: x.rellich_residual(),
                positivity: pos[i].value,
                positivity_err: pos[i].error_estimate,
                remainder: -2.0 / x.r * x.discrepancy_moment,
                envelope: dini.eval(x.r) / x.r * x.height,
            }
        })
        .collect()
}

fn frequency(cfg: &ExperimentConfig, sink: &mut Output, report: &mut ExperimentReport) -> Result<()> {
    let list = entries(cfg, Command::Frequency)?;
    let grid = r_grid(cfg);
    let dini = cfg.dini.modulus()?;
    let tol = cfg.tolerances;
    let mut identity_worst: (f64, String) = (0.0, String::new());
    let mut positivity_fail = Vec::new();
    let mut envelope: Option<(bool, Vec<String>)> = None;
    let mut quantization: Option<f64> = None;
    let mut covariance: Option<f64> = None;
    for (geom, entry) in &list {
        gate(geom, seed(cfg))?;
        let alpha = alpha_for(cfg, entry);
        let profile = frequency_profile(geom, entry, &grid, alpha, &cfg.quadrature)?;
        let rows = frequency_rows(&profile, entry, &dini);
        let s = slug(&entry.id);
        let text = sink.csv(&format!("frequency_{s}.csv"), &rows)?;
        let cols = columns(&text, "r", &["frequency"])?;
        sink.svg(
            &format!("frequency_{s}.svg"),
            &Plot {
                title: format!("N(r) for {}", entry.id),
                x_label: "r".into(),
                y_label: "N(r)".into(),
                series: vec![Series { label: format!("alpha = {alpha}"), points: cols[0].clone(), mark: Mark::Line }],
            },
        )?;
        let w = worst(rows.iter().flat_map(|r| [r.dh_residual.unwrap_or(0.0), r.di_residual.unwrap_or(0.0), r.rellich_residual]));
        report.fit(format!("identity_residual_{s}"), w);
        if w > identity_worst.0 || identity_worst.1.is_empty() {
            identity_worst = (w, entry.id.clone());
        }
        if rows.iter().any(|r| r.positivity < -r.positivity_err) {
            positivity_fail.push(entry.id.clone());
        }
        if entry.discrepancy_class != DiscrepancyClass::Unknown {
            let e = envelope.get_or_insert((true, Vec::new()));
            if rows.iter().any(|r| r.remainder.abs() > r.envelope + 1e-12 * r.height.abs()) {
                e.0 = false;
                e.1.push(entry.id.clone());
            }
        }
        let n: Vec<f64> = profile.frequency.iter().flatten().copied().collect();
        if let Some(kappa) = spherical_kappa(&entry.id).filter(|_| entry.lambda == 0.0) {
            let target = 2.0 * (alpha + 1.0) * kappa as f64;
            let err = worst(n.iter().map(|v| (v / target - 1.0).abs()));
            report.fit(format!("quantization_error_{s}"), err);
            quantization = Some(quantization.map_or(err, |q: f64| q.max(err)));
        }
        if entry.lambda == 0.0 && entry.known_order.is_some() && !n.is_empty() {
            if !geom.is_euclidean() {
                // measured only; no quantization law is asserted off ℝⁿ
                let k = entry.known_order.unwrap() as f64;
                let mean = n.iter().sum::<f64>() / n.len() as f64;
                report.fit(format!("homogeneous_ratio_{s}"), mean / (2.0 * (alpha + 1.0) * k));
            }
            let sp = spread(&n);
            covariance = Some(covariance.map_or(sp, |c: f64| c.max(sp)));
        }
    }
    report.check(Check::below("derivative_identities", identity_worst.0, tol.identity).with_detail(format!("worst entry {}", identity_worst.1)));
    report.check(Check::new("positivity", positivity_fail.is_empty()).with_detail(positivity_fail.join(", ")));
    if let Some((ok, bad)) = envelope {
        report.check(Check::new("discrepancy_envelope", ok).with_detail(bad.join(", ")));
    }
    if let Some(q) = quantization {
        report.check(Check::below("euclidean_quantization", q, tol.quantization));
    }
    if let Some(c) = covariance {
        report.check(Check::below("scale_covariance", c, tol.quantization));
    }
    if !cfg.identity_levels.is_empty() {
        identity_refinement(cfg, &list, sink, report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RefinementRow {
    entry: String,
    resolution: usize,
    step: f64,
    r: f64,
    height: f64,
    energy: f64,
    rellich: f64,
}

/// Identity residuals at each level; the finest must be within tolerance
/// and every refinement must reduce the worst residual of each identity.
fn identity_refinement(
    cfg: &ExperimentConfig,
    list: &[(GaugeGeometry, CatalogEntry)],
    sink: &mut Output,
    report: &mut ExperimentReport,
) -> Result<()> {
    let mut rows = Vec::new();
    let mut finest = 0.0f64;
    let mut stalled = Vec::new();
    for (geom, entry) in list {
        let alpha = alpha_for(cfg, entry);
        let mut prev: Option<[f64; 3]> = None;
        for level in &cfg.identity_levels {
            let spec = QuadratureSpec { resolution: vec![level.resolution], ..cfg.quadrature.clone() };
            let mut w = [0.0f64; 3];
            for &r in &cfg.identity_radii {
                let x = identity_residuals(geom, &entry.u, &entry.potential.field, r, level.step, alpha, &spec)?;
                for (slot, v) in w.iter_mut().zip([x.height, x.energy, x.rellich]) {
                    *slot = worst([*slot, v]);
                }
                rows.push(RefinementRow {
                    entry: entry.id.clone(),
                    resolution: level.resolution,
                    step: level.step,
                    r,
                    height: x.height,
                    energy: x.energy,
                    rellich: x.rellich,
                });
            }
            if let Some(p) = prev {
                for (name, (a, b)) in ["height", "energy", "rellich"].iter().zip(p.iter().zip(&w)) {
                    if !(b < a || *b <= RESIDUAL_FLOOR) {
                        stalled.push(format!("{} {name} at N = {}", entry.id, level.resolution));
                    }
                }
            }
            prev = Some(w);
        }
        finest = worst([finest, prev.map_or(0.0, |p| worst(p))]);
    }
    sink.csv("identity_refinement.csv", &rows)?;
    report.fit("identity_refinement_finest", finest);
    let tol = cfg.tolerances.identity;
    report.check(Check {
        name: "identity_refinement".into(),
        passed: finest < tol && stalled.is_empty(),
        value: Some(finest),
        tolerance: Some(tol),
        detail: if stalled.is_empty() { String::new() } else { format!("not decreasing: {}", stalled.join(", ")) },
    });
    Ok(())
}

#[derive(Serialize)]
struct MonotonicityRow {
    r: f64,
    frequency: Option<f64>,
    adjusted: Option<f64>,
    frequency_refined: Option<f64>,
    adjusted_refined: Option<f64>,
}

#[derive(Serialize)]
struct ViolationRow {
    entry: String,
    cbar: f64,
    r: f64,
    drop: f64,
}

fn monotonicity(cfg: &ExperimentConfig, sink: &mut Output, report: &mut ExperimentReport) -> Result<()> {
    let list = entries(cfg, Command::Monotonicity)?;
    // reject hypothesis violations before any compute
    if !cfg.allow_alpha_mismatch {
        for (_, e) in &list {
            let a = alpha_for(cfg, e);
            if (a - e.k().sqrt()).abs() > 1e-9 * e.k().sqrt() {
                return Err(LabError::Hypothesis(format!("{}: alpha = {a} but sqrt(K) = {}", e.id, e.k().sqrt())));
            }
        }
    }
    let grid = r_grid(cfg);
    let dini = cfg.dini.modulus()?;
    let cgrid = cfg.cbar_grid.clone().unwrap_or_else(default_cbar_grid);
    let tol = cfg.tolerances.monotonicity;
    let refined = cfg.quadrature.rescaled(cfg.refine[0], cfg.refine[1]);
    let mut failures = Vec::new();
    let mut violations = Vec::new();
    for (geom, entry) in &list {
        gate(geom, seed(cfg))?;
        let alpha = alpha_for(cfg, entry);
        let k = entry.k();
        let s = slug(&entry.id);
        let base = frequency_profile(geom, entry, &grid, alpha, &cfg.quadrature)?;
        let fine = frequency_profile(geom, entry, &grid, alpha, &refined)?;
        let rep = fit_min_cbar(&base, &dini, k, &cgrid, tol, cfg.allow_alpha_mismatch)?;
        let rep_fine = fit_min_cbar(&fine, &dini, k, &cgrid, tol, cfg.allow_alpha_mismatch)?;
        for (c, drops) in &rep.violations {
            for d in drops {
                violations.push(ViolationRow { entry: entry.id.clone(), cbar: *c, r: d.r, drop: d.magnitude });
            }
        }
        let adj = |p: &FrequencyProfile, c: Option<f64>| -> Result<Vec<Option<f64>>> {
            match c {
                Some(c) => adjusted_frequency(p, &dini, c, k, cfg.allow_alpha_mismatch),
                None => Ok(vec![None; p.r_grid.len()]),
            }
        };
        let a0 = adj(&base, rep.cbar_fitted)?;
        let a1 = adj(&fine, rep_fine.cbar_fitted)?;
        let rows: Vec<MonotonicityRow> = (0..grid.len())
            .map(|i| MonotonicityRow {
                r: grid[i],
                frequency: base.frequency[i],
                adjusted: a0[i],
                frequency_refined: fine.frequency[i],
                adjusted_refined: a1[i],
            })
            .collect();
        let text = sink.csv(&format!("monotonicity_{s}.csv"), &rows)?;
        let cols = columns(&text, "r", &["frequency", "adjusted"])?;
        sink.svg(
            &format!("monotonicity_{s}.svg"),
            &Plot {
                title: format!("adjusted frequency for {}", entry.id),
                x_label: "r".into(),
                y_label: "value".into(),
                series: vec![
                    Series { label: "N(r)".into(), points: cols[0].clone(), mark: Mark::Line },
                    Series { label: format!("adjusted, C = {}", rep.cbar_fitted.unwrap_or(f64::NAN)), points: cols[1].clone(), mark: Mark::Line },
                ],
            },
        )?;
        let mut why = Vec::new();
        match (rep.cbar_fitted, rep_fine.cbar_fitted) {
            (Some(c0), Some(c1)) => {
                report.fit(format!("cbar_{s}"), c0);
                report.fit(format!("cbar_refined_{s}"), c1);
                if (c0.log2() - c1.log2()).abs() > 1.0 + 1e-12 {
                    why.push(format!("C-bar moved from {c0} to {c1} under refinement"));
                }
            }
            _ => why.push("no C-bar in the grid makes the map nondecreasing".to_string()),
        }
        if let Some(two) = &rep.two_radius {
            report.fit(format!("c1_{s}"), two.c1);
            report.fit(format!("c2_{s}"), two.c2);
            report.fit(format!("two_radius_worst_ratio_{s}"), two.worst_ratio);
            if !two.passed {
                why.push("two-radius bound violated".into());
            }
        }
        if !why.is_empty() {
            failures.push(format!("{}: {}", entry.id, why.join("; ")));
        }
    }
    sink.csv("monotonicity_violations.csv", &violations)?;
    report.check(Check::new("monotonicity", failures.is_empty()).with_detail(failures.join(" | ")));
    Ok(())
}

#[derive(Serialize)]
struct SupRow {
    r: f64,
    sup: f64,
    log_r: f64,
    log_sup: f64,
    fit: f64,
}

fn order(cfg: &ExperimentConfig, sink: &mut Output, report: &mut ExperimentReport) -> Result<()> {
    let list = entries(cfg, Command::Order)?;
    let window = cfg.order_window.clone().unwrap_or_else(default_order_window);
    let tol = cfg.tolerances;
    let mut rows = Vec::new();
    for (geom, entry) in &list {
        gate(geom, seed(cfg))?;
        let est = vanishing_order(geom, entry, &window)?;
        let s = slug(&entry.id);
        let pts: Vec<(f64, f64)> = est.window.iter().zip(&est.sups).map(|(r, v)| (r.ln(), v.ln())).collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sups: Vec<SupRow> = pts
            .iter()
            .zip(&est.window)
            .zip(&est.sups)
            .map(|((p, &r), &v)| SupRow { r, sup: v, log_r: p.0, log_sup: p.1, fit: my + est.slope * (p.0 - mx) })
            .collect();
        let text = sink.csv(&format!("order_{s}.csv"), &sups)?;
        let cols = columns(&text, "log_r", &["log_sup", "fit"])?;
        sink.svg(
            &format!("order_{s}.svg"),
            &Plot {
                title: format!("log sup |u| for {}", entry.id),
                x_label: "log r".into(),
                y_label: "log sup".into(),
                series: vec![
                    Series { label: "measured".into(), points: cols[0].clone(), mark: Mark::Points },
                    Series { label: format!("slope {:.4}", est.slope), points: cols[1].clone(), mark: Mark::Line },
                ],
            },
        )?;
        let lambda_kappa = spherical_kappa(&entry.id).map(|k| spherical_eigenvalue(geom.dim(), k));
        rows.push(OrderRow {
            entry: entry.id.clone(),
            k: est.k,
            sqrt_k: est.sqrt_k,
            slope: est.slope,
            fit_residual: est.fit_residual,
            ratio: est.ratio,
            known_order: entry.known_order,
            lambda_kappa,
        });
    }
    let text = sink.csv("order.csv", &rows)?;
    let cols = columns(&text, "sqrt_k", &["slope"])?;
    let c2_fit = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let line: Vec<(f64, f64)> = cols[0].iter().map(|&(x, _)| (x, c2_fit * x)).collect();
    sink.svg(
        "order_slope_vs_sqrtk.svg",
        &Plot {
            title: "fitted slope against sqrt(K)".into(),
            x_label: "sqrt(K)".into(),
            y_label: "slope".into(),
            series: vec![
                Series { label: "entries".into(), points: cols[0].clone(), mark: Mark::Points },
                Series { label: format!("C2 = {c2_fit:.4}"), points: line, mark: Mark::Line },
            ],
        },
    )?;
    for r in rows.iter().filter(|r| r.lambda_kappa.is_none()) {
        if let Some(k) = r.known_order {
            report.fit(format!("order_slope_error_{}", slug(&r.entry)), (r.slope - k as f64).abs());
        }
    }
    // exact homogeneity: harmonic polynomials only
    let known: Vec<&OrderRow> = rows.iter().filter(|r| r.known_order.is_some() && r.lambda_kappa.is_some()).collect();
    if !known.is_empty() {
        let err = worst(known.iter().map(|r| (r.slope - r.known_order.unwrap() as f64).abs()));
        report.fit("order_slope_max_error", err);
        let calib: Vec<f64> = known
            .iter()
            .filter(|r| r.known_order.is_some_and(|k| k >= 3))
            .map(|r| r.slope / r.lambda_kappa.unwrap().sqrt())
            .collect();
        let mut passed = err < tol.order + 1e-12;
        let mut detail = format!("max |slope - kappa| = {err:.3e}");
        if calib.len() >= 2 {
            let sp = spread(&calib);
            report.fit("calibration_spread", sp);
            passed &= sp < tol.calibration_spread;
            detail += &format!("; kappa/sqrt(lambda) spread {sp:.3e} (tol {:.1e})", tol.calibration_spread);
        }
        report.check(Check { name: "spherical_order".into(), passed, value: Some(err), tolerance: Some(tol.order), detail });
    }
    let distinct_k: BTreeSet<u64> = rows.iter().map(|r| r.k.to_bits()).collect();
    if distinct_k.len() >= 2 {
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let sp = spread(&ratios);
        let sound = rows.iter().all(|r| r.slope <= c2_fit * r.sqrt_k * (1.0 + 1e-12));
        report.fit("c2_fit", c2_fit);
        report.fit("c2_spread", sp);
        report.check(Check {
            name: "order_soundness".into(),
            passed: sound && sp < tol.order_spread,
            value: Some(sp),
            tolerance: Some(tol.order_spread),
            detail: format!("C2_fit = {c2_fit}"),
        });
    }
    report.order_rows = rows;
    Ok(())
}

#[derive(Serialize)]
struct PipelineRow {
    r: f64,
    frequency_series: Option<f64>,
    frequency_discrete: Option<f64>,
    difference: Option<f64>,
}

fn solve_cmd(cfg: &ExperimentConfig, sink: &mut Output, report: &mut ExperimentReport) -> Result<()> {
    let sc = cfg.solver.as_ref().ok_or_else(|| LabError::Config("solve needs a \"solver\" section".into()))?;
    let (geom, entry) = entry_from_id(&sc.entry)?;
    if geom.id() != "heisenberg:1" {
        return Err(LabError::Unsupported("the solver runs on heisenberg:1".into()));
    }
    gate(&geom, seed(cfg))?;
    let study = convergence_study(sc.lo, sc.hi, &sc.levels, &entry.potential.field, &entry.u, &sc.options)?;
    let text = sink.csv("solve_convergence.csv", &study.rows)?;
    let cols = columns(&text, "h", &["max_error"])?;
    let logpts: Vec<(f64, f64)> = cols[0].iter().map(|&(h, e)| (h.ln(), e.max(1e-300).ln())).collect();
    sink.svg(
        "solve_convergence.svg",
        &Plot {
            title: format!("max error against h for {}", entry.id),
            x_label: "log h".into(),
            y_label: "log max error".into(),
            series: vec![Series { label: format!("order {:.3}", least_squares_slope(&logpts)), points: logpts, mark: Mark::Line }],
        },
    )?;
    report.fit("solver_order", study.observed_order);
    let mut check = Check {
        name: "solver_validation".into(),
        passed: study.observed_order >= cfg.tolerances.solver_order,
        value: Some(study.observed_order),
        tolerance: Some(cfg.tolerances.solver_order),
        detail: format!("order over levels {:?}", sc.levels),
    };
    if sc.dump {
        let n = *sc.levels.last().expect("levels checked");
        let p = GridProblem::new(sc.lo, sc.hi, [n, n, 2 * n], entry.potential.field.clone(), entry.u.clone())?;
        let sol = solve(&p, &sc.options)?;
        let (d, h) = (sink.dir.join("solution.bin"), sink.dir.join("solution.json"));
        sol.dump(&d, &h)?;
        sink.written.extend(["solution.bin".to_string(), "solution.json".to_string()]);
    }
    if let Some(pc) = &sc.pipeline {
        let alpha = alpha_for(cfg, &entry);
        let p = GridProblem::centered(pc.half, pc.intervals, entry.potential.field.clone(), entry.u.clone())?;
        let sol = solve(&p, &sc.options)?;
        let exact = frequency_profile(&geom, &entry, &pc.r_grid, alpha, &cfg.quadrature)?;
        let disc = discrete_frequency_pipeline(&geom, &sol, &entry.potential.field, &pc.r_grid, alpha, &cfg.quadrature)?;
        let rows: Vec<PipelineRow> = (0..pc.r_grid.len())
            .map(|i| {
                let (a, b) = (exact.frequency[i], disc.frequency[i]);
                PipelineRow {
                    r: pc.r_grid[i],
                    frequency_series: a,
                    frequency_discrete: b,
                    difference: a.zip(b).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)),
                }
            })
            .collect();
        let text = sink.csv("solve_pipeline.csv", &rows)?;
        let cols = columns(&text, "r", &["frequency_series", "frequency_discrete"])?;
        sink.svg(
            "solve_pipeline.svg",
            &Plot {
                title: format!("series and discrete N(r) for {}", entry.id),
                x_label: "r".into(),
                y_label: "N(r)".into(),
                series: vec![
                    Series { label: "series".into(), points: cols[0].clone(), mark: Mark::Line },
                    Series { label: "discrete".into(), points: cols[1].clone(), mark: Mark::Points },
                ],
            },
        )?;
        let diff = worst(rows.iter().map(|r| r.difference.unwrap_or(f64::INFINITY)));
        report.fit("pipeline_difference", diff);
        check.passed &= diff <= cfg.tolerances.pipeline;
        check.detail += &format!("; pipeline difference {diff:.3e} (tol {:.1e})", cfg.tolerances.pipeline);
    }
    report.check(check);
    Ok(())
}

/// One input of the aggregated summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryInput {
    pub path: String,
    pub command: String,
    pub config_hash: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossKRow {
    pub geometry: String,
    pub entry: String,
    pub k: f64,
    pub sqrt_k: f64,
    pub slope: f64,
    pub c2_fit: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub inputs: Vec<SummaryInput>,
    pub duplicates_skipped: usize,
    /// Largest `slope / √K` per geometry.
    pub c2_fit: BTreeMap<String, f64>,
    pub cross_k: Vec<CrossKRow>,
    pub passed: bool,
    pub exit_code: i32,
}

/// Merges reports, deduplicated by command and config hash.
pub fn run_report(paths: &[PathBuf], out: &Path) -> Result<Summary> {
    if paths.is_empty() {
        return Err(LabError::Config("report needs at least one report path".into()));
    }
    let mut seen = BTreeSet::new();
    let mut inputs = Vec::new();
    let mut reports = Vec::new();
    let mut dups = 0;
    for p in paths {
        let text = std::fs::read(p).map_err(|e| LabError::Config(format!("{}: {e}", p.display())))?;
        let raw: serde_json::Value = serde_json::from_slice(&text)?;
        if raw.get("schema").and_then(|s| s.as_u64()) != Some(SCHEMA as u64) {
            return Err(LabError::Config(format!("{}: schema mismatch", p.display())));
        }
        let rep: ExperimentReport =
            serde_json::from_value(raw).map_err(|e| LabError::Config(format!("{}: {e}", p.display())))?;
        if !seen.insert((rep.command.clone(), rep.config_hash.clone())) {
            dups += 1;
            continue;
        }
        inputs.push(SummaryInput {
            path: p.display().to_string(),
            command: rep.command.clone(),
            config_hash: rep.config_hash.clone(),
            passed: rep.passed,
        });
        reports.push(rep);
    }
    let order_rows: Vec<&OrderRow> = reports.iter().flat_map(|r| r.order_rows.iter()).collect();
    let geometry = |id: &str| id.split('/').next().unwrap_or_default().to_string();
    // one constant per geometry; the fitted ratio is per row
    let c2_for = |g: &str| order_rows.iter().filter(|r| geometry(&r.entry) == g).map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let mut cross_k: Vec<CrossKRow> = order_rows
        .iter()
        .map(|r| CrossKRow {
            geometry: geometry(&r.entry),
            entry: r.entry.clone(),
            k: r.k,
            sqrt_k: r.sqrt_k,
            slope: r.slope,
            c2_fit: c2_for(&geometry(&r.entry)),
        })
        .collect();
    cross_k.sort_by(|a, b| a.geometry.cmp(&b.geometry).then(a.k.total_cmp(&b.k)).then(a.entry.cmp(&b.entry)));
    let mut seen_rows = BTreeSet::new();
    cross_k.retain(|r| seen_rows.insert(r.entry.clone()));
    let c2_fit: BTreeMap<String, f64> = cross_k.iter().map(|r| (r.geometry.clone(), r.c2_fit)).collect();
    let passed = reports.iter().all(|r| r.passed);
    let summary = Summary {
        schema: SCHEMA,
        inputs,
        duplicates_skipped: dups,
        c2_fit,
        cross_k,
        passed,
        exit_code: if passed { EXIT_PASS } else { EXIT_CHECK },
    };
    let mut sink = Output::new(out)?;
    if !summary.cross_k.is_empty() {
        sink.csv("cross_k.csv", &summary.cross_k)?;
        let mut series = Vec::new();
        for (g, &c2) in &summary.c2_fit {
            let sub: Vec<&CrossKRow> = summary.cross_k.iter().filter(|r| &r.geometry == g).collect();
            series.push(Series { label: g.clone(), points: sub.iter().map(|r| (r.sqrt_k, r.slope)).collect(), mark: Mark::Points });
            series.push(Series {
                label: format!("{g}: C2 = {c2:.4}"),
                points: sub.iter().map(|r| (r.sqrt_k, c2 * r.sqrt_k)).collect(),
                mark: Mark::Line,
            });
        }
        sink.svg(
            "cross_k.svg",
            &Plot {
                title: "slope against sqrt(K) across reports".into(),
                x_label: "sqrt(K)".into(),
                y_label: "slope".into(),
                series,
            },
        )?;
    }
    sink.json("summary.json", &summary)?;
    Ok(summary)
}

/// Exit code for a finished command or the error that stopped it.
pub fn exit_code(result: &Result<ExperimentReport>) -> i32 {
    match result {
        Ok(r) => r.exit_code,
        Err(e) => exit_code_for(e),
    }
}

