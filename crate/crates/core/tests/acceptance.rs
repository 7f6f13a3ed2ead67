//! Acceptance suite. Runs every experiment config twice, with one worker
//! and with several, then prints one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use freqlab::lab::{self, Command, ExperimentConfig, ExperimentReport};
use freqlab::par;
use statrs::function::beta::beta;

const STRUCTURAL_TOL: f64 = 1e-8;
const HARMONICITY_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-7;
const DISCREPANCY_TOL: f64 = 1e-9;
const QUANTIZATION_TOL: f64 = 1e-2;
const IDENTITY_TOL: f64 = 2e-2;
const CBAR_MAX: f64 = 1024.0;
const SLOPE_TOL: f64 = 0.05;
const CALIBRATION_TOL: f64 = 0.10;
const SPREAD_TOL: f64 = 0.25;
const SOLVER_ORDER_MIN: f64 = 1.5;
const PIPELINE_TOL: f64 = 5e-2;
const WIDE_THREADS: usize = 4;

const RUNS: &[(&str, Command)] = &[
    ("identities_heisenberg", Command::Identities),
    ("identities_euclidean", Command::Identities),
    ("frequency_quantization", Command::Frequency),
    ("identity_refinement", Command::Frequency),
    ("frequency_positivity", Command::Frequency),
    ("monotonicity", Command::Monotonicity),
    ("order_euclidean", Command::Order),
    ("order_heisenberg", Command::Order),
    ("solve", Command::Solve),
];

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Runs {
    root: tempfile::TempDir,
    reports: BTreeMap<&'static str, ExperimentReport>,
    errors: BTreeMap<&'static str, String>,
}

impl Runs {
    fn dir(&self, side: &str, name: &str) -> PathBuf {
        self.root.path().join(side).join(name)
    }

    fn report(&self, name: &str) -> Result<&ExperimentReport, String> {
        self.reports
            .get(name)
            .ok_or_else(|| self.errors.get(name).cloned().unwrap_or_else(|| format!("{name} did not run")))
    }

    fn csv(&self, name: &str, file: &str) -> Result<Vec<BTreeMap<String, String>>, String> {
        let path = self.dir("narrow", name).join(file);
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        rdr.deserialize().collect::<Result<_, _>>().map_err(|e| e.to_string())
    }
}

fn run_all() -> Runs {
    let root = tempfile::tempdir().unwrap();
    let mut reports = BTreeMap::new();
    let mut errors = BTreeMap::new();
    for &(name, cmd) in RUNS {
        let cfg = match ExperimentConfig::load(&config_dir().join(format!("{name}.json"))) {
            Ok(c) => c,
            Err(e) => {
                errors.insert(name, e.to_string());
                continue;
            }
        };
        for (side, threads) in [("narrow", 1), ("wide", WIDE_THREADS)] {
            let out = root.path().join(side).join(name);
            let start = Instant::now();
            let res = par::with_threads(threads, || lab::run(cmd, &cfg, &out));
            eprintln!("  ran {name} on {threads} thread(s) in {:.1}s", start.elapsed().as_secs_f64());
            match res {
                Ok(r) if side == "narrow" => {
                    reports.insert(name, r);
                }
                Ok(_) => {}
                Err(e) => {
                    errors.insert(name, e.to_string());
                }
            }
        }
    }
    Runs { root, reports, errors }
}

type Outcome = Result<String, String>;

fn check_value(r: &ExperimentReport, name: &str) -> Result<(bool, Option<f64>, String), String> {
    r.checks
        .iter()
        .find(|c| c.name == name)
        .map(|c| (c.passed, c.value, c.detail.clone()))
        .ok_or_else(|| format!("report {} lacks check {name}", r.command))
}

fn fitted(r: &ExperimentReport, key: &str) -> Result<f64, String> {
    r.fitted.get(key).copied().ok_or_else(|| format!("report lacks fitted {key}"))
}

fn num(row: &BTreeMap<String, String>, key: &str) -> Option<f64> {
    row.get(key).and_then(|v| v.parse().ok())
}

fn below(what: &str, v: f64, tol: f64) -> Outcome {
    if v < tol {
        Ok(format!("{what} {v:.3e} < {tol:.1e}"))
    } else {
        Err(format!("{what} {v:.3e} >= {tol:.1e}"))
    }
}

fn structural(runs: &Runs) -> Outcome {
    let mut worst = 0.0f64;
    for name in ["identities_heisenberg", "identities_euclidean"] {
        let r = runs.report(name)?;
        if r.config.points != 100 {
            return Err(format!("{name} uses {} points", r.config.points));
        }
        let (_, v, detail) = check_value(r, "structural_identities")?;
        let v = v.ok_or("no value")?;
        if !(v < STRUCTURAL_TOL) {
            return Err(format!("{name}: {v:.3e} {detail}"));
        }
        worst = worst.max(v);
    }
    below("max relative error on heisenberg:1 and euclidean:3", worst, STRUCTURAL_TOL)
}

fn harmonicity(runs: &Runs) -> Outcome {
    let (_, v, _) = check_value(runs.report("identities_heisenberg")?, "gauge_harmonicity")?;
    below("relative residual", v.ok_or("no value")?, HARMONICITY_TOL)
}

fn catalog(runs: &Runs) -> Outcome {
    let mut n = 0;
    for name in ["identities_heisenberg", "identities_euclidean"] {
        let (passed, _, detail) = check_value(runs.report(name)?, "catalog_soundness")?;
        if !passed {
            return Err(format!("{name}: {detail}"));
        }
        for row in runs.csv(name, "catalog.csv")? {
            let id = &row["entry"];
            let res = num(&row, "relative_residual").ok_or(format!("{id}: no residual"))?;
            if !(res < RESIDUAL_TOL) {
                return Err(format!("{id}: residual {res:.3e}"));
            }
            if let Some(d) = num(&row, "relative_discrepancy") {
                if !(d < DISCREPANCY_TOL) {
                    return Err(format!("{id}: discrepancy {d:.3e}"));
                }
            }
            n += 1;
        }
    }
    Ok(format!("{n} entries verified"))
}

/// Closed forms for `Re(x1 + i x2)^κ` on ℝ³ with weight `(r² − |x|²)^α`.
fn harmonic_moments(kappa: f64, alpha: f64, r: f64) -> (f64, f64) {
    let sphere = std::f64::consts::PI * beta(0.5, kappa + 1.0);
    let scale = r.powf(2.0 * kappa + 3.0 + 2.0 * alpha) / 2.0 * sphere;
    let h = scale * beta(kappa + 1.5, alpha + 1.0);
    let i = scale * kappa * (2.0 * kappa + 1.0) * beta(kappa + 0.5, alpha + 2.0);
    (h, i)
}

fn quantization(runs: &Runs) -> Outcome {
    let r = runs.report("frequency_quantization")?;
    let (_, v, _) = check_value(r, "euclidean_quantization")?;
    let v = v.ok_or("no value")?;
    if !(v < QUANTIZATION_TOL) {
        return Err(format!("N error {v:.3e}"));
    }
    let alpha = match r.config.alpha {
        lab::AlphaPolicy::Explicit(a) => a,
        lab::AlphaPolicy::SqrtK => return Err("expected an explicit alpha".into()),
    };
    let mut worst = 0.0f64;
    for kappa in [1u32, 2] {
        for row in runs.csv("frequency_quantization", &format!("frequency_euclidean3_sph_harm_kappa_{kappa}.csv"))? {
            let rr = num(&row, "r").ok_or("r")?;
            let (h, i) = harmonic_moments(kappa as f64, alpha, rr);
            let hq = num(&row, "height").ok_or("height")?;
            let iq = num(&row, "energy").ok_or("energy")?;
            worst = worst.max((hq / h - 1.0).abs()).max((iq / i - 1.0).abs());
        }
    }
    if !(worst < QUANTIZATION_TOL) {
        return Err(format!("quadrature vs Beta moments {worst:.3e}"));
    }
    Ok(format!("N error {v:.3e}, quadrature vs Beta moments {worst:.3e}, tol {QUANTIZATION_TOL:.0e}"))
}

fn identities(runs: &Runs) -> Outcome {
    let r = runs.report("identity_refinement")?;
    let (passed, v, detail) = check_value(r, "identity_refinement")?;
    let v = v.ok_or("no value")?;
    if !passed || !(v < IDENTITY_TOL) {
        return Err(format!("finest residual {v:.3e}; {detail}"));
    }
    Ok(format!("finest residual {v:.3e} < {IDENTITY_TOL:.0e}, decreasing over {} levels", r.config.identity_levels.len()))
}

fn positivity(runs: &Runs) -> Outcome {
    let r = runs.report("frequency_positivity")?;
    let (passed, _, detail) = check_value(r, "positivity")?;
    if !passed {
        return Err(detail);
    }
    let mut rows = 0;
    for k in [1, 4, 16, 64] {
        for row in runs.csv("frequency_positivity", &format!("frequency_heisenberg1_radial_eig_lambda_{k}.csv"))? {
            let (p, e) = (num(&row, "positivity").ok_or("positivity")?, num(&row, "positivity_err").ok_or("err")?);
            if p < -e {
                return Err(format!("K = {k}: {p:e} below -{e:e}"));
            }
            rows += 1;
        }
    }
    Ok(format!("{rows} radii across K = 1, 4, 16, 64"))
}

fn monotonicity(runs: &Runs) -> Outcome {
    let r = runs.report("monotonicity")?;
    let (passed, _, detail) = check_value(r, "monotonicity")?;
    if !passed {
        return Err(detail);
    }
    let mut fits = Vec::new();
    for k in [4, 16, 64] {
        let c = fitted(r, &format!("cbar_heisenberg1_radial_eig_lambda_{k}"))?;
        if c > CBAR_MAX {
            return Err(format!("K = {k}: C-bar {c}"));
        }
        fits.push(format!("K={k}: {c}"));
    }
    Ok(format!("fitted C-bar {}", fits.join(", ")))
}

fn spherical(runs: &Runs) -> Outcome {
    let r = runs.report("order_euclidean")?;
    let (passed, _, detail) = check_value(r, "spherical_order")?;
    let err = fitted(r, "order_slope_max_error")?;
    let spread = fitted(r, "calibration_spread")?;
    let kappas: Vec<u32> = r.order_rows.iter().filter_map(|o| o.known_order).collect();
    if kappas != [1, 2, 3, 4, 5] {
        return Err(format!("degrees {kappas:?}"));
    }
    if !passed || !(err <= SLOPE_TOL) || !(spread < CALIBRATION_TOL) {
        return Err(detail);
    }
    Ok(format!("max |slope - kappa| {err:.2e}, calibration spread {spread:.3} < {CALIBRATION_TOL}"))
}

fn soundness(runs: &Runs) -> Outcome {
    let r = runs.report("order_heisenberg")?;
    let (passed, v, detail) = check_value(r, "order_soundness")?;
    let v = v.ok_or("no value")?;
    let ks: Vec<i64> = r.order_rows.iter().map(|o| o.k.round() as i64).collect();
    if ks != [1, 4, 16, 64] {
        return Err(format!("K values {ks:?}"));
    }
    let c2 = fitted(r, "c2_fit")?;
    if !passed || !(v < SPREAD_TOL) || r.order_rows.iter().any(|o| o.slope > c2 * o.sqrt_k * (1.0 + 1e-12)) {
        return Err(format!("spread {v:.3e}; {detail}"));
    }
    Ok(format!("C2_fit {c2:.4}, cross-K spread {v:.3e} < {SPREAD_TOL}"))
}

fn solver(runs: &Runs) -> Outcome {
    let r = runs.report("solve")?;
    let order = fitted(r, "solver_order")?;
    let diff = fitted(r, "pipeline_difference")?;
    let levels = r.config.solver.as_ref().map_or(0, |s| s.levels.len());
    if levels < 4 {
        return Err(format!("{levels} levels is fewer than three halvings"));
    }
    if !(order >= SOLVER_ORDER_MIN) || !(diff <= PIPELINE_TOL) {
        return Err(format!("order {order:.3}, pipeline difference {diff:.3e}"));
    }
    Ok(format!("order {order:.3} >= {SOLVER_ORDER_MIN}, pipeline difference {diff:.2e} <= {PIPELINE_TOL:.0e}"))
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map(|d| d.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.retain(|n| n.ends_with(".csv") || n.ends_with("_report.json"));
    names.sort();
    names
}

fn determinism(runs: &Runs) -> Outcome {
    let mut compared = 0;
    for &(name, _) in RUNS {
        let (a, b) = (runs.dir("narrow", name), runs.dir("wide", name));
        let (la, lb) = (listing(&a), listing(&b));
        if la.is_empty() || la != lb {
            return Err(format!("{name}: outputs differ in listing"));
        }
        for f in &la {
            if std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok() {
                return Err(format!("{name}/{f} differs between 1 and {WIDE_THREADS} threads"));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV/JSON files byte-identical on 1 and {WIDE_THREADS} threads"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = run_all();
    let criteria: [(&str, fn(&Runs) -> Outcome); 11] = [
        ("structural identities", structural),
        ("gauge harmonicity", harmonicity),
        ("catalog soundness", catalog),
        ("euclidean quantization", quantization),
        ("derivative identities and Rellich balance", identities),
        ("positivity", positivity),
        ("monotonicity", monotonicity),
        ("euclidean vanishing order", spherical),
        ("carnot order-bound soundness", soundness),
        ("solver validation", solver),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f(&runs) {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} passed in {:.0}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
