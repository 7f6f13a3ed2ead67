//! Tensor midpoint quadrature over gauge balls and annuli.
//!
//! The integration box in exponential coordinates has half-width `κ_j r^j`
//! on stratum-`j` axes, which contains `B_r`. Haar measure is Lebesgue in
//! these coordinates. Slabs along the first axis are summed independently
//! and combined with a fixed-shape tree, so results do not depend on the
//! number of worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{GaugeGeometry, GaugeKind, ScalarField};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    #[default]
    Midpoint,
    /// Midpoint at `N` and `N/2`, extrapolated assuming second order.
    Richardson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Points per axis for each stratum; a single entry applies to all.
    pub resolution: Vec<usize>,
    #[serde(default)]
    pub rule: Rule,
    /// Compute the half-resolution comparison used as error estimate.
    #[serde(default = "default_true")]
    pub error_estimate: bool,
}

fn default_true() -> bool {
    true
}

impl QuadratureSpec {
    pub fn uniform(n: usize) -> Self {
        QuadratureSpec {
            resolution: vec![n],
            rule: Rule::Midpoint,
            error_estimate: true,
        }
    }

    pub fn without_estimate(mut self) -> Self {
        self.error_estimate = false;
        self
    }

    pub fn with_rule(mut self, rule: Rule) -> Self {
        self.rule = rule;
        self
    }

    /// Every per-stratum resolution multiplied by `num / den`, kept even.
    pub fn rescaled(&self, num: usize, den: usize) -> Self {
        QuadratureSpec {
            resolution: self.resolution.iter().map(|&n| (n * num / den / 2 * 2).max(2)).collect(),
            ..self.clone()
        }
    }

    fn points_for_stratum(&self, j: usize) -> usize {
        let idx = (j - 1).min(self.resolution.len() - 1);
        self.resolution[idx]
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution.is_empty() || self.resolution.iter().any(|&n| n < 2 || n % 2 != 0) {
            return Err(LabError::Config(format!(
                "quadrature resolutions must be even and >= 2, got {:?}",
                self.resolution
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiResult<const M: usize> {
    pub values: [f64; M],
    pub errors: [f64; M],
    pub nodes_used: usize,
}

impl<const M: usize> MultiResult<M> {
    pub fn component(&self, i: usize) -> QuadratureResult {
        QuadratureResult {
            value: self.values[i],
            error_estimate: self.errors[i],
            nodes_used: self.nodes_used,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Ball { r: f64 },
    Annulus { a: f64, b: f64 },
}

impl Domain {
    fn outer(&self) -> f64 {
        match *self {
            Domain::Ball { r } => r,
            Domain::Annulus { b, .. } => b,
        }
    }

    #[inline]
    fn contains(&self, rho: f64) -> bool {
        match *self {
            Domain::Ball { r } => rho < r,
            Domain::Annulus { a, b } => rho > a && rho < b,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Domain::Ball { r } if !(r > 0.0 && r.is_finite()) => {
                Err(LabError::Domain(format!("ball radius must be positive, got {r}")))
            }
            Domain::Annulus { a, b } if !(a > 0.0 && b > a && b.is_finite()) => {
                Err(LabError::Domain(format!("annulus needs 0 < a < b, got ({a}, {b})")))
            }
            _ => Ok(()),
        }
    }
}

/// Box half-width factor `κ_j` for stratum `j` such that `|x| ≤ κ_j ρ^j`.
pub fn box_factor(geom: &GaugeGeometry, stratum: usize) -> f64 {
    match (geom.kind(), stratum) {
        (GaugeKind::Euclidean, _) => 1.0,
        (GaugeKind::Heisenberg { .. }, 1) => 1.0,
        (GaugeKind::Heisenberg { constant, .. }, _) => 1.0 / constant.sqrt(),
    }
}

struct Grid {
    lo: Vec<f64>,
    step: Vec<f64>,
    counts: Vec<usize>,
    cell: f64,
}

impl Grid {
    fn new(geom: &GaugeGeometry, outer: f64, spec: &QuadratureSpec) -> Grid {
        let strata = geom.algebra().stratum_of();
        let mut lo = Vec::new();
        let mut step = Vec::new();
        let mut counts = Vec::new();
        let mut cell = 1.0;
        for &j in strata {
            let half = box_factor(geom, j) * outer.powi(j as i32);
            let n = spec.points_for_stratum(j);
            let h = 2.0 * half / n as f64;
            lo.push(-half + 0.5 * h);
            step.push(h);
            counts.push(n);
            cell *= h;
        }
        Grid { lo, step, counts, cell }
    }
}

/// One midpoint sum over the grid.
fn midpoint_sum<const M: usize, F>(
    geom: &GaugeGeometry,
    domain: Domain,
    grid: &Grid,
    kernel: &F,
) -> Result<([f64; M], usize)>
where
    F: Fn(&[f64], f64) -> [f64; M] + Sync,
{
    let d = grid.counts.len();
    let slabs = par::map_indexed(grid.counts[0], |i0| -> Result<([f64; M], usize)> {
        let mut acc = [0.0; M];
        let mut used = 0usize;
        let mut idx = vec![0usize; d];
        idx[0] = i0;
        let mut g = vec![0.0; d];
        g[0] = grid.lo[0] + i0 as f64 * grid.step[0];
        loop {
            for k in 1..d {
                g[k] = grid.lo[k] + idx[k] as f64 * grid.step[k];
            }
            let rho = geom.gauge_at(&g);
            if domain.contains(rho) {
                let vals = kernel(&g, rho);
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(LabError::SingularIntegrand(g.clone()));
                }
                for (a, v) in acc.iter_mut().zip(vals) {
                    *a += v;
                }
                used += 1;
            }
            // advance the odometer over axes 1..d
            let mut k = d - 1;
            loop {
                if k == 0 {
                    return Ok((acc, used));
                }
                idx[k] += 1;
                if idx[k] < grid.counts[k] {
                    break;
                }
                idx[k] = 0;
                k -= 1;
            }
        }
    });
    let mut partial = Vec::with_capacity(slabs.len());
    let mut used = 0;
    for s in slabs {
        let (a, u) = s?;
        partial.push(a);
        used += u;
    }
    let mut total = par::tree_sum_arrays(&partial);
    for t in total.iter_mut() {
        *t *= grid.cell;
    }
    Ok((total, used))
}

/// Integrate `M` integrands at once. The kernel receives the node and its
/// gauge and returns the full integrands (weights included).
pub fn integrate_multi<const M: usize, F>(
    geom: &GaugeGeometry,
    domain: Domain,
    spec: &QuadratureSpec,
    kernel: F,
) -> Result<MultiResult<M>>
where
    F: Fn(&[f64], f64) -> [f64; M] + Sync,
{
    domain.validate()?;
    spec.validate()?;
    let fine = Grid::new(geom, domain.outer(), spec);
    let (values, nodes) = midpoint_sum(geom, domain, &fine, &kernel)?;
    let need_coarse = spec.error_estimate || spec.rule == Rule::Richardson;
    if !need_coarse {
        return Ok(MultiResult {
            values,
            errors: [0.0; M],
            nodes_used: nodes,
        });
    }
    let half = spec.rescaled(1, 2);
    let coarse = Grid::new(geom, domain.outer(), &half);
    let (cv, cn) = midpoint_sum(geom, domain, &coarse, &kernel)?;
    let mut out = values;
    let mut errors = [0.0; M];
    for i in 0..M {
        let diff = values[i] - cv[i];
        match spec.rule {
            Rule::Midpoint => errors[i] = diff.abs(),
            Rule::Richardson => {
                out[i] = values[i] + diff / 3.0;
                errors[i] = diff.abs() / 3.0;
            }
        }
    }
    Ok(MultiResult {
        values: out,
        errors,
        nodes_used: nodes + cn,
    })
}

/// `∫_{B_r} φ (r² − ρ²)^β dg`.
pub fn integrate_ball(
    geom: &GaugeGeometry,
    phi: &ScalarField,
    r: f64,
    beta: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    if !(beta >= 0.0) {
        return Err(LabError::Domain(format!("weight exponent must be >= 0, got {beta}")));
    }
    let r2 = r * r;
    let res = integrate_multi::<1, _>(geom, Domain::Ball { r }, spec, |g, rho| {
        [phi.value(g) * weight(r2 - rho * rho, beta)]
    })?;
    Ok(res.component(0))
}

/// `∫_{a<ρ<b} φ (b² − ρ²)^β dg`.
pub fn integrate_annulus(
    geom: &GaugeGeometry,
    phi: &ScalarField,
    a: f64,
    b: f64,
    beta: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    if !(beta >= 0.0) {
        return Err(LabError::Domain(format!("weight exponent must be >= 0, got {beta}")));
    }
    let b2 = b * b;
    let res = integrate_multi::<1, _>(geom, Domain::Annulus { a, b }, spec, |g, rho| {
        [phi.value(g) * weight(b2 - rho * rho, beta)]
    })?;
    Ok(res.component(0))
}

/// `w^β` with `w^0 = 1`.
#[inline]
pub fn weight(w: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        1.0
    } else if beta == 1.0 {
        w
    } else if beta == 2.0 {
        w * w
    } else {
        w.powf(beta)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub value: f64,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `−log δ_k` against `log N_k`.
    pub observed_order: f64,
}

/// Values at increasing resolutions and the observed convergence order.
pub fn convergence_study(
    geom: &GaugeGeometry,
    phi: &ScalarField,
    r: f64,
    beta: f64,
    resolutions: &[usize],
) -> Result<ConvergenceTable> {
    if resolutions.len() < 3 {
        return Err(LabError::Config("convergence study needs at least 3 resolutions".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in resolutions {
        let spec = QuadratureSpec::uniform(n).without_estimate();
        let value = integrate_ball(geom, phi, r, beta, &spec)?.value;
        let delta = rows.last().map(|p| (value - p.value).abs());
        rows.push(ConvergenceRow { n, value, delta });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.delta.filter(|d| *d > 0.0).map(|d| ((r.n as f64).ln(), d.ln())))
        .collect();
    let observed_order = if pts.len() >= 2 { -least_squares_slope(&pts) } else { f64::INFINITY };
    Ok(ConvergenceTable { rows, observed_order })
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
