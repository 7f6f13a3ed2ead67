//! Weighted height, energy and frequency of a solution, the exact
//! derivative identities they satisfy, the adjusted frequency and its
//! monotonicity, and vanishing-order estimates.

use serde::Serialize;

use crate::catalog::CatalogEntry;
use crate::error::{LabError, Result};
use crate::geometry::{DiniModulus, GaugeGeometry, ScalarField};
use crate::par;
use crate::quadrature::{box_factor, integrate_multi, least_squares_slope, weight, Domain, QuadratureResult, QuadratureSpec};

/// `N` is reported only where `H` exceeds this.
pub const HEIGHT_FLOOR: f64 = 1e-14;
/// Default monotonicity tolerance relative to the local scale.
pub const MONOTONICITY_TOL: f64 = 1e-3;
/// Residuals below this absolute level count as exact zeros.
pub const RESIDUAL_FLOOR: f64 = 1e-12;
/// Relative slack on the `α = √K` hypothesis.
const ALPHA_TOL: f64 = 1e-9;

const NI: usize = 9;
const IH: usize = 0; // u² ψ w^α
const II: usize = 1; // (|∇_H u|² + V u²) w^{α+1}
const IHZ: usize = 2; // u Zu ψ w^α
const IIA: usize = 3; // (|∇_H u|² + V u²) w^α
const IR1: usize = 4; // div F |∇_H u|²
const IR2: usize = 5; // −2 Σ X_i u [X_i, F] u
const IR3: usize = 6; // −2 F u Δ_H u
const IUE: usize = 7; // u ρ E_u w^α
const IRA: usize = 8; // |R₁| + |R₂| + |R₃| pointwise

/// All integrals over `B_r` needed by the identities, with error estimates.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadiusIntegrals {
    pub r: f64,
    pub height: f64,
    pub energy: f64,
    pub height_z: f64,
    pub energy_inner: f64,
    pub rellich: [f64; 3],
    /// Integral of the pointwise absolute Rellich integrands.
    pub rellich_scale: f64,
    pub discrepancy_moment: f64,
    pub errors: [f64; NI],
    pub nodes_used: usize,
}

impl RadiusIntegrals {
    pub fn height_error(&self) -> f64 {
        self.errors[IH]
    }

    pub fn energy_error(&self) -> f64 {
        self.errors[II]
    }

    /// `|R₁ + R₂ + R₃|` over the integral of the absolute integrands.
    /// The terms can cancel individually, so `max |R_i|` is no scale.
    pub fn rellich_residual(&self) -> f64 {
        let scale = self.rellich_scale;
        let sum: f64 = self.rellich.iter().sum();
        if scale <= RESIDUAL_FLOOR {
            sum.abs()
        } else {
            sum.abs() / scale
        }
    }
}

/// Every integrand at one node; `w = r² − ρ²`.
#[inline]
fn integrands(geom: &GaugeGeometry, u: &ScalarField, v: &ScalarField, g: &[f64], rho: f64, r2: f64, alpha: f64) -> [f64; NI] {
    let w = r2 - rho * rho;
    let wa = weight(w, alpha);
    let wa1 = wa * w;
    let uj = u.jet(g);
    let rj = geom.gauge_jet_at(g);
    let du = geom.derivatives(&uj, g);
    let grho = geom.horizontal_gradient_of(&rj, g);
    let m = geom.horizontal_dim();
    let mut psi = 0.0;
    let mut inner = 0.0;
    for i in 0..m {
        psi += grho[i] * grho[i];
        inner += du.hgrad[i] * grho[i];
    }
    let grad2 = du.hgrad_norm2();
    let uval = uj.v;
    let vu2 = if uval == 0.0 { 0.0 } else { v.value(g) * uval * uval };
    let zu = du.z;
    let q = geom.q() as f64;
    let a1 = alpha + 1.0;
    let e_u = inner - zu / rho * psi;
    let r1 = (q * wa1 - 2.0 * a1 * rho * rho * wa) * grad2;
    let r2 = -2.0 * (-2.0 * a1 * rho * wa * inner * zu + wa1 * grad2);
    let r3 = -2.0 * wa1 * zu * du.sublaplacian;
    [
        uval * uval * psi * wa,
        (grad2 + vu2) * wa1,
        uval * zu * psi * wa,
        (grad2 + vu2) * wa,
        r1,
        r2,
        r3,
        uval * rho * e_u * wa,
        r1.abs() + r2.abs() + r3.abs(),
    ]
}

/// All per-radius integrals of `u` with potential `v`.
pub fn radius_integrals(
    geom: &GaugeGeometry,
    u: &ScalarField,
    v: &ScalarField,
    r: f64,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<RadiusIntegrals> {
    if !(alpha > 0.0) {
        return Err(LabError::Domain(format!("weight exponent alpha must be positive, got {alpha}")));
    }
    let r2 = r * r;
    let res = integrate_multi::<NI, _>(geom, Domain::Ball { r }, spec, |g, rho| {
        integrands(geom, u, v, g, rho, r2, alpha)
    })?;
    let x = res.values;
    Ok(RadiusIntegrals {
        r,
        height: x[IH],
        energy: x[II],
        height_z: x[IHZ],
        energy_inner: x[IIA],
        rellich: [x[IR1], x[IR2], x[IR3]],
        rellich_scale: x[IRA],
        discrepancy_moment: x[IUE],
        errors: res.errors,
        nodes_used: res.nodes_used,
    })
}

/// `H(r) = ∫_{B_r} u² ψ (r² − ρ²)^α`.
pub fn height(geom: &GaugeGeometry, u: &ScalarField, r: f64, alpha: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    let r2 = r * r;
    let res = integrate_multi::<1, _>(geom, Domain::Ball { r }, spec, |g, rho| {
        let val = u.value(g);
        [val * val * geom.psi_at(g) * weight(r2 - rho * rho, alpha)]
    })?;
    Ok(res.component(0))
}

/// `I(r) = ∫_{B_r} (|∇_H u|² + V u²)(r² − ρ²)^{α+1}`.
pub fn energy(
    geom: &GaugeGeometry,
    u: &ScalarField,
    v: &ScalarField,
    r: f64,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    let r2 = r * r;
    let res = integrate_multi::<1, _>(geom, Domain::Ball { r }, spec, |g, rho| {
        let uj = u.jet(g);
        let grad = geom.horizontal_gradient_of(&uj, g);
        let g2: f64 = grad[..geom.horizontal_dim()].iter().map(|x| x * x).sum();
        [(g2 + v.value(g) * uj.v * uj.v) * weight(r2 - rho * rho, alpha + 1.0)]
    })?;
    Ok(res.component(0))
}

/// The default radius grid `0.1, 0.12, …, 0.9`.
pub fn default_r_grid() -> Vec<f64> {
    (0..=40).map(|i| ((10 + 2 * i) as f64) / 100.0).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyProfile {
    pub entry_id: String,
    pub q: f64,
    pub alpha: f64,
    pub r_grid: Vec<f64>,
    pub integrals: Vec<RadiusIntegrals>,
    /// `N = I/H` where `H` exceeds [`HEIGHT_FLOOR`].
    pub frequency: Vec<Option<f64>>,
}

impl FrequencyProfile {
    pub fn heights(&self) -> Vec<f64> {
        self.integrals.iter().map(|x| x.height).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.integrals.iter().map(|x| x.energy).collect()
    }
}

/// Integrals and `N` over the radius grid.
pub fn frequency_profile(
    geom: &GaugeGeometry,
    entry: &CatalogEntry,
    r_grid: &[f64],
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<FrequencyProfile> {
    profile_for_field(geom, &entry.id, &entry.u, &entry.potential.field, r_grid, alpha, spec, |r| {
        entry.region.contains_ball(r)
    })
}

/// [`frequency_profile`] for an arbitrary field and potential.
#[allow(clippy::too_many_arguments)]
pub fn profile_for_field(
    geom: &GaugeGeometry,
    id: &str,
    u: &ScalarField,
    v: &ScalarField,
    r_grid: &[f64],
    alpha: f64,
    spec: &QuadratureSpec,
    covers: impl Fn(f64) -> bool,
) -> Result<FrequencyProfile> {
    if r_grid.is_empty() || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Config("radius grid must be non-empty and increasing".into()));
    }
    if r_grid.iter().any(|&r| !(r > 0.0) || !covers(r)) {
        return Err(LabError::Domain(format!("radius grid leaves the valid region of {id}")));
    }
    let integrals = r_grid
        .iter()
        .map(|&r| radius_integrals(geom, u, v, r, alpha, spec))
        .collect::<Result<Vec<_>>>()?;
    let frequency: Vec<Option<f64>> = integrals
        .iter()
        .map(|x| (x.height > HEIGHT_FLOOR).then(|| x.energy / x.height))
        .collect();
    if frequency.iter().all(Option::is_none) {
        return Err(LabError::Degenerate(format!("{id}: height below floor on the whole grid")));
    }
    Ok(FrequencyProfile {
        entry_id: id.to_string(),
        q: geom.q() as f64,
        alpha,
        r_grid: r_grid.to_vec(),
        integrals,
        frequency,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityRow {
    pub r: f64,
    pub finite_difference: f64,
    pub identity: f64,
    pub residual: f64,
}

fn relative(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    let scale = a.abs().max(b.abs());
    if scale <= RESIDUAL_FLOOR {
        diff
    } else {
        diff / scale
    }
}

/// Derivative at the middle of three points from the interpolating parabola.
fn three_point(x: [f64; 3], f: [f64; 3]) -> f64 {
    let [x0, x1, x2] = x;
    f[0] * (x1 - x2) / ((x0 - x1) * (x0 - x2))
        + f[1] * (2.0 * x1 - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + f[2] * (x1 - x0) / ((x2 - x0) * (x2 - x1))
}

/// `f'(r)` from neighbouring grid values. Values of one strict sign are
/// differenced as `ln |f|` against `ln r`, which is exact for power laws.
fn grid_derivative(r: [f64; 3], f: [f64; 3]) -> f64 {
    if f.iter().all(|&v| v > 0.0) || f.iter().all(|&v| v < 0.0) {
        let slope = three_point(r.map(f64::ln), f.map(|v| v.abs().ln()));
        slope * f[1] / r[1]
    } else {
        three_point(r, f)
    }
}

fn derivative_rows(profile: &FrequencyProfile, value: impl Fn(&RadiusIntegrals) -> f64, rhs: impl Fn(&RadiusIntegrals) -> f64) -> Vec<IdentityRow> {
    let r = &profile.r_grid;
    let x = &profile.integrals;
    (1..r.len().saturating_sub(1))
        .map(|i| {
            let fd = grid_derivative([r[i - 1], r[i], r[i + 1]], [value(&x[i - 1]), value(&x[i]), value(&x[i + 1])]);
            let id = rhs(&x[i]);
            IdentityRow {
                r: r[i],
                finite_difference: fd,
                identity: id,
                residual: relative(fd, id),
            }
        })
        .collect()
}

/// Grid-difference `H'` against `(2α+Q)/r H + (2/r) ∫ u Zu ψ w^α`.
pub fn height_derivative_check(profile: &FrequencyProfile) -> Vec<IdentityRow> {
    let (a, q) = (profile.alpha, profile.q);
    derivative_rows(profile, |x| x.height, |x| (2.0 * a + q) / x.r * x.height + 2.0 / x.r * x.height_z)
}

/// Grid-difference `I'` against `2(α+1) r ∫ (|∇_H u|² + V u²) w^α`.
pub fn energy_derivative_check(profile: &FrequencyProfile) -> Vec<IdentityRow> {
    let a = profile.alpha;
    derivative_rows(profile, |x| x.energy, |x| 2.0 * (a + 1.0) * x.r * x.energy_inner)
}

/// Normalized Rellich residual at one radius.
pub fn rellich_balance(
    geom: &GaugeGeometry,
    u: &ScalarField,
    v: &ScalarField,
    r: f64,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(radius_integrals(geom, u, v, r, alpha, spec)?.rellich_residual())
}

/// The three identity residuals at radius `r` with difference step `step`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals {
    pub r: f64,
    pub step: f64,
    pub height: f64,
    pub energy: f64,
    pub rellich: f64,
}

/// Evaluates the identities at `r` from integrals at `r + jδ`, `|j| ≤ 2`,
/// with the fourth-order central difference.
pub fn identity_residuals(
    geom: &GaugeGeometry,
    u: &ScalarField,
    v: &ScalarField,
    r: f64,
    step: f64,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<IdentityResiduals> {
    if !(step > 0.0 && r - 2.0 * step > 0.0) {
        return Err(LabError::Domain(format!("difference step {step} too large for radius {r}")));
    }
    let x = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|j| radius_integrals(geom, u, v, r + j * step, alpha, spec))
        .collect::<Result<Vec<_>>>()?;
    let d = |f: &dyn Fn(&RadiusIntegrals) -> f64| (f(&x[0]) - 8.0 * f(&x[1]) + 8.0 * f(&x[3]) - f(&x[4])) / (12.0 * step);
    let c = &x[2];
    let q = geom.q() as f64;
    let h_id = (2.0 * alpha + q) / r * c.height + 2.0 / r * c.height_z;
    let i_id = 2.0 * (alpha + 1.0) * r * c.energy_inner;
    Ok(IdentityResiduals {
        r,
        step,
        height: relative(d(&|x| x.height), h_id),
        energy: relative(d(&|x| x.energy), i_id),
        rellich: c.rellich_residual(),
    })
}

/// `K(r) = H' − (2α+Q)/r H − I/((α+1) r)` against the envelope `(f(r)/r) H`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnvelopeRow {
    pub r: f64,
    /// From the finite-difference `H'`.
    pub remainder_fd: f64,
    /// From the exact expression `−(2/r) ∫ u ρ E_u w^α`.
    pub remainder_exact: f64,
    pub envelope: f64,
}

pub fn remainder_envelope(profile: &FrequencyProfile, f: &DiniModulus) -> Vec<EnvelopeRow> {
    let (a, q) = (profile.alpha, profile.q);
    let hd = height_derivative_check(profile);
    hd.iter()
        .zip(&profile.integrals[1..])
        .map(|(row, x)| EnvelopeRow {
            r: row.r,
            remainder_fd: row.finite_difference - (2.0 * a + q) / x.r * x.height - x.energy / ((a + 1.0) * x.r),
            remainder_exact: -2.0 / x.r * x.discrepancy_moment,
            envelope: f.eval(x.r) / x.r * x.height,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PositivityRow {
    pub r: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub passed: bool,
}

/// `I(r) + K r² H(r) ≥ −(error estimate)` at every radius.
pub fn positivity(profile: &FrequencyProfile, k: f64) -> Vec<PositivityRow> {
    profile
        .integrals
        .iter()
        .map(|x| {
            let value = x.energy + k * x.r * x.r * x.height;
            let err = x.energy_error() + k * x.r * x.r * x.height_error();
            PositivityRow {
                r: x.r,
                value,
                error_estimate: err,
                passed: value >= -err,
            }
        })
        .collect()
}

/// `e^{C̄ F(r)} (N(r) + C̄ K (r² + F(r)))`, `F(r) = ∫₀^r f(t)/t dt`.
pub fn adjusted_frequency(
    profile: &FrequencyProfile,
    f: &DiniModulus,
    cbar: f64,
    k: f64,
    allow_alpha_mismatch: bool,
) -> Result<Vec<Option<f64>>> {
    let sk = k.sqrt();
    if !allow_alpha_mismatch && (profile.alpha - sk).abs() > ALPHA_TOL * sk.max(1.0) {
        return Err(LabError::Hypothesis(format!(
            "alpha = {} but the monotonicity statement needs alpha = sqrt(K) = {sk}",
            profile.alpha
        )));
    }
    Ok(profile
        .r_grid
        .iter()
        .zip(&profile.frequency)
        .map(|(&r, n)| {
            n.map(|n| {
                let p = f.primitive(r);
                (cbar * p).exp() * (n + cbar * k * (r * r + p))
            })
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Drop {
    pub r: f64,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoRadiusCheck {
    pub c1: f64,
    pub c2: f64,
    pub pairs_checked: usize,
    pub worst_ratio: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub cbar_fitted: Option<f64>,
    /// Drops for every grid value tried below the fitted one.
    pub violations: Vec<(f64, Vec<Drop>)>,
    pub tolerance: f64,
    pub two_radius: Option<TwoRadiusCheck>,
}

/// `{1, 2, 4, …, 2¹⁰}`.
pub fn default_cbar_grid() -> Vec<f64> {
    (0..=10).map(|i| (1u32 << i) as f64).collect()
}

fn drops(values: &[Option<f64>], r: &[f64], tol: f64) -> Vec<Drop> {
    let pts: Vec<(f64, f64)> = r.iter().zip(values).filter_map(|(&r, v)| v.map(|v| (r, v))).collect();
    pts.windows(2)
        .filter_map(|w| {
            let diff = w[1].1 - w[0].1;
            let scale = w[0].1.abs().max(w[1].1.abs());
            (diff < -tol * scale).then_some(Drop { r: w[1].0, magnitude: -diff })
        })
        .collect()
}

/// Smallest grid `C̄` for which the adjusted frequency is nondecreasing.
pub fn fit_min_cbar(
    profile: &FrequencyProfile,
    f: &DiniModulus,
    k: f64,
    grid: &[f64],
    tol: f64,
    allow_alpha_mismatch: bool,
) -> Result<MonotonicityReport> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Config("C-bar grid must be non-empty and increasing".into()));
    }
    let mut violations = Vec::new();
    for &c in grid {
        let vals = adjusted_frequency(profile, f, c, k, allow_alpha_mismatch)?;
        let d = drops(&vals, &profile.r_grid, tol);
        if d.is_empty() {
            let two = two_radius_check(profile, f, c, k, tol);
            return Ok(MonotonicityReport {
                cbar_fitted: Some(c),
                violations,
                tolerance: tol,
                two_radius: Some(two),
            });
        }
        violations.push((c, d));
    }
    Ok(MonotonicityReport {
        cbar_fitted: None,
        violations,
        tolerance: tol,
        two_radius: None,
    })
}

/// `N(r) ≤ C̃₁ (N(s) + C̃₂ K)` for all grid pairs `r < s`, with
/// `C̃₁ = e^{C̄ κ/β}` and `C̃₂ = C̄ (1 + κ/β)`.
pub fn two_radius_check(profile: &FrequencyProfile, f: &DiniModulus, cbar: f64, k: f64, tol: f64) -> TwoRadiusCheck {
    let c1 = (cbar * f.k0()).exp();
    let c2 = cbar * (1.0 + f.k0());
    let pts: Vec<f64> = profile.frequency.iter().flatten().copied().collect();
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0;
    let mut passed = true;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let bound = c1 * (pts[j] + c2 * k);
            pairs += 1;
            worst = worst.max(pts[i] / bound);
            if pts[i] > bound + tol * bound.abs() {
                passed = false;
            }
        }
    }
    TwoRadiusCheck {
        c1,
        c2,
        pairs_checked: pairs,
        worst_ratio: worst,
        passed,
    }
}

/// Lattice points per axis for the sup-norm search.
pub const SUP_LATTICE: usize = 32;
const SUP_ROUNDS: usize = 3;
const SUP_KEEP: usize = 8;

/// `sup_{B_r} |u|` by a lattice over the anisotropic box and local
/// refinement around the best points.
pub fn sup_norm(geom: &GaugeGeometry, u: &ScalarField, r: f64) -> f64 {
    let d = geom.dim();
    let strata = geom.algebra().stratum_of();
    let half: Vec<f64> = strata.iter().map(|&j| box_factor(geom, j) * r.powi(j as i32)).collect();
    let step: Vec<f64> = half.iter().map(|h| 2.0 * h / (SUP_LATTICE - 1) as f64).collect();
    let total = SUP_LATTICE.pow(d as u32);
    let per_slab = total / SUP_LATTICE;
    let slabs = par::map_indexed(SUP_LATTICE, |i0| {
        let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
        for flat in 0..per_slab {
            let mut rem = flat;
            let mut g = vec![0.0; d];
            g[0] = -half[0] + i0 as f64 * step[0];
            for k in (1..d).rev() {
                g[k] = -half[k] + (rem % SUP_LATTICE) as f64 * step[k];
                rem /= SUP_LATTICE;
            }
            if geom.gauge_at(&g) <= r {
                keep_best(&mut best, u.value(&g).abs(), g);
            }
        }
        best
    });
    let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
    for s in slabs {
        for (v, g) in s {
            keep_best(&mut best, v, g);
        }
    }
    let mut h = step;
    for _ in 0..SUP_ROUNDS {
        h.iter_mut().for_each(|x| *x *= 0.25);
        let centers: Vec<Vec<f64>> = best.iter().map(|b| b.1.clone()).collect();
        for c in centers {
            let offsets = 5usize.pow(d as u32);
            for flat in 0..offsets {
                let mut rem = flat;
                let mut g = c.clone();
                for k in 0..d {
                    g[k] += ((rem % 5) as f64 - 2.0) * h[k];
                    rem /= 5;
                }
                if geom.gauge_at(&g) <= r {
                    keep_best(&mut best, u.value(&g).abs(), g);
                }
            }
        }
    }
    best.first().map_or(0.0, |b| b.0)
}

fn keep_best(best: &mut Vec<(f64, Vec<f64>)>, v: f64, g: Vec<f64>) {
    if best.len() == SUP_KEEP && v <= best[SUP_KEEP - 1].0 {
        return;
    }
    if best.iter().any(|b| b.1 == g) {
        return;
    }
    let pos = best.iter().position(|b| v > b.0).unwrap_or(best.len());
    best.insert(pos, (v, g));
    best.truncate(SUP_KEEP);
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderEstimate {
    pub entry_id: String,
    pub slope: f64,
    pub window: Vec<f64>,
    pub sups: Vec<f64>,
    pub fit_residual: f64,
    pub k: f64,
    pub sqrt_k: f64,
    /// `slope / √K`, the per-run estimate of the order constant.
    pub ratio: f64,
}

/// The default small-radius window: grid radii up to 0.3.
pub fn default_order_window() -> Vec<f64> {
    default_r_grid().into_iter().filter(|&r| r <= 0.3 + 1e-12).collect()
}

/// Least-squares slope of `log sup_{B_r}|u|` against `log r`.
pub fn vanishing_order(geom: &GaugeGeometry, entry: &CatalogEntry, window: &[f64]) -> Result<OrderEstimate> {
    if window.len() < 2 {
        return Err(LabError::Config("order window needs at least two radii".into()));
    }
    let sups: Vec<f64> = window.iter().map(|&r| sup_norm(geom, &entry.u, r)).collect();
    if sups.iter().any(|&s| !(s > 1e-300)) {
        return Err(LabError::Degenerate(format!("{}: sup norm below floor", entry.id)));
    }
    let pts: Vec<(f64, f64)> = window.iter().zip(&sups).map(|(r, s)| (r.ln(), s.ln())).collect();
    let slope = least_squares_slope(&pts);
    let n = pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let fit_residual = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    let k = entry.k();
    Ok(OrderEstimate {
        entry_id: entry.id.clone(),
        slope,
        window: window.to_vec(),
        sups,
        fit_residual,
        k,
        sqrt_k: k.sqrt(),
        ratio: slope / k.sqrt(),
    })
}
