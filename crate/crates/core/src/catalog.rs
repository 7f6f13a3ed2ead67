//! Exact and series-generated solutions of `Δ_H u = V u`.
//!
//! Every entry is checked at construction: equation residual, discrepancy
//! (for zero-discrepancy entries) and admissibility of its potential.

use serde::Serialize;

use crate::algebra::GroupPoint;
use crate::error::{LabError, Result};
use crate::geometry::{check_potential, GaugeGeometry, GaugeKind, Potential, PotentialReport, ScalarField};
use crate::jet::Jet;

pub const DEFAULT_SERIES_ORDER: usize = 40;
pub const SERIES_TOLERANCE: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-7;
pub const DISCREPANCY_TOL: f64 = 1e-9;
/// `K = max(λ, 1 + ε)` keeps `K > 1` strict.
pub const K_EPSILON: f64 = 1e-6;
const VERIFY_SAMPLES: usize = 50;
const VERIFY_SEED: u64 = 0x5eed_ca7a;

/// `f(ρ) = Σ a_k ρ^{2k}` solving `f'' + (q−1) f'/ρ = −λ f`, `f(0) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialSeries {
    pub lambda: f64,
    pub q: f64,
    pub coeffs: Vec<f64>,
}

impl RadialSeries {
    pub fn new(lambda: f64, q: f64, order: usize) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(LabError::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(q > 0.0) {
            return Err(LabError::Domain(format!("dimension parameter must be positive, got {q}")));
        }
        let mut coeffs = Vec::with_capacity(order + 1);
        coeffs.push(1.0);
        for k in 0..order {
            let next = Self::step(coeffs[k], lambda, q, k);
            coeffs.push(next);
        }
        Ok(RadialSeries { lambda, q, coeffs })
    }

    #[inline]
    fn step(a: f64, lambda: f64, q: f64, k: usize) -> f64 {
        let k = k as f64;
        -lambda * a / ((2.0 * k + 2.0) * (2.0 * k + q))
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Bound on `|Σ_{k>N} a_k r^{2k}|`: the term ratios decrease, so the tail
    /// is dominated by a geometric series from the first omitted term.
    pub fn remainder_bound(&self, r: f64) -> f64 {
        let n = self.order();
        let next = Self::step(self.coeffs[n], self.lambda, self.q, n).abs() * r.powi(2 * n as i32 + 2);
        let ratio = self.lambda * r * r / ((2.0 * n as f64 + 4.0) * (2.0 * n as f64 + 2.0 + self.q));
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        next / (1.0 - ratio)
    }

    /// Smallest order whose remainder bound on `r` is below `tol`.
    pub fn required_order(lambda: f64, q: f64, r: f64, tol: f64) -> usize {
        let mut order = 1;
        while order < 10_000 {
            let s = RadialSeries::new(lambda, q, order).expect("validated parameters");
            if s.remainder_bound(r) < tol {
                return order;
            }
            order += 1;
        }
        order
    }

    /// `F(x) = f(√x)` and its first two derivatives in `x = ρ²`.
    #[inline]
    pub fn eval_in_square(&self, x: f64) -> (f64, f64, f64) {
        let mut f0 = 0.0;
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        for (k, &a) in self.coeffs.iter().enumerate().rev() {
            let kf = k as f64;
            f0 = f0 * x + a;
            if k >= 1 {
                f1 = f1 * x + a * kf;
            }
            if k >= 2 {
                f2 = f2 * x + a * kf * (kf - 1.0);
            }
        }
        (f0, f1, f2)
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.eval_in_square(rho * rho).0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscrepancyClass {
    Zero,
    Bounded,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Ball { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl Region {
    pub fn contains_ball(&self, r: f64) -> bool {
        match *self {
            Region::Ball { radius } => r <= radius + 1e-12,
            Region::Annulus { .. } => false,
        }
    }

    fn sample_range(&self) -> (f64, f64) {
        match *self {
            Region::Ball { radius } => (1e-3 * radius, radius),
            Region::Annulus { inner, outer } => (inner, outer),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EntryVerification {
    pub relative_residual: f64,
    pub relative_discrepancy: Option<f64>,
    pub potential: PotentialReport,
}

/// A solution with its potential and the facts known about it.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub id: String,
    pub u: ScalarField,
    pub potential: Potential,
    pub known_order: Option<u32>,
    pub discrepancy_class: DiscrepancyClass,
    pub region: Region,
    /// Eigenvalue parameter of `V = −λψ` (0 for harmonic entries).
    pub lambda: f64,
    pub verification: EntryVerification,
}

impl CatalogEntry {
    pub fn k(&self) -> f64 {
        self.potential.k()
    }
}

fn admissible_k(lambda: f64) -> f64 {
    lambda.max(1.0 + K_EPSILON)
}

fn eigen_potential(geom: &GaugeGeometry, lambda: f64) -> Result<Potential> {
    if lambda == 0.0 {
        return Ok(Potential::zero(geom.dim()));
    }
    Potential::new(geom.psi_field().scaled(-lambda), admissible_k(lambda))
}

/// Jet of `ρ²`: `|x|²` in the Euclidean case, `√(|z|⁴ + c t²)` on `H^n`.
fn gauge_square_jet(kind: GaugeKind, g: &[f64]) -> Jet {
    let v = Jet::vars(g);
    let n = g.len();
    match kind {
        GaugeKind::Euclidean => {
            let mut s = Jet::constant(n, 0.0);
            for x in &v[..n] {
                s = s + x.sqr();
            }
            s
        }
        GaugeKind::Heisenberg { n: hn, constant } => {
            let mut s = Jet::constant(n, 0.0);
            for x in &v[..2 * hn] {
                s = s + x.sqr();
            }
            (s.sqr() + v[2 * hn].sqr().scale(constant)).sqrt()
        }
    }
}

/// `u = f(ρ)` for a radial series.
pub fn radial_field(geom: &GaugeGeometry, series: RadialSeries) -> ScalarField {
    let kind = geom.kind();
    ScalarField::new(format!("radial(lambda={})", series.lambda), geom.dim(), move |g| {
        let x = gauge_square_jet(kind, g);
        let (f0, f1, f2) = series.eval_in_square(x.v);
        x.compose(f0, f1, f2)
    })
}

/// Coefficients of the polyradial harmonic `P_{2m} = Σ c_j s^j t^{m−j}` on
/// `H^n` with `s = |z|²`, normalized by `c_0 = 1`.
pub fn polyradial_coefficients(n: usize, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m + 1];
    c[0] = 1.0;
    // (i+1)(n+i) c_{i+1} + (m−i+1)(m−i) c_{i−1} = 0
    for i in 1..m {
        let prev = c[i - 1];
        c[i + 1] = -(((m - i + 1) * (m - i)) as f64) * prev / ((i + 1) * (n + i)) as f64;
    }
    c
}

/// `P_{2m}` as a field on `H^n`; homogeneous of degree `2m`.
pub fn polyradial_field(geom: &GaugeGeometry, m: usize) -> Result<ScalarField> {
    let GaugeKind::Heisenberg { n, .. } = geom.kind() else {
        return Err(LabError::Unsupported("polyradial harmonics need a Heisenberg geometry".into()));
    };
    let c = polyradial_coefficients(n, m);
    let dim = geom.dim();
    Ok(ScalarField::new(format!("P{}", 2 * m), dim, move |g| {
        let v = Jet::vars(g);
        let mut s = Jet::constant(dim, 0.0);
        for x in &v[..2 * n] {
            s = s + x.sqr();
        }
        let t = v[2 * n];
        let mut acc = Jet::constant(dim, 0.0);
        for (j, &cj) in c.iter().enumerate() {
            if cj != 0.0 {
                acc = acc + (s.powi(j as i32) * t.powi((m - j) as i32)).scale(cj);
            }
        }
        acc
    }))
}

/// `Re (x_1 + i x_2)^κ` on `ℝ^n`.
pub fn spherical_harmonic_field(dim: usize, kappa: u32) -> ScalarField {
    ScalarField::new(format!("Re(x1+ix2)^{kappa}"), dim, move |g| {
        let v = Jet::vars(g);
        let mut re = Jet::constant(dim, 1.0);
        let mut im = Jet::constant(dim, 0.0);
        for _ in 0..kappa {
            let nre = re * v[0] - im * v[1];
            let nim = re * v[1] + im * v[0];
            re = nre;
            im = nim;
        }
        re
    })
}

/// `λ_κ = κ(κ + n − 2)`, the spherical eigenvalue of degree `κ`.
pub fn spherical_eigenvalue(n: usize, kappa: u32) -> f64 {
    let k = kappa as f64;
    k * (k + n as f64 - 2.0)
}

/// Checks the equation, the discrepancy and the potential on random samples.
fn verify(
    geom: &GaugeGeometry,
    u: &ScalarField,
    potential: &Potential,
    class: DiscrepancyClass,
    region: Region,
) -> EntryVerification {
    let (a, b) = region.sample_range();
    let samples: Vec<GroupPoint> = geom.sample_annulus(a, b, VERIFY_SAMPLES, VERIFY_SEED);
    let mut res_max: f64 = 0.0;
    let mut res_scale: f64 = 0.0;
    let mut disc_max: f64 = 0.0;
    let mut disc_scale: f64 = 0.0;
    for g in &samples {
        let uj = u.jet(&g.0);
        let rho = geom.gauge_jet(&g.0).expect("samples avoid the identity");
        let v = potential.field.value(&g.0);
        let lap = geom.sublaplacian_of(&uj, &g.0);
        res_max = res_max.max((lap - v * uj.v).abs());
        res_scale = res_scale.max(uj.v.abs() / (rho.v * rho.v) + (v * uj.v).abs());
        disc_max = disc_max.max(geom.discrepancy_of(&uj, &rho, &g.0).abs());
        disc_scale = disc_scale.max(uj.v.abs() / rho.v);
    }
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };
    EntryVerification {
        relative_residual: rel(res_max, res_scale),
        relative_discrepancy: (class == DiscrepancyClass::Zero).then(|| rel(disc_max, disc_scale)),
        potential: check_potential(geom, potential, &samples),
    }
}

fn build(
    geom: &GaugeGeometry,
    id: String,
    u: ScalarField,
    potential: Potential,
    known_order: Option<u32>,
    class: DiscrepancyClass,
    region: Region,
    lambda: f64,
) -> Result<CatalogEntry> {
    let verification = verify(geom, &u, &potential, class, region);
    if !(verification.relative_residual < RESIDUAL_TOL) {
        return Err(LabError::CheckFailed(format!(
            "{id}: equation residual {:e}",
            verification.relative_residual
        )));
    }
    if let Some(d) = verification.relative_discrepancy {
        if !(d < DISCREPANCY_TOL) {
            return Err(LabError::CheckFailed(format!("{id}: discrepancy {d:e}")));
        }
    }
    if !verification.potential.admissible {
        return Err(LabError::CheckFailed(format!("{id}: potential not admissible")));
    }
    Ok(CatalogEntry {
        id,
        u,
        potential,
        known_order,
        discrepancy_class: class,
        region,
        lambda,
        verification,
    })
}

fn geometry_tag(geom: &GaugeGeometry) -> String {
    geom.id().replace(':', "")
}

pub fn constant_entry(geom: &GaugeGeometry, c: f64) -> Result<CatalogEntry> {
    let (id, order) = if c == 0.0 {
        (format!("{}/zero", geometry_tag(geom)), None)
    } else {
        (format!("{}/constant", geometry_tag(geom)), Some(0))
    };
    build(
        geom,
        id,
        ScalarField::constant(geom.dim(), c),
        Potential::zero(geom.dim()),
        order,
        DiscrepancyClass::Zero,
        Region::Ball { radius: 1.0 },
        0.0,
    )
}

/// `u = x_k` (any geometry). On `H^n` the central coordinate `t` is
/// polyradial with zero discrepancy; horizontal coordinates are not.
pub fn coordinate_entry(geom: &GaugeGeometry, index: usize) -> Result<CatalogEntry> {
    if index >= geom.dim() {
        return Err(LabError::Config(format!("coordinate index {index} out of range")));
    }
    let weight = geom.weights()[index] as u32;
    let class = if geom.is_euclidean() || weight == 2 {
        DiscrepancyClass::Zero
    } else {
        DiscrepancyClass::Unknown
    };
    build(
        geom,
        format!("{}/coord?index={index}", geometry_tag(geom)),
        ScalarField::coordinate(geom.dim(), index),
        Potential::zero(geom.dim()),
        Some(weight),
        class,
        Region::Ball { radius: 1.0 },
        0.0,
    )
}

/// The entries `x_k`, `y_k`, `t` on `H^n`.
pub fn harmonic_coordinates(geom: &GaugeGeometry) -> Result<Vec<CatalogEntry>> {
    if geom.is_euclidean() {
        return Err(LabError::Unsupported("harmonic coordinates need a Heisenberg geometry".into()));
    }
    (0..geom.dim()).map(|i| coordinate_entry(geom, i)).collect()
}

fn checked_series(lambda: f64, q: f64, order: usize, radius: f64) -> Result<RadialSeries> {
    let series = RadialSeries::new(lambda, q, order)?;
    let rem = series.remainder_bound(radius);
    if !(rem < SERIES_TOLERANCE) {
        return Err(LabError::Truncation {
            remainder: rem,
            tolerance: SERIES_TOLERANCE,
            radius,
            required_order: RadialSeries::required_order(lambda, q, radius, SERIES_TOLERANCE),
        });
    }
    Ok(series)
}

/// `u = f(ρ)` with `V = −λψ`.
pub fn radial_eigensolution(geom: &GaugeGeometry, lambda: f64) -> Result<CatalogEntry> {
    radial_eigensolution_with(geom, lambda, DEFAULT_SERIES_ORDER, 1.0)
}

pub fn radial_eigensolution_with(
    geom: &GaugeGeometry,
    lambda: f64,
    order: usize,
    radius: f64,
) -> Result<CatalogEntry> {
    let series = checked_series(lambda, geom.q() as f64, order, radius)?;
    build(
        geom,
        format!("{}/radial-eig?lambda={lambda}", geometry_tag(geom)),
        radial_field(geom, series),
        eigen_potential(geom, lambda)?,
        Some(0),
        DiscrepancyClass::Zero,
        Region::Ball { radius },
        lambda,
    )
}

/// `u = P · f(ρ)` where `P` is a zero-discrepancy harmonic homogeneous of
/// degree `d` and `f` solves the radial equation with dimension `Q + 2d`;
/// then `Δ_H u = −λψ u`.
fn product_entry(
    geom: &GaugeGeometry,
    id: String,
    p: ScalarField,
    degree: u32,
    lambda: f64,
) -> Result<CatalogEntry> {
    let q = geom.q() as f64 + 2.0 * degree as f64;
    let series = checked_series(lambda, q, DEFAULT_SERIES_ORDER, 1.0)?;
    let u = if lambda == 0.0 { p } else { p.times(&radial_field(geom, series)) };
    build(
        geom,
        id,
        u,
        eigen_potential(geom, lambda)?,
        Some(degree),
        DiscrepancyClass::Zero,
        Region::Ball { radius: 1.0 },
        lambda,
    )
}

/// `P_{2m} · f(ρ)` on `H^n` with `V = −λψ`.
pub fn polyradial_entry(geom: &GaugeGeometry, degree: u32, lambda: f64) -> Result<CatalogEntry> {
    if degree == 0 || degree % 2 != 0 {
        return Err(LabError::Config(format!("polyradial degree must be even and positive, got {degree}")));
    }
    let p = polyradial_field(geom, degree as usize / 2)?;
    product_entry(
        geom,
        format!("{}/polyradial?degree={degree}&lambda={lambda}", geometry_tag(geom)),
        p,
        degree,
        lambda,
    )
}

/// `Re(x_1 + i x_2)^κ · f(|x|)` on `ℝ^n`; plain harmonic when `λ = 0`.
pub fn euclidean_spherical_harmonic(geom: &GaugeGeometry, kappa: u32, lambda: f64) -> Result<CatalogEntry> {
    if !geom.is_euclidean() || geom.dim() < 2 {
        return Err(LabError::Unsupported("spherical harmonics need Euclidean space of dimension >= 2".into()));
    }
    let id = if lambda == 0.0 {
        format!("{}/sph-harm?kappa={kappa}", geometry_tag(geom))
    } else {
        format!("{}/sph-harm?kappa={kappa}&lambda={lambda}", geometry_tag(geom))
    };
    product_entry(geom, id, spherical_harmonic_field(geom.dim(), kappa), kappa, lambda)
}

/// `u = ρ^{2−Q}` on the annulus `a ≤ ρ ≤ b`.
pub fn fundamental_solution_entry(geom: &GaugeGeometry, a: f64, b: f64) -> Result<CatalogEntry> {
    if !(a > 0.0 && b > a) {
        return Err(LabError::Domain(format!("annulus needs 0 < a < b, got ({a}, {b})")));
    }
    if geom.q() <= 2 {
        return Err(LabError::Unsupported("fundamental solution needs Q > 2".into()));
    }
    build(
        geom,
        format!("{}/fundamental?a={a}&b={b}", geometry_tag(geom)),
        geom.fundamental_solution(),
        Potential::zero(geom.dim()),
        None,
        DiscrepancyClass::Zero,
        Region::Annulus { inner: a, outer: b },
        0.0,
    )
}

fn param(params: &[(String, String)], key: &str) -> Result<Option<f64>> {
    match params.iter().find(|(k, _)| k == key) {
        None => Ok(None),
        Some((_, v)) => v
            .parse()
            .map(Some)
            .map_err(|_| LabError::Config(format!("parameter {key}={v} is not a number"))),
    }
}

fn uint(x: f64, key: &str) -> Result<u32> {
    if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 {
        return Err(LabError::Config(format!("parameter {key} must be a non-negative integer")));
    }
    Ok(x as u32)
}

/// Split `heisenberg1/radial-eig?lambda=16` into geometry id, kind and parameters.
pub fn parse_entry_id(id: &str) -> Result<(String, String, Vec<(String, String)>)> {
    let (geo, rest) = id
        .split_once('/')
        .ok_or_else(|| LabError::Config(format!("entry id '{id}' lacks a geometry prefix")))?;
    let split = geo
        .find(|c: char| c.is_ascii_digit())
        .ok_or_else(|| LabError::Config(format!("geometry '{geo}' lacks a dimension")))?;
    let geometry = format!("{}:{}", &geo[..split], &geo[split..]);
    let (kind, query) = rest.split_once('?').unwrap_or((rest, ""));
    let params = query
        .split('&')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| LabError::Config(format!("malformed parameter '{kv}' in '{id}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((geometry, kind.to_string(), params))
}

/// Build an entry from its string id.
pub fn entry_from_id(id: &str) -> Result<(GaugeGeometry, CatalogEntry)> {
    let (geo, kind, params) = parse_entry_id(id)?;
    let geom = GaugeGeometry::builtin(&geo)?;
    let lambda = param(&params, "lambda")?.unwrap_or(0.0);
    let entry = match kind.as_str() {
        "constant" => constant_entry(&geom, 1.0)?,
        "zero" => constant_entry(&geom, 0.0)?,
        "coord" => {
            let i = param(&params, "index")?
                .ok_or_else(|| LabError::Config("coord needs index".into()))?;
            coordinate_entry(&geom, uint(i, "index")? as usize)?
        }
        "t" if !geom.is_euclidean() => coordinate_entry(&geom, geom.dim() - 1)?,
        "radial-eig" => {
            let order = param(&params, "order")?.map(|o| uint(o, "order")).transpose()?;
            let radius = param(&params, "radius")?.unwrap_or(1.0);
            radial_eigensolution_with(&geom, lambda, order.map_or(DEFAULT_SERIES_ORDER, |o| o as usize), radius)?
        }
        "polyradial" => {
            let d = param(&params, "degree")?
                .ok_or_else(|| LabError::Config("polyradial needs degree".into()))?;
            polyradial_entry(&geom, uint(d, "degree")?, lambda)?
        }
        "sph-harm" => {
            let k = param(&params, "kappa")?
                .ok_or_else(|| LabError::Config("sph-harm needs kappa".into()))?;
            euclidean_spherical_harmonic(&geom, uint(k, "kappa")?, lambda)?
        }
        "fundamental" => {
            let a = param(&params, "a")?.unwrap_or(0.2);
            let b = param(&params, "b")?.unwrap_or(1.0);
            fundamental_solution_entry(&geom, a, b)?
        }
        other => return Err(LabError::Config(format!("unknown catalog kind '{other}'"))),
    };
    Ok((geom, entry))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_coefficient_and_signs() {
        for (lambda, q) in [(1.0, 4.0), (16.0, 4.0), (3.5, 7.0)] {
            let s = RadialSeries::new(lambda, q, 20).unwrap();
            assert!((s.coeffs[1] + lambda / (2.0 * q)).abs() < 1e-15);
            for w in s.coeffs.windows(2) {
                assert!(w[0] * w[1] < 0.0);
            }
        }
        let flat = RadialSeries::new(0.0, 4.0, 10).unwrap();
        assert_eq!(flat.eval(0.7), 1.0);
    }

    #[test]
    fn series_reproduces_sinc_in_three_dimensions() {
        let s = RadialSeries::new(1.0, 3.0, DEFAULT_SERIES_ORDER).unwrap();
        for i in 1..=100 {
            let r = i as f64 / 100.0;
            assert!((s.eval(r) - r.sin() / r).abs() < 1e-10);
        }
    }

    #[test]
    fn series_satisfies_radial_ode() {
        let s = RadialSeries::new(9.0, 4.0, DEFAULT_SERIES_ORDER).unwrap();
        for r in [0.1, 0.4, 0.9] {
            let (_, f1, f2) = s.eval_in_square(r * r);
            // chain rule from x = ρ²
            let d1 = 2.0 * r * f1;
            let d2 = 2.0 * f1 + 4.0 * r * r * f2;
            assert!((d2 + 3.0 * d1 / r + 9.0 * s.eval(r)).abs() < 1e-10);
        }
    }

    #[test]
    fn remainder_bound_dominates_tail() {
        for (lambda, order) in [(16.0, 6), (64.0, 12), (256.0, 20), (4.0, 3)] {
            let low = RadialSeries::new(lambda, 4.0, order).unwrap();
            let high = RadialSeries::new(lambda, 4.0, 2 * order + 40).unwrap();
            for r in [0.5, 1.0] {
                let tail = (high.eval(r) - low.eval(r)).abs();
                assert!(low.remainder_bound(r) >= tail, "{lambda} {order} {r}");
            }
        }
        let s = RadialSeries::new(256.0, 4.0, DEFAULT_SERIES_ORDER).unwrap();
        assert!(s.remainder_bound(1.0) < SERIES_TOLERANCE);
    }

    #[test]
    fn truncation_refusal_names_an_order() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        match radial_eigensolution_with(&g, 256.0, 5, 1.0) {
            Err(LabError::Truncation { required_order, .. }) => {
                assert!(radial_eigensolution_with(&g, 256.0, required_order, 1.0).is_ok());
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn polyradial_coefficients_known_cases() {
        assert_eq!(polyradial_coefficients(1, 1), vec![1.0, 0.0]);
        assert_eq!(polyradial_coefficients(1, 2), vec![1.0, 0.0, -0.5]);
        assert_eq!(polyradial_coefficients(1, 3), vec![1.0, 0.0, -1.5, 0.0]);
        for m in 1..9 {
            let c = polyradial_coefficients(2, m);
            assert!(c.iter().skip(1).step_by(2).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn heisenberg_entries_verify() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        let coords = harmonic_coordinates(&g).unwrap();
        assert_eq!(coords.len(), 3);
        assert_eq!(coords[2].known_order, Some(2));
        assert_eq!(coords[2].discrepancy_class, DiscrepancyClass::Zero);
        assert_eq!(coords[0].verification.relative_residual, 0.0);
        for lambda in [0.0, 1.0, 4.0, 16.0, 64.0, 256.0] {
            let e = radial_eigensolution(&g, lambda).unwrap();
            assert!(e.verification.relative_residual < RESIDUAL_TOL);
            assert_eq!(e.k(), lambda.max(1.0 + K_EPSILON));
        }
        for (d, lambda) in [(2, 1.0), (4, 4.0), (8, 16.0), (16, 64.0), (6, 0.0)] {
            let e = polyradial_entry(&g, d, lambda).unwrap();
            assert_eq!(e.known_order, Some(d));
        }
        let f = fundamental_solution_entry(&g, 0.2, 1.0).unwrap();
        let p = GroupPoint(vec![0.3, 0.1, -0.2]);
        let d = g.dilate(&p.0, 0.5);
        assert!((f.u.value(&d) - 4.0 * f.u.value(&p.0)).abs() < 1e-10 * f.u.value(&d));
        let h2 = GaugeGeometry::heisenberg(2).unwrap();
        assert!(polyradial_entry(&h2, 4, 9.0).is_ok());
        assert!(radial_eigensolution(&h2, 9.0).is_ok());
    }

    #[test]
    fn euclidean_entries_verify() {
        let g = GaugeGeometry::euclidean(3).unwrap();
        for kappa in 0..=5 {
            let e = euclidean_spherical_harmonic(&g, kappa, 0.0).unwrap();
            assert_eq!(e.known_order, Some(kappa));
        }
        assert_eq!(spherical_eigenvalue(3, 3), 12.0);
        let sq = euclidean_spherical_harmonic(&g, 2, 0.0).unwrap();
        assert_eq!(sq.u.value(&[2.0, 1.0, 5.0]), 3.0);
        let fun = fundamental_solution_entry(&g, 0.2, 1.0).unwrap();
        assert!((fun.u.value(&[0.0, 0.5, 0.0]) - 2.0).abs() < 1e-14);
        assert!(euclidean_spherical_harmonic(&g, 3, 12.0).is_ok());
        assert!(radial_eigensolution(&g, 1.0).is_ok());
    }

    #[test]
    fn ids_round_trip() {
        for id in [
            "heisenberg1/radial-eig?lambda=16",
            "euclidean3/sph-harm?kappa=4",
            "heisenberg1/polyradial?degree=4&lambda=4",
            "heisenberg1/coord?index=2",
            "heisenberg1/constant",
            "euclidean3/zero",
            "heisenberg1/fundamental?a=0.2&b=1",
        ] {
            let (_, e) = entry_from_id(id).unwrap();
            assert_eq!(e.id, id);
        }
        assert!(entry_from_id("heisenberg1/nonsense").is_err());
        assert!(entry_from_id("radial-eig").is_err());
        assert!(entry_from_id("heisenberg1/polyradial?degree=3").is_err());
        assert!(entry_from_id("euclidean3/sph-harm?kappa=x").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn radial_entries_solve_the_equation(lambda in 0.0f64..256.0) {
            let g = GaugeGeometry::heisenberg(1).unwrap();
            let e = radial_eigensolution(&g, lambda).unwrap();
            prop_assert!(e.verification.relative_residual < RESIDUAL_TOL);
            prop_assert!(e.verification.relative_discrepancy.unwrap() < DISCREPANCY_TOL);
        }

        #[test]
        fn doubling_order_stays_inside_bound(lambda in 1.0f64..200.0, order in 4usize..30) {
            let low = RadialSeries::new(lambda, 4.0, order).unwrap();
            let high = RadialSeries::new(lambda, 4.0, 2 * order).unwrap();
            let tail = (high.eval(1.0) - low.eval(1.0)).abs();
            prop_assert!(low.remainder_bound(1.0) >= tail * (1.0 - 1e-9) - 1e-15);
        }
    }
}
