//! Gauge, horizontal calculus and admissibility checks on Heisenberg groups
//! and Euclidean space.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{CompiledPoly, GroupPoint, StratifiedAlgebra};
use crate::error::{LabError, Result};
use crate::jet::{Jet, MAX_DIM};

/// Points with `ψ` below this are skipped by ratio checks.
pub const PSI_EXCLUSION: f64 = 1e-8;

/// Relative slack on the admissibility comparison, so `V = -Kψ` passes
/// with its own `K` despite rounding.
const ROUNDING_SLACK: f64 = 1e-12;

/// Relative tolerance of the gauge harmonicity oracle.
pub const HARMONICITY_TOL: f64 = 1e-8;

/// A function on the group with exact 2-jet evaluation.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    dim: usize,
    f: Arc<dyn Fn(&[f64]) -> Jet + Send + Sync>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({}, dim {})", self.name, self.dim)
    }
}

impl ScalarField {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        f: impl Fn(&[f64]) -> Jet + Send + Sync + 'static,
    ) -> Self {
        assert!(dim <= MAX_DIM, "dimension {dim} exceeds jet capacity");
        ScalarField {
            name: name.into(),
            dim,
            f: Arc::new(f),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ScalarField::new(format!("{c}"), dim, move |_| Jet::constant(dim, c))
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        ScalarField::new(format!("x{i}"), dim, move |g| Jet::var(dim, i, g[i]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn jet(&self, g: &[f64]) -> Jet {
        (self.f)(g)
    }

    pub fn value(&self, g: &[f64]) -> f64 {
        (self.f)(g).v
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        let f = self.f.clone();
        ScalarField::new(format!("{c}*{}", self.name), self.dim, move |g| f(g).scale(c))
    }

    pub fn times(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.f.clone(), other.f.clone());
        ScalarField::new(format!("{}*{}", self.name, other.name), self.dim, move |g| {
            a(g) * b(g)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GaugeKind {
    Euclidean,
    /// `ρ = (|z|⁴ + c t²)^{1/4}`.
    Heisenberg { n: usize, constant: f64 },
}

/// Every derived quantity of a field at one point.
#[derive(Clone, Copy, Debug)]
pub struct FieldDerivatives {
    pub value: f64,
    pub m: usize,
    pub hgrad: [f64; MAX_DIM],
    pub z: f64,
    pub sublaplacian: f64,
}

impl FieldDerivatives {
    pub fn hgrad(&self) -> &[f64] {
        &self.hgrad[..self.m]
    }

    pub fn hgrad_norm2(&self) -> f64 {
        self.hgrad().iter().map(|x| x * x).sum()
    }
}

/// Gauge geometry over a stratified group.
#[derive(Clone, Debug)]
pub struct GaugeGeometry {
    algebra: StratifiedAlgebra,
    kind: GaugeKind,
    q: usize,
    weights: Vec<f64>,
    // X_i = Σ_k frame[i][k] ∂_k, and drift[i][l] = Σ_k frame[i][k] ∂_k frame[i][l]
    frame: Vec<Vec<CompiledPoly>>,
    drift: Vec<Vec<CompiledPoly>>,
}

impl GaugeGeometry {
    pub fn new(algebra: StratifiedAlgebra, kind: GaugeKind) -> Result<Self> {
        let dim = algebra.dim();
        if dim > MAX_DIM {
            return Err(LabError::Unsupported(format!(
                "dimension {dim} exceeds the jet capacity {MAX_DIM}"
            )));
        }
        match kind {
            GaugeKind::Euclidean if algebra.step() != 1 => {
                return Err(LabError::Unsupported(
                    "Euclidean gauge on a non-abelian algebra".into(),
                ))
            }
            GaugeKind::Heisenberg { n, constant } => {
                if algebra.strata() != [2 * n, 1] {
                    return Err(LabError::Unsupported(
                        "Heisenberg gauge needs strata [2n, 1]".into(),
                    ));
                }
                if !(constant > 0.0) {
                    return Err(LabError::Domain("gauge constant must be positive".into()));
                }
            }
            _ => {}
        }
        let frame_polys = algebra.horizontal_frame()?;
        let mut frame = Vec::new();
        let mut drift = Vec::new();
        for x in &frame_polys {
            let a = x.coeffs();
            frame.push(a.iter().map(|p| p.compile()).collect());
            drift.push(
                (0..dim)
                    .map(|l| {
                        let mut d = crate::algebra::Poly::zero(dim);
                        for (k, ak) in a.iter().enumerate() {
                            d.add_scaled(&ak.mul(&a[l].deriv(k)), 1.0);
                        }
                        d.compile()
                    })
                    .collect(),
            );
        }
        let q = algebra.homogeneous_dimension();
        let weights = algebra.stratum_of().iter().map(|&w| w as f64).collect();
        Ok(GaugeGeometry {
            algebra,
            kind,
            q,
            weights,
            frame,
            drift,
        })
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        GaugeGeometry::new(StratifiedAlgebra::euclidean(n), GaugeKind::Euclidean)
    }

    pub fn heisenberg(n: usize) -> Result<Self> {
        GaugeGeometry::heisenberg_with_constant(n, 1.0)
    }

    /// Heisenberg gauge with a non-default quartic constant, for checking
    /// candidate normalizations against the harmonicity oracle.
    pub fn heisenberg_with_constant(n: usize, constant: f64) -> Result<Self> {
        GaugeGeometry::new(
            StratifiedAlgebra::heisenberg(n),
            GaugeKind::Heisenberg { n, constant },
        )
    }

    /// Resolve `euclidean:n` or `heisenberg:n`.
    pub fn builtin(id: &str) -> Result<Self> {
        let alg = StratifiedAlgebra::builtin(id)?;
        if alg.step() == 1 {
            GaugeGeometry::new(alg, GaugeKind::Euclidean)
        } else {
            let n = alg.horizontal_dim() / 2;
            GaugeGeometry::new(alg, GaugeKind::Heisenberg { n, constant: 1.0 })
        }
    }

    /// A geometry for an arbitrary algebra; only abelian and Heisenberg-type
    /// strata have a closed-form gauge.
    pub fn for_algebra(alg: StratifiedAlgebra) -> Result<Self> {
        if alg.step() == 1 {
            return GaugeGeometry::new(alg, GaugeKind::Euclidean);
        }
        let m = alg.horizontal_dim();
        if alg.step() == 2 && m % 2 == 0 && alg.strata()[1] == 1 && alg == StratifiedAlgebra::heisenberg(m / 2) {
            return GaugeGeometry::new(alg, GaugeKind::Heisenberg { n: m / 2, constant: 1.0 });
        }
        Err(LabError::Unsupported(format!(
            "no closed-form gauge for step {} strata {:?}",
            alg.step(),
            alg.strata()
        )))
    }

    pub fn id(&self) -> String {
        match self.kind {
            GaugeKind::Euclidean => format!("euclidean:{}", self.dim()),
            GaugeKind::Heisenberg { n, .. } => format!("heisenberg:{n}"),
        }
    }

    pub fn algebra(&self) -> &StratifiedAlgebra {
        &self.algebra
    }

    pub fn kind(&self) -> GaugeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn horizontal_dim(&self) -> usize {
        self.frame.len()
    }

    /// Homogeneous dimension.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Stratum weight of each coordinate.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, GaugeKind::Euclidean)
    }

    fn check_dim(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.dim() {
            return Err(LabError::Domain(format!(
                "point has {} coordinates, geometry has {}",
                g.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `|z|²` (sum of squared horizontal coordinates).
    #[inline]
    fn horizontal_norm2(&self, g: &[f64]) -> f64 {
        g[..self.horizontal_dim()].iter().map(|x| x * x).sum()
    }

    #[inline]
    fn gauge_unchecked(&self, g: &[f64]) -> f64 {
        match self.kind {
            GaugeKind::Euclidean => g.iter().map(|x| x * x).sum::<f64>().sqrt(),
            GaugeKind::Heisenberg { n, constant } => {
                let s = self.horizontal_norm2(g);
                let t = g[2 * n];
                (s * s + constant * t * t).sqrt().sqrt()
            }
        }
    }

    pub fn gauge(&self, g: &GroupPoint) -> Result<f64> {
        self.check_dim(&g.0)?;
        Ok(self.gauge_unchecked(&g.0))
    }

    /// Gauge at raw coordinates, without dimension checks.
    #[inline]
    pub fn gauge_at(&self, g: &[f64]) -> f64 {
        self.gauge_unchecked(g)
    }

    /// 2-jet of the gauge; undefined at the identity.
    pub fn gauge_jet(&self, g: &[f64]) -> Result<Jet> {
        self.check_dim(g)?;
        if g.iter().all(|&x| x == 0.0) {
            return Err(LabError::UndefinedAtIdentity);
        }
        Ok(self.gauge_jet_unchecked(g))
    }

    /// Gauge jet at raw coordinates; non-finite at the identity.
    #[inline]
    pub fn gauge_jet_at(&self, g: &[f64]) -> Jet {
        self.gauge_jet_unchecked(g)
    }

    #[inline]
    fn gauge_jet_unchecked(&self, g: &[f64]) -> Jet {
        let v = Jet::vars(g);
        match self.kind {
            GaugeKind::Euclidean => {
                let mut s = Jet::constant(g.len(), 0.0);
                for x in &v[..g.len()] {
                    s = s + x.sqr();
                }
                s.sqrt()
            }
            GaugeKind::Heisenberg { n, constant } => {
                let mut s = Jet::constant(g.len(), 0.0);
                for x in &v[..2 * n] {
                    s = s + x.sqr();
                }
                (s.sqr() + v[2 * n].sqr().scale(constant)).powf(0.25)
            }
        }
    }

    /// The gauge as a scalar field (its jet is infinite at the identity).
    pub fn gauge_field(&self) -> ScalarField {
        let geom = self.clone();
        ScalarField::new("rho", self.dim(), move |g| geom.gauge_jet_unchecked(g))
    }

    /// Horizontal derivatives `X_i u` from a jet.
    #[inline]
    pub fn horizontal_gradient_of(&self, jet: &Jet, g: &[f64]) -> [f64; MAX_DIM] {
        let n = self.dim();
        let mut out = [0.0; MAX_DIM];
        for (i, row) in self.frame.iter().enumerate() {
            let mut s = 0.0;
            for k in 0..n {
                let a = row[k].eval(g);
                if a != 0.0 {
                    s += a * jet.g[k];
                }
            }
            out[i] = s;
        }
        out
    }

    /// `Δ_H u = Σ_i Σ_{kl} a_ik a_il ∂_kl u + Σ_i Σ_l drift_il ∂_l u`.
    #[inline]
    pub fn sublaplacian_of(&self, jet: &Jet, g: &[f64]) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        let mut a = [0.0; MAX_DIM];
        for (row, drow) in self.frame.iter().zip(&self.drift) {
            for k in 0..n {
                a[k] = row[k].eval(g);
            }
            for k in 0..n {
                if a[k] == 0.0 {
                    continue;
                }
                for l in 0..n {
                    total += a[k] * a[l] * jet.h[k][l];
                }
            }
            for l in 0..n {
                let d = drow[l].eval(g);
                if d != 0.0 {
                    total += d * jet.g[l];
                }
            }
        }
        total
    }

    /// `Zu = Σ_k w_k x_k ∂_k u`.
    #[inline]
    pub fn generator_z_of(&self, jet: &Jet, g: &[f64]) -> f64 {
        g.iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(k, (x, w))| w * x * jet.g[k])
            .sum()
    }

    pub fn derivatives(&self, jet: &Jet, g: &[f64]) -> FieldDerivatives {
        FieldDerivatives {
            value: jet.v,
            m: self.horizontal_dim(),
            hgrad: self.horizontal_gradient_of(jet, g),
            z: self.generator_z_of(jet, g),
            sublaplacian: self.sublaplacian_of(jet, g),
        }
    }

    pub fn horizontal_gradient(&self, u: &ScalarField, g: &GroupPoint) -> Result<Vec<f64>> {
        self.check_dim(&g.0)?;
        let d = self.horizontal_gradient_of(&u.jet(&g.0), &g.0);
        Ok(d[..self.horizontal_dim()].to_vec())
    }

    pub fn sublaplacian(&self, u: &ScalarField, g: &GroupPoint) -> Result<f64> {
        self.check_dim(&g.0)?;
        Ok(self.sublaplacian_of(&u.jet(&g.0), &g.0))
    }

    pub fn generator_z(&self, u: &ScalarField, g: &GroupPoint) -> Result<f64> {
        self.check_dim(&g.0)?;
        Ok(self.generator_z_of(&u.jet(&g.0), &g.0))
    }

    /// `ψ = |∇_H ρ|²` computed from the gauge jet.
    pub fn psi(&self, g: &GroupPoint) -> Result<f64> {
        let jet = self.gauge_jet(&g.0)?;
        let d = self.horizontal_gradient_of(&jet, &g.0);
        Ok(d[..self.horizontal_dim()].iter().map(|x| x * x).sum())
    }

    /// Closed-form `ψ`: 1 in the Euclidean case, `|z|²/ρ²` on `H^n`. The
    /// jet at the identity is set to zero (ψ has no limit there).
    pub fn psi_field(&self) -> ScalarField {
        let dim = self.dim();
        match self.kind {
            GaugeKind::Euclidean => ScalarField::new("psi", dim, move |_| Jet::constant(dim, 1.0)),
            GaugeKind::Heisenberg { n, constant } => ScalarField::new("psi", dim, move |g| {
                let v = Jet::vars(g);
                let mut s = Jet::constant(dim, 0.0);
                for x in &v[..2 * n] {
                    s = s + x.sqr();
                }
                let q = s.sqr() + v[2 * n].sqr().scale(constant);
                if q.v == 0.0 {
                    return Jet::constant(dim, 0.0);
                }
                s / q.sqrt()
            }),
        }
    }

    /// Closed-form `ψ` value.
    #[inline]
    pub fn psi_at(&self, g: &[f64]) -> f64 {
        match self.kind {
            GaugeKind::Euclidean => 1.0,
            GaugeKind::Heisenberg { .. } => {
                let r = self.gauge_unchecked(g);
                if r == 0.0 {
                    0.0
                } else {
                    self.horizontal_norm2(g) / (r * r)
                }
            }
        }
    }

    /// `Γ = ρ^{2−Q}` as a field.
    pub fn fundamental_solution(&self) -> ScalarField {
        let geom = self.clone();
        let p = 2.0 - self.q as f64;
        ScalarField::new("gamma", self.dim(), move |g| {
            geom.gauge_jet_unchecked(g).powf(p)
        })
    }

    /// `E_u = ⟨∇_H u, ∇_H ρ⟩ − (Zu/ρ) ψ`.
    pub fn discrepancy(&self, u: &ScalarField, g: &GroupPoint) -> Result<f64> {
        let rho = self.gauge_jet(&g.0)?;
        Ok(self.discrepancy_of(&u.jet(&g.0), &rho, &g.0))
    }

    #[inline]
    pub fn discrepancy_of(&self, u: &Jet, rho: &Jet, g: &[f64]) -> f64 {
        let gu = self.horizontal_gradient_of(u, g);
        let gr = self.horizontal_gradient_of(rho, g);
        let m = self.horizontal_dim();
        let inner: f64 = (0..m).map(|i| gu[i] * gr[i]).sum();
        let psi: f64 = (0..m).map(|i| gr[i] * gr[i]).sum();
        inner - self.generator_z_of(u, g) / rho.v * psi
    }

    pub fn dilate(&self, g: &[f64], lambda: f64) -> Vec<f64> {
        g.iter()
            .zip(&self.weights)
            .map(|(x, w)| x * lambda.powf(*w))
            .collect()
    }

    /// Deterministic random points with gauge uniform in `[a, b]`: a random
    /// direction in the unit box, dilated onto the chosen gauge sphere.
    pub fn sample_annulus(&self, a: f64, b: f64, count: usize, seed: u64) -> Vec<GroupPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let g: Vec<f64> = (0..self.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r0 = self.gauge_unchecked(&g);
            if r0 < 1e-3 {
                continue;
            }
            let r = if a == b { a } else { rng.gen_range(a..b) };
            out.push(GroupPoint(self.dilate(&g, r / r0)));
        }
        out
    }
}

/// `f(t) = κ t^β`, a Dini modulus with closed-form primitive of `f(t)/t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct DiniModulus {
    pub kappa: f64,
    pub beta: f64,
}

impl DiniModulus {
    pub fn new(kappa: f64, beta: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(beta > 0.0 && beta <= 1.0) {
            return Err(LabError::Domain(format!(
                "Dini modulus needs kappa > 0 and beta in (0, 1], got ({kappa}, {beta})"
            )));
        }
        Ok(DiniModulus { kappa, beta })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.kappa * t.powf(self.beta)
    }

    /// `∫₀^r f(t)/t dt`.
    pub fn primitive(&self, r: f64) -> f64 {
        self.kappa * r.powf(self.beta) / self.beta
    }

    /// Bound on `∫₀¹ f(t)/t dt`.
    pub fn k0(&self) -> f64 {
        self.kappa / self.beta
    }

    /// `sup_{(0,1)} f`.
    pub fn k1(&self) -> f64 {
        self.kappa
    }
}

/// A potential with its claimed admissibility constant.
#[derive(Clone, Debug)]
pub struct Potential {
    pub field: ScalarField,
    k: f64,
}

impl Potential {
    pub fn new(field: ScalarField, k: f64) -> Result<Self> {
        if !(k > 1.0) || !k.is_finite() {
            return Err(LabError::Domain(format!("admissibility constant must exceed 1, got {k}")));
        }
        Ok(Potential { field, k })
    }

    pub fn zero(dim: usize) -> Self {
        Potential::new(ScalarField::constant(dim, 0.0), 1.0 + 1e-6).expect("valid constant")
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialReport {
    pub max_v_ratio: f64,
    pub max_zv_ratio: f64,
    pub claimed_k: f64,
    pub samples_used: usize,
    pub samples_excluded: usize,
    pub admissible: bool,
}

/// `max |V|/ψ` and `max |ZV|/ψ` over the samples with `ψ ≥ PSI_EXCLUSION`.
pub fn check_potential(geom: &GaugeGeometry, v: &Potential, samples: &[GroupPoint]) -> PotentialReport {
    let mut max_v: f64 = 0.0;
    let mut max_zv: f64 = 0.0;
    let mut used = 0;
    for g in samples {
        let psi = geom.psi_at(&g.0);
        if psi < PSI_EXCLUSION || g.0.iter().all(|&x| x == 0.0) {
            continue;
        }
        used += 1;
        let jet = v.field.jet(&g.0);
        max_v = max_v.max(jet.v.abs() / psi);
        max_zv = max_zv.max(geom.generator_z_of(&jet, &g.0).abs() / psi);
    }
    let finite = max_v.is_finite() && max_zv.is_finite();
    PotentialReport {
        max_v_ratio: max_v,
        max_zv_ratio: max_zv,
        claimed_k: v.k,
        samples_used: used,
        samples_excluded: samples.len() - used,
        admissible: finite && max_v <= v.k * (1.0 + ROUNDING_SLACK) && max_zv <= v.k * (1.0 + ROUNDING_SLACK),
    }
}

/// Worst `|E_u| ρ / (f(ρ) ψ |u|)` over the samples, skipping points where
/// `ψ |u|` vanishes.
pub fn check_discrepancy_bound(
    geom: &GaugeGeometry,
    u: &ScalarField,
    f: &DiniModulus,
    samples: &[GroupPoint],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(LabError::EmptySamples);
    }
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for g in samples {
        let Ok(rho) = geom.gauge_jet(&g.0) else { continue };
        let psi = geom.psi_at(&g.0);
        let uj = u.jet(&g.0);
        if psi < PSI_EXCLUSION || uj.v.abs() < 1e-300 {
            continue;
        }
        used += 1;
        let e = geom.discrepancy_of(&uj, &rho, &g.0);
        worst = worst.max(e.abs() * rho.v / (f.eval(rho.v) * psi * uj.v.abs()));
    }
    if used == 0 {
        return Err(LabError::EmptySamples);
    }
    Ok(worst)
}

/// A C^∞ bump supported in `[a, b]`, equal to 1 at the midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothBump {
    pub a: f64,
    pub b: f64,
}

impl SmoothBump {
    /// Value and first two derivatives.
    pub fn eval3(&self, s: f64) -> (f64, f64, f64) {
        if s <= self.a || s >= self.b {
            return (0.0, 0.0, 0.0);
        }
        let dq = 2.0 / (self.b - self.a);
        let q = (2.0 * s - self.a - self.b) / (self.b - self.a);
        let d = 1.0 - q * q;
        let phi = (1.0 - 1.0 / d).exp();
        let h1 = -2.0 * q / (d * d);
        let h2 = -2.0 / (d * d) - 8.0 * q * q / (d * d * d);
        (phi, phi * h1 * dq, phi * (h2 + h1 * h1) * dq * dq)
    }
}

/// `V = Ṽ · cut(ρψ)`. The bump must vanish near 0, i.e. `a > 0`.
pub fn make_cutoff_potential(
    geom: &GaugeGeometry,
    base: &ScalarField,
    cut: SmoothBump,
    claimed_k: f64,
) -> Result<Potential> {
    if !(cut.a > 0.0) || !(cut.b > cut.a) {
        return Err(LabError::Domain(format!(
            "cutoff must be supported in [a, b] with 0 < a < b, got [{}, {}]",
            cut.a, cut.b
        )));
    }
    let rho = geom.gauge_field();
    let psi = geom.psi_field();
    let base = base.clone();
    let dim = geom.dim();
    let field = ScalarField::new(format!("{}*cut", base.name()), dim, move |g| {
        if g.iter().all(|&x| x == 0.0) {
            return Jet::constant(dim, 0.0);
        }
        let s = rho.jet(g) * psi.jet(g);
        let (c0, c1, c2) = cut.eval3(s.v);
        base.jet(g) * s.compose(c0, c1, c2)
    });
    Potential::new(field, claimed_k)
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicityReport {
    pub max_relative_residual: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|Δ_H ρ^{2−Q}| / ρ^{−Q}` over random points of the annulus `a ≤ ρ ≤ b`.
pub fn harmonicity_oracle(
    geom: &GaugeGeometry,
    a: f64,
    b: f64,
    count: usize,
    seed: u64,
) -> Result<HarmonicityReport> {
    if geom.q() <= 2 {
        return Err(LabError::Unsupported(
            "fundamental solution needs homogeneous dimension above 2".into(),
        ));
    }
    let gamma = geom.fundamental_solution();
    let q = geom.q() as f64;
    let mut worst: f64 = 0.0;
    for g in geom.sample_annulus(a, b, count, seed) {
        let rho = geom.gauge_at(&g.0);
        let lap = geom.sublaplacian_of(&gamma.jet(&g.0), &g.0);
        worst = worst.max(lap.abs() * rho.powf(q));
    }
    Ok(HarmonicityReport {
        max_relative_residual: worst,
        samples: count,
        tolerance: HARMONICITY_TOL,
        passed: worst < HARMONICITY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> GaugeGeometry {
        GaugeGeometry::heisenberg(1).unwrap()
    }

    fn pt(c: &[f64]) -> GroupPoint {
        GroupPoint(c.to_vec())
    }

    #[test]
    fn gauge_examples() {
        let g = h1();
        assert!((g.gauge(&pt(&[0.6, 0.8, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((g.gauge(&pt(&[0.0, 0.0, 0.25])).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(g.gauge(&pt(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
        let e = GaugeGeometry::euclidean(3).unwrap();
        assert!((e.gauge(&pt(&[1.0, 2.0, 2.0])).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn gauge_is_homogeneous() {
        let g = h1();
        for p in g.sample_annulus(0.1, 2.0, 30, 1) {
            for lambda in [0.3, 1.7, 4.0] {
                let d = g.dilate(&p.0, lambda);
                let lhs = g.gauge_at(&d);
                assert!((lhs - lambda * g.gauge_at(&p.0)).abs() < 1e-12 * lhs);
            }
        }
    }

    #[test]
    fn psi_examples_and_closed_form() {
        let g = h1();
        assert!((g.psi(&pt(&[0.3, -0.4, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!(g.psi(&pt(&[0.0, 0.0, 0.7])).unwrap().abs() < 1e-14);
        assert!(matches!(g.psi(&pt(&[0.0, 0.0, 0.0])), Err(LabError::UndefinedAtIdentity)));
        for p in g.sample_annulus(0.05, 1.5, 50, 2) {
            let jet_route = g.psi(&p).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&jet_route));
            assert!((jet_route - g.psi_at(&p.0)).abs() < 1e-12);
            assert!((jet_route - g.psi_field().value(&p.0)).abs() < 1e-12);
            let d = g.dilate(&p.0, 2.5);
            assert!((g.psi_at(&d) - jet_route).abs() < 1e-10);
        }
        let e = GaugeGeometry::euclidean(4).unwrap();
        for p in e.sample_annulus(0.1, 1.0, 10, 3) {
            assert!((e.psi(&p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_sublaplacian_expansion() {
        // Δ_H = ∂xx + ∂yy + 4y∂xt − 4x∂yt + 4(x²+y²)∂tt, checked on x²t², y t³, x y t.
        let g = h1();
        let (x, y, t) = (0.3, -0.7, 0.45);
        let fields: [(fn(&[Jet]) -> Jet, f64); 3] = [
            (|v| v[0].sqr() * v[2].sqr(), 2.0 * t * t + 4.0 * y * 4.0 * x * t + 4.0 * (x * x + y * y) * 2.0 * x * x),
            (|v| v[1] * v[2].powi(3), -4.0 * x * 3.0 * t * t + 4.0 * (x * x + y * y) * 6.0 * y * t),
            (|v| v[0] * v[1] * v[2], 4.0 * y * y - 4.0 * x * x),
        ];
        for (f, expected) in fields {
            let jet = f(&Jet::vars(&[x, y, t]));
            let lap = g.sublaplacian_of(&jet, &[x, y, t]);
            assert!((lap - expected).abs() < 1e-12, "{lap} vs {expected}");
        }
        let u = ScalarField::coordinate(3, 2);
        assert_eq!(g.sublaplacian(&u, &pt(&[x, y, t])).unwrap(), 0.0);
        let e = GaugeGeometry::euclidean(3).unwrap();
        let h = ScalarField::new("x2-y2", 3, |g| {
            let v = Jet::vars(g);
            v[0].sqr() - v[1].sqr()
        });
        assert_eq!(e.sublaplacian(&h, &pt(&[0.2, 0.5, -1.0])).unwrap(), 0.0);
    }

    #[test]
    fn harmonicity_selects_the_gauge_constant() {
        let good = harmonicity_oracle(&h1(), 0.2, 1.0, 50, 7).unwrap();
        assert!(good.passed, "residual {}", good.max_relative_residual);
        let h2 = GaugeGeometry::heisenberg(2).unwrap();
        assert!(harmonicity_oracle(&h2, 0.2, 1.0, 50, 8).unwrap().passed);
        let bad = GaugeGeometry::heisenberg_with_constant(1, 16.0).unwrap();
        let r = harmonicity_oracle(&bad, 0.2, 1.0, 50, 7).unwrap();
        assert!(!r.passed && r.max_relative_residual > 1e-2);
        let e3 = GaugeGeometry::euclidean(3).unwrap();
        assert!(harmonicity_oracle(&e3, 0.2, 1.0, 50, 9).unwrap().passed);
    }

    #[test]
    fn generator_detects_homogeneity() {
        let g = h1();
        let rho = g.gauge_field();
        let gamma = g.fundamental_solution();
        let psi = g.psi_field();
        for p in g.sample_annulus(0.1, 1.0, 40, 4) {
            let r = g.gauge_at(&p.0);
            assert!((g.generator_z(&rho, &p).unwrap() - r).abs() < 1e-12 * r);
            let gam = gamma.value(&p.0);
            assert!((g.generator_z(&gamma, &p).unwrap() + 2.0 * gam).abs() < 1e-9 * gam);
            assert!(g.generator_z(&psi, &p).unwrap().abs() < 1e-9);
            let cube = ScalarField::new("rho3", 3, {
                let rho = rho.clone();
                move |x| rho.jet(x).powi(3)
            });
            assert!((g.generator_z(&cube, &p).unwrap() - 3.0 * r.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn discrepancy_vanishes_for_symmetric_fields() {
        let g = h1();
        let radial = ScalarField::new("cos rho", 3, {
            let rho = g.gauge_field();
            move |x| rho.jet(x).cos()
        });
        let t = ScalarField::coordinate(3, 2);
        for p in g.sample_annulus(0.05, 1.0, 50, 5) {
            assert!(g.discrepancy(&radial, &p).unwrap().abs() < 1e-9);
            assert!(g.discrepancy(&t, &p).unwrap().abs() < 1e-9);
        }
        let e = GaugeGeometry::euclidean(3).unwrap();
        let any = ScalarField::new("sin x exp y", 3, |x| {
            let v = Jet::vars(x);
            v[0].sin() * v[1].exp() + v[2]
        });
        for p in e.sample_annulus(0.05, 1.0, 50, 6) {
            assert!(e.discrepancy(&any, &p).unwrap().abs() < 1e-10);
        }
        let x = ScalarField::coordinate(3, 0);
        let f = DiniModulus::new(1.0, 1.0).unwrap();
        let ratio = check_discrepancy_bound(&g, &x, &f, &g.sample_annulus(0.2, 1.0, 50, 7)).unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
        assert!(check_discrepancy_bound(&g, &radial, &f, &g.sample_annulus(0.2, 1.0, 50, 7)).unwrap() < 1e-8);
        assert!(matches!(check_discrepancy_bound(&g, &x, &f, &[]), Err(LabError::EmptySamples)));
    }

    #[test]
    fn potential_checks() {
        let g = h1();
        let samples = g.sample_annulus(0.01, 1.0, 200, 11);
        let lambda = 4.0;
        let v = Potential::new(g.psi_field().scaled(-lambda), lambda).unwrap();
        let rep = check_potential(&g, &v, &samples);
        assert!((rep.max_v_ratio - lambda).abs() < 1e-9 && rep.max_zv_ratio < 1e-8 && rep.admissible, "{rep:?}");
        let zero = check_potential(&g, &Potential::zero(3), &samples);
        assert_eq!((zero.max_v_ratio, zero.max_zv_ratio), (0.0, 0.0));
        let singular = ScalarField::new("psi/rho2", 3, {
            let (rho, psi) = (g.gauge_field(), g.psi_field());
            move |x| psi.jet(x) / rho.jet(x).sqr()
        });
        let bad = check_potential(&g, &Potential::new(singular, 1e6).unwrap(), &g.sample_annulus(1e-4, 1e-3, 50, 12));
        assert!(!bad.admissible);
        assert!(Potential::new(ScalarField::constant(3, 0.0), 1.0).is_err());
    }

    #[test]
    fn cutoff_potentials() {
        let g = h1();
        let bump = SmoothBump { a: 0.1, b: 0.9 };
        let t = ScalarField::coordinate(3, 2);
        let v = make_cutoff_potential(&g, &t, bump, 50.0).unwrap();
        let rep = check_potential(&g, &v, &g.sample_annulus(0.05, 1.0, 500, 13));
        assert!(rep.admissible, "{rep:?}");
        let one = make_cutoff_potential(&g, &ScalarField::constant(3, 1.0), bump, 100.0).unwrap();
        assert!(check_potential(&g, &one, &g.sample_annulus(0.05, 1.0, 500, 14)).admissible);
        let zero = make_cutoff_potential(&g, &ScalarField::constant(3, 0.0), bump, 2.0).unwrap();
        assert_eq!(zero.field.value(&[0.3, 0.2, 0.1]), 0.0);
        assert!(make_cutoff_potential(&g, &t, SmoothBump { a: 0.0, b: 0.5 }, 2.0).is_err());
        // bump derivatives against finite differences
        let h = 1e-5;
        for s in [0.2, 0.45, 0.7] {
            let (_, d1, d2) = bump.eval3(s);
            let fd1 = (bump.eval3(s + h).0 - bump.eval3(s - h).0) / (2.0 * h);
            let fd2 = (bump.eval3(s + h).0 - 2.0 * bump.eval3(s).0 + bump.eval3(s - h).0) / (h * h);
            assert!((d1 - fd1).abs() < 1e-6 && (d2 - fd2).abs() < 1e-3 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn dini_modulus() {
        let f = DiniModulus::new(2.0, 0.5).unwrap();
        assert_eq!(f.k0(), 4.0);
        assert!((f.primitive(0.25) - 2.0).abs() < 1e-15);
        assert!(DiniModulus::new(1.0, 1.5).is_err());
        assert!(DiniModulus::new(0.0, 0.5).is_err());
    }

    #[test]
    fn unsupported_gauges() {
        let alg = StratifiedAlgebra::new(
            3,
            vec![2, 1, 2],
            &[
                crate::algebra::BracketEntry { i: 0, j: 1, k: 2, c: 1.0 },
                crate::algebra::BracketEntry { i: 1, j: 0, k: 2, c: -1.0 },
            ],
        )
        .unwrap();
        assert!(matches!(GaugeGeometry::for_algebra(alg), Err(LabError::Unsupported(_))));
        assert!(GaugeGeometry::for_algebra(StratifiedAlgebra::heisenberg(1)).is_ok());
    }
}
