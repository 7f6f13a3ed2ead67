//! Structural identity suite: homogeneity of the gauge and related fields
//! under the dilation generator, divergences, commutators and Haar scaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::GroupPoint;
use crate::error::Result;
use crate::geometry::{harmonicity_oracle, GaugeGeometry, HarmonicityReport};

/// Relative tolerance of every structural check.
pub const STRUCTURAL_TOL: f64 = 1e-8;
pub const DEFAULT_POINTS: usize = 100;
pub const DEFAULT_SEED: u64 = 0x1d_e471;

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_error: f64,
    pub points: usize,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentitySuite {
    pub geometry: String,
    pub algebra_valid: bool,
    pub checks: Vec<IdentityCheck>,
    pub harmonicity: Option<HarmonicityReport>,
}

impl IdentitySuite {
    pub fn passed(&self) -> bool {
        self.algebra_valid
            && self.checks.iter().all(|c| c.passed)
            && self.harmonicity.as_ref().map_or(true, |h| h.passed)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

struct Tracker {
    worst: f64,
    count: usize,
}

impl Tracker {
    fn new() -> Self {
        Tracker { worst: 0.0, count: 0 }
    }

    fn push(&mut self, err: f64) {
        self.count += 1;
        // NaN must fail, so compare the negation
        if !(err <= self.worst) {
            self.worst = if err.is_nan() { f64::INFINITY } else { err };
        }
    }

    fn finish(self, name: &str) -> IdentityCheck {
        IdentityCheck {
            name: name.to_string(),
            max_error: self.worst,
            points: self.count,
            tolerance: STRUCTURAL_TOL,
            passed: self.worst < STRUCTURAL_TOL,
        }
    }
}

/// Runs every structural check at `count` random points of `0.2 ≤ ρ ≤ 1`
/// and the gauge harmonicity oracle where the fundamental solution exists.
pub fn structural_suite(geom: &GaugeGeometry, count: usize, seed: u64) -> Result<IdentitySuite> {
    let alg = geom.algebra();
    let algebra_valid = alg.validate().is_valid();
    let n = geom.dim();
    let q = geom.q() as f64;
    let points = geom.sample_annulus(0.2, 1.0, count, seed);
    let gamma = (geom.q() > 2).then(|| geom.fundamental_solution());
    let psi = geom.psi_field();
    let z = alg.dilation_generator();
    let div_z = z.divergence();
    let frame = alg.horizontal_frame()?;
    let div_x: Vec<_> = frame.iter().map(|x| x.divergence()).collect();
    let brackets: Vec<_> = frame.iter().map(|x| x.commutator(&z).sub(x)).collect();

    let mut t_rho = Tracker::new();
    let mut t_psi = Tracker::new();
    let mut t_gamma = Tracker::new();
    let mut t_divz = Tracker::new();
    let mut t_divx = Tracker::new();
    let mut t_br = Tracker::new();
    let mut t_haar = Tracker::new();
    let mut t_dil = Tracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1e);
    for g in &points {
        let x = g.coords();
        let rj = geom.gauge_jet_at(x);
        t_rho.push(rel(geom.generator_z_of(&rj, x), rj.v));
        let pj = psi.jet(x);
        t_psi.push(geom.generator_z_of(&pj, x).abs() / pj.v.abs().max(1.0));
        if let Some(gamma) = &gamma {
            let gj = gamma.jet(x);
            let zg = geom.generator_z_of(&gj, x);
            t_gamma.push((zg - (2.0 - q) * gj.v).abs() / ((2.0 - q) * gj.v).abs());
        }
        t_divz.push(rel(div_z.eval(x), q));
        for d in &div_x {
            t_divx.push(d.eval(x).abs());
        }
        for (b, xf) in brackets.iter().zip(&frame) {
            let scale = xf.eval(x).iter().map(|c| c * c).sum::<f64>().sqrt().max(1.0);
            let err = b.eval(x).iter().map(|c| c * c).sum::<f64>().sqrt();
            t_br.push(err / scale);
        }
        let h = GroupPoint((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        t_haar.push(rel(alg.left_translation_jacobian_det(g, &h)?, 1.0));
        let lambda: f64 = rng.gen_range(0.25..4.0);
        let det = alg.dilation_jacobian_det(lambda)?;
        t_dil.push((det - lambda.powf(q)).abs() / lambda.powf(q));
    }
    let mut checks = vec![
        t_rho.finish("Z rho = rho"),
        t_psi.finish("Z psi = 0"),
    ];
    if gamma.is_some() {
        checks.push(t_gamma.finish("Z Gamma = (2-Q) Gamma"));
    }
    checks.extend([
        t_divz.finish("div Z = Q"),
        t_divx.finish("div X_i = 0"),
        t_br.finish("[X_i, Z] = X_i"),
        t_haar.finish("left translation preserves measure"),
        t_dil.finish("dilation scales measure by lambda^Q"),
    ]);
    let harmonicity = match gamma {
        Some(_) => Some(harmonicity_oracle(geom, 0.2, 1.0, 50, seed)?),
        None => None,
    };
    Ok(IdentitySuite {
        geometry: geom.id(),
        algebra_valid,
        checks,
        harmonicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BracketEntry, StratifiedAlgebra};

    #[test]
    fn suite_passes_on_builtin_geometries() {
        for id in ["heisenberg:1", "euclidean:3", "heisenberg:2"] {
            let g = GaugeGeometry::builtin(id).unwrap();
            let s = structural_suite(&g, DEFAULT_POINTS, DEFAULT_SEED).unwrap();
            for c in &s.checks {
                assert!(c.passed, "{id}: {c:?}");
                assert!(c.points >= DEFAULT_POINTS);
            }
            assert!(s.passed());
        }
    }

    #[test]
    fn wrong_gauge_constant_fails_harmonicity_only() {
        let g = GaugeGeometry::heisenberg_with_constant(1, 16.0).unwrap();
        let s = structural_suite(&g, 20, 3).unwrap();
        assert!(s.checks.iter().all(|c| c.passed));
        assert!(!s.harmonicity.unwrap().passed);
    }

    #[test]
    fn corrupted_algebra_is_flagged() {
        // only c^3_{12} set, so antisymmetry breaks
        let bad = StratifiedAlgebra::new(2, vec![2, 1], &[BracketEntry { i: 0, j: 1, k: 2, c: 4.0 }]).unwrap();
        assert!(!bad.validate().is_valid());
    }
}
