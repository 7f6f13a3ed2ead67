//! Discrete solutions as scalar fields, and their frequency profiles.

use std::sync::Arc;

use super::DiscreteSolution;
use crate::error::{LabError, Result};
use crate::frequency::{profile_for_field, FrequencyProfile};
use crate::geometry::{GaugeGeometry, ScalarField};
use crate::jet::Jet;
use crate::quadrature::QuadratureSpec;

// value, gradient (3), Hessian upper triangle (6)
const NQ: usize = 10;
const HESS_SLOTS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

struct Nodal {
    nodes: [usize; 3],
    lo: [f64; 3],
    h: [f64; 3],
    data: Vec<[f64; NQ]>,
}

/// Difference along `axis` with a one-sided fallback at the ends.
fn diff(sol: &DiscreteSolution, idx: [usize; 3], axis: usize, f: &dyn Fn([usize; 3]) -> f64) -> f64 {
    let n = sol.nodes[axis];
    let h = sol.spacing()[axis];
    let shift = |d: isize| {
        let mut p = idx;
        p[axis] = (p[axis] as isize + d) as usize;
        f(p)
    };
    let i = idx[axis];
    if i == 0 {
        (shift(1) - shift(0)) / h
    } else if i + 1 == n {
        (shift(0) - shift(-1)) / h
    } else {
        (shift(1) - shift(-1)) / (2.0 * h)
    }
}

fn nodal_jets(sol: &DiscreteSolution) -> Nodal {
    let [nx, ny, nt] = sol.nodes;
    let val = |p: [usize; 3]| sol.at(p[0], p[1], p[2]);
    let mut grads = vec![[0.0; 3]; nx * ny * nt];
    for k in 0..nt {
        for j in 0..ny {
            for i in 0..nx {
                let idx = [i, j, k];
                grads[(k * ny + j) * nx + i] = [0, 1, 2].map(|a| diff(sol, idx, a, &val));
            }
        }
    }
    let mut data = vec![[0.0; NQ]; nx * ny * nt];
    for k in 0..nt {
        for j in 0..ny {
            for i in 0..nx {
                let flat = (k * ny + j) * nx + i;
                let idx = [i, j, k];
                let mut q = [0.0; NQ];
                q[0] = sol.values[flat];
                q[1..4].copy_from_slice(&grads[flat]);
                for (s, &(a, b)) in HESS_SLOTS.iter().enumerate() {
                    let g = |p: [usize; 3]| grads[(p[2] * ny + p[1]) * nx + p[0]][b];
                    let d_ab = diff(sol, idx, a, &g);
                    let g2 = |p: [usize; 3]| grads[(p[2] * ny + p[1]) * nx + p[0]][a];
                    let d_ba = diff(sol, idx, b, &g2);
                    q[4 + s] = 0.5 * (d_ab + d_ba);
                }
                data[flat] = q;
            }
        }
    }
    Nodal { nodes: sol.nodes, lo: sol.lo, h: sol.spacing(), data }
}

impl Nodal {
    fn interpolate(&self, x: &[f64]) -> [f64; NQ] {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = ((x[a] - self.lo[a]) / self.h[a]).clamp(0.0, (self.nodes[a] - 1) as f64);
            let c = (s.floor() as usize).min(self.nodes[a] - 2);
            base[a] = c;
            frac[a] = s - c as f64;
        }
        let [nx, ny, _] = self.nodes;
        let mut out = [0.0; NQ];
        for corner in 0..8 {
            let off = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let w: f64 = (0..3).map(|a| if off[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
            if w == 0.0 {
                continue;
            }
            let flat = ((base[2] + off[2]) * ny + base[1] + off[1]) * nx + base[0] + off[0];
            for (o, d) in out.iter_mut().zip(&self.data[flat]) {
                *o += w * d;
            }
        }
        out
    }
}

/// Trilinear interpolation of nodal values and finite-difference jets.
pub fn interpolated_field(sol: &DiscreteSolution, name: &str) -> ScalarField {
    let nodal = Arc::new(nodal_jets(sol));
    ScalarField::new(name, 3, move |x| {
        let q = nodal.interpolate(x);
        let mut j = Jet::constant(3, q[0]);
        j.g[..3].copy_from_slice(&q[1..4]);
        for (s, &(a, b)) in HESS_SLOTS.iter().enumerate() {
            j.h[a][b] = q[4 + s];
            j.h[b][a] = q[4 + s];
        }
        j
    })
}

/// Frequency profile of a discrete solution with potential `v`.
pub fn discrete_frequency_pipeline(
    geom: &GaugeGeometry,
    sol: &DiscreteSolution,
    v: &ScalarField,
    r_grid: &[f64],
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<FrequencyProfile> {
    if geom.dim() != 3 || geom.is_euclidean() {
        return Err(LabError::Unsupported("discrete pipeline runs on the first Heisenberg group".into()));
    }
    let r_max = r_grid.iter().copied().fold(0.0, f64::max);
    let fits = (0..2).all(|a| sol.lo[a] <= -r_max && sol.hi[a] >= r_max)
        && sol.lo[2] <= -r_max * r_max
        && sol.hi[2] >= r_max * r_max;
    if !fits {
        return Err(LabError::Domain(format!("gauge ball of radius {r_max} leaves the solution box")));
    }
    let u = interpolated_field(sol, "discrete");
    profile_for_field(geom, "discrete", &u, v, r_grid, alpha, spec, |_| true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{constant_entry, coordinate_entry, radial_eigensolution};
    use crate::frequency::frequency_profile;
    use crate::solver::{solve, GridProblem, SolverOptions};

    fn sampled(u: &ScalarField, n: usize) -> DiscreteSolution {
        let p = GridProblem::centered([1.0, 1.0, 1.0], n, ScalarField::constant(3, 0.0), u.clone()).unwrap();
        let [nx, ny, nt] = p.nodes();
        let mut values = Vec::with_capacity(nx * ny * nt);
        for k in 0..nt {
            for j in 0..ny {
                for i in 0..nx {
                    values.push(u.value(&p.coord(i, j, k)));
                }
            }
        }
        DiscreteSolution { lo: p.lo, hi: p.hi, nodes: p.nodes(), values, relative_residual: 0.0, iterations: 0, history: vec![] }
    }

    #[test]
    fn interpolation_reproduces_quadratics() {
        let u = ScalarField::new("q", 3, |x| {
            let v = Jet::vars(x);
            v[0] * v[1] + v[2] * v[2] - v[0] * 3.0
        });
        let f = interpolated_field(&sampled(&u, 8), "q");
        let p = [0.3, -0.41, 0.2];
        let (a, b) = (f.jet(&p), u.jet(&p));
        assert!((a.v - b.v).abs() < 0.02);
        for i in 0..3 {
            assert!((a.g[i] - b.g[i]).abs() < 1e-9, "grad {i}");
        }
    }

    #[test]
    fn pipeline_matches_exact_t() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        let e = coordinate_entry(&g, 2).unwrap();
        let grid = [0.3, 0.5, 0.7];
        let spec = QuadratureSpec::uniform(32);
        let exact = frequency_profile(&g, &e, &grid, 1.0, &spec).unwrap();
        let disc = discrete_frequency_pipeline(&g, &sampled(&e.u, 16), &e.potential.field, &grid, 1.0, &spec).unwrap();
        for (a, b) in exact.frequency.iter().zip(&disc.frequency) {
            assert!((a.unwrap() / b.unwrap() - 1.0).abs() < 2e-2);
        }
    }

    #[test]
    fn solved_radial_frequency_matches_series() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        let e = radial_eigensolution(&g, 4.0).unwrap();
        let p = GridProblem::centered([1.0, 1.0, 1.0], 16, e.potential.field.clone(), e.u.clone()).unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        let grid = [0.4, 0.6, 0.8];
        let spec = QuadratureSpec::uniform(32);
        let exact = frequency_profile(&g, &e, &grid, 2.0, &spec).unwrap();
        let disc = discrete_frequency_pipeline(&g, &sol, &e.potential.field, &grid, 2.0, &spec).unwrap();
        for (a, b) in exact.frequency.iter().zip(&disc.frequency) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!((a - b).abs() <= 5e-2 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn zero_and_oversized_balls_are_rejected() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        let z = constant_entry(&g, 0.0).unwrap();
        let sol = sampled(&z.u, 8);
        let spec = QuadratureSpec::uniform(16);
        assert!(matches!(
            discrete_frequency_pipeline(&g, &sol, &z.potential.field, &[0.3, 0.5], 1.0, &spec),
            Err(LabError::Degenerate(_))
        ));
        assert!(matches!(
            discrete_frequency_pipeline(&g, &sol, &z.potential.field, &[1.2], 1.0, &spec),
            Err(LabError::Domain(_))
        ));
    }
}
