//! Finite differences for `Δ_H u = V u` on boxes in the first Heisenberg
//! group, where `Δ_H = ∂xx + ∂yy + 4y ∂xt − 4x ∂yt + 4(x² + y²) ∂tt`.
//!
//! Nodes are stored t-major: `index = (k · ny + j) · nx + i`.

mod krylov;
mod pipeline;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use krylov::{bicgstab, SolverOptions};
pub use pipeline::{discrete_frequency_pipeline, interpolated_field};

use crate::error::{LabError, Result};
use crate::geometry::ScalarField;
use crate::par;

/// Smallest node count per axis.
pub const MIN_NODES: usize = 8;

#[derive(Clone, Debug)]
pub struct GridProblem {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// Intervals per axis; nodes are `intervals + 1`.
    pub intervals: [usize; 3],
    /// The potential `V` in `Δ_H u = V u`.
    pub potential: ScalarField,
    pub boundary: ScalarField,
}

impl GridProblem {
    pub fn new(lo: [f64; 3], hi: [f64; 3], intervals: [usize; 3], potential: ScalarField, boundary: ScalarField) -> Result<Self> {
        if intervals.iter().any(|&n| n + 1 < MIN_NODES) {
            return Err(LabError::Config(format!("need at least {MIN_NODES} nodes per axis, got {intervals:?}")));
        }
        if (0..3).any(|a| !(hi[a] > lo[a])) {
            return Err(LabError::Config("box extents must be increasing".into()));
        }
        if potential.dim() != 3 || boundary.dim() != 3 {
            return Err(LabError::Unsupported("the solver works on the first Heisenberg group only".into()));
        }
        Ok(GridProblem { lo, hi, intervals, potential, boundary })
    }

    /// `[-a, a] × [-b, b] × [-c, c]` with `n` intervals on x, y and `2n` on t.
    pub fn centered(half: [f64; 3], n: usize, potential: ScalarField, boundary: ScalarField) -> Result<Self> {
        GridProblem::new([-half[0], -half[1], -half[2]], half, [n, n, 2 * n], potential, boundary)
    }

    pub fn nodes(&self) -> [usize; 3] {
        [self.intervals[0] + 1, self.intervals[1] + 1, self.intervals[2] + 1]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| (self.hi[a] - self.lo[a]) / self.intervals[a] as f64)
    }

    pub fn coord(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        [self.lo[0] + i as f64 * h[0], self.lo[1] + j as f64 * h[1], self.lo[2] + k as f64 * h[2]]
    }

    fn split(&self, node: usize) -> (usize, usize, usize) {
        let [nx, ny, _] = self.nodes();
        (node % nx, (node / nx) % ny, node / (nx * ny))
    }

    fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.nodes();
        (k * ny + j) * nx + i
    }

    fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        let [nx, ny, nt] = self.nodes();
        i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nt
    }

    /// The box holds the gauge ball `B_r`.
    pub fn contains_ball(&self, r: f64) -> bool {
        (0..2).all(|a| self.lo[a] <= -r && self.hi[a] >= r) && self.lo[2] <= -r * r && self.hi[2] >= r * r
    }
}

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        par::fill_indexed(y, |r| {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            acc
        });
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&p| self.cols[p] == c)
            .map_or(0.0, |p| self.vals[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: Csr,
    pub rhs: Vec<f64>,
    /// Grid node of each unknown.
    pub unknowns: Vec<usize>,
    /// Boundary values on the full grid, zero at interior nodes.
    pub boundary_values: Vec<f64>,
}

/// Second-order stencils with four-point cross differences; boundary
/// nodes are eliminated into the right-hand side.
pub fn assemble(problem: &GridProblem) -> LinearSystem {
    let [nx, ny, nt] = problem.nodes();
    let total = nx * ny * nt;
    let boundary_values = par::map_indexed(total, |node| {
        let (i, j, k) = problem.split(node);
        if problem.is_boundary(i, j, k) {
            problem.boundary.value(&problem.coord(i, j, k))
        } else {
            0.0
        }
    });
    let unknowns: Vec<usize> = (0..total)
        .filter(|&node| {
            let (i, j, k) = problem.split(node);
            !problem.is_boundary(i, j, k)
        })
        .collect();
    let mut index = vec![usize::MAX; total];
    for (u, &node) in unknowns.iter().enumerate() {
        index[node] = u;
    }
    let [hx, hy, ht] = problem.spacing();
    let rows = par::map_indexed(unknowns.len(), |u| {
        let (i, j, k) = problem.split(unknowns[u]);
        let [x, y, t] = problem.coord(i, j, k);
        let cxx = 1.0 / (hx * hx);
        let cyy = 1.0 / (hy * hy);
        let ctt = 4.0 * (x * x + y * y) / (ht * ht);
        let cxt = 4.0 * y / (4.0 * hx * ht);
        let cyt = -4.0 * x / (4.0 * hy * ht);
        let v = problem.potential.value(&[x, y, t]);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(15);
        let mut rhs = 0.0;
        let mut add = |di: isize, dj: isize, dk: isize, c: f64| {
            if c == 0.0 {
                return;
            }
            let node = problem.node(
                (i as isize + di) as usize,
                (j as isize + dj) as usize,
                (k as isize + dk) as usize,
            );
            match index[node] {
                usize::MAX => rhs -= c * boundary_values[node],
                col => entries.push((col, c)),
            }
        };
        add(0, 0, 0, -2.0 * (cxx + cyy + ctt) - v);
        add(-1, 0, 0, cxx);
        add(1, 0, 0, cxx);
        add(0, -1, 0, cyy);
        add(0, 1, 0, cyy);
        add(0, 0, -1, ctt);
        add(0, 0, 1, ctt);
        for (s, d) in [(1.0, 1), (-1.0, -1)] {
            add(d, 0, 1, s * cxt);
            add(d, 0, -1, -s * cxt);
            add(0, d, 1, s * cyt);
            add(0, d, -1, -s * cyt);
        }
        entries.sort_by_key(|e| e.0);
        (entries, rhs)
    });
    let mut row_ptr = Vec::with_capacity(unknowns.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = Vec::with_capacity(unknowns.len());
    row_ptr.push(0);
    for (entries, b) in rows {
        for (c, v) in entries {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
        rhs.push(b);
    }
    LinearSystem {
        matrix: Csr { n: unknowns.len(), row_ptr, cols, vals },
        rhs,
        unknowns,
        boundary_values,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteSolution {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub nodes: [usize; 3],
    /// Values on the full grid, t-major.
    pub values: Vec<f64>,
    /// `‖b − A u‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl DiscreteSolution {
    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| (self.hi[a] - self.lo[a]) / (self.nodes[a] - 1) as f64)
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(k * self.nodes[1] + j) * self.nodes[0] + i]
    }

    pub fn coord(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        [self.lo[0] + i as f64 * h[0], self.lo[1] + j as f64 * h[1], self.lo[2] + k as f64 * h[2]]
    }

    /// Largest nodal deviation from `u` over the interior nodes.
    pub fn max_interior_error(&self, u: &ScalarField) -> f64 {
        let [nx, ny, nt] = self.nodes;
        let errs = par::map_indexed(nt - 2, |kk| {
            let k = kk + 1;
            let mut worst: f64 = 0.0;
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    worst = worst.max((self.at(i, j, k) - u.value(&self.coord(i, j, k))).abs());
                }
            }
            worst
        });
        errs.into_iter().fold(0.0, f64::max)
    }

    /// Extremes over boundary and interior nodes: `(boundary min, boundary max, interior min, interior max)`.
    pub fn extremes(&self) -> (f64, f64, f64, f64) {
        let [nx, ny, nt] = self.nodes;
        let (mut bmin, mut bmax, mut imin, mut imax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..nt {
            for j in 0..ny {
                for i in 0..nx {
                    let v = self.at(i, j, k);
                    if i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nt {
                        bmin = bmin.min(v);
                        bmax = bmax.max(v);
                    } else {
                        imin = imin.min(v);
                        imax = imax.max(v);
                    }
                }
            }
        }
        (bmin, bmax, imin, imax)
    }

    /// Raw little-endian `f64` values plus a JSON header next to it.
    pub fn dump(&self, data: &Path, header: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::lab::write_atomic(data, &bytes)?;
        let head = DumpHeader {
            dims: self.nodes,
            lo: self.lo,
            hi: self.hi,
            ordering: "t-major".into(),
            dtype: "f64-le".into(),
            iterations: self.iterations,
            relative_residual: self.relative_residual,
        };
        let mut text = serde_json::to_vec_pretty(&head)?;
        text.write_all(b"\n")?;
        crate::lab::write_atomic(header, &text)
    }

    pub fn load(data: &Path, header: &Path) -> Result<Self> {
        let head: DumpHeader = serde_json::from_slice(&std::fs::read(header)?)?;
        let bytes = std::fs::read(data)?;
        let expect = head.dims.iter().product::<usize>() * 8;
        if bytes.len() != expect || head.ordering != "t-major" || head.dtype != "f64-le" {
            return Err(LabError::Config("solution dump does not match its header".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(DiscreteSolution {
            lo: head.lo,
            hi: head.hi,
            nodes: head.dims,
            values,
            relative_residual: head.relative_residual,
            iterations: head.iterations,
            history: Vec::new(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    dims: [usize; 3],
    lo: [f64; 3],
    hi: [f64; 3],
    ordering: String,
    dtype: String,
    iterations: usize,
    relative_residual: f64,
}

/// Assembles and solves, returning the solution on the full grid.
pub fn solve(problem: &GridProblem, options: &SolverOptions) -> Result<DiscreteSolution> {
    let sys = assemble(problem);
    let out = bicgstab(&sys.matrix, &sys.rhs, options)?;
    let mut values = sys.boundary_values.clone();
    for (u, &node) in sys.unknowns.iter().enumerate() {
        values[node] = out.x[u];
    }
    Ok(DiscreteSolution {
        lo: problem.lo,
        hi: problem.hi,
        nodes: problem.nodes(),
        values,
        relative_residual: out.relative_residual,
        iterations: out.iterations,
        history: out.history,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceStudyRow {
    pub intervals: usize,
    pub h: f64,
    pub max_error: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverConvergence {
    pub rows: Vec<ConvergenceStudyRow>,
    /// Least-squares slope of `log error` against `log h`.
    pub observed_order: f64,
}

/// Solves on `n, 2n, 4n, …` (t-axis doubled) and measures the error
/// against `exact`.
pub fn convergence_study(
    lo: [f64; 3],
    hi: [f64; 3],
    levels: &[usize],
    potential: &ScalarField,
    exact: &ScalarField,
    options: &SolverOptions,
) -> Result<SolverConvergence> {
    if levels.len() < 2 {
        return Err(LabError::Config("convergence study needs at least two grids".into()));
    }
    let mut rows = Vec::new();
    for &n in levels {
        let p = GridProblem::new(lo, hi, [n, n, 2 * n], potential.clone(), exact.clone())?;
        let sol = solve(&p, options)?;
        rows.push(ConvergenceStudyRow {
            intervals: n,
            h: p.spacing()[0],
            max_error: sol.max_interior_error(exact),
            iterations: sol.iterations,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.h.ln(), r.max_error.max(1e-300).ln())).collect();
    let observed_order = crate::quadrature::least_squares_slope(&pts);
    Ok(SolverConvergence { rows, observed_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{fundamental_solution_entry, radial_eigensolution};
    use crate::geometry::GaugeGeometry;
    use crate::jet::Jet;

    fn zero() -> ScalarField {
        ScalarField::constant(3, 0.0)
    }

    fn tight() -> SolverOptions {
        SolverOptions { tol: 1e-13, max_iter: 4000 }
    }

    #[test]
    fn linear_data_is_reproduced_exactly() {
        for axis in [0, 2] {
            let u = ScalarField::coordinate(3, axis);
            let p = GridProblem::centered([1.0, 1.0, 1.0], 10, zero(), u.clone()).unwrap();
            let sol = solve(&p, &tight()).unwrap();
            assert!(sol.max_interior_error(&u) < 1e-10, "axis {axis}");
        }
    }

    #[test]
    fn mirrored_rows_are_mirror_images() {
        let p = GridProblem::centered([1.0, 1.0, 1.0], 8, zero(), zero()).unwrap();
        let sys = assemble(&p);
        let [nx, ny, nt] = p.nodes();
        let mirror = |node: usize| {
            let (i, j, k) = p.split(node);
            p.node(i, ny - 1 - j, nt - 1 - k)
        };
        let mut pos = vec![usize::MAX; nx * ny * nt];
        for (u, &node) in sys.unknowns.iter().enumerate() {
            pos[node] = u;
        }
        for (r, &node) in sys.unknowns.iter().enumerate() {
            let mr = pos[mirror(node)];
            for q in sys.matrix.row_ptr[r]..sys.matrix.row_ptr[r + 1] {
                let mc = pos[mirror(sys.unknowns[sys.matrix.cols[q]])];
                assert_eq!(sys.matrix.vals[q], sys.matrix.get(mr, mc));
            }
            assert_eq!(sys.matrix.row_ptr[r + 1] - sys.matrix.row_ptr[r], sys.matrix.row_ptr[mr + 1] - sys.matrix.row_ptr[mr]);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        let v = g.psi_field().scaled(-0.5);
        let p = GridProblem::centered([1.0, 1.0, 1.0], 8, v, zero()).unwrap();
        let sol = solve(&p, &tight()).unwrap();
        assert!(sol.values.iter().all(|&x| x == 0.0));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn radial_eigensolution_converges() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        let e = radial_eigensolution(&g, 1.0).unwrap();
        // away from the identity, where ρ² has a kink along the t-axis
        let (lo, hi) = ([0.25, -0.5, -0.5], [1.25, 0.5, 0.5]);
        let study = convergence_study(lo, hi, &[8, 16, 32], &e.potential.field, &e.u, &SolverOptions::default()).unwrap();
        assert!(study.observed_order >= 1.5, "{study:?}");
        // V ≤ 0 allows an interior maximum: u(e) = 1 exceeds the boundary data
        let sol = solve(
            &GridProblem::centered([1.0, 1.0, 1.0], 16, e.potential.field.clone(), e.u.clone()).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let (bmin, _, imin, imax) = sol.extremes();
        assert!(imin >= bmin - 1e-6 && imax > 0.99);
    }

    #[test]
    fn nonnegative_potential_keeps_extremes_on_the_boundary() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        let v = g.psi_field().scaled(2.0);
        let data = ScalarField::new("data", 3, |x| {
            let v = Jet::vars(x);
            v[0] + v[1].sqr() - v[2] * 0.5
        });
        let sol = solve(&GridProblem::centered([1.0, 1.0, 1.0], 12, v, data).unwrap(), &tight()).unwrap();
        let (bmin, bmax, imin, imax) = sol.extremes();
        assert!(imax <= bmax.max(0.0) + 1e-8 && imin >= bmin.min(0.0) - 1e-8);
    }

    #[test]
    fn fundamental_solution_off_the_identity() {
        let g = GaugeGeometry::heisenberg(1).unwrap();
        let e = fundamental_solution_entry(&g, 0.2, 3.0).unwrap();
        let p = GridProblem::new([0.5, -0.5, -0.5], [1.5, 0.5, 0.5], [32, 32, 64], zero(), e.u.clone()).unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!(sol.max_interior_error(&e.u) < 5e-3);
    }

    #[test]
    fn dump_round_trip() {
        let u = ScalarField::coordinate(3, 1);
        let p = GridProblem::centered([1.0, 1.0, 1.0], 8, zero(), u).unwrap();
        let sol = solve(&p, &tight()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (d, h) = (dir.path().join("u.bin"), dir.path().join("u.json"));
        sol.dump(&d, &h).unwrap();
        let back = DiscreteSolution::load(&d, &h).unwrap();
        assert_eq!(back.values, sol.values);
        assert_eq!(back.nodes, sol.nodes);
    }
}
