//! Stratified nilpotent Lie algebras and their groups in exponential
//! coordinates of the first kind.
//!
//! A basis element carries a stratum index `1..=step`; the dilation
//! `δ_λ` multiplies stratum-`j` coordinates by `λ^j`. The group product is
//! the Baker–Campbell–Hausdorff series, which terminates at the step.

pub mod poly;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
pub use poly::{Coeff, CompiledPoly, Poly};

/// Largest step for which the BCH product is implemented.
pub const MAX_BCH_STEP: usize = 4;

const VALIDATION_TOL: f64 = 1e-12;

/// Structure constants `c^k_{ij}` over a graded basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StratifiedAlgebra {
    step: usize,
    strata: Vec<usize>,
    stratum_of: Vec<usize>,
    consts: Vec<f64>,
    nonzero: Vec<(usize, usize, usize, f64)>,
}

/// One entry of the JSON bracket list: `[e_i, e_j] ∋ c · e_k`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: f64,
}

/// Serialized algebra definition.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AlgebraDoc {
    pub step: usize,
    pub strata: Vec<usize>,
    #[serde(default)]
    pub brackets: Vec<BracketEntry>,
}

/// A problem found by [`StratifiedAlgebra::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    Antisymmetry { i: usize, j: usize, k: usize },
    Jacobi { i: usize, j: usize, k: usize, residual: f64 },
    Grading { i: usize, j: usize, k: usize },
    Generation { stratum: usize, rank: usize, expected: usize },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A point of the group, stored as exponential coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint(pub Vec<f64>);

impl GroupPoint {
    pub fn identity(dim: usize) -> Self {
        GroupPoint(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl StratifiedAlgebra {
    /// Build from strata dimensions and a bracket list. Only checks that the
    /// indices fit; the algebraic invariants are the job of [`Self::validate`].
    pub fn new(step: usize, strata: Vec<usize>, brackets: &[BracketEntry]) -> Result<Self> {
        if step == 0 || strata.len() != step {
            return Err(LabError::Structure(format!(
                "step {step} does not match {} strata",
                strata.len()
            )));
        }
        if strata.iter().any(|&m| m == 0) {
            return Err(LabError::Structure("strata dimensions must be positive".into()));
        }
        let dim: usize = strata.iter().sum();
        let stratum_of: Vec<usize> = strata
            .iter()
            .enumerate()
            .flat_map(|(j, &m)| std::iter::repeat(j + 1).take(m))
            .collect();
        let mut consts = vec![0.0; dim * dim * dim];
        for b in brackets {
            if b.i >= dim || b.j >= dim || b.k >= dim {
                return Err(LabError::Structure(format!(
                    "bracket index ({}, {}, {}) outside dimension {dim}",
                    b.i, b.j, b.k
                )));
            }
            consts[(b.i * dim + b.j) * dim + b.k] += b.c;
        }
        let mut alg = StratifiedAlgebra {
            step,
            strata,
            stratum_of,
            consts,
            nonzero: Vec::new(),
        };
        alg.refresh_nonzero();
        Ok(alg)
    }

    fn refresh_nonzero(&mut self) {
        let n = self.dim();
        self.nonzero.clear();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = self.consts[(i * n + j) * n + k];
                    if c != 0.0 {
                        self.nonzero.push((i, j, k, c));
                    }
                }
            }
        }
    }

    /// Abelian `ℝ^n`, a step-1 group.
    pub fn euclidean(n: usize) -> Self {
        StratifiedAlgebra::new(1, vec![n], &[]).expect("euclidean algebra")
    }

    /// Heisenberg algebra `H^n` with basis `x_1..x_n, y_1..y_n, t` and
    /// `[X_i, Y_i] = -4 T`.
    pub fn heisenberg(n: usize) -> Self {
        let t = 2 * n;
        let mut br = Vec::new();
        for i in 0..n {
            br.push(BracketEntry { i, j: n + i, k: t, c: -4.0 });
            br.push(BracketEntry { i: n + i, j: i, k: t, c: 4.0 });
        }
        StratifiedAlgebra::new(2, vec![2 * n, 1], &br).expect("heisenberg algebra")
    }

    pub fn from_doc(doc: &AlgebraDoc) -> Result<Self> {
        StratifiedAlgebra::new(doc.step, doc.strata.clone(), &doc.brackets)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: AlgebraDoc = serde_json::from_str(s)?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> AlgebraDoc {
        AlgebraDoc {
            step: self.step,
            strata: self.strata.clone(),
            brackets: self
                .nonzero
                .iter()
                .map(|&(i, j, k, c)| BracketEntry { i, j, k, c })
                .collect(),
        }
    }

    /// Resolve a built-in id: `euclidean:n` or `heisenberg:n`.
    pub fn builtin(id: &str) -> Result<Self> {
        let (kind, n) = id
            .split_once(':')
            .ok_or_else(|| LabError::Config(format!("malformed algebra id '{id}'")))?;
        let n: usize = n
            .parse()
            .map_err(|_| LabError::Config(format!("malformed dimension in '{id}'")))?;
        if n == 0 {
            return Err(LabError::Config(format!("zero dimension in '{id}'")));
        }
        match kind {
            "euclidean" => Ok(Self::euclidean(n)),
            "heisenberg" => Ok(Self::heisenberg(n)),
            _ => Err(LabError::Config(format!("unknown algebra kind '{kind}'"))),
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn strata(&self) -> &[usize] {
        &self.strata
    }

    pub fn dim(&self) -> usize {
        self.stratum_of.len()
    }

    /// Number of horizontal (first-stratum) directions.
    pub fn horizontal_dim(&self) -> usize {
        self.strata[0]
    }

    /// Stratum index (1-based) of each coordinate.
    pub fn stratum_of(&self) -> &[usize] {
        &self.stratum_of
    }

    /// `Q = Σ j·m_j`.
    pub fn homogeneous_dimension(&self) -> usize {
        self.strata
            .iter()
            .enumerate()
            .map(|(j, &m)| (j + 1) * m)
            .sum()
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.consts[(i * n + j) * n + k]
    }

    /// Check antisymmetry, Jacobi, grading and Hörmander generation.
    pub fn validate(&self) -> ValidationReport {
        let n = self.dim();
        let mut violations = Vec::new();
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let s = self.structure_constant(i, j, k) + self.structure_constant(j, i, k);
                    if s.abs() > VALIDATION_TOL {
                        violations.push(Violation::Antisymmetry { i, j, k });
                    }
                }
            }
        }
        for &(i, j, k, c) in &self.nonzero {
            let target = self.stratum_of[i] + self.stratum_of[j];
            if c.abs() > VALIDATION_TOL && (target > self.step || self.stratum_of[k] != target) {
                violations.push(Violation::Grading { i, j, k });
            }
        }
        let basis = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let (a, b, c) = (basis(i), basis(j), basis(k));
                    let t1 = self.bracket(&a, &self.bracket(&b, &c));
                    let t2 = self.bracket(&b, &self.bracket(&c, &a));
                    let t3 = self.bracket(&c, &self.bracket(&a, &b));
                    let residual = (0..n)
                        .map(|l| (t1[l] + t2[l] + t3[l]).abs())
                        .fold(0.0, f64::max);
                    if residual > VALIDATION_TOL {
                        violations.push(Violation::Jacobi { i, j, k, residual });
                    }
                }
            }
        }
        // [V_1, V_j] must span V_{j+1}.
        for stratum in 1..self.step {
            let first: Vec<usize> = (0..n).filter(|&i| self.stratum_of[i] == 1).collect();
            let current: Vec<usize> = (0..n).filter(|&i| self.stratum_of[i] == stratum).collect();
            let next: Vec<usize> = (0..n).filter(|&i| self.stratum_of[i] == stratum + 1).collect();
            let mut rows = Vec::new();
            for &a in &first {
                for &b in &current {
                    let v = self.bracket(&basis(a), &basis(b));
                    rows.push(next.iter().map(|&k| v[k]).collect::<Vec<f64>>());
                }
            }
            let rank = matrix_rank(rows, next.len());
            if rank < next.len() {
                violations.push(Violation::Generation {
                    stratum: stratum + 1,
                    rank,
                    expected: next.len(),
                });
            }
        }
        ValidationReport { violations }
    }

    /// `[a, b]_k = Σ c^k_{ij} a_i b_j`.
    pub fn bracket<T: Coeff>(&self, a: &[T], b: &[T]) -> Vec<T> {
        let zero = a[0].zero_like();
        let mut out = vec![zero; self.dim()];
        for &(i, j, k, c) in &self.nonzero {
            out[k].add_scaled(&a[i].mul(&b[j]), c);
        }
        out
    }

    fn check_bch_supported(&self) -> Result<()> {
        if self.step > MAX_BCH_STEP
            && self
                .nonzero
                .iter()
                .any(|&(_, _, k, _)| self.stratum_of[k] > MAX_BCH_STEP)
        {
            return Err(LabError::Unsupported(format!(
                "BCH product implemented through step {MAX_BCH_STEP}; algebra has step {}",
                self.step
            )));
        }
        Ok(())
    }

    /// `log(exp a · exp b)`, exact by nilpotency through step 4.
    pub fn bch_product<T: Coeff>(&self, a: &[T], b: &[T]) -> Result<Vec<T>> {
        self.check_bch_supported()?;
        let n = self.dim();
        let mut z: Vec<T> = a.to_vec();
        for k in 0..n {
            z[k].add_scaled(&b[k], 1.0);
        }
        if self.step == 1 || self.nonzero.is_empty() {
            return Ok(z);
        }
        let ab = self.bracket(a, b);
        for k in 0..n {
            z[k].add_scaled(&ab[k], 0.5);
        }
        if self.step >= 3 {
            let a_ab = self.bracket(a, &ab);
            let b_ab = self.bracket(b, &ab);
            for k in 0..n {
                z[k].add_scaled(&a_ab[k], 1.0 / 12.0);
                z[k].add_scaled(&b_ab[k], -1.0 / 12.0);
            }
            if self.step >= 4 {
                let b_a_ab = self.bracket(b, &a_ab);
                for k in 0..n {
                    z[k].add_scaled(&b_a_ab[k], -1.0 / 24.0);
                }
            }
        }
        Ok(z)
    }

    pub fn multiply(&self, g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(g)?;
        self.check_point(h)?;
        Ok(GroupPoint(self.bch_product(&g.0, &h.0)?))
    }

    pub fn inverse(&self, g: &GroupPoint) -> GroupPoint {
        GroupPoint(g.0.iter().map(|x| -x).collect())
    }

    /// `δ_λ`: stratum-`j` coordinates scaled by `λ^j`.
    pub fn dilate(&self, g: &GroupPoint, lambda: f64) -> Result<GroupPoint> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(LabError::Domain(format!("dilation factor must be positive, got {lambda}")));
        }
        self.check_point(g)?;
        Ok(GroupPoint(
            g.0.iter()
                .zip(&self.stratum_of)
                .map(|(x, &j)| x * lambda.powi(j as i32))
                .collect(),
        ))
    }

    fn check_point(&self, g: &GroupPoint) -> Result<()> {
        if g.0.len() != self.dim() {
            return Err(LabError::Structure(format!(
                "point has {} coordinates, algebra has dimension {}",
                g.0.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Coordinate coefficients of `X_i = dL_g(e_i)` as polynomials in `g`,
    /// obtained as `d/ds bch(g, s e_i)` at `s = 0`.
    pub fn left_invariant_polys(&self, i: usize) -> Result<Vec<Poly>> {
        let n = self.dim();
        let nv = n + 1; // g_0..g_{n-1}, s
        let g: Vec<Poly> = (0..n).map(|k| Poly::var(nv, k)).collect();
        let mut b = vec![Poly::zero(nv); n];
        b[i] = Poly::var(nv, n);
        let prod = self.bch_product(&g, &b)?;
        Ok(prod
            .iter()
            .map(|p| p.deriv(n).at_zero(n).truncate_vars(n))
            .collect())
    }

    /// Numeric coefficients `a_k(g)` with `X_i = Σ_k a_k(g) ∂_k`.
    pub fn left_invariant_field(&self, i: usize, g: &GroupPoint) -> Result<Vec<f64>> {
        self.check_point(g)?;
        Ok(self
            .left_invariant_polys(i)?
            .iter()
            .map(|p| p.eval(&g.0))
            .collect())
    }

    /// The horizontal frame `X_1..X_m` as polynomial vector fields.
    pub fn horizontal_frame(&self) -> Result<Vec<VectorField>> {
        (0..self.horizontal_dim())
            .map(|i| Ok(VectorField::new(self.left_invariant_polys(i)?)))
            .collect()
    }

    /// The dilation generator `Z = Σ_k w_k x_k ∂_k`.
    pub fn dilation_generator(&self) -> VectorField {
        let n = self.dim();
        VectorField::new(
            (0..n)
                .map(|k| Poly::var(n, k).scaled(self.stratum_of[k] as f64))
                .collect(),
        )
    }

    /// Jacobian determinant of `h ↦ g∘h` at `h`.
    pub fn left_translation_jacobian_det(&self, g: &GroupPoint, h: &GroupPoint) -> Result<f64> {
        self.check_point(g)?;
        self.check_point(h)?;
        let n = self.dim();
        let gp: Vec<Poly> = g.0.iter().map(|&c| Poly::constant(n, c)).collect();
        let hp: Vec<Poly> = (0..n).map(|k| Poly::var(n, k)).collect();
        let prod = self.bch_product(&gp, &hp)?;
        let mut jac = vec![vec![0.0; n]; n];
        for (r, p) in prod.iter().enumerate() {
            for (c, slot) in jac[r].iter_mut().enumerate() {
                *slot = p.deriv(c).eval(&h.0);
            }
        }
        Ok(determinant(jac))
    }

    /// Jacobian determinant of `δ_λ`; the map is linear and diagonal.
    pub fn dilation_jacobian_det(&self, lambda: f64) -> Result<f64> {
        let n = self.dim();
        let mut jac = vec![vec![0.0; n]; n];
        for k in 0..n {
            let mut e = GroupPoint::identity(n);
            e.0[k] = 1.0;
            let col = self.dilate(&e, lambda)?;
            for r in 0..n {
                jac[r][k] = col.0[r];
            }
        }
        Ok(determinant(jac))
    }
}

/// A vector field `Σ_k a_k ∂_k` with polynomial coefficients.
#[derive(Clone, Debug)]
pub struct VectorField {
    coeffs: Vec<Poly>,
}

impl VectorField {
    pub fn new(coeffs: Vec<Poly>) -> Self {
        VectorField { coeffs }
    }

    pub fn coeffs(&self) -> &[Poly] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Euclidean divergence in exponential coordinates, which is the
    /// Riemannian one because Haar measure is Lebesgue there.
    pub fn divergence(&self) -> Poly {
        let n = self.dim();
        let mut d = Poly::zero(n);
        for (k, a) in self.coeffs.iter().enumerate() {
            d.add_scaled(&a.deriv(k), 1.0);
        }
        d
    }

    /// Lie bracket `[A, B]^k = Σ_j A^j ∂_j B^k − B^j ∂_j A^k`.
    pub fn commutator(&self, other: &VectorField) -> VectorField {
        let n = self.dim();
        let coeffs = (0..n)
            .map(|k| {
                let mut c = Poly::zero(n);
                for j in 0..n {
                    c.add_scaled(&self.coeffs[j].mul(&other.coeffs[k].deriv(j)), 1.0);
                    c.add_scaled(&other.coeffs[j].mul(&self.coeffs[k].deriv(j)), -1.0);
                }
                c
            })
            .collect();
        VectorField { coeffs }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| {
                    let mut c = a.clone();
                    c.add_scaled(b, -1.0);
                    c
                })
                .collect(),
        }
    }

    pub fn is_negligible(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|p| p.is_negligible(tol))
    }

    pub fn eval(&self, g: &[f64]) -> Vec<f64> {
        self.coeffs.iter().map(|p| p.eval(g)).collect()
    }
}

fn matrix_rank(mut rows: Vec<Vec<f64>>, cols: usize) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        let pivot = (rank..rows.len())
            .max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs()));
        let Some(p) = pivot else { break };
        if rows[p][c].abs() <= VALIDATION_TOL {
            continue;
        }
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank {
                let f = rows[r][c] / rows[rank][c];
                for cc in c..cols {
                    rows[r][cc] -= f * rows[rank][cc];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Determinant by partial-pivot elimination.
pub(crate) fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in (c + 1)..n {
            let f = m[r][c] / m[c][c];
            for cc in c..n {
                m[r][cc] -= f * m[c][cc];
            }
        }
    }
    det
}
