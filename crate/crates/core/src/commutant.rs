//! Commutants, centers and intertwiners of finite sets of matrices.
//!
//! Every solve works on the `*`-closure of the generators. A seeded random
//! Hermitian element of the generated algebra is diagonalized first; in its
//! eigenbasis an intertwiner can only connect matching eigenvalues, which cuts
//! the unknowns from `n_a n_b` down to roughly `n`. The remaining homogeneous
//! system is solved through its Gram matrix, and candidate kernel vectors are
//! re-checked against explicitly computed residuals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::pair::{self, WeylPair};

/// Largest Hilbert-space dimension accepted by the solvers.
pub const DIMENSION_GUARD: usize = 256;
/// Relative singular-value cutoff defining the kernel.
pub const KERNEL_TOL: f64 = 1e-8;
/// Smallest admissible singular value of an invertible intertwiner draw.
pub const INVERTIBILITY_TOL: f64 = 1e-6;
pub const WITNESS_TOL: f64 = 1e-8;
pub const EQUIVALENCE_DRAWS: usize = 20;

const MAX_UNKNOWNS: usize = 4096;
const PROBE_SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommutantError {
    #[error("dimension {dim} exceeds the solver guard {guard}")]
    DimensionGuard { dim: usize, guard: usize },
    #[error("generator labels differ: {0} vs {1}")]
    LabelMismatch(String, String),
    #[error("generator {index} is {rows}×{cols}, expected {dim}×{dim}")]
    ShapeMismatch { index: usize, rows: usize, cols: usize, dim: usize },
}

/// Labelled generators of a matrix `*`-algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepGens {
    pub dim: usize,
    pub labels: Vec<String>,
    #[serde(with = "linalg::matrix_list_json")]
    pub gens: Vec<CMatrix>,
}

impl RepGens {
    pub fn new(dim: usize, labels: Vec<String>, gens: Vec<CMatrix>) -> Result<Self, CommutantError> {
        for (index, g) in gens.iter().enumerate() {
            if g.nrows() != dim || g.ncols() != dim {
                return Err(CommutantError::ShapeMismatch { index, rows: g.nrows(), cols: g.ncols(), dim });
            }
        }
        let labels = if labels.len() == gens.len() { labels } else { (0..gens.len()).map(|i| format!("X{i}")).collect() };
        Ok(RepGens { dim, labels, gens })
    }

    /// Unlabelled generators.
    pub fn from_matrices(gens: Vec<CMatrix>) -> Result<Self, CommutantError> {
        let dim = gens.first().map_or(0, |g| g.nrows());
        Self::new(dim, Vec::new(), gens)
    }

    /// `U_θ` on the dual grid of the window followed by the generator isometries.
    pub fn from_pair(p: &WeylPair) -> Self {
        let mut out = Self::u_samples(p);
        for axis in 0..p.dim() {
            out.labels.push(format!("V{}", axis + 1));
            out.gens.push(p.generator_dense(axis));
        }
        out
    }

    pub fn u_samples(p: &WeylPair) -> Self {
        let grid = pair::dual_grid(p.window());
        let labels = (0..grid.len()).map(|j| format!("U{j}")).collect();
        let gens = grid.iter().map(|t| pair::unitary_u(p, t)).collect();
        RepGens { dim: p.dim_h(), labels, gens }
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    /// Appends generators, labelling them with the given prefix.
    pub fn extended(&self, extra: &[CMatrix], prefix: &str) -> Self {
        let mut out = self.clone();
        for (i, m) in extra.iter().enumerate() {
            out.labels.push(format!("{prefix}{i}"));
            out.gens.push(m.clone());
        }
        out
    }

    fn guard(&self) -> Result<(), CommutantError> {
        if self.dim > DIMENSION_GUARD {
            return Err(CommutantError::DimensionGuard { dim: self.dim, guard: DIMENSION_GUARD });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraSummary {
    pub commutant_dim: usize,
    pub center_dim: usize,
    pub is_factor: bool,
    pub is_irreducible: bool,
    #[serde(skip)]
    pub commutant_basis: Vec<CMatrix>,
}

/// Orthonormal basis of `{T : T X_a = X_b T, T X_a* = X_b* T}`.
fn solve_intertwiners(a: &[CMatrix], b: &[CMatrix], na: usize, nb: usize, tol: f64) -> Result<Vec<CMatrix>, CommutantError> {
    if na == 0 || nb == 0 {
        return Ok(Vec::new());
    }
    // Seeded Hermitian probe shared by both sides.
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let alphas: Vec<C64> = (0..a.len())
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let probe = |gens: &[CMatrix], n: usize| {
        let mut h = CMatrix::zeros(n, n);
        for (g, al) in gens.iter().zip(&alphas) {
            h += g * *al + g.adjoint() * al.conj();
        }
        h
    };
    let (ha, hb) = (probe(a, na), probe(b, nb));
    let (la, qa) = linalg::hermitian_eigen(&ha);
    let (lb, qb) = linalg::hermitian_eigen(&hb);
    let scale = la.iter().chain(&lb).fold(1.0_f64, |m, v| m.max(v.abs()));
    let match_tol = 1e-7 * scale;

    // Unknown entries (i, j) of T' = Qb* T Qa with matching eigenvalues.
    let mut unknowns = Vec::new();
    for (i, &l) in lb.iter().enumerate() {
        let start = la.partition_point(|&v| v < l - match_tol);
        for (j, &v) in la.iter().enumerate().skip(start) {
            if v > l + match_tol {
                break;
            }
            unknowns.push((i, j));
        }
    }
    if unknowns.is_empty() {
        return Ok(Vec::new());
    }
    if unknowns.len() > MAX_UNKNOWNS {
        return Err(CommutantError::DimensionGuard { dim: unknowns.len(), guard: MAX_UNKNOWNS });
    }

    // Transformed generators with their adjoints.
    let closure = |gens: &[CMatrix], q: &CMatrix| -> Vec<CMatrix> {
        let qh = q.adjoint();
        gens.par_iter()
            .flat_map_iter(|g| {
                let t = &qh * g * q;
                let ta = t.adjoint();
                [t, ta]
            })
            .collect()
    };
    let xa = closure(a, &qa);
    let xb = closure(b, &qb);

    let mut sa = CMatrix::zeros(na, na);
    let mut sb = CMatrix::zeros(nb, nb);
    for (x, y) in xa.iter().zip(&xb) {
        sa += x * x.adjoint();
        sb += y.adjoint() * y;
    }
    let m = unknowns.len();
    let cols: Vec<Vec<C64>> = (0..m)
        .into_par_iter()
        .map(|v| {
            let (k, l) = unknowns[v];
            unknowns
                .iter()
                .map(|&(i, j)| {
                    let mut g = ZERO;
                    if i == k {
                        g += sa[(l, j)];
                    }
                    if j == l {
                        g += sb[(i, k)];
                    }
                    for (x, y) in xa.iter().zip(&xb) {
                        g -= x[(j, l)].conj() * y[(i, k)] + y[(k, i)].conj() * x[(l, j)];
                    }
                    g
                })
                .collect()
        })
        .collect();
    let gram = CMatrix::from_fn(m, m, |u, v| cols[v][u]);
    let (lambda, vecs) = linalg::hermitian_eigen(&gram);
    // Floor for the reference scale: when every generator is (numerically) a
    // scalar the Gram matrix is pure roundoff and `lmax` alone means nothing.
    let gscale: f64 = xa.iter().zip(&xb).map(|(x, y)| x.norm_squared() + y.norm_squared()).sum();
    let lmax = lambda.last().copied().unwrap_or(0.0).max(tol * gscale);
    let candidate_cut = (1e-6_f64).max(10.0 * tol * tol) * lmax;
    let candidates: Vec<usize> = (0..m).filter(|&c| lambda[c] <= candidate_cut).collect();
    if candidates.is_empty() {
        return Ok(Vec::new());
    }

    // Explicit residual Gram inside the candidate space.
    let to_matrix = |coef: &dyn Fn(usize) -> C64| {
        let mut t = CMatrix::zeros(nb, na);
        for (u, &(i, j)) in unknowns.iter().enumerate() {
            t[(i, j)] += coef(u);
        }
        t
    };
    let cand_mats: Vec<CMatrix> = candidates.iter().map(|&c| to_matrix(&|u| vecs[(u, c)])).collect();
    let residuals: Vec<Vec<CMatrix>> = cand_mats
        .par_iter()
        .map(|t| xa.iter().zip(&xb).map(|(x, y)| sparse_residual(t, &unknowns, x, y)).collect())
        .collect();
    let mc = candidates.len();
    let mut rgram = CMatrix::zeros(mc, mc);
    for p in 0..mc {
        for q in p..mc {
            let v: C64 = residuals[p].iter().zip(&residuals[q]).map(|(r, s)| linalg::frob_inner(r, s)).sum();
            rgram[(p, q)] = v;
            rgram[(q, p)] = v.conj();
        }
    }
    let (mu, w) = linalg::hermitian_eigen(&rgram);
    let kernel_cut = tol * tol * lmax;
    let qb_ = &qb;
    let qa_h = qa.adjoint();
    let basis = (0..mc)
        .filter(|&e| mu[e] <= kernel_cut)
        .map(|e| {
            let mut t = CMatrix::zeros(nb, na);
            for (p, tm) in cand_mats.iter().enumerate() {
                t += tm * w[(p, e)];
            }
            qb_ * t * &qa_h
        })
        .collect();
    Ok(basis)
}

/// `T X − Y T` for `T` supported on the listed entries.
fn sparse_residual(t: &CMatrix, support: &[(usize, usize)], x: &CMatrix, y: &CMatrix) -> CMatrix {
    let mut r = CMatrix::zeros(t.nrows(), t.ncols());
    for &(i, j) in support {
        let c = t[(i, j)];
        if c == ZERO {
            continue;
        }
        for col in 0..x.ncols() {
            r[(i, col)] += c * x[(j, col)];
        }
        for row in 0..y.nrows() {
            r[(row, j)] -= y[(row, i)] * c;
        }
    }
    r
}

/// Orthonormal (Frobenius) basis of the commutant of the `*`-closure of `r`.
pub fn commutant_basis(r: &RepGens, tol: f64) -> Result<Vec<CMatrix>, CommutantError> {
    r.guard()?;
    if r.is_empty() {
        return Ok(matrix_units(r.dim));
    }
    solve_intertwiners(&r.gens, &r.gens, r.dim, r.dim, tol)
}

/// Commutant of the commutant.
pub fn bicommutant_basis(r: &RepGens, tol: f64) -> Result<Vec<CMatrix>, CommutantError> {
    let comm = commutant_basis(r, tol)?;
    commutant_basis(&RepGens::from_matrices(comm)?.with_dim(r.dim), tol)
}

impl RepGens {
    fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }
}

/// Basis of the center `M' ∩ M''`, computed as the commutant of the generators
/// together with their commutant.
pub fn center_basis(r: &RepGens, commutant: &[CMatrix], tol: f64) -> Result<Vec<CMatrix>, CommutantError> {
    commutant_basis(&r.extended(commutant, "C"), tol)
}

pub fn summarize(r: &RepGens, tol: f64) -> Result<AlgebraSummary, CommutantError> {
    let comm = commutant_basis(r, tol)?;
    let center = center_basis(r, &comm, tol)?;
    Ok(AlgebraSummary {
        commutant_dim: comm.len(),
        center_dim: center.len(),
        is_factor: center.len() == 1,
        is_irreducible: comm.len() == 1,
        commutant_basis: comm,
    })
}

fn check_labels(ra: &RepGens, rb: &RepGens) -> Result<(), CommutantError> {
    if ra.labels != rb.labels {
        return Err(CommutantError::LabelMismatch(ra.labels.join(","), rb.labels.join(",")));
    }
    Ok(())
}

/// Basis of `{T : T X_a = X_b T}` over label-aligned generators (and adjoints).
pub fn intertwiners(ra: &RepGens, rb: &RepGens, tol: f64) -> Result<Vec<CMatrix>, CommutantError> {
    check_labels(ra, rb)?;
    ra.guard()?;
    rb.guard()?;
    if ra.is_empty() {
        let mut out = Vec::with_capacity(ra.dim * rb.dim);
        for i in 0..rb.dim {
            for j in 0..ra.dim {
                let mut e = CMatrix::zeros(rb.dim, ra.dim);
                e[(i, j)] = C64::new(1.0, 0.0);
                out.push(e);
            }
        }
        return Ok(out);
    }
    solve_intertwiners(&ra.gens, &rb.gens, ra.dim, rb.dim, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub equivalent: bool,
    pub intertwiner_dim: usize,
    pub residual: Option<f64>,
    #[serde(skip)]
    pub witness: Option<CMatrix>,
}

/// `max_X ‖W X_a − X_b W‖`.
pub fn witness_residual(w: &CMatrix, ra: &RepGens, rb: &RepGens) -> f64 {
    ra.gens
        .iter()
        .zip(&rb.gens)
        .map(|(x, y)| linalg::op_norm(&(w * x - y * w)))
        .fold(0.0, f64::max)
}

/// Decides unitary equivalence by drawing random elements of the intertwiner
/// space and taking the unitary polar factor of an invertible draw.
pub fn unitarily_equivalent(ra: &RepGens, rb: &RepGens, tol: f64) -> Result<Equivalence, CommutantError> {
    check_labels(ra, rb)?;
    if ra.dim != rb.dim {
        return Ok(Equivalence { equivalent: false, intertwiner_dim: 0, residual: None, witness: None });
    }
    let basis = intertwiners(ra, rb, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED ^ 0xe9);
    for _ in 0..EQUIVALENCE_DRAWS {
        if basis.is_empty() {
            break;
        }
        let mut t = CMatrix::zeros(rb.dim, ra.dim);
        for b in &basis {
            t += b * C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let smax = linalg::op_norm(&t);
        if smax == 0.0 || linalg::min_singular_value(&t) < INVERTIBILITY_TOL * smax {
            continue;
        }
        let w = linalg::polar_unitary(&t);
        let residual = witness_residual(&w, ra, rb);
        if residual <= WITNESS_TOL {
            return Ok(Equivalence { equivalent: true, intertwiner_dim: basis.len(), residual: Some(residual), witness: Some(w) });
        }
    }
    Ok(Equivalence { equivalent: false, intertwiner_dim: basis.len(), residual: None, witness: None })
}

/// Distance from `m` to the span of an orthonormal basis.
pub fn span_residual(basis: &[CMatrix], m: &CMatrix) -> f64 {
    let mut r = m.clone();
    for b in basis {
        r -= b * linalg::frob_inner(b, m);
    }
    linalg::frobenius(&r)
}

fn matrix_units(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut e = CMatrix::zeros(n, n);
            e[(i, j)] = C64::new(1.0, 0.0);
            out.push(e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeWindow, PSet, SetKind, validate_pset};
    use crate::pair::{build_pspace_pair, direct_sum};

    fn chain(lo: i64, hi: i64, side: i64) -> PSet {
        let w = LatticeWindow::cube(1, side).unwrap();
        validate_pset((lo..=hi).map(|x| vec![x]).collect(), &w, SetKind::PSpace).unwrap()
    }

    /// Dense Kronecker nullspace, the textbook formulation.
    fn kron_commutant_dim(gens: &[CMatrix]) -> usize {
        let n = gens[0].nrows();
        let id = CMatrix::identity(n, n);
        let mut rows = Vec::new();
        for g in gens.iter().flat_map(|g| [g.clone(), g.adjoint()]) {
            // vec(TX − XT) = (Xᵀ ⊗ I − I ⊗ X) vec(T)
            rows.push(g.transpose().kronecker(&id) - id.kronecker(&g));
        }
        let mut stacked = CMatrix::zeros(rows.len() * n * n, n * n);
        for (b, r) in rows.iter().enumerate() {
            stacked.view_mut((b * n * n, 0), (n * n, n * n)).copy_from(r);
        }
        let sv = stacked.singular_values();
        let smax = sv.max();
        sv.iter().filter(|&&s| s <= 1e-8 * smax).count() + (n * n).saturating_sub(sv.len())
    }

    #[test]
    fn identity_commutes_with_everything() {
        let r = RepGens::from_matrices(vec![CMatrix::identity(3, 3)]).unwrap();
        assert_eq!(commutant_basis(&r, KERNEL_TOL).unwrap().len(), 9);
    }

    #[test]
    fn full_matrix_basis_is_irreducible() {
        let r = RepGens::from_matrices(matrix_units(3)).unwrap();
        let s = summarize(&r, KERNEL_TOL).unwrap();
        assert_eq!(s.commutant_dim, 1);
        assert!(s.is_irreducible && s.is_factor);
    }

    #[test]
    fn canonical_commutant_dims() {
        for k in 1..=3 {
            let p = build_pspace_pair(&chain(0, 7, 8), k).unwrap();
            let r = RepGens::from_pair(&p);
            let s = summarize(&r, KERNEL_TOL).unwrap();
            assert_eq!(s.commutant_dim, k * k);
            assert!(s.is_factor);
            assert_eq!(s.is_irreducible, k == 1);
        }
    }

    #[test]
    fn matches_kronecker_oracle() {
        let a = build_pspace_pair(&chain(0, 3, 4), 1).unwrap();
        let b = build_pspace_pair(&chain(2, 3, 4), 1).unwrap();
        let c = build_pspace_pair(&chain(1, 3, 4), 2).unwrap();
        for p in [direct_sum(&[a.clone(), b.clone()]).unwrap(), direct_sum(&[a, c]).unwrap(), b] {
            let r = RepGens::from_pair(&p);
            let fast = commutant_basis(&r, KERNEL_TOL).unwrap().len();
            assert_eq!(fast, kron_commutant_dim(&r.gens), "{}", p.label());
        }
    }

    #[test]
    fn inequivalent_summands_give_two_dimensional_center() {
        let a = build_pspace_pair(&chain(0, 7, 8), 1).unwrap();
        let b = build_pspace_pair(&chain(1, 7, 8), 1).unwrap();
        let r = RepGens::from_pair(&direct_sum(&[a, b]).unwrap());
        let s = summarize(&r, KERNEL_TOL).unwrap();
        assert_eq!((s.commutant_dim, s.center_dim, s.is_factor), (2, 2, false));
    }

    #[test]
    fn commutant_is_an_algebra() {
        let a = build_pspace_pair(&chain(1, 5, 6), 2).unwrap();
        let b = build_pspace_pair(&chain(3, 5, 6), 1).unwrap();
        let r = RepGens::from_pair(&direct_sum(&[a, b]).unwrap());
        let basis = commutant_basis(&r, KERNEL_TOL).unwrap();
        assert_eq!(basis.len(), 5);
        for x in &basis {
            assert!(span_residual(&basis, &x.adjoint()) < 1e-8);
            for y in &basis {
                assert!(span_residual(&basis, &(x * y)) < 1e-8);
            }
        }
        let bic = bicommutant_basis(&r, KERNEL_TOL).unwrap();
        for g in r.gens.iter().chain(std::iter::once(&CMatrix::identity(r.dim, r.dim))) {
            assert!(span_residual(&bic, g) < 1e-8);
        }
    }

    #[test]
    fn equivalence_examples() {
        let w = LatticeWindow::cube(1, 8).unwrap();
        let a = PSet::full(&w);
        let pa = build_pspace_pair(&a, 1).unwrap();
        let pb = build_pspace_pair(&chain(1, 7, 8), 1).unwrap();
        let (ra, rb) = (RepGens::from_pair(&pa), RepGens::from_pair(&pb));
        let same = unitarily_equivalent(&ra, &ra, KERNEL_TOL).unwrap();
        assert!(same.equivalent);
        assert!(same.residual.unwrap() < 1e-8);
        assert!(!unitarily_equivalent(&ra, &rb, KERNEL_TOL).unwrap().equivalent);

        let two = build_pspace_pair(&a, 2).unwrap();
        let sum = direct_sum(&[pa.clone(), pa.clone()]).unwrap();
        let (r2, rs) = (RepGens::from_pair(&two), RepGens::from_pair(&sum));
        assert_eq!(intertwiners(&rs, &r2, KERNEL_TOL).unwrap().len(), 4);
        let eq = unitarily_equivalent(&rs, &r2, KERNEL_TOL).unwrap();
        assert!(eq.equivalent);
        assert!(witness_residual(eq.witness.as_ref().unwrap(), &rs, &r2) <= WITNESS_TOL);
    }

    #[test]
    fn translated_sets_intertwine_only_on_u() {
        let pa = build_pspace_pair(&chain(2, 7, 8), 1).unwrap();
        let pb = build_pspace_pair(&chain(3, 7, 8), 1).unwrap();
        let ua = RepGens::u_samples(&pa);
        let ub = RepGens::u_samples(&pb);
        assert!(intertwiners(&ub, &ua, KERNEL_TOL).unwrap().len() >= 1);
        assert!(intertwiners(&RepGens::from_pair(&pb), &RepGens::from_pair(&pa), KERNEL_TOL).unwrap().is_empty());
    }

    #[test]
    fn conjugated_pair_recovers_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = build_pspace_pair(&chain(0, 5, 6), 2).unwrap();
        let r = RepGens::from_pair(&p);
        let u = linalg::random_unitary(r.dim, &mut rng);
        let conj = RepGens::new(r.dim, r.labels.clone(), r.gens.iter().map(|g| &u * g * u.adjoint()).collect()).unwrap();
        let eq = unitarily_equivalent(&r, &conj, KERNEL_TOL).unwrap();
        assert!(eq.equivalent);
        assert!(eq.residual.unwrap() <= WITNESS_TOL);
    }

    #[test]
    fn label_mismatch_and_guard() {
        let a = RepGens::new(1, vec!["x".into()], vec![CMatrix::identity(1, 1)]).unwrap();
        let b = RepGens::new(1, vec!["y".into()], vec![CMatrix::identity(1, 1)]).unwrap();
        assert!(matches!(intertwiners(&a, &b, KERNEL_TOL), Err(CommutantError::LabelMismatch(..))));
        let big = RepGens::from_matrices(vec![CMatrix::identity(257, 257)]).unwrap();
        assert!(matches!(commutant_basis(&big, KERNEL_TOL), Err(CommutantError::DimensionGuard { .. })));
        let c = RepGens::new(2, vec!["x".into()], vec![CMatrix::identity(2, 2)]).unwrap();
        assert!(!unitarily_equivalent(&a, &c, KERNEL_TOL).unwrap().equivalent);
    }

    #[test]
    fn scalar_generators_have_full_commutant() {
        let z = C64::new(0.37, -1.21);
        let one = RepGens::from_matrices(vec![CMatrix::identity(1, 1) * z]).unwrap();
        assert_eq!(commutant_basis(&one, KERNEL_TOL).unwrap().len(), 1);
        let three = RepGens::from_matrices(vec![CMatrix::identity(3, 3) * z]).unwrap();
        assert_eq!(commutant_basis(&three, KERNEL_TOL).unwrap().len(), 9);
    }
}
