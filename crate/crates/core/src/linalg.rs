//! Dense and sparse complex matrix helpers shared by every module.
//!
//! Dense work goes through `nalgebra::DMatrix<Complex64>`. Generator
//! isometries of lattice pairs are very sparse, so they are stored in a small
//! CSR type and only densified when a solver needs them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `e^{i phase}`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::new(phase.cos(), phase.sin())
}

/// Operator (spectral) norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius inner product `tr(a* b)`.
pub fn frob_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Groups sorted values into runs whose consecutive gaps are at most `tol`.
pub fn cluster_sorted(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Orthonormal basis (as columns) of the column space of `m`, found from the
/// eigenvectors of `m m*` whose eigenvalue exceeds `rel_tol * max`.
pub fn range_basis(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return CMatrix::zeros(n, 0);
    }
    let gram = m * m.adjoint();
    let (vals, vecs) = hermitian_eigen(&gram);
    let top = vals.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return CMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > rel_tol * top).collect();
    let mut basis = CMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &vecs.column(i));
    }
    basis
}

/// Orthogonal projection onto the column space of `m`.
pub fn range_projection(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let b = range_basis(m, rel_tol);
    &b * b.adjoint()
}

/// Defect of `p` from being an orthogonal projection: `max(‖p²−p‖, ‖p−p*‖)`.
pub fn projection_defect(p: &CMatrix) -> f64 {
    let idem = op_norm(&(p * p - p));
    let herm = op_norm(&(p - p.adjoint()));
    idem.max(herm)
}

/// Unitary factor of the polar decomposition `t = w |t|`.
pub fn polar_unitary(t: &CMatrix) -> CMatrix {
    let svd = t.clone().svd(true, true);
    let u = svd.u.expect("requested u");
    let v_t = svd.v_t.expect("requested v_t");
    u * v_t
}

pub fn min_singular_value(t: &CMatrix) -> f64 {
    if t.nrows() == 0 {
        return 0.0;
    }
    t.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Haar-distributed random unitary via QR of a complex Gaussian matrix with
/// the phase correction on the diagonal of R.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Largest sine of the principal angles between two subspaces given by
/// orthonormal bases of vectors (columns). Returns 1 when dimensions differ.
pub fn subspace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = a - b * (b.adjoint() * a);
    op_norm(&residual)
}

/// Flattens a matrix into a column vector (column-major).
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_iterator(m.len(), m.iter().cloned())
}

/// Compressed-sparse-row complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMat {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, ONE)))
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != ZERO {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMat { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let trips = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m[(i, j)]));
        Self::from_triplets(m.nrows(), m.ncols(), trips)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().cloned().zip(self.values[span].iter().cloned())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v.conj())),
        )
    }

    pub fn mul(&self, rhs: &SparseMat) -> SparseMat {
        assert_eq!(self.ncols, rhs.nrows, "sparse product shape mismatch");
        let mut trips = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in rhs.row(k) {
                    trips.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, rhs.ncols, trips)
    }

    pub fn sub(&self, rhs: &SparseMat) -> SparseMat {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let trips = self.triplets().chain(rhs.triplets().map(|(i, j, v)| (i, j, -v)));
        Self::from_triplets(self.nrows, self.ncols, trips)
    }

    /// Exact spectral norm, computed block-by-block over the connected
    /// components of the bipartite row/column sparsity graph.
    pub fn op_norm(&self) -> f64 {
        let entries: Vec<(usize, usize, C64)> = self.triplets().collect();
        sparse_entries_op_norm(self.nrows, self.ncols, &entries)
    }
}

/// Connected components of a bipartite sparsity pattern. Each component is
/// returned as the list of entry indices it owns.
pub fn bipartite_components(
    nrows: usize,
    ncols: usize,
    entries: &[(usize, usize)],
) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..nrows + ncols).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(r, c) in entries {
        let a = find(&mut parent, r);
        let b = find(&mut parent, nrows + c);
        if a != b {
            parent[a] = b;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (idx, &(r, _)) in entries.iter().enumerate() {
        let root = find(&mut parent, r);
        groups.entry(root).or_default().push(idx);
    }
    groups.into_values().collect()
}

/// Spectral norm of the matrix given by explicit entries, exploiting
/// block structure. Single-entry components reduce to an absolute value.
pub fn sparse_entries_op_norm(nrows: usize, ncols: usize, entries: &[(usize, usize, C64)]) -> f64 {
    let pattern: Vec<(usize, usize)> = entries.iter().map(|&(r, c, _)| (r, c)).collect();
    let comps = bipartite_components(nrows, ncols, &pattern);
    comps
        .iter()
        .map(|comp| component_norm(comp, |i| entries[i]))
        .fold(0.0, f64::max)
}

/// Norm of one connected component, with entries fetched by index.
pub fn component_norm<F>(comp: &[usize], entry: F) -> f64
where
    F: Fn(usize) -> (usize, usize, C64),
{
    if comp.len() == 1 {
        return entry(comp[0]).2.norm();
    }
    let mut rows: Vec<usize> = comp.iter().map(|&i| entry(i).0).collect();
    let mut cols: Vec<usize> = comp.iter().map(|&i| entry(i).1).collect();
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let mut block = CMatrix::zeros(rows.len(), cols.len());
    for &i in comp {
        let (r, c, v) = entry(i);
        let ri = rows.binary_search(&r).expect("row in component");
        let ci = cols.binary_search(&c).expect("col in component");
        block[(ri, ci)] += v;
    }
    op_norm(&block)
}

/// Serde adapter for the matrix interchange format: row-major nested arrays of
/// `[re, im]` pairs.
pub mod matrix_json {
    use super::*;

    pub fn to_nested(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_nested(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_nested(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_nested(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for lists of matrices in the interchange format.
pub mod matrix_list_json {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        let nested: Vec<_> = ms.iter().map(matrix_json::to_nested).collect();
        nested.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        let lists = Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
        lists
            .iter()
            .map(|rows| matrix_json::from_nested(rows).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_norm_matches_dense_on_block_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(3, &mut rng) * C64::new(0.7, 0.0);
        let mut dense = CMatrix::zeros(6, 6);
        dense.view_mut((0, 2), (3, 3)).copy_from(&u);
        dense[(5, 0)] = C64::new(0.0, 1.3);
        let sparse = SparseMat::from_dense(&dense);
        assert!((sparse.op_norm() - op_norm(&dense)).abs() < 1e-12);
        assert!((sparse.op_norm() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(5, &mut rng);
        let defect = op_norm(&(u.adjoint() * &u - CMatrix::identity(5, 5)));
        assert!(defect < 1e-12);
    }

    #[test]
    fn sparse_product_and_adjoint_agree_with_dense() {
        let a = SparseMat::from_triplets(3, 3, vec![(0, 1, ONE), (2, 0, C64::new(0.0, 2.0))]);
        let b = SparseMat::from_triplets(3, 3, vec![(1, 2, C64::new(3.0, 0.0)), (0, 0, ONE)]);
        let dense = a.to_dense() * b.to_dense();
        assert_eq!(a.mul(&b).to_dense(), dense);
        assert_eq!(a.adjoint().to_dense(), a.to_dense().adjoint());
    }

    #[test]
    fn clustering_groups_close_values() {
        let runs = cluster_sorted(&[0.0, 1e-12, 1.0, 2.0, 2.0 + 1e-13], 1e-9);
        assert_eq!(runs, vec![0..2, 2..3, 3..5]);
    }
}
