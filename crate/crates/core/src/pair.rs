//! Position-graded weak Weyl pairs on a finite window.
//!
//! A pair carries its position projections as primary data: the Hilbert space
//! is the direct sum of fibers `C^{k_y}` over window points `y` (lexicographic
//! block order), `U_θ` acts by the scalar `e^{iθ·y}` on the block of `y`, and
//! each generator isometry `V_{e_i}` maps the block of `y` into the block of
//! `y + e_i`. Characters of `T^d` are angle vectors `θ`.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{self, LatticeError, LatticeWindow, PSet, Point, SetKind};
use crate::linalg::{self, cis, CMatrix, SparseMat, C64, ONE};

/// Tolerance for structural matrix identities.
pub const STRUCTURAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("invalid pair: {0}")]
    Invalid(String),
    #[error("generator compositions differ by {0:e} (corrupted pair)")]
    NonCommutingGenerators(f64),
    #[error("shift {shift:?} exceeds safe margin {margin}")]
    MarginTooSmall { shift: Point, margin: i64 },
    #[error("pairs live on different windows")]
    WindowMismatch,
    #[error("semigroup element {0:?} has a negative component")]
    NotInSemigroup(Point),
}

/// Truncation control: the safe subspace spans the blocks of points `y` with
/// `y + [0, margin]^d` inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafeRegion {
    pub margin: i64,
}

impl SafeRegion {
    pub fn new(margin: i64, window: &LatticeWindow) -> Result<Self, PairError> {
        let min_side = (0..window.dim()).map(|i| window.side(i) as i64).min().unwrap_or(0);
        if margin < 0 || margin > min_side {
            return Err(PairError::Invalid(format!("margin {margin} outside [0, {min_side}]")));
        }
        Ok(SafeRegion { margin })
    }

    pub fn contains(&self, window: &LatticeWindow, y: &[i64]) -> bool {
        window.contains(y) && y.iter().zip(window.hi()).all(|(v, h)| v + self.margin <= *h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylPair {
    window: LatticeWindow,
    fibers: Vec<usize>,
    offsets: Vec<usize>,
    generators: Vec<SparseMat>,
    label: String,
}

impl WeylPair {
    /// Builds a pair and checks the block/grading invariants.
    pub fn new(
        window: LatticeWindow,
        fibers: Vec<usize>,
        generators: Vec<SparseMat>,
        label: impl Into<String>,
    ) -> Result<Self, PairError> {
        let pair = Self::new_unchecked(window, fibers, generators, label)?;
        let defect = pair.grading_defect();
        if defect > STRUCTURAL_TOL {
            return Err(PairError::Invalid(format!("generators are not position-graded (defect {defect:e})")));
        }
        Ok(pair)
    }

    /// Shape checks only; used for deliberately corrupted stress inputs.
    pub fn new_unchecked(
        window: LatticeWindow,
        fibers: Vec<usize>,
        generators: Vec<SparseMat>,
        label: impl Into<String>,
    ) -> Result<Self, PairError> {
        if fibers.len() != window.cardinality() {
            return Err(PairError::Invalid(format!(
                "{} fiber entries for a window of {} points",
                fibers.len(),
                window.cardinality()
            )));
        }
        if generators.len() != window.dim() {
            return Err(PairError::Invalid(format!(
                "{} generators for dimension {}",
                generators.len(),
                window.dim()
            )));
        }
        let mut offsets = Vec::with_capacity(fibers.len() + 1);
        offsets.push(0);
        for k in &fibers {
            offsets.push(offsets.last().unwrap() + k);
        }
        let n = *offsets.last().unwrap();
        if generators.iter().any(|g| g.nrows() != n || g.ncols() != n) {
            return Err(PairError::Invalid(format!("generators must be {n}×{n}")));
        }
        Ok(WeylPair { window, fibers, offsets, generators, label: label.into() })
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn dim_h(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Fiber dimensions indexed by the window's flat index.
    pub fn fibers(&self) -> &[usize] {
        &self.fibers
    }

    pub fn fiber(&self, y: &[i64]) -> usize {
        self.window.index_of(y).map_or(0, |i| self.fibers[i])
    }

    /// Index range of the block of the window point with flat index `idx`.
    pub fn block(&self, idx: usize) -> Range<usize> {
        self.offsets[idx]..self.offsets[idx + 1]
    }

    pub fn block_of(&self, y: &[i64]) -> Option<Range<usize>> {
        self.window.index_of(y).map(|i| self.block(i))
    }

    /// Window flat index of the block containing Hilbert-space index `i`.
    pub fn position_index(&self, i: usize) -> usize {
        self.offsets.partition_point(|&o| o <= i) - 1
    }

    pub fn position(&self, i: usize) -> Point {
        self.window.point_at(self.position_index(i))
    }

    /// Points with a nonzero fiber.
    pub fn support(&self) -> Vec<Point> {
        (0..self.fibers.len()).filter(|&i| self.fibers[i] > 0).map(|i| self.window.point_at(i)).collect()
    }

    pub fn generators(&self) -> &[SparseMat] {
        &self.generators
    }

    pub fn generator_dense(&self, axis: usize) -> CMatrix {
        self.generators[axis].to_dense()
    }

    /// Coordinate projection onto the block of `y`.
    pub fn position_projection(&self, y: &[i64]) -> CMatrix {
        let n = self.dim_h();
        let mut p = CMatrix::zeros(n, n);
        if let Some(r) = self.block_of(y) {
            for i in r {
                p[(i, i)] = ONE;
            }
        }
        p
    }

    /// Phases `e^{iθ·y}` for every Hilbert-space index.
    pub fn u_phases(&self, theta: &[f64]) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.dim_h());
        for (idx, &k) in self.fibers.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let y = self.window.point_at(idx);
            let phase = cis(dot(theta, &y));
            out.extend(std::iter::repeat(phase).take(k));
        }
        out
    }

    /// Largest entry of any generator that does not map block `y` into block
    /// `y + e_i`.
    pub fn grading_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (axis, g) in self.generators.iter().enumerate() {
            for (r, c, v) in g.triplets() {
                let from = self.position(c);
                let to = self.position(r);
                let mut expect = from.clone();
                expect[axis] += 1;
                if to != expect {
                    worst = worst.max(v.norm());
                }
            }
        }
        worst
    }

    /// Hilbert-space indices of the safe subspace.
    pub fn safe_indices(&self, safe: SafeRegion) -> Vec<usize> {
        (0..self.fibers.len())
            .filter(|&idx| safe.contains(&self.window, &self.window.point_at(idx)))
            .flat_map(|idx| self.block(idx))
            .collect()
    }
}

pub fn dot(theta: &[f64], y: &[i64]) -> f64 {
    theta.iter().zip(y).map(|(t, v)| t * *v as f64).sum()
}

/// Canonical pair `(U^{(A,k)}, V^{(A,k)})`: fibers `C^k` on `A`, generators the
/// fiberwise-identity block shifts inside `A`.
pub fn build_pspace_pair(a: &PSet, k: usize) -> Result<WeylPair, PairError> {
    if a.kind() != SetKind::PSpace {
        return Err(PairError::Invalid("canonical pairs need a P-space".into()));
    }
    if k == 0 {
        return Err(PairError::Invalid("multiplicity must be positive".into()));
    }
    let window = a.window().clone();
    let fibers: Vec<usize> = window.points().iter().map(|y| if a.contains(y) { k } else { 0 }).collect();
    let mut offsets = vec![0usize];
    for f in &fibers {
        offsets.push(offsets.last().unwrap() + f);
    }
    let n = *offsets.last().unwrap();
    let mut generators = Vec::with_capacity(window.dim());
    for axis in 0..window.dim() {
        let mut trips = Vec::new();
        for y in a.points() {
            let mut z = y.clone();
            z[axis] += 1;
            if a.contains(&z) {
                let src = offsets[window.index_of(y).unwrap()];
                let dst = offsets[window.index_of(&z).unwrap()];
                trips.extend((0..k).map(|j| (dst + j, src + j, ONE)));
            }
        }
        generators.push(SparseMat::from_triplets(n, n, trips));
    }
    let label = format!("canonical k={k} |A|={}", a.len());
    WeylPair::new(window, fibers, generators, label)
}

/// Dense `U_θ`.
pub fn unitary_u(pair: &WeylPair, theta: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&linalg::CVector::from_vec(pair.u_phases(theta)))
}

/// The finite dual grid `{2πj/N_i}` of the window (one axis at a time).
pub fn dual_grid(window: &LatticeWindow) -> Vec<Vec<f64>> {
    let sides: Vec<usize> = (0..window.dim()).map(|i| window.side(i)).collect();
    let total: usize = sides.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut theta = vec![0.0; sides.len()];
            for axis in (0..sides.len()).rev() {
                let j = idx % sides[axis];
                idx /= sides[axis];
                theta[axis] = std::f64::consts::TAU * j as f64 / sides[axis] as f64;
            }
            theta
        })
        .collect()
}

/// Exact finite Fourier inversion `P_y = |Θ|^{-1} Σ_θ e^{−iθ·y} U_θ` for every
/// window point, in flat-index order.
pub fn position_projections_from_samples(window: &LatticeWindow, samples: &[(Vec<f64>, CMatrix)]) -> Vec<CMatrix> {
    let n = samples.first().map_or(0, |(_, u)| u.nrows());
    let scale = C64::new(1.0 / samples.len().max(1) as f64, 0.0);
    window
        .points()
        .iter()
        .map(|y| {
            let mut p = CMatrix::zeros(n, n);
            for (theta, u) in samples {
                p += u * cis(-dot(theta, y));
            }
            p * scale
        })
        .collect()
}

fn check_semigroup(a: &[i64]) -> Result<(), PairError> {
    if a.iter().any(|&v| v < 0) {
        return Err(PairError::NotInSemigroup(a.to_vec()));
    }
    Ok(())
}

fn power(g: &SparseMat, e: i64) -> SparseMat {
    let mut acc = SparseMat::identity(g.nrows());
    for _ in 0..e {
        acc = g.mul(&acc);
    }
    acc
}

/// `V_a` as a sparse matrix. Generators are composed in ascending and in
/// descending axis order; a mismatch signals a corrupted pair.
pub fn isometry_v_sparse(pair: &WeylPair, a: &[i64]) -> Result<SparseMat, PairError> {
    check_semigroup(a)?;
    if a.len() != pair.dim() {
        return Err(PairError::Invalid(format!("shift {a:?} has wrong dimension")));
    }
    let n = pair.dim_h();
    let mut forward = SparseMat::identity(n);
    for axis in 0..pair.dim() {
        forward = power(&pair.generators[axis], a[axis]).mul(&forward);
    }
    if a.iter().filter(|&&v| v > 0).count() > 1 {
        let mut backward = SparseMat::identity(n);
        for axis in (0..pair.dim()).rev() {
            backward = power(&pair.generators[axis], a[axis]).mul(&backward);
        }
        let gap = forward.sub(&backward).op_norm();
        if gap > STRUCTURAL_TOL {
            return Err(PairError::NonCommutingGenerators(gap));
        }
    }
    Ok(forward)
}

pub fn isometry_v(pair: &WeylPair, a: &[i64]) -> Result<CMatrix, PairError> {
    isometry_v_sparse(pair, a).map(|v| v.to_dense())
}

/// `E_a = V_a V_a*`.
pub fn range_projection(pair: &WeylPair, a: &[i64]) -> Result<CMatrix, PairError> {
    let v = isometry_v_sparse(pair, a)?;
    Ok(v.mul(&v.adjoint()).to_dense())
}

/// `max ‖E_a E_b − E_b E_a‖` over the probe set.
pub fn check_commuting_ranges(pair: &WeylPair, probe: &[Point]) -> Result<f64, PairError> {
    let projections: Vec<SparseMat> = probe
        .iter()
        .map(|a| isometry_v_sparse(pair, a).map(|v| v.mul(&v.adjoint())))
        .collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..projections.len() {
        for j in i + 1..projections.len() {
            let c = projections[i].mul(&projections[j]).sub(&projections[j].mul(&projections[i]));
            worst = worst.max(c.op_norm());
        }
    }
    Ok(worst)
}

/// Precomputed data for sweeping the Weyl defect of a fixed shift `a` over
/// many characters. The nonzero entries of `V_a` on safe columns are split
/// into connected components of their sparsity pattern. A component with a
/// single entry `v` from block `y` to block `z` contributes
/// `|v|·|e^{iθ·(z−y−a)} − 1|`, so those are collapsed by displacement.
pub struct DefectSweep {
    shift: Point,
    singles: Vec<(Point, f64)>,
    entries: Vec<(usize, usize, C64)>,
    row_pos: Vec<usize>,
    col_pos: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl DefectSweep {
    pub fn new(pair: &WeylPair, a: &[i64], safe: SafeRegion) -> Result<Self, PairError> {
        check_margin(a, safe)?;
        let v = isometry_v_sparse(pair, a)?;
        Ok(Self::from_isometry(pair, a, &v, &safe_mask(pair, safe)))
    }

    fn from_isometry(pair: &WeylPair, a: &[i64], v: &SparseMat, is_safe: &[bool]) -> Self {
        let entries: Vec<_> = v.triplets().filter(|&(_, c, _)| is_safe[c]).collect();
        let pattern: Vec<_> = entries.iter().map(|&(r, c, _)| (r, c)).collect();
        let components = linalg::bipartite_components(pair.dim_h(), pair.dim_h(), &pattern);
        let row_pos: Vec<usize> = entries.iter().map(|&(r, _, _)| pair.position_index(r)).collect();
        let col_pos: Vec<usize> = entries.iter().map(|&(_, c, _)| pair.position_index(c)).collect();
        let mut singles: std::collections::BTreeMap<Point, f64> = std::collections::BTreeMap::new();
        let mut blocks = Vec::new();
        for comp in components {
            if let [i] = comp[..] {
                let from = pair.window.point_at(col_pos[i]);
                let to = pair.window.point_at(row_pos[i]);
                let delta: Point = to.iter().zip(&from).zip(a).map(|((t, f), s)| t - f - s).collect();
                let w = singles.entry(delta).or_insert(0.0);
                *w = w.max(entries[i].2.norm());
            } else {
                blocks.push(comp);
            }
        }
        DefectSweep { shift: a.to_vec(), singles: singles.into_iter().collect(), entries, row_pos, col_pos, blocks }
    }

    /// Defect for a character given by its per-window-point phases
    /// (`phases[idx] = e^{iθ·y_idx}`) and the angle vector itself.
    pub fn defect_with_phases(&self, theta: &[f64], phases: &[C64]) -> f64 {
        let single = self
            .singles
            .iter()
            .map(|(delta, w)| w * (cis(dot(theta, delta)) - ONE).norm())
            .fold(0.0, f64::max);
        let chi_a = cis(dot(theta, &self.shift));
        let value = |i: usize| {
            let (r, c, v) = self.entries[i];
            (r, c, v * (phases[self.row_pos[i]] - chi_a * phases[self.col_pos[i]]))
        };
        self.blocks
            .iter()
            .map(|comp| linalg::component_norm(comp, value))
            .fold(single, f64::max)
    }

    pub fn defect(&self, window: &LatticeWindow, theta: &[f64]) -> f64 {
        self.defect_with_phases(theta, &window_phases(window, theta))
    }
}

fn check_margin(a: &[i64], safe: SafeRegion) -> Result<(), PairError> {
    check_semigroup(a)?;
    if a.iter().any(|&v| v > safe.margin) {
        return Err(PairError::MarginTooSmall { shift: a.to_vec(), margin: safe.margin });
    }
    Ok(())
}

fn safe_mask(pair: &WeylPair, safe: SafeRegion) -> Vec<bool> {
    let mut is_safe = vec![false; pair.dim_h()];
    for i in pair.safe_indices(safe) {
        is_safe[i] = true;
    }
    is_safe
}

/// Sweeps for many shifts at once. Generators are checked to commute once and
/// `V_a` is built incrementally from `V_{a − e_i}`.
pub fn defect_sweeps(pair: &WeylPair, shifts: &[Point], safe: SafeRegion) -> Result<Vec<DefectSweep>, PairError> {
    for a in shifts {
        check_margin(a, safe)?;
    }
    let g = &pair.generators;
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let gap = g[i].mul(&g[j]).sub(&g[j].mul(&g[i])).op_norm();
            if gap > STRUCTURAL_TOL {
                return Err(PairError::NonCommutingGenerators(gap));
            }
        }
    }
    let mask = safe_mask(pair, safe);
    let mut cache: std::collections::HashMap<Point, SparseMat> = std::collections::HashMap::new();
    cache.insert(vec![0; pair.dim()], SparseMat::identity(pair.dim_h()));
    fn build(a: &[i64], g: &[SparseMat], cache: &mut std::collections::HashMap<Point, SparseMat>) -> SparseMat {
        if let Some(v) = cache.get(a) {
            return v.clone();
        }
        let axis = a.iter().rposition(|&x| x > 0).expect("nonzero shift");
        let mut prev = a.to_vec();
        prev[axis] -= 1;
        let v = g[axis].mul(&build(&prev, g, cache));
        cache.insert(a.to_vec(), v.clone());
        v
    }
    Ok(shifts
        .iter()
        .map(|a| {
            let v = build(a, g, &mut cache);
            DefectSweep::from_isometry(pair, a, &v, &mask)
        })
        .collect())
}

/// `max` of the Weyl defect over the given characters and shifts.
pub fn max_weyl_defect(pair: &WeylPair, thetas: &[Vec<f64>], shifts: &[Point], safe: SafeRegion) -> Result<f64, PairError> {
    let sweeps = defect_sweeps(pair, shifts, safe)?;
    let mut worst: f64 = 0.0;
    for theta in thetas {
        let phases = window_phases(pair.window(), theta);
        for s in &sweeps {
            worst = worst.max(s.defect_with_phases(theta, &phases));
        }
    }
    Ok(worst)
}

/// `e^{iθ·y}` for every window point in flat order.
pub fn window_phases(window: &LatticeWindow, theta: &[f64]) -> Vec<C64> {
    window.points().iter().map(|y| cis(dot(theta, y))).collect()
}

/// `‖(U_θ V_a − e^{iθ·a} V_a U_θ) P_safe‖`.
pub fn weyl_defect(pair: &WeylPair, theta: &[f64], a: &[i64], safe: SafeRegion) -> Result<f64, PairError> {
    Ok(DefectSweep::new(pair, a, safe)?.defect(pair.window(), theta))
}

/// `‖(V_a* V_a − I) P_safe‖`.
pub fn isometry_defect(pair: &WeylPair, a: &[i64], safe: SafeRegion) -> Result<f64, PairError> {
    if a.iter().any(|&v| v > safe.margin) {
        return Err(PairError::MarginTooSmall { shift: a.to_vec(), margin: safe.margin });
    }
    let v = isometry_v(pair, a)?;
    let gram = v.adjoint() * &v - CMatrix::identity(pair.dim_h(), pair.dim_h());
    let cols = pair.safe_indices(safe);
    Ok(linalg::op_norm(&gram.select_columns(cols.iter())))
}

/// Blockwise direct sum; fibers add pointwise.
pub fn direct_sum(pairs: &[WeylPair]) -> Result<WeylPair, PairError> {
    let first = pairs.first().ok_or_else(|| PairError::Invalid("empty direct sum".into()))?;
    if pairs.iter().any(|p| p.window != first.window) {
        return Err(PairError::WindowMismatch);
    }
    let npts = first.window.cardinality();
    let fibers: Vec<usize> = (0..npts).map(|i| pairs.iter().map(|p| p.fibers[i]).sum()).collect();
    let mut offsets = vec![0usize];
    for f in &fibers {
        offsets.push(offsets.last().unwrap() + f);
    }
    let n = *offsets.last().unwrap();
    // index maps from each summand into the sum
    let maps: Vec<Vec<usize>> = pairs
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let mut m = vec![0; p.dim_h()];
            for idx in 0..npts {
                let before: usize = pairs[..s].iter().map(|q| q.fibers[idx]).sum();
                for (j, i) in p.block(idx).enumerate() {
                    m[i] = offsets[idx] + before + j;
                }
            }
            m
        })
        .collect();
    let generators = (0..first.dim())
        .map(|axis| {
            let trips = pairs
                .iter()
                .zip(&maps)
                .flat_map(|(p, m)| p.generators[axis].triplets().map(move |(r, c, v)| (m[r], m[c], v)));
            SparseMat::from_triplets(n, n, trips.collect::<Vec<_>>())
        })
        .collect();
    let label = pairs.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join(" ⊕ ");
    WeylPair::new_unchecked(first.window.clone(), fibers, generators, label)
}

/// Conjugates every fiber by its own unitary: `V ↦ D V D*` with `D`
/// block-diagonal. The result is unitarily equivalent and still graded.
pub fn conjugate_fibers(pair: &WeylPair, unitaries: &[CMatrix]) -> Result<WeylPair, PairError> {
    if unitaries.len() != pair.fibers.len() {
        return Err(PairError::Invalid("one unitary per window point required".into()));
    }
    let n = pair.dim_h();
    let mut trips = Vec::new();
    for (idx, u) in unitaries.iter().enumerate() {
        let r = pair.block(idx);
        if u.nrows() != r.len() || u.ncols() != r.len() {
            return Err(PairError::Invalid(format!("unitary for block {idx} has wrong size")));
        }
        for i in 0..r.len() {
            for j in 0..r.len() {
                trips.push((r.start + i, r.start + j, u[(i, j)]));
            }
        }
    }
    let d = SparseMat::from_triplets(n, n, trips);
    let d_adj = d.adjoint();
    let generators = pair.generators.iter().map(|g| d.mul(g).mul(&d_adj)).collect();
    WeylPair::new(pair.window.clone(), pair.fibers.clone(), generators, pair.label.clone())
}

#[derive(Serialize, Deserialize)]
struct FiberEntry {
    point: Point,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct WeylPairJson {
    window: LatticeWindow,
    fibers: Vec<FiberEntry>,
    generators: Vec<Vec<Vec<[f64; 2]>>>,
    label: String,
}

impl Serialize for WeylPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let fibers = self
            .fibers
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(i, &k)| FiberEntry { point: self.window.point_at(i), dim: k })
            .collect();
        WeylPairJson {
            window: self.window.clone(),
            fibers,
            generators: self.generators.iter().map(|g| linalg::matrix_json::to_nested(&g.to_dense())).collect(),
            label: self.label.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeylPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = WeylPairJson::deserialize(d)?;
        let window = LatticeWindow::with_weight(raw.window.lo().to_vec(), raw.window.hi().to_vec(), raw.window.weight())
            .map_err(D::Error::custom)?;
        let mut fibers = vec![0; window.cardinality()];
        for f in raw.fibers {
            let idx = window.index_of(&f.point).ok_or_else(|| D::Error::custom(format!("fiber point {:?} outside window", f.point)))?;
            fibers[idx] = f.dim;
        }
        let generators = raw
            .generators
            .iter()
            .map(|m| linalg::matrix_json::from_nested(m).map(|d| SparseMat::from_dense(&d)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        WeylPair::new(window, fibers, generators, raw.label).map_err(D::Error::custom)
    }
}

/// Canonical pairs for every P-space of the window, with the given multiplicity.
pub fn canonical_pairs(window: &LatticeWindow, k: usize) -> Result<Vec<WeylPair>, PairError> {
    lattice::enumerate_pspaces(window)?.iter().map(|a| build_pspace_pair(a, k)).collect()
}

#[allow(dead_code)]
fn dense_defect_oracle(pair: &WeylPair, theta: &[f64], a: &[i64], safe: SafeRegion) -> f64 {
    let u = unitary_u(pair, theta);
    let v = isometry_v(pair, a).unwrap();
    let d = &u * &v - &v * &u * cis(dot(theta, a));
    let cols = pair.safe_indices(safe);
    linalg::op_norm(&d.select_columns(cols.iter()))
}
