//! Depth-budget minimal unitary dilation and the covariant projection family.
//!
//! The dilation space is modelled as `K_r = W_{r·1}* H`. It is spanned by the
//! symbols `(c, j)`, `c ∈ [0, r]^d`, standing for `W_c* e_j`, with inner
//! product `⟨W_c* e_j, W_{c'}* e_l⟩ = ⟨V_{s−c} e_j, V_{s−c'} e_l⟩` for
//! `s = c ∨ c'`. Symbols live at position `pos(j) − c`, so `K_r` splits into
//! fibers over the window extended downwards by `r`; each fiber gets an
//! orthonormal basis by Gram–Schmidt in that metric (symbols with `c = 0`
//! first, so the embedding of `H` is the identity on coordinates).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{self, LatticeError, LatticeWindow, PSet, Point, SetKind, TestFunction};
use crate::linalg::{self, cis, CMatrix, C64, ONE, ZERO};
use crate::pair::{self, PairError, SafeRegion, WeylPair};

pub const DILATION_TOL: f64 = 1e-10;
pub const WELL_DEFINED_TOL: f64 = 1e-8;
const RANK_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DilationError {
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("range projections do not commute (defect {0:e})")]
    NonCommutingRanges(f64),
    #[error("negative depth {0}")]
    NegativeDepth(i64),
    #[error("point {0:?} lies outside the dilation box")]
    BudgetExceeded(Point),
    #[error("joint eigenspace pattern is not a Y-set: {0}")]
    PatternNotYSet(String),
    #[error("extension routes disagree by {0:e}")]
    WellDefinednessViolation(f64),
    #[error("character sample has {got} angles, expected {expected}")]
    BadSample { got: usize, expected: usize },
}

/// Minimal unitary dilation truncated at depth `r`.
#[derive(Debug, Clone)]
pub struct DilationBundle {
    base: WeylPair,
    depth: i64,
    kwindow: LatticeWindow,
    kfibers: Vec<usize>,
    koffsets: Vec<usize>,
    /// `shifts[c]`: dim K × dim H, column `j` is `W_c* e_j`.
    shifts: Vec<CMatrix>,
    /// Symbol coefficients of the orthonormal basis: (#symbols) × dim K.
    synth: CMatrix,
    w: Vec<CMatrix>,
}

fn box_index(c: &[i64], r: i64) -> usize {
    c.iter().fold(0usize, |acc, &v| acc * (r as usize + 1) + v as usize)
}

/// Cache of `V_a` for nonnegative shifts.
struct VCache<'a> {
    pair: &'a WeylPair,
    map: HashMap<Point, CMatrix>,
}

impl<'a> VCache<'a> {
    fn new(pair: &'a WeylPair) -> Self {
        VCache { pair, map: HashMap::new() }
    }

    fn get(&mut self, a: &[i64]) -> Result<&CMatrix, PairError> {
        if !self.map.contains_key(a) {
            let v = pair::isometry_v(self.pair, a)?;
            self.map.insert(a.to_vec(), v);
        }
        Ok(&self.map[a])
    }
}

fn join(a: &[i64], b: &[i64]) -> Point {
    a.iter().zip(b).map(|(x, y)| *x.max(y)).collect()
}

/// Builds the depth-`r` dilation of a pair with commuting range projections.
pub fn minimal_dilation(base: &WeylPair, depth: i64) -> Result<DilationBundle, DilationError> {
    if depth < 0 {
        return Err(DilationError::NegativeDepth(depth));
    }
    let d = base.dim();
    let probe = lattice::box_points(d, depth.max(1));
    let gap = pair::check_commuting_ranges(base, &probe)?;
    if gap > DILATION_TOL {
        return Err(DilationError::NonCommutingRanges(gap));
    }
    let n = base.dim_h();
    let cbox = lattice::box_points(d, depth);
    let kwindow = base.window().extend_below(depth);
    let mut vcache = VCache::new(base);

    // Symbols grouped by position.
    let mut by_pos: Vec<Vec<(usize, usize)>> = vec![Vec::new(); kwindow.cardinality()];
    for (ci, c) in cbox.iter().enumerate() {
        for j in 0..n {
            let p = lattice::sub(&base.position(j), c);
            by_pos[kwindow.index_of(&p).expect("symbol position inside extended window")].push((ci, j));
        }
    }
    let nsym = cbox.len() * n;
    let sym = |ci: usize, j: usize| ci * n + j;

    let mut kfibers = vec![0usize; kwindow.cardinality()];
    let mut blocks: Vec<(Vec<usize>, CMatrix, CMatrix)> = Vec::with_capacity(by_pos.len());
    for (pidx, symbols) in by_pos.iter().enumerate() {
        let m = symbols.len();
        let mut gram = CMatrix::zeros(m, m);
        for (u, &(ci, j)) in symbols.iter().enumerate() {
            for (v, &(cj, l)) in symbols.iter().enumerate().skip(u) {
                let s = join(&cbox[ci], &cbox[cj]);
                let a = lattice::sub(&s, &cbox[ci]);
                let b = lattice::sub(&s, &cbox[cj]);
                let va = vcache.get(&a)?.column(j).clone_owned();
                let vb = vcache.get(&b)?.column(l).clone_owned();
                let g = va.dotc(&vb);
                gram[(u, v)] = g;
                gram[(v, u)] = g.conj();
            }
        }
        let (coeffs, coords) = gram_schmidt(&gram);
        kfibers[pidx] = coeffs.ncols();
        blocks.push((symbols.iter().map(|&(ci, j)| sym(ci, j)).collect(), coeffs, coords));
    }
    let mut koffsets = vec![0usize];
    for k in &kfibers {
        koffsets.push(koffsets.last().unwrap() + k);
    }
    let dim_k = *koffsets.last().unwrap();
    let mut synth = CMatrix::zeros(nsym, dim_k);
    let mut analysis = CMatrix::zeros(dim_k, nsym);
    for (pidx, (syms, coeffs, coords)) in blocks.iter().enumerate() {
        let off = koffsets[pidx];
        for (u, &s) in syms.iter().enumerate() {
            for k in 0..coeffs.ncols() {
                synth[(s, off + k)] = coeffs[(u, k)];
                analysis[(off + k, s)] = coords[(k, u)];
            }
        }
    }
    let shifts: Vec<CMatrix> = (0..cbox.len()).map(|ci| analysis.columns(ci * n, n).clone_owned()).collect();

    // W_{e_i}: (c, j) ↦ (c − e_i, j) when c_i > 0, else (c, V_{e_i} e_j).
    let mut w = Vec::with_capacity(d);
    for axis in 0..d {
        let vi = base.generator_dense(axis);
        let mut targets = CMatrix::zeros(dim_k, nsym);
        for (ci, c) in cbox.iter().enumerate() {
            let block = if c[axis] > 0 {
                let mut lower = c.clone();
                lower[axis] -= 1;
                shifts[box_index(&lower, depth)].clone()
            } else {
                &shifts[ci] * &vi
            };
            targets.columns_mut(ci * n, n).copy_from(&block);
        }
        w.push(targets * &synth);
    }
    Ok(DilationBundle { base: base.clone(), depth, kwindow, kfibers, koffsets, shifts, synth, w })
}

/// Gram–Schmidt in the metric `gram`, keeping symbols whose residual norm is
/// above `RANK_TOL` relative to the largest diagonal entry. Returns the
/// coefficient matrix `B` (symbols × basis) and coordinates `J = B* G`.
fn gram_schmidt(gram: &CMatrix) -> (CMatrix, CMatrix) {
    let m = gram.nrows();
    let scale = (0..m).map(|i| gram[(i, i)].re).fold(0.0, f64::max).sqrt();
    let mut basis: Vec<linalg::CVector> = Vec::new();
    for s in 0..m {
        let mut v = linalg::CVector::zeros(m);
        v[s] = ONE;
        for _ in 0..2 {
            for b in &basis {
                let proj = (b.adjoint() * gram * &v)[(0, 0)];
                v -= b * proj;
            }
        }
        let norm = (v.adjoint() * gram * &v)[(0, 0)].re.max(0.0).sqrt();
        if norm > RANK_TOL * scale.max(f64::MIN_POSITIVE) {
            basis.push(v / C64::new(norm, 0.0));
        }
    }
    let mut coeffs = CMatrix::zeros(m, basis.len());
    for (k, b) in basis.iter().enumerate() {
        coeffs.set_column(k, b);
    }
    let coords = coeffs.adjoint() * gram;
    (coeffs, coords)
}

impl DilationBundle {
    pub fn base(&self) -> &WeylPair {
        &self.base
    }

    pub fn depth(&self) -> i64 {
        self.depth
    }

    /// Largest `|x|_∞` for which `W_x` is declared unitary on budget-safe vectors.
    pub fn budget(&self) -> i64 {
        self.depth
    }

    /// The base window extended downwards by the depth: the positions of `K_r`.
    pub fn kwindow(&self) -> &LatticeWindow {
        &self.kwindow
    }

    pub fn kfibers(&self) -> &[usize] {
        &self.kfibers
    }

    pub fn dim_k(&self) -> usize {
        *self.koffsets.last().unwrap()
    }

    /// Isometry `H → K_r`.
    pub fn embed(&self) -> &CMatrix {
        &self.shifts[0]
    }

    /// `W_c*` restricted to `H`, for `c ∈ [0, r]^d`.
    pub fn co_shift(&self, c: &[i64]) -> Result<&CMatrix, DilationError> {
        if c.iter().any(|&v| v < 0 || v > self.depth) {
            return Err(DilationError::BudgetExceeded(c.to_vec()));
        }
        Ok(&self.shifts[box_index(c, self.depth)])
    }

    pub fn w_generator(&self, axis: usize) -> &CMatrix {
        &self.w[axis]
    }

    /// `W_x` as a product of generator powers (negative powers via adjoints).
    pub fn w(&self, x: &[i64]) -> Result<CMatrix, DilationError> {
        if x.len() != self.kwindow.dim() {
            return Err(LatticeError::DimensionMismatch { point: x.to_vec(), got: x.len(), expected: self.kwindow.dim() }.into());
        }
        let n = self.dim_k();
        let mut acc = CMatrix::identity(n, n);
        for (axis, &e) in x.iter().enumerate() {
            let g = if e >= 0 { self.w[axis].clone() } else { self.w[axis].adjoint() };
            for _ in 0..e.abs() {
                acc = &g * acc;
            }
        }
        Ok(acc)
    }

    pub fn k_block(&self, idx: usize) -> std::ops::Range<usize> {
        self.koffsets[idx]..self.koffsets[idx + 1]
    }

    /// K-positions `p` whose neighbourhood `p + [−s, s]^d`, `s = max(r, 1)`,
    /// stays inside the extended window with constant fiber dimension.
    pub fn safe_positions(&self) -> Vec<usize> {
        let d = self.kwindow.dim();
        let r = self.depth.max(1);
        let offsets: Vec<Point> = lattice::box_points(d, 2 * r).into_iter().map(|c| c.iter().map(|v| v - r).collect()).collect();
        (0..self.kwindow.cardinality())
            .filter(|&idx| {
                let k = self.kfibers[idx];
                let p = self.kwindow.point_at(idx);
                k > 0
                    && offsets.iter().all(|o| {
                        self.kwindow.index_of(&lattice::add(&p, o)).is_some_and(|q| self.kfibers[q] == k)
                    })
            })
            .collect()
    }

    /// Coordinate projection onto the safe K-positions.
    pub fn safe_projection(&self) -> CMatrix {
        let n = self.dim_k();
        let mut p = CMatrix::zeros(n, n);
        for idx in self.safe_positions() {
            for i in self.k_block(idx) {
                p[(i, i)] = ONE;
            }
        }
        p
    }
}

#[derive(Serialize, Deserialize)]
struct BundleJson {
    #[serde(flatten)]
    base: WeylPair,
    depth: i64,
    budget: i64,
}

impl Serialize for DilationBundle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BundleJson { base: self.base.clone(), depth: self.depth, budget: self.budget() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DilationBundle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BundleJson::deserialize(d)?;
        minimal_dilation(&raw.base, raw.depth).map_err(serde::de::Error::custom)
    }
}

/// `E_x`, the projection onto `W_x H`, realized as the span of
/// `W_c* V_{(x+c)∨0} H` over `c ∈ [0, r]^d`.
pub fn project_e(bundle: &DilationBundle, x: &[i64]) -> Result<CMatrix, DilationError> {
    if !bundle.kwindow.contains(x) {
        return Err(DilationError::BudgetExceeded(x.to_vec()));
    }
    let d = bundle.kwindow.dim();
    let n = bundle.base.dim_h();
    let cbox = lattice::box_points(d, bundle.depth);
    let mut cols = CMatrix::zeros(bundle.dim_k(), cbox.len() * n);
    let mut vcache = VCache::new(&bundle.base);
    for (ci, c) in cbox.iter().enumerate() {
        let a: Point = lattice::add(x, c).iter().map(|&v| v.max(0)).collect();
        let v = vcache.get(&a)?;
        cols.columns_mut(ci * n, n).copy_from(&(&bundle.shifts[ci] * v));
    }
    Ok(linalg::range_projection(&cols, 1e-12))
}

/// A dilation together with its projection family on the dilation box.
#[derive(Debug, Clone)]
pub struct CovariantRep {
    bundle: DilationBundle,
    efamily: Vec<CMatrix>,
}

impl CovariantRep {
    pub fn new(bundle: DilationBundle) -> Result<Self, DilationError> {
        let efamily = bundle
            .kwindow
            .points()
            .iter()
            .map(|x| project_e(&bundle, x))
            .collect::<Result<_, _>>()?;
        Ok(CovariantRep { bundle, efamily })
    }

    pub fn bundle(&self) -> &DilationBundle {
        &self.bundle
    }

    /// `E_x = π(1_{X_u + x})`.
    pub fn pi_indicator(&self, x: &[i64]) -> Result<&CMatrix, DilationError> {
        self.bundle
            .kwindow
            .index_of(x)
            .map(|i| &self.efamily[i])
            .ok_or_else(|| DilationError::BudgetExceeded(x.to_vec()))
    }

    pub fn efamily(&self) -> &[CMatrix] {
        &self.efamily
    }
}

/// `π(f̃) = weight · Σ_x f(x) E_x`.
pub fn pi_eval(rep: &CovariantRep, f: &TestFunction) -> Result<CMatrix, DilationError> {
    let n = rep.bundle.dim_k();
    let mut out = CMatrix::zeros(n, n);
    for (x, v) in f.support() {
        out += rep.pi_indicator(x)? * *v;
    }
    Ok(out * C64::new(f.window().weight(), 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralPattern {
    pub pattern: PSet,
    pub dim: usize,
}

/// Simultaneous diagonalization of the projection family: subspaces are split
/// by each `E_x` in lexicographic order of `x`, rounding eigenvalues at 0.5.
pub fn joint_spectrum(rep: &CovariantRep) -> Result<Vec<SpectralPattern>, DilationError> {
    let n = rep.bundle.dim_k();
    let mut leaves: Vec<(Vec<bool>, CMatrix)> = vec![(Vec::new(), CMatrix::identity(n, n))];
    for e in &rep.efamily {
        let mut next = Vec::with_capacity(leaves.len() * 2);
        for (bits, q) in leaves {
            let (vals, vecs) = linalg::hermitian_eigen(&(q.adjoint() * e * &q));
            let basis = &q * vecs;
            let split = vals.partition_point(|&v| v < 0.5);
            for (on, range) in [(false, 0..split), (true, split..vals.len())] {
                if range.is_empty() {
                    continue;
                }
                let mut b = bits.clone();
                b.push(on);
                next.push((b, basis.columns(range.start, range.len()).clone_owned()));
            }
        }
        leaves = next;
    }
    let points = rep.bundle.kwindow.points();
    leaves
        .into_iter()
        .map(|(bits, q)| {
            let set: Vec<Point> = bits.iter().zip(&points).filter(|(b, _)| **b).map(|(_, p)| p.clone()).collect();
            let pattern = lattice::validate_pset(set, &rep.bundle.kwindow, SetKind::YSet)
                .map_err(|e| DilationError::PatternNotYSet(e.to_string()))?;
            Ok(SpectralPattern { pattern, dim: q.ncols() })
        })
        .collect()
}

/// Extension `Ũ_χ` of one character sample to `K_r`.
#[derive(Debug, Clone)]
pub struct ExtendedCharacter {
    pub theta: Vec<f64>,
    pub u: CMatrix,
}

/// `Ũ_χ (W_c* ξ) = conj χ(c) W_c* U_χ ξ`, defined on symbols and checked for
/// consistency across all symbols representing the same vector.
pub fn extend_u(bundle: &DilationBundle, samples: &[(Vec<f64>, CMatrix)]) -> Result<Vec<ExtendedCharacter>, DilationError> {
    let d = bundle.kwindow.dim();
    let n = bundle.base.dim_h();
    let cbox = lattice::box_points(d, bundle.depth);
    let analysis: Vec<&CMatrix> = bundle.shifts.iter().collect();
    samples
        .iter()
        .map(|(theta, u)| {
            if theta.len() != d {
                return Err(DilationError::BadSample { got: theta.len(), expected: d });
            }
            let mut targets = CMatrix::zeros(bundle.dim_k(), cbox.len() * n);
            let mut symbols = CMatrix::zeros(bundle.dim_k(), cbox.len() * n);
            for (ci, c) in cbox.iter().enumerate() {
                let phase = cis(-pair::dot(theta, c));
                targets.columns_mut(ci * n, n).copy_from(&((analysis[ci] * u) * phase));
                symbols.columns_mut(ci * n, n).copy_from(analysis[ci]);
            }
            let ut = &targets * &bundle.synth;
            let gap = column_max_norm(&(&ut * &symbols - &targets));
            if gap > WELL_DEFINED_TOL {
                return Err(DilationError::WellDefinednessViolation(gap));
            }
            Ok(ExtendedCharacter { theta: theta.clone(), u: ut })
        })
        .collect()
}

fn column_max_norm(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `Φ`: compress the dilation to the range of `E_0`.
pub fn compress_phi(rep: &CovariantRep) -> Result<WeylPair, DilationError> {
    let b = &rep.bundle;
    let e0 = rep.pi_indicator(&vec![0; b.kwindow.dim()])?;
    let window = b.base.window().clone();
    let mut bases = Vec::with_capacity(window.cardinality());
    for y in window.points() {
        let idx = b.kwindow.index_of(&y).expect("base window inside dilation box");
        let r = b.k_block(idx);
        let mut sel = CMatrix::zeros(b.dim_k(), r.len());
        for (c, i) in r.enumerate() {
            sel[(i, c)] = ONE;
        }
        let local = &sel * (sel.adjoint() * e0 * &sel);
        bases.push(linalg::range_basis(&local, 1e-10));
    }
    let fibers: Vec<usize> = bases.iter().map(|q| q.ncols()).collect();
    let mut offsets = vec![0usize];
    for f in &fibers {
        offsets.push(offsets.last().unwrap() + f);
    }
    let n = *offsets.last().unwrap();
    let mut full = CMatrix::zeros(b.dim_k(), n);
    for (idx, q) in bases.iter().enumerate() {
        full.columns_mut(offsets[idx], q.ncols()).copy_from(q);
    }
    let generators = (0..window.dim())
        .map(|axis| {
            let g = full.adjoint() * &b.w[axis] * &full;
            let trips: Vec<_> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter_map(|(i, j)| {
                    let v = g[(i, j)];
                    (v.norm() > 1e-13).then_some((i, j, v))
                })
                .collect();
            linalg::SparseMat::from_triplets(n, n, trips)
        })
        .collect();
    Ok(WeylPair::new(window, fibers, generators, format!("compressed {}", b.base.label()))?)
}

/// Defects of the dilation axioms and of the projection-family observations.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DilationReport {
    pub embed_isometry: f64,
    pub unitarity: f64,
    pub group_commutation: f64,
    pub extension: f64,
    pub exhaustion: f64,
    pub e_covariance: f64,
    pub e_monotone: f64,
    pub e_commuting: f64,
    pub e_projection: f64,
    pub safe_positions: usize,
}

impl DilationReport {
    pub fn max_defect(&self) -> f64 {
        [
            self.embed_isometry,
            self.unitarity,
            self.group_commutation,
            self.extension,
            self.exhaustion,
            self.e_covariance,
            self.e_monotone,
            self.e_commuting,
            self.e_projection,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn shifts_within(d: usize, r: i64) -> Vec<Point> {
    lattice::box_points(d, 2 * r).into_iter().map(|c| c.iter().map(|v| v - r).collect()).collect()
}

pub fn dilation_report(rep: &CovariantRep) -> Result<DilationReport, DilationError> {
    let b = &rep.bundle;
    let d = b.kwindow.dim();
    let r = b.depth;
    let nk = b.dim_k();
    let ps = b.safe_projection();
    let id_k = CMatrix::identity(nk, nk);
    let embed = b.embed();
    let nh = b.base.dim_h();
    let embed_isometry = linalg::op_norm(&(embed.adjoint() * embed - CMatrix::identity(nh, nh)));

    let mut unitarity: f64 = 0.0;
    let mut group_commutation: f64 = 0.0;
    for i in 0..d {
        let w = &b.w[i];
        unitarity = unitarity.max(linalg::op_norm(&((w.adjoint() * w - &id_k) * &ps)));
        unitarity = unitarity.max(linalg::op_norm(&((w * w.adjoint() - &id_k) * &ps)));
        for j in i + 1..d {
            group_commutation = group_commutation.max(linalg::op_norm(&(linalg::commutator(w, &b.w[j]) * &ps)));
        }
    }

    let margin = (0..d).map(|i| b.base.window().side(i) as i64).min().unwrap_or(0).min(r);
    let hsafe = b.base.safe_indices(SafeRegion::new(margin, b.base.window())?);
    let mut extension: f64 = 0.0;
    let mut spans = CMatrix::zeros(nk, 0);
    for a in lattice::box_points(d, margin) {
        let wa = b.w(&a)?;
        let va = pair::isometry_v(&b.base, &a)?;
        let diff = &wa * embed - embed * va;
        extension = extension.max(linalg::op_norm(&diff.select_columns(hsafe.iter())));
    }
    for a in lattice::box_points(d, r) {
        let wa_star = b.w(&a)?.adjoint();
        let block = &wa_star * embed;
        let c = spans.ncols();
        spans = spans.insert_columns(c, block.ncols(), ZERO);
        spans.columns_mut(c, block.ncols()).copy_from(&block);
    }
    let span_proj = linalg::range_projection(&spans, 1e-12);
    let exhaustion = linalg::op_norm(&((&id_k - span_proj) * &ps));

    let points = b.kwindow.points();
    let mut e_covariance: f64 = 0.0;
    for x in shifts_within(d, r) {
        let wx = b.w(&x)?;
        for (yi, y) in points.iter().enumerate() {
            let Some(target) = b.kwindow.index_of(&lattice::add(&x, y)) else { continue };
            let lhs = &wx * &rep.efamily[yi] * wx.adjoint();
            let diff = &ps * (lhs - &rep.efamily[target]) * &ps;
            e_covariance = e_covariance.max(linalg::op_norm(&diff));
        }
    }
    let mut e_monotone: f64 = 0.0;
    let mut e_commuting: f64 = 0.0;
    let mut e_projection: f64 = 0.0;
    for (xi, x) in points.iter().enumerate() {
        e_projection = e_projection.max(linalg::projection_defect(&rep.efamily[xi]));
        for axis in 0..d {
            let mut y = x.clone();
            y[axis] += 1;
            if let Some(yi) = b.kwindow.index_of(&y) {
                let (vals, _) = linalg::hermitian_eigen(&(&rep.efamily[xi] - &rep.efamily[yi]));
                e_monotone = e_monotone.max(-vals.first().copied().unwrap_or(0.0));
            }
        }
        for yi in xi + 1..points.len() {
            e_commuting = e_commuting.max(linalg::op_norm(&linalg::commutator(&rep.efamily[xi], &rep.efamily[yi])));
        }
    }
    Ok(DilationReport {
        embed_isometry,
        unitarity,
        group_commutation,
        extension,
        exhaustion,
        e_covariance,
        e_monotone: e_monotone.max(0.0),
        e_commuting,
        e_projection,
        safe_positions: b.safe_positions().len(),
    })
}

/// Defects of the extended characters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExtensionReport {
    /// `‖Ũ_χ ι − ι U_χ‖`.
    pub c1: f64,
    /// `‖(Ũ_χ W_x − χ(x) W_x Ũ_χ) P_safe‖` over `|x|_∞ ≤ r`.
    pub c2: f64,
    pub group_law: f64,
    pub e_commutation: f64,
    pub unitarity: f64,
}

fn wrap_angle(t: f64) -> f64 {
    t.rem_euclid(std::f64::consts::TAU)
}

fn same_angles(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        let diff = wrap_angle(x - y);
        diff < 1e-12 || std::f64::consts::TAU - diff < 1e-12
    })
}

pub fn extension_report(rep: &CovariantRep, samples: &[(Vec<f64>, CMatrix)], ext: &[ExtendedCharacter]) -> Result<ExtensionReport, DilationError> {
    let b = &rep.bundle;
    let d = b.kwindow.dim();
    let ps = b.safe_projection();
    let nk = b.dim_k();
    let embed = b.embed();
    let ws: Vec<(Point, CMatrix)> = shifts_within(d, b.depth).into_iter().map(|x| b.w(&x).map(|w| (x, w))).collect::<Result<_, _>>()?;
    let mut report = ExtensionReport { c1: 0.0, c2: 0.0, group_law: 0.0, e_commutation: 0.0, unitarity: 0.0 };
    for ((theta, u), e) in samples.iter().zip(ext) {
        report.c1 = report.c1.max(linalg::op_norm(&(&e.u * embed - embed * u)));
        report.unitarity = report.unitarity.max(linalg::op_norm(&(e.u.adjoint() * &e.u - CMatrix::identity(nk, nk))));
        for (x, wx) in &ws {
            let chi = cis(pair::dot(theta, x));
            let diff = (&e.u * wx - wx * &e.u * chi) * &ps;
            report.c2 = report.c2.max(linalg::op_norm(&diff));
        }
        for ex in &rep.efamily {
            report.e_commutation = report.e_commutation.max(linalg::op_norm(&linalg::commutator(&e.u, ex)));
        }
        for e2 in ext {
            let sum: Vec<f64> = theta.iter().zip(&e2.theta).map(|(a, c)| a + c).collect();
            if let Some(e3) = ext.iter().find(|e3| same_angles(&e3.theta, &sum)) {
                let diff = (&e.u * &e2.u - &e3.u) * &ps;
                report.group_law = report.group_law.max(linalg::op_norm(&diff));
            }
        }
    }
    Ok(report)
}

/// Character samples of a pair on its dual grid.
pub fn dual_grid_samples(p: &WeylPair) -> Vec<(Vec<f64>, CMatrix)> {
    pair::dual_grid(p.window()).into_iter().map(|t| {
        let u = pair::unitary_u(p, &t);
        (t, u)
    }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commutant::{unitarily_equivalent, RepGens, KERNEL_TOL};
    use crate::lattice::validate_pset;
    use crate::pair::build_pspace_pair;

    fn chain_pair(lo: i64, hi: i64, side: i64, k: usize) -> WeylPair {
        let w = LatticeWindow::cube(1, side).unwrap();
        let a = validate_pset((lo..=hi).map(|x| vec![x]).collect(), &w, SetKind::PSpace).unwrap();
        build_pspace_pair(&a, k).unwrap()
    }

    #[test]
    fn chain_dilates_to_truncated_bilateral_shift() {
        let b = minimal_dilation(&chain_pair(0, 7, 8, 1), 4).unwrap();
        assert_eq!(b.dim_k(), 12);
        assert!(b.kfibers().iter().all(|&k| k == 1));
        let w = b.w_generator(0);
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j + 1 { ONE } else { ZERO };
                assert!((w[(i, j)] - want).norm() < 1e-12, "{i} {j}");
            }
        }
        // embed puts H at coordinates 4..12
        let e = b.embed();
        for j in 0..8 {
            assert!((e[(j + 4, j)] - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn depth_zero_is_the_base() {
        let p = chain_pair(1, 5, 6, 2);
        let b = minimal_dilation(&p, 0).unwrap();
        assert_eq!(b.dim_k(), p.dim_h());
        assert!(linalg::op_norm(&(b.embed() - CMatrix::identity(p.dim_h(), p.dim_h()))) < 1e-14);
        assert!(linalg::op_norm(&(b.w_generator(0) - p.generator_dense(0))) < 1e-14);
    }

    #[test]
    fn e_family_on_chain() {
        let rep = CovariantRep::new(minimal_dilation(&chain_pair(0, 7, 8, 1), 4).unwrap()).unwrap();
        let e = rep.pi_indicator(&[-2]).unwrap();
        for i in 0..12 {
            let want = if i as i64 - 4 >= -2 { 1.0 } else { 0.0 };
            assert!((e[(i, i)].re - want).abs() < 1e-12);
        }
        let e0 = rep.pi_indicator(&[0]).unwrap();
        let emb = rep.bundle().embed();
        assert!(linalg::op_norm(&(e0 - emb * emb.adjoint())) < 1e-12);
        let e3 = rep.pi_indicator(&[3]).unwrap();
        let v3 = pair::isometry_v(rep.bundle().base(), &[3]).unwrap();
        assert!(linalg::op_norm(&(e3 - emb * (&v3 * v3.adjoint()) * emb.adjoint())) < 1e-12);
        assert!(matches!(rep.pi_indicator(&[-5]), Err(DilationError::BudgetExceeded(_))));
    }

    #[test]
    fn axioms_hold_within_budget() {
        let rep = CovariantRep::new(minimal_dilation(&chain_pair(0, 7, 8, 1), 4).unwrap()).unwrap();
        let report = dilation_report(&rep).unwrap();
        assert!(report.max_defect() <= 1e-12, "{report:?}");
        assert!(report.safe_positions > 0);

        let w = LatticeWindow::cube(2, 4).unwrap();
        let full = build_pspace_pair(&PSet::full(&w), 1).unwrap();
        let rep2 = CovariantRep::new(minimal_dilation(&full, 2).unwrap()).unwrap();
        let report2 = dilation_report(&rep2).unwrap();
        assert!(report2.max_defect() <= 1e-10, "{report2:?}");
        assert!(report2.safe_positions > 0);
    }

    #[test]
    fn joint_spectrum_patterns_are_down_sets() {
        for k in [1, 2] {
            let rep = CovariantRep::new(minimal_dilation(&chain_pair(0, 7, 8, k), 4).unwrap()).unwrap();
            let spec = joint_spectrum(&rep).unwrap();
            assert_eq!(spec.len(), 12);
            for s in &spec {
                assert_eq!(s.dim, k);
                let top = s.pattern.points().last().unwrap()[0];
                let expect: Vec<Point> = (-4..=top).map(|x| vec![x]).collect();
                assert_eq!(s.pattern.points(), &expect[..]);
            }
        }
    }

    #[test]
    fn pi_eval_is_linear_and_monotone() {
        let rep = CovariantRep::new(minimal_dilation(&chain_pair(0, 7, 8, 1), 4).unwrap()).unwrap();
        let kw = rep.bundle().kwindow().clone();
        let f = TestFunction::delta(&kw, &[0]).unwrap();
        assert!(linalg::op_norm(&(pi_eval(&rep, &f).unwrap() - rep.pi_indicator(&[0]).unwrap())) < 1e-15);
        let g = TestFunction::delta(&kw, &[2]).unwrap().scaled(C64::new(-1.0, 0.0));
        let both = pi_eval(&rep, &f.plus(&g)).unwrap();
        let sum = pi_eval(&rep, &f).unwrap() + pi_eval(&rep, &g).unwrap();
        assert!(linalg::op_norm(&(both.clone() - sum)) < 1e-12);
        let (vals, _) = linalg::hermitian_eigen(&both);
        assert!(vals[0] > -1e-12);
    }

    #[test]
    fn extension_examples() {
        let p = chain_pair(0, 7, 8, 1);
        let rep = CovariantRep::new(minimal_dilation(&p, 4).unwrap()).unwrap();
        let samples = vec![
            (vec![0.0], pair::unitary_u(&p, &[0.0])),
            (vec![std::f64::consts::FRAC_PI_2], pair::unitary_u(&p, &[std::f64::consts::FRAC_PI_2])),
        ];
        let ext = extend_u(rep.bundle(), &samples).unwrap();
        assert!(linalg::op_norm(&(&ext[0].u - CMatrix::identity(12, 12))) < 1e-14);
        let report = extension_report(&rep, &samples, &ext).unwrap();
        assert!(report.c1 < 1e-14 && report.c2 <= 1e-10 && report.e_commutation <= 1e-10, "{report:?}");

        let mut bogus = samples[1].1.clone();
        bogus.swap_columns(0, 1);
        let err = extend_u(rep.bundle(), &[(samples[1].0.clone(), bogus)]).unwrap_err();
        assert!(matches!(err, DilationError::WellDefinednessViolation(_)));
    }

    #[test]
    fn compression_round_trip() {
        let w = LatticeWindow::cube(2, 3).unwrap();
        let a = PSet::up_set(&w, &[vec![1, 0], vec![0, 2]]).unwrap();
        let p = build_pspace_pair(&a, 2).unwrap();
        let rep = CovariantRep::new(minimal_dilation(&p, 2).unwrap()).unwrap();
        let back = compress_phi(&rep).unwrap();
        assert_eq!(back.fibers(), p.fibers());
        let eq = unitarily_equivalent(&RepGens::from_pair(&p), &RepGens::from_pair(&back), KERNEL_TOL).unwrap();
        assert!(eq.equivalent);
    }

    #[test]
    fn constant_family_has_one_pattern() {
        // r = 0 on the full window with a single point: E_x ≡ I on K.
        let w = LatticeWindow::cube(1, 1).unwrap();
        let p = build_pspace_pair(&PSet::full(&w), 3).unwrap();
        let rep = CovariantRep::new(minimal_dilation(&p, 0).unwrap()).unwrap();
        let spec = joint_spectrum(&rep).unwrap();
        assert_eq!(spec.len(), 1);
        assert_eq!(spec[0].dim, 3);
        assert_eq!(spec[0].pattern.len(), 1);
    }

    #[test]
    fn bundle_json_extends_pair_json() {
        let b = minimal_dilation(&chain_pair(2, 3, 4, 1), 1).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["depth"], 1);
        assert_eq!(v["budget"], 1);
        assert!(v["generators"].is_array());
        let back: DilationBundle = serde_json::from_str(&s).unwrap();
        assert_eq!(back.dim_k(), b.dim_k());
    }
}
