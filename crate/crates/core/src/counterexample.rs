//! The planar counterexample: weak Weyl pairs for `P = R²₊` built from two
//! sequences of mutually orthogonal projections, whose range projections do
//! not commute.
//!
//! The evaluation point `p0` stands in for a character of `L^∞` on the unit
//! square. Cells are half-open: `R_0 = [0,r)×[0,r′)`, `R_1 = [0,r)×[r′,1]`,
//! `R_2 = [r,1]×[0,r′)`, `R_3 = [r,1]×[r′,1]`.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commutant::{self, CommutantError, RepGens};
use crate::lattice::LatticeWindow;
use crate::linalg::{self, CMatrix, SparseMat, C64};
use crate::pair::{PairError, WeylPair};

pub const PROJECTION_TOL: f64 = 1e-12;
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CounterexampleError {
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Commutant(#[from] CommutantError),
    #[error("invalid projection family: {0}")]
    InvalidFamily(String),
    #[error("index ({m}, {n}) lies beyond the truncated family")]
    IndexBeyondFamily { m: i64, n: i64 },
    #[error("invalid evaluation point: {0}")]
    InvalidEvaluationPoint(String),
    #[error("evaluation point lies on a cell boundary at (s, t) = ({s}, {t})")]
    BoundaryCoincidence { s: f64, t: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("E is not increasing (violation {0:e})")]
    MonotonicityBroken(f64),
    #[error("grid too small: {0}")]
    GridTooSmall(String),
}

/// Two families `P_1..P_M` and `Q_1..Q_M′` of mutually orthogonal projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFamily {
    pub kappa: usize,
    #[serde(rename = "P", with = "linalg::matrix_list_json")]
    pub p: Vec<CMatrix>,
    #[serde(rename = "Q", with = "linalg::matrix_list_json")]
    pub q: Vec<CMatrix>,
    /// Replacement values of `F`, used to build deliberately broken inputs.
    #[serde(skip)]
    overrides: BTreeMap<(i64, i64), CMatrix>,
}

fn check_orthogonal(list: &[CMatrix], kappa: usize, name: &str) -> Result<(), CounterexampleError> {
    for (i, a) in list.iter().enumerate() {
        if a.nrows() != kappa || a.ncols() != kappa {
            return Err(CounterexampleError::InvalidFamily(format!("{name}{} is not {kappa}×{kappa}", i + 1)));
        }
        if linalg::projection_defect(a) > PROJECTION_TOL {
            return Err(CounterexampleError::InvalidFamily(format!("{name}{} is not a projection", i + 1)));
        }
        for (j, b) in list.iter().enumerate().skip(i + 1) {
            if linalg::op_norm(&(a * b)) > PROJECTION_TOL {
                return Err(CounterexampleError::InvalidFamily(format!("{name}{} and {name}{} overlap", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

fn rank_one(v: linalg::CVector) -> CMatrix {
    &v * v.adjoint()
}

impl ProjectionFamily {
    pub fn new(kappa: usize, p: Vec<CMatrix>, q: Vec<CMatrix>) -> Result<Self, CounterexampleError> {
        check_orthogonal(&p, kappa, "P")?;
        check_orthogonal(&q, kappa, "Q")?;
        Ok(ProjectionFamily { kappa, p, q, overrides: BTreeMap::new() })
    }

    /// `P_m` onto the standard basis, `Q_n` onto the columns of a seeded
    /// random unitary.
    pub fn default_demo(seed: u64) -> Self {
        Self::rotated_rank_one(6, seed)
    }

    pub fn rotated_rank_one(kappa: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = linalg::random_unitary(kappa, &mut rng);
        let p = (0..kappa).map(|i| rank_one(CMatrix::identity(kappa, kappa).column(i).clone_owned())).collect();
        let q = (0..kappa).map(|i| rank_one(u.column(i).clone_owned())).collect();
        ProjectionFamily { kappa, p, q, overrides: BTreeMap::new() }
    }

    /// Both families equal to the coordinate projections.
    pub fn coordinate(kappa: usize) -> Self {
        let p: Vec<CMatrix> = (0..kappa).map(|i| rank_one(CMatrix::identity(kappa, kappa).column(i).clone_owned())).collect();
        ProjectionFamily { kappa, q: p.clone(), p, overrides: BTreeMap::new() }
    }

    /// `M` zero projections on each side.
    pub fn zero(kappa: usize, m: usize) -> Self {
        let z = vec![CMatrix::zeros(kappa, kappa); m];
        ProjectionFamily { kappa, p: z.clone(), q: z, overrides: BTreeMap::new() }
    }

    /// Replaces one value of `F` (no validation).
    pub fn with_override(mut self, m: i64, n: i64, value: CMatrix) -> Self {
        self.overrides.insert((m, n), value);
        self
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn m_prime(&self) -> usize {
        self.q.len()
    }
}

/// `F_{(m,n)}`.
pub fn f_proj(family: &ProjectionFamily, m: i64, n: i64) -> Result<CMatrix, CounterexampleError> {
    if let Some(v) = family.overrides.get(&(m, n)) {
        return Ok(v.clone());
    }
    let k = family.kappa;
    let partial = |list: &[CMatrix], upto: i64| -> Result<CMatrix, CounterexampleError> {
        if upto as usize > list.len() {
            return Err(CounterexampleError::IndexBeyondFamily { m, n });
        }
        Ok(list[..upto as usize].iter().fold(CMatrix::zeros(k, k), |acc, x| acc + x))
    };
    match (m, n) {
        (m, 0) if m >= 1 => partial(&family.p, m),
        (0, n) if n >= 1 => partial(&family.q, n),
        (m, n) if m >= 1 && n >= 1 => Ok(CMatrix::identity(k, k)),
        _ => Ok(CMatrix::zeros(k, k)),
    }
}

/// Rectangle `[a,b]×[c,d]` in the unit square and the point `p0` inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationPoint {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub p0: [f64; 2],
}

impl EvaluationPoint {
    pub fn new(a: f64, b: f64, c: f64, d: f64, p0: [f64; 2]) -> Result<Self, CounterexampleError> {
        let ev = EvaluationPoint { a, b, c, d, p0 };
        ev.validate()?;
        Ok(ev)
    }

    pub fn validate(&self) -> Result<(), CounterexampleError> {
        let inside = |x: f64| x > 0.0 && x < 1.0;
        if ![self.a, self.b, self.c, self.d].into_iter().all(inside) || self.a >= self.b || self.c >= self.d {
            return Err(CounterexampleError::InvalidEvaluationPoint("need 0 < a < b < 1 and 0 < c < d < 1".into()));
        }
        let [p, q] = self.p0;
        if p < self.a || p > self.b || q < self.c || q > self.d {
            return Err(CounterexampleError::InvalidEvaluationPoint(format!("p0 = ({p}, {q}) outside the rectangle")));
        }
        Ok(())
    }

    /// `[0.3, 0.4]²` with `p0 = (0.35, 0.35)`.
    pub fn demo() -> Self {
        EvaluationPoint { a: 0.3, b: 0.4, c: 0.3, d: 0.4, p0: [0.35, 0.35] }
    }
}

/// Which of the four cells contains `p0`, as the `F` index it selects.
pub fn select_index(ev: &EvaluationPoint, s: f64, t: f64) -> Result<Option<(i64, i64)>, CounterexampleError> {
    if s < 0.0 || t < 0.0 {
        return Ok(None);
    }
    let (m, n) = (s.floor() as i64, t.floor() as i64);
    let r = m as f64 + 1.0 - s;
    let r1 = n as f64 + 1.0 - t;
    let [p, q] = ev.p0;
    if (r - p).abs() < BOUNDARY_TOL || (r1 - q).abs() < BOUNDARY_TOL {
        return Err(CounterexampleError::BoundaryCoincidence { s, t });
    }
    Ok(Some((m + i64::from(p >= r), n + i64::from(q >= r1))))
}

/// `E_{(s,t)}`, zero outside `R²₊`.
pub fn eval_e(family: &ProjectionFamily, ev: &EvaluationPoint, s: f64, t: f64) -> Result<CMatrix, CounterexampleError> {
    match select_index(ev, s, t)? {
        Some((m, n)) => f_proj(family, m, n),
        None => Ok(CMatrix::zeros(family.kappa, family.kappa)),
    }
}

/// Square grid `{offset + k/q : 0 ≤ k, offset + k/q < extent}` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q: u32,
    pub extent: f64,
    pub offset: f64,
}

impl GridSpec {
    pub fn new(q: u32, extent: f64, offset: f64) -> Result<Self, CounterexampleError> {
        let g = GridSpec { q, extent, offset };
        if q == 0 || !(extent > 0.0) {
            return Err(CounterexampleError::InvalidGrid("q and extent must be positive".into()));
        }
        if !(0.0..g.step()).contains(&offset) {
            return Err(CounterexampleError::InvalidGrid(format!("offset {offset} outside [0, {})", g.step())));
        }
        Ok(g)
    }

    pub fn step(&self) -> f64 {
        1.0 / self.q as f64
    }

    pub fn count(&self) -> usize {
        ((self.extent - self.offset) * self.q as f64 - 1e-9).ceil().max(0.0) as usize
    }

    pub fn value(&self, k: usize) -> f64 {
        self.offset + k as f64 / self.q as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count()).map(|k| self.value(k)).collect()
    }

    /// Rejects grids on which `m+1−s` or `n+1−t` can hit a coordinate of `p0`.
    pub fn check(&self, ev: &EvaluationPoint) -> Result<(), CounterexampleError> {
        for j in 0..self.q.min(self.count() as u32) {
            let s = self.value(j as usize);
            let r = 1.0 - s.fract();
            for x in ev.p0 {
                if (r - x).abs() < BOUNDARY_TOL {
                    return Err(CounterexampleError::BoundaryCoincidence { s, t: s });
                }
            }
        }
        Ok(())
    }

    pub fn window(&self) -> LatticeWindow {
        LatticeWindow::cube(2, self.count() as i64).expect("nonempty grid")
    }
}

/// Selected `F` index at every grid point, row-major in `(s, t)`.
pub fn index_field(ev: &EvaluationPoint, grid: &GridSpec) -> Result<Vec<(i64, i64)>, CounterexampleError> {
    grid.check(ev)?;
    let vals = grid.values();
    let mut out = Vec::with_capacity(vals.len() * vals.len());
    for &s in &vals {
        for &t in &vals {
            out.push(select_index(ev, s, t)?.expect("grid inside R²₊"));
        }
    }
    Ok(out)
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    linalg::hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Largest negative eigenvalue of `E_{(s′,t′)} − E_{(s,t)}` over comparable
/// grid pairs `(s,t) ≤ (s′,t′)`, reported as a nonnegative violation.
pub fn check_increasing(family: &ProjectionFamily, ev: &EvaluationPoint, grid: &GridSpec) -> Result<f64, CounterexampleError> {
    let idx = index_field(ev, grid)?;
    let n = grid.count();
    let mut pairs: BTreeSet<((i64, i64), (i64, i64))> = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            let lo = idx[i * n + j];
            for i2 in i..n {
                for j2 in j..n {
                    pairs.insert((lo, idx[i2 * n + j2]));
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    let mut cache: BTreeMap<(i64, i64), CMatrix> = BTreeMap::new();
    for (a, b) in pairs {
        for key in [a, b] {
            if !cache.contains_key(&key) {
                cache.insert(key, f_proj(family, key.0, key.1)?);
            }
        }
        worst = worst.max(-min_eigenvalue(&(&cache[&b] - &cache[&a])));
    }
    Ok(worst.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    /// Grid points `(s, t)` of the unit cell with `E = F_{(m,n)}`.
    pub points: Vec<(f64, f64)>,
    pub cell_points: usize,
    pub fraction: f64,
    /// Every grid point with `s − m ∈ (0, 1−b)` and `t − n ∈ (0, 1−d)` is on the plateau.
    pub contains_proof_region: bool,
}

pub fn plateau(family: &ProjectionFamily, ev: &EvaluationPoint, m: i64, n: i64, grid: &GridSpec) -> Result<Plateau, CounterexampleError> {
    grid.check(ev)?;
    let target = f_proj(family, m, n)?;
    let vals = grid.values();
    let in_cell = |v: f64, k: i64| v >= k as f64 && v < k as f64 + 1.0;
    let mut points = Vec::new();
    let mut cell_points = 0;
    let mut contains_proof_region = true;
    for &s in vals.iter().filter(|&&s| in_cell(s, m)) {
        for &t in vals.iter().filter(|&&t| in_cell(t, n)) {
            cell_points += 1;
            let on = linalg::op_norm(&(eval_e(family, ev, s, t)? - &target)) <= PROJECTION_TOL;
            if on {
                points.push((s, t));
            }
            let proof = s - (m as f64) > 0.0 && s - (m as f64) < 1.0 - ev.b && t - (n as f64) > 0.0 && t - (n as f64) < 1.0 - ev.d;
            if proof && !on {
                contains_proof_region = false;
            }
        }
    }
    let fraction = if cell_points == 0 { 0.0 } else { points.len() as f64 / cell_points as f64 };
    Ok(Plateau { points, cell_points, fraction, contains_proof_region })
}

fn fiber_bases(family: &ProjectionFamily, ev: &EvaluationPoint, grid: &GridSpec) -> Result<Vec<CMatrix>, CounterexampleError> {
    let idx = index_field(ev, grid)?;
    let mut cache: BTreeMap<(i64, i64), CMatrix> = BTreeMap::new();
    idx.iter()
        .map(|&(m, n)| {
            if let Some(b) = cache.get(&(m, n)) {
                return Ok(b.clone());
            }
            let b = linalg::range_basis(&f_proj(family, m, n)?, 1e-10);
            cache.insert((m, n), b.clone());
            Ok(b)
        })
        .collect()
}

/// The grid-discretized pair: fiber at grid point `(u, v)` is the range of
/// `E_{(u,v)}`, generators are one-step shifts compressed to `H`.
pub fn build_r2_pair(family: &ProjectionFamily, ev: &EvaluationPoint, grid: &GridSpec) -> Result<WeylPair, CounterexampleError> {
    let violation = check_increasing(family, ev, grid)?;
    if violation > PROJECTION_TOL {
        return Err(CounterexampleError::MonotonicityBroken(violation));
    }
    let window = grid.window();
    let bases = fiber_bases(family, ev, grid)?;
    let fibers: Vec<usize> = bases.iter().map(|b| b.ncols()).collect();
    let mut offsets = vec![0usize];
    for f in &fibers {
        offsets.push(offsets.last().unwrap() + f);
    }
    let dim = *offsets.last().unwrap();
    let side = grid.count();
    let mut generators = Vec::with_capacity(2);
    for axis in 0..2 {
        let mut trips = Vec::new();
        for i in 0..side {
            for j in 0..side {
                let (i2, j2) = if axis == 0 { (i + 1, j) } else { (i, j + 1) };
                if i2 >= side || j2 >= side {
                    continue;
                }
                let (from, to) = (i * side + j, i2 * side + j2);
                let block = bases[to].adjoint() * &bases[from];
                for r in 0..block.nrows() {
                    for c in 0..block.ncols() {
                        let v = block[(r, c)];
                        if v.norm() > 1e-15 {
                            trips.push((offsets[to] + r, offsets[from] + c, v));
                        }
                    }
                }
            }
        }
        generators.push(SparseMat::from_triplets(dim, dim, trips));
    }
    Ok(WeylPair::new(window, fibers, generators, format!("r2 kappa={} q={}", family.kappa, grid.q))?)
}

/// Probe shifts for the range-projection commutator: one grid step and one
/// unit length along each axis.
pub fn r2_probe(grid: &GridSpec) -> Vec<Vec<i64>> {
    let q = grid.q as i64;
    let mut out = vec![vec![1, 0], vec![0, 1], vec![q, 0], vec![0, q]];
    out.sort();
    out.dedup();
    out
}

/// `max ‖E_{y+a} E_y − E_y‖` over grid points `y` and steps `a ∈ [0, budget]²`,
/// the fiberwise form of `Ẽ W_a Ẽ = W_a Ẽ`.
pub fn compression_defect(family: &ProjectionFamily, ev: &EvaluationPoint, grid: &GridSpec, budget: usize) -> Result<f64, CounterexampleError> {
    let idx = index_field(ev, grid)?;
    let n = grid.count();
    let mut cache: BTreeMap<(i64, i64), CMatrix> = BTreeMap::new();
    let mut get = |k: (i64, i64)| -> Result<CMatrix, CounterexampleError> {
        if !cache.contains_key(&k) {
            cache.insert(k, f_proj(family, k.0, k.1)?);
        }
        Ok(cache[&k].clone())
    };
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let ey = get(idx[i * n + j])?;
            for di in 0..=budget {
                for dj in 0..=budget {
                    if i + di >= n || j + dj >= n {
                        continue;
                    }
                    let eya = get(idx[(i + di) * n + j + dj])?;
                    worst = worst.max(linalg::op_norm(&(&eya * &ey - &ey)));
                }
            }
        }
    }
    Ok(worst)
}

/// Distance of `span_{a ∈ [0,budget]²} W_a* H` from the whole ambient fiber,
/// over grid points whose forward box stays inside the grid.
pub fn minimality_defect(family: &ProjectionFamily, ev: &EvaluationPoint, grid: &GridSpec, budget: usize) -> Result<f64, CounterexampleError> {
    let idx = index_field(ev, grid)?;
    let n = grid.count();
    let k = family.kappa;
    let mut worst: f64 = 0.0;
    for i in 0..n.saturating_sub(budget) {
        for j in 0..n.saturating_sub(budget) {
            let mut span = CMatrix::zeros(k, 0);
            for di in 0..=budget {
                for dj in 0..=budget {
                    let (m, nn) = idx[(i + di) * n + j + dj];
                    let e = f_proj(family, m, nn)?;
                    let c = span.ncols();
                    span = span.insert_columns(c, k, C64::new(0.0, 0.0));
                    span.columns_mut(c, k).copy_from(&e);
                }
            }
            let p = linalg::range_projection(&span, 1e-10);
            worst = worst.max(linalg::op_norm(&(CMatrix::identity(k, k) - p)));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCheck {
    pub sampled_dim: usize,
    pub family_dim: usize,
    pub equal: bool,
    pub principal_angle: f64,
}

fn basis_columns(basis: &[CMatrix]) -> CMatrix {
    let rows = basis.first().map_or(0, |b| b.len());
    let mut out = CMatrix::zeros(rows, basis.len());
    for (i, b) in basis.iter().enumerate() {
        out.set_column(i, &linalg::vectorize(b));
    }
    out
}

/// Compares the commutant of the sampled `E_{(s,t)}` with the commutant of the
/// family `{P_m, Q_n}`.
pub fn commutant_transfer_check(family: &ProjectionFamily, ev: &EvaluationPoint, grid: &GridSpec) -> Result<TransferCheck, CounterexampleError> {
    let idx = index_field(ev, grid)?;
    let seen: BTreeSet<(i64, i64)> = idx.iter().copied().collect();
    for m in 1..=family.m() as i64 {
        if !seen.contains(&(m, 0)) {
            return Err(CounterexampleError::GridTooSmall(format!("F_({m},0) is never sampled")));
        }
    }
    for n in 1..=family.m_prime() as i64 {
        if !seen.contains(&(0, n)) {
            return Err(CounterexampleError::GridTooSmall(format!("F_(0,{n}) is never sampled")));
        }
    }
    let sampled = seen.iter().map(|&(m, n)| f_proj(family, m, n)).collect::<Result<Vec<_>, _>>()?;
    let generators: Vec<CMatrix> = family.p.iter().chain(&family.q).cloned().collect();
    let a = commutant::commutant_basis(&RepGens::from_matrices(sampled)?, commutant::KERNEL_TOL)?;
    let b = commutant::commutant_basis(&RepGens::from_matrices(generators)?, commutant::KERNEL_TOL)?;
    let angle = linalg::subspace_distance(&basis_columns(&a), &basis_columns(&b));
    Ok(TransferCheck { sampled_dim: a.len(), family_dim: b.len(), equal: a.len() == b.len() && angle <= 1e-8, principal_angle: angle })
}

/// Grid indices `(i, j)` with `E ≠ 0`: the position support of `U`.
pub fn spec_support(family: &ProjectionFamily, ev: &EvaluationPoint, grid: &GridSpec) -> Result<Vec<(usize, usize)>, CounterexampleError> {
    let n = grid.count();
    let vals = grid.values();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let e = eval_e(family, ev, vals[i], vals[j])?;
            if e.trace().re > 0.5 {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// Rank of `E_{(s,t)}` on the grid, row-major in `(s, t)`.
pub fn rank_field(family: &ProjectionFamily, ev: &EvaluationPoint, grid: &GridSpec) -> Result<Vec<(f64, f64, f64)>, CounterexampleError> {
    let vals = grid.values();
    let mut out = Vec::with_capacity(vals.len() * vals.len());
    for &s in &vals {
        for &t in &vals {
            let e = eval_e(family, ev, s, t)?;
            out.push((s, t, e.trace().re.round()));
        }
    }
    Ok(out)
}
