//! Finite windows of `Z^d`, P-spaces (up-sets), Y-sets (down-sets) and the
//! separating functionals `f ↦ Σ_{x∈A} f(x)`.
//!
//! The semigroup is `N^d`, generated by the unit vectors `e_i`. All invariance
//! conditions are checked relative to the window: a condition `x + e_i ∈ A`
//! is only required when `x + e_i` lies inside the window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{C64, ZERO};

/// A lattice point. Points compare lexicographically.
pub type Point = Vec<i64>;

/// Default cap on the number of search nodes visited by [`enumerate_pspaces`].
pub const DEFAULT_ENUMERATION_BUDGET: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("point {0:?} lies outside the window")]
    PointOutsideWindow(Point),
    #[error("point {point:?} has dimension {got}, expected {expected}")]
    DimensionMismatch { point: Point, got: usize, expected: usize },
    #[error("invariance violated at {point:?} along {direction}e_{axis}")]
    InvarianceViolation { point: Point, axis: usize, direction: char },
    #[error("point set is empty")]
    EmptySet,
    #[error("enumeration budget of {0} search nodes exceeded")]
    BudgetExceeded(usize),
}

/// Finite box `lo ≤ x ≤ hi` in `Z^d` with a per-cell Haar weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeWindow {
    dim: usize,
    lo: Point,
    hi: Point,
    #[serde(default = "unit_weight")]
    weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl LatticeWindow {
    pub fn new(lo: Point, hi: Point) -> Result<Self, LatticeError> {
        Self::with_weight(lo, hi, 1.0)
    }

    pub fn with_weight(lo: Point, hi: Point, weight: f64) -> Result<Self, LatticeError> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(LatticeError::InvalidWindow(format!(
                "lo and hi must be nonempty with equal length (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(LatticeError::InvalidWindow(format!("lo {lo:?} not ≤ hi {hi:?}")));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(LatticeError::InvalidWindow(format!("weight {weight} must be positive")));
        }
        Ok(LatticeWindow { dim: lo.len(), lo, hi, weight })
    }

    /// The cube `{0..side-1}^dim`.
    pub fn cube(dim: usize, side: i64) -> Result<Self, LatticeError> {
        if side < 1 {
            return Err(LatticeError::InvalidWindow(format!("side {side} must be ≥ 1")));
        }
        Self::new(vec![0; dim], vec![side - 1; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Number of lattice points along `axis`.
    pub fn side(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn cardinality(&self) -> usize {
        (0..self.dim).map(|i| self.side(i)).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Row-major flat index; agrees with lexicographic order of points.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for axis in 0..self.dim {
            idx = idx * self.side(axis) + (x[axis] - self.lo[axis]) as usize;
        }
        Some(idx)
    }

    pub fn point_at(&self, mut idx: usize) -> Point {
        let mut p = vec![0; self.dim];
        for axis in (0..self.dim).rev() {
            let s = self.side(axis);
            p[axis] = self.lo[axis] + (idx % s) as i64;
            idx /= s;
        }
        p
    }

    /// All points in lexicographic order.
    pub fn points(&self) -> Vec<Point> {
        (0..self.cardinality()).map(|i| self.point_at(i)).collect()
    }

    /// Same window with `lo` lowered by `r` along every axis.
    pub fn extend_below(&self, r: i64) -> LatticeWindow {
        LatticeWindow {
            dim: self.dim,
            lo: self.lo.iter().map(|l| l - r).collect(),
            hi: self.hi.clone(),
            weight: self.weight,
        }
    }

    fn check_point(&self, x: &[i64]) -> Result<(), LatticeError> {
        if x.len() != self.dim {
            return Err(LatticeError::DimensionMismatch {
                point: x.to_vec(),
                got: x.len(),
                expected: self.dim,
            });
        }
        if !self.contains(x) {
            return Err(LatticeError::PointOutsideWindow(x.to_vec()));
        }
        Ok(())
    }
}

pub fn unit_vector(dim: usize, axis: usize) -> Point {
    let mut e = vec![0; dim];
    e[axis] = 1;
    e
}

pub fn add(x: &[i64], y: &[i64]) -> Point {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn sub(x: &[i64], y: &[i64]) -> Point {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Componentwise `x ≤ y`, the order induced by `N^d`.
pub fn leq(x: &[i64], y: &[i64]) -> bool {
    x.iter().zip(y).all(|(a, b)| a <= b)
}

/// All points of the box `[0, r]^dim` in lexicographic order.
pub fn box_points(dim: usize, r: i64) -> Vec<Point> {
    LatticeWindow::cube(dim, r + 1).expect("r ≥ 0").points()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    /// Up-closed: `A + P ⊂ A`.
    #[serde(rename = "pspace")]
    PSpace,
    /// Down-closed: `−P + A ⊂ A`.
    #[serde(rename = "yset")]
    YSet,
}

/// A validated nonempty point set of a given invariance kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PSet {
    window: LatticeWindow,
    points: Vec<Point>,
    kind: SetKind,
}

impl Eq for LatticeWindow {}

impl std::hash::Hash for LatticeWindow {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.lo.hash(state);
        self.hi.hash(state);
        self.weight.to_bits().hash(state);
    }
}

/// Checks the kind-specific invariance and builds the set. Points are sorted
/// and deduplicated first.
pub fn validate_pset(points: Vec<Point>, window: &LatticeWindow, kind: SetKind) -> Result<PSet, LatticeError> {
    let mut points = points;
    for p in &points {
        window.check_point(p)?;
    }
    points.sort();
    points.dedup();
    if points.is_empty() {
        return Err(LatticeError::EmptySet);
    }
    let (sign, direction) = match kind {
        SetKind::PSpace => (1, '+'),
        SetKind::YSet => (-1, '-'),
    };
    for x in &points {
        for axis in 0..window.dim() {
            let mut y = x.clone();
            y[axis] += sign;
            if window.contains(&y) && points.binary_search(&y).is_err() {
                return Err(LatticeError::InvarianceViolation { point: x.clone(), axis: axis + 1, direction });
            }
        }
    }
    Ok(PSet { window: window.clone(), points, kind })
}

impl PSet {
    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn kind(&self) -> SetKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.points.binary_search_by(|p| p.as_slice().cmp(x)).is_ok()
    }

    /// `X_u` membership: whether the origin belongs to the set.
    pub fn contains_origin(&self) -> bool {
        self.contains(&vec![0; self.window.dim()])
    }

    /// The up-set of the window generated by `generators`.
    pub fn up_set(window: &LatticeWindow, generators: &[Point]) -> Result<PSet, LatticeError> {
        let pts = window
            .points()
            .into_iter()
            .filter(|x| generators.iter().any(|g| leq(g, x)))
            .collect();
        validate_pset(pts, window, SetKind::PSpace)
    }

    /// The whole window as a P-space.
    pub fn full(window: &LatticeWindow) -> PSet {
        PSet { window: window.clone(), points: window.points(), kind: SetKind::PSpace }
    }

    /// Window points not in the set, in lexicographic order.
    pub fn complement(&self) -> Vec<Point> {
        self.window.points().into_iter().filter(|x| !self.contains(x)).collect()
    }

    /// Reflection `x ↦ lo + hi − x` about the window centre.
    pub fn reflect(&self) -> Vec<Point> {
        let (lo, hi) = (self.window.lo(), self.window.hi());
        self.points
            .iter()
            .map(|x| x.iter().enumerate().map(|(i, v)| lo[i] + hi[i] - v).collect())
            .collect()
    }

    /// Componentwise minimum of the points.
    pub fn meet(&self) -> Point {
        let d = self.window.dim();
        (0..d).map(|i| self.points.iter().map(|p| p[i]).min().expect("nonempty")).collect()
    }
}

/// JSON layout: `{"dim", "lo", "hi", "kind", "points"}` with sorted points.
#[derive(Serialize, Deserialize)]
struct PSetJson {
    dim: usize,
    lo: Point,
    hi: Point,
    kind: SetKind,
    points: Vec<Point>,
}

impl Serialize for PSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PSetJson {
            dim: self.window.dim(),
            lo: self.window.lo().to_vec(),
            hi: self.window.hi().to_vec(),
            kind: self.kind,
            points: self.points.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = PSetJson::deserialize(d)?;
        let window = LatticeWindow::new(raw.lo, raw.hi).map_err(serde::de::Error::custom)?;
        if window.dim() != raw.dim {
            return Err(serde::de::Error::custom("dim does not match lo/hi"));
        }
        validate_pset(raw.points, &window, raw.kind).map_err(serde::de::Error::custom)
    }
}

/// Every nonempty P-space of the window, sorted lexicographically by point
/// list. Search runs over up-sets directly (never the powerset).
pub fn enumerate_pspaces(window: &LatticeWindow) -> Result<Vec<PSet>, LatticeError> {
    enumerate_pspaces_with_budget(window, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_pspaces_with_budget(window: &LatticeWindow, budget: usize) -> Result<Vec<PSet>, LatticeError> {
    let pts = window.points();
    let n = pts.len();
    // Successors x + e_i inside the window have larger lexicographic index,
    // so deciding points from last to first sees successors first.
    let succ: Vec<Vec<usize>> = pts
        .iter()
        .map(|x| {
            (0..window.dim())
                .filter_map(|axis| {
                    let mut y = x.clone();
                    y[axis] += 1;
                    window.index_of(&y)
                })
                .collect()
        })
        .collect();

    struct Search<'a> {
        succ: &'a [Vec<usize>],
        included: Vec<bool>,
        nodes: usize,
        budget: usize,
        found: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn visit(&mut self, pos: usize) -> Result<(), LatticeError> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(LatticeError::BudgetExceeded(self.budget));
            }
            if pos == 0 {
                let set: Vec<usize> = (0..self.included.len()).filter(|&i| self.included[i]).collect();
                if !set.is_empty() {
                    self.found.push(set);
                }
                return Ok(());
            }
            let i = pos - 1;
            self.included[i] = false;
            self.visit(i)?;
            if self.succ[i].iter().all(|&j| self.included[j]) {
                self.included[i] = true;
                self.visit(i)?;
                self.included[i] = false;
            }
            Ok(())
        }
    }

    let mut search = Search { succ: &succ, included: vec![false; n], nodes: 0, budget, found: Vec::new() };
    search.visit(n)?;
    let mut sets: Vec<PSet> = search
        .found
        .into_iter()
        .map(|idx| PSet {
            window: window.clone(),
            points: idx.into_iter().map(|i| pts[i].clone()).collect(),
            kind: SetKind::PSpace,
        })
        .collect();
    sets.sort_by(|a, b| a.points.cmp(&b.points));
    Ok(sets)
}

/// Result of shifting a set inside its window.
#[derive(Debug, Clone, PartialEq)]
pub struct Translated {
    /// Shifted points that remain inside the window, sorted.
    pub points: Vec<Point>,
    /// Number of points that fell outside the window.
    pub clipped: usize,
    /// The shifted set re-validated with the original kind, when it still
    /// satisfies the invariance.
    pub pset: Option<PSet>,
}

/// `A + x`, clipped to `A`'s window.
pub fn translate_pset(a: &PSet, x: &[i64]) -> Translated {
    let mut clipped = 0;
    let mut points = Vec::with_capacity(a.len());
    for p in &a.points {
        let q = add(p, x);
        if a.window.contains(&q) {
            points.push(q);
        } else {
            clipped += 1;
        }
    }
    points.sort();
    let pset = validate_pset(points.clone(), &a.window, a.kind).ok();
    Translated { points, clipped, pset }
}

/// A finitely supported test function on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    window: LatticeWindow,
    support: Vec<(Point, C64)>,
}

impl TestFunction {
    pub fn new(window: &LatticeWindow, support: Vec<(Point, C64)>) -> Result<Self, LatticeError> {
        for (p, _) in &support {
            window.check_point(p)?;
        }
        Ok(TestFunction { window: window.clone(), support })
    }

    pub fn delta(window: &LatticeWindow, x: &[i64]) -> Result<Self, LatticeError> {
        Self::new(window, vec![(x.to_vec(), C64::new(1.0, 0.0))])
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn support(&self) -> &[(Point, C64)] {
        &self.support
    }

    pub fn value(&self, x: &[i64]) -> C64 {
        self.support.iter().filter(|(p, _)| p.as_slice() == x).map(|(_, v)| *v).sum()
    }

    pub fn plus(&self, other: &TestFunction) -> TestFunction {
        let mut support = self.support.clone();
        support.extend(other.support.iter().cloned());
        TestFunction { window: self.window.clone(), support }
    }

    pub fn scaled(&self, c: C64) -> TestFunction {
        TestFunction {
            window: self.window.clone(),
            support: self.support.iter().map(|(p, v)| (p.clone(), v * c)).collect(),
        }
    }
}

/// `f̃(A) = weight · Σ_{x∈A} f(x)`.
pub fn tilde_f(f: &TestFunction, a: &PSet) -> C64 {
    let sum: C64 = f.support.iter().filter(|(p, _)| a.contains(p)).map(|(_, v)| *v).fold(ZERO, |s, v| s + v);
    sum * a.window.weight()
}
