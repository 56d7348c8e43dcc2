//! Splitting a commuting-range pair into canonical factorial pieces `(A, k)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commutant::{self, CommutantError, RepGens};
use crate::lattice::{self, LatticeError, LatticeWindow, PSet, Point, SetKind};
use crate::linalg::{self, CMatrix, C64};
use crate::pair::{self, PairError, WeylPair};

const COMMUTING_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Commutant(#[from] CommutantError),
    #[error("range projections do not commute (defect {0:e})")]
    NotCommuting(f64),
    #[error("fiber dimension varies inside one factor: {0:?}")]
    FiberMismatch(Vec<usize>),
    #[error("factor support is not a P-space: {0}")]
    ComponentNotPSpace(String),
    #[error("reassembled pair is not equivalent to the input")]
    ReassemblyFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Support of the factor inside the input window.
    pub pspace: PSet,
    /// `pspace − translation` is the normalized representative.
    pub translation: Point,
    pub normalized: Vec<Point>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub components: Vec<Component>,
    /// Unitary `W` with `W X_input = X_reassembled W` for every generator.
    pub witness: CMatrix,
    pub residual: f64,
}

/// Translates a point set so its componentwise minimum sits at the window's
/// lower corner.
pub fn normalize_orbit(points: &[Point], window: &LatticeWindow) -> (Vec<Point>, Point) {
    let d = window.dim();
    let min: Point = (0..d).map(|i| points.iter().map(|p| p[i]).min().unwrap_or(window.lo()[i])).collect();
    let t = lattice::sub(&min, window.lo());
    let mut out: Vec<Point> = points.iter().map(|p| lattice::sub(p, &t)).collect();
    out.sort();
    (out, t)
}

/// Minimal central projections from one random Hermitian central element.
fn central_projections(center: &[CMatrix], n: usize) -> Vec<CMatrix> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xce47);
    let mut z = CMatrix::zeros(n, n);
    for c in center {
        let a: f64 = rng.sample(rand_distr::StandardNormal);
        z += (c + c.adjoint()) * C64::new(a, 0.0);
    }
    let (vals, vecs) = linalg::hermitian_eigen(&z);
    let scale = vals.iter().fold(1e-300_f64, |m, v| m.max(v.abs()));
    linalg::cluster_sorted(&vals, 1e-6 * scale)
        .into_iter()
        .map(|r| {
            let q = vecs.columns(r.start, r.len());
            &q * q.adjoint()
        })
        .collect()
}

pub fn decompose(input: &WeylPair) -> Result<Decomposition, DecomposeError> {
    let window = input.window().clone();
    let d = window.dim();
    let gap = pair::check_commuting_ranges(input, &lattice::box_points(d, 2))?;
    if gap > COMMUTING_TOL {
        return Err(DecomposeError::NotCommuting(gap));
    }
    let gens = RepGens::from_pair(input);
    let n = gens.dim;

    // Position projections from the character samples.
    let u = RepGens::u_samples(input);
    let samples: Vec<(Vec<f64>, CMatrix)> = pair::dual_grid(&window).into_iter().zip(u.gens).collect();
    let positions = pair::position_projections_from_samples(&window, &samples);

    let comm = commutant::commutant_basis(&gens, commutant::KERNEL_TOL)?;
    let center = commutant::center_basis(&gens, &comm, commutant::KERNEL_TOL)?;
    let mut components = Vec::new();
    for z in central_projections(&center, n) {
        let ranks: Vec<usize> = positions.iter().map(|p| (p * &z).trace().re.round().max(0.0) as usize).collect();
        let nonzero: Vec<usize> = ranks.iter().copied().filter(|&k| k > 0).collect();
        let k = nonzero[0];
        if nonzero.iter().any(|&m| m != k) {
            return Err(DecomposeError::FiberMismatch(ranks));
        }
        let support: Vec<Point> = (0..ranks.len()).filter(|&i| ranks[i] > 0).map(|i| window.point_at(i)).collect();
        let pspace = lattice::validate_pset(support, &window, SetKind::PSpace)
            .map_err(|e| DecomposeError::ComponentNotPSpace(e.to_string()))?;
        let (normalized, translation) = normalize_orbit(pspace.points(), &window);
        components.push(Component { pspace, translation, normalized, multiplicity: k });
    }
    components.sort_by(|a, b| (a.pspace.points(), a.multiplicity).cmp(&(b.pspace.points(), b.multiplicity)));

    let pieces = components
        .iter()
        .map(|c| pair::build_pspace_pair(&c.pspace, c.multiplicity))
        .collect::<Result<Vec<_>, _>>()?;
    let reassembled = pair::direct_sum(&pieces)?;
    let eq = commutant::unitarily_equivalent(&gens, &RepGens::from_pair(&reassembled), commutant::KERNEL_TOL)?;
    match (eq.equivalent, eq.witness, eq.residual) {
        (true, Some(witness), Some(residual)) => Ok(Decomposition { components, witness, residual }),
        _ => Err(DecomposeError::ReassemblyFailed),
    }
}
