use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use weylpair_core::commutant::{self, bicommutant_basis, commutant_basis, span_residual, summarize, RepGens, KERNEL_TOL};
use weylpair_core::linalg::{self, CMatrix};
use weylpair_core::C64;

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Two generators acting as `⊕_i X_i ⊗ I_{m_i}` in a random basis. Generic
/// blocks are irreducible and pairwise inequivalent, so the commutant has
/// dimension `Σ m_i²` and the center dimension equals the number of blocks.
#[derive(Debug, Clone)]
struct Blocks {
    shape: Vec<(usize, usize)>,
    seed: u64,
}

impl Blocks {
    fn gens(&self) -> RepGens {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n: usize = self.shape.iter().map(|(a, m)| a * m).sum();
        let mut gens = vec![CMatrix::zeros(n, n), CMatrix::zeros(n, n)];
        let mut at = 0;
        for &(a, m) in &self.shape {
            for g in gens.iter_mut() {
                let x = gaussian(a, &mut rng).kronecker(&CMatrix::identity(m, m));
                g.view_mut((at, at), (a * m, a * m)).copy_from(&x);
            }
            at += a * m;
        }
        let u = linalg::random_unitary(n, &mut rng);
        RepGens::from_matrices(gens.iter().map(|g| &u * g * u.adjoint()).collect()).unwrap()
    }

    fn commutant_dim(&self) -> usize {
        self.shape.iter().map(|(_, m)| m * m).sum()
    }
}

fn blocks() -> impl Strategy<Value = Blocks> {
    (prop::collection::vec((1usize..=3, 1usize..=2), 1..=3), any::<u64>()).prop_map(|(shape, seed)| Blocks { shape, seed })
}

/// Nullspace of the stacked Sylvester operators `I ⊗ X − Xᵀ ⊗ I` over the
/// generators and their adjoints.
fn kronecker_commutant_dim(r: &RepGens) -> usize {
    let n = r.dim;
    let id = CMatrix::identity(n, n);
    let mut rows = Vec::new();
    for g in &r.gens {
        for x in [g.clone(), g.adjoint()] {
            rows.push(id.kronecker(&x) - x.transpose().kronecker(&id));
        }
    }
    let mut stacked = CMatrix::zeros(rows.len() * n * n, n * n);
    for (i, m) in rows.iter().enumerate() {
        stacked.view_mut((i * n * n, 0), (n * n, n * n)).copy_from(m);
    }
    let sv = stacked.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s <= 1e-8 * top).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn commutant_dimension_matches_both_oracles(b in blocks()) {
        let r = b.gens();
        let basis = commutant_basis(&r, KERNEL_TOL).unwrap();
        prop_assert_eq!(basis.len(), b.commutant_dim());
        if r.dim <= 6 {
            prop_assert_eq!(basis.len(), kronecker_commutant_dim(&r));
        }
    }

    #[test]
    fn commutant_is_a_star_algebra(b in blocks()) {
        let basis = commutant_basis(&b.gens(), KERNEL_TOL).unwrap();
        for s in &basis {
            prop_assert!(span_residual(&basis, &s.adjoint()) <= 1e-8);
            for t in &basis {
                prop_assert!(span_residual(&basis, &(s * t)) <= 1e-8);
            }
        }
    }

    #[test]
    fn generators_lie_in_the_bicommutant(b in blocks()) {
        let r = b.gens();
        let bi = bicommutant_basis(&r, KERNEL_TOL).unwrap();
        prop_assert!(span_residual(&bi, &CMatrix::identity(r.dim, r.dim)) <= 1e-8);
        for g in &r.gens {
            prop_assert!(span_residual(&bi, g) <= 1e-8 * (1.0 + linalg::frobenius(g)));
        }
    }

    #[test]
    fn summary_flags_are_consistent(b in blocks()) {
        let s = summarize(&b.gens(), KERNEL_TOL).unwrap();
        prop_assert_eq!(s.is_irreducible, s.commutant_dim == 1);
        prop_assert_eq!(s.is_factor, s.center_dim == 1);
        prop_assert!(s.center_dim <= s.commutant_dim);
        prop_assert_eq!(s.center_dim, b.shape.len());
    }

    #[test]
    fn schur_consistency_for_irreducibles(n in 1usize..=4, seed in any::<u64>(), same in any::<bool>()) {
        let a = Blocks { shape: vec![(n, 1)], seed }.gens();
        let b = if same {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let u = linalg::random_unitary(n, &mut rng);
            RepGens::from_matrices(a.gens.iter().map(|g| &u * g * u.adjoint()).collect()).unwrap()
        } else {
            Blocks { shape: vec![(n, 1)], seed: seed.wrapping_add(1) }.gens()
        };
        let eq = commutant::unitarily_equivalent(&a, &b, KERNEL_TOL).unwrap();
        let basis = commutant::intertwiners(&a, &b, KERNEL_TOL).unwrap();
        // for n = 1 two random scalars are inequivalent unless equal, which has probability zero
        prop_assert_eq!(eq.equivalent, basis.len() == 1);
        prop_assert_eq!(eq.equivalent, same);
        if let Some(w) = eq.witness {
            let t = &basis[0];
            let ratio = linalg::frob_inner(&w, t) / linalg::frob_inner(&w, &w);
            prop_assert!(linalg::frobenius(&(t - &w * ratio)) <= 1e-8);
            prop_assert!(linalg::op_norm(&(w.adjoint() * &w - CMatrix::identity(n, n))) <= 1e-10);
        }
    }
}
