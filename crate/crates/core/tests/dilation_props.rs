use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weylpair_core::commutant::{unitarily_equivalent, RepGens, KERNEL_TOL};
use weylpair_core::dilation::{self, joint_spectrum, minimal_dilation, CovariantRep};
use weylpair_core::lattice::{enumerate_pspaces, sub, LatticeWindow};
use weylpair_core::linalg::{self, CMatrix};
use weylpair_core::pair::{build_pspace_pair, conjugate_fibers, direct_sum, WeylPair};

fn random_pair(d: usize, side: i64, pieces: usize, seed: u64) -> WeylPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = LatticeWindow::cube(d, side).unwrap();
    let pool = enumerate_pspaces(&w).unwrap();
    let parts: Vec<_> = (0..pieces)
        .map(|_| build_pspace_pair(&pool[rng.random_range(0..pool.len())], rng.random_range(1..=2)).unwrap())
        .collect();
    let sum = direct_sum(&parts).unwrap();
    let us: Vec<CMatrix> = sum.fibers().iter().map(|&k| linalg::random_unitary(k, &mut rng)).collect();
    conjugate_fibers(&sum, &us).unwrap()
}

/// `(pair, depth)` small enough for dense checks.
fn instance(pieces: usize) -> impl Strategy<Value = (WeylPair, i64)> {
    prop_oneof![
        (3i64..=6, 0i64..=3, any::<u64>()).prop_map(move |(s, r, seed)| (random_pair(1, s, pieces, seed), r)),
        (2i64..=3, 0i64..=2, any::<u64>()).prop_map(move |(s, r, seed)| (random_pair(2, s, pieces, seed), r)),
    ]
}

fn rep(p: &WeylPair, depth: i64) -> CovariantRep {
    CovariantRep::new(minimal_dilation(p, depth).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn axioms_hold_within_budget((p, depth) in instance(2)) {
        let report = dilation::dilation_report(&rep(&p, depth)).unwrap();
        prop_assert!(report.max_defect() <= 1e-10, "{:?}", report);
    }

    #[test]
    fn compression_round_trip((p, depth) in instance(2)) {
        let back = dilation::compress_phi(&rep(&p, depth)).unwrap();
        let eq = unitarily_equivalent(&RepGens::from_pair(&p), &RepGens::from_pair(&back), KERNEL_TOL).unwrap();
        prop_assert!(eq.equivalent);
    }

    #[test]
    fn factorial_spectrum_is_one_orbit((p, depth) in instance(1)) {
        // The joint eigenvectors at K-position `q` see `E_x` exactly when
        // `q − x` lies in the up-set generated by the support `A`.
        let r = rep(&p, depth);
        let base = p.window().clone();
        let support = p.support();
        let in_up_set = |z: &[i64]| {
            if z.iter().zip(base.lo()).any(|(v, l)| v < l) {
                return false;
            }
            let clamped: Vec<i64> = z.iter().zip(base.hi()).map(|(v, h)| *v.min(h)).collect();
            support.contains(&clamped)
        };
        let k = p.fibers().iter().copied().find(|&k| k > 0).unwrap();
        let kw = r.bundle().kwindow().clone();
        let mut expected: BTreeMap<Vec<Vec<i64>>, usize> = BTreeMap::new();
        for (idx, q) in kw.points().into_iter().enumerate() {
            if r.bundle().kfibers()[idx] == 0 {
                continue;
            }
            let pattern: Vec<_> = kw.points().into_iter().filter(|x| in_up_set(&sub(&q, x))).collect();
            *expected.entry(pattern).or_default() += k;
        }
        let got: BTreeMap<Vec<Vec<i64>>, usize> = joint_spectrum(&r).unwrap().into_iter().map(|s| (s.pattern.points().to_vec(), s.dim)).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn extension_is_a_group_law((p, depth) in instance(2)) {
        let r = rep(&p, depth);
        let samples = dilation::dual_grid_samples(&p);
        let ext = dilation::extend_u(r.bundle(), &samples).unwrap();
        let e = dilation::extension_report(&r, &samples, &ext).unwrap();
        prop_assert!(e.c1 <= 1e-12 && e.c2 <= 1e-10 && e.group_law <= 1e-10 && e.e_commutation <= 1e-10, "{:?}", e);
    }
}
