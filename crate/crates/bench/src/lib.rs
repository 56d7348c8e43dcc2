//! Fixtures shared by the benchmarks.

use weylpair_core::lattice::{enumerate_pspaces, LatticeWindow};
use weylpair_core::pair::{build_pspace_pair, direct_sum};
use weylpair_core::{RepGens, WeylPair};

/// Sum of the first `pieces` canonical pairs on a `d`-cube of the given side.
pub fn canonical_sum(d: usize, side: i64, pieces: usize, k: usize) -> WeylPair {
    let w = LatticeWindow::cube(d, side).expect("window");
    let pool = enumerate_pspaces(&w).expect("enumeration");
    let parts: Vec<_> = pool.iter().step_by((pool.len() / pieces).max(1)).take(pieces).map(|a| build_pspace_pair(a, k).expect("pair")).collect();
    direct_sum(&parts).expect("sum")
}

pub fn pair_generators(p: &WeylPair) -> RepGens {
    RepGens::from_pair(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_requested_shape() {
        let p = canonical_sum(1, 6, 3, 2);
        assert_eq!(p.dim(), 1);
        assert_eq!(pair_generators(&p).dim, p.dim_h());
    }
}
