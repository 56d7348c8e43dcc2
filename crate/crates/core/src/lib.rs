//! Weak Weyl pairs over `Z^d`, their commutants, minimal dilations and the
//! planar counterexample with non-commuting range projections.

pub mod commutant;
pub mod counterexample;
pub mod decompose;
pub mod dilation;
pub mod lattice;
pub mod linalg;
pub mod pair;

pub use commutant::{AlgebraSummary, CommutantError, Equivalence, RepGens};
pub use counterexample::{CounterexampleError, EvaluationPoint, GridSpec, ProjectionFamily};
pub use decompose::{Component, DecomposeError, Decomposition};
pub use dilation::{CovariantRep, DilationBundle, DilationError};
pub use lattice::{LatticeError, LatticeWindow, PSet, Point, SetKind, TestFunction};
pub use linalg::{CMatrix, SparseMat, C64};
pub use pair::{PairError, SafeRegion, WeylPair};
