//! An involutive MCMC engine over probabilistic-program traces.
//!
//! A transition kernel is assembled from three user programs:
//!
//! * a **model** `P` describing the target distribution over trace
//!   dictionaries (finite maps from structured [addresses](addr) to
//!   discrete or continuous [values](value)),
//! * an **auxiliary program** `Q` that samples per-move randomness given the
//!   current model trace, and
//! * a **trace transform** `F`, an involution on combined (model, auxiliary)
//!   trace pairs written against a read/write/copy effect interface.
//!
//! Given those three pieces the [kernel engine](kernel) computes
//! Metropolis–Hastings acceptance probabilities automatically: densities come
//! from replaying the programs under scoring interpreters ([model]), and the
//! Jacobian correction comes from forward-mode differentiation of the
//! transform's continuous data flow ([autodiff], [transform]) with copied
//! addresses eliminated from the determinant so its size tracks the number of
//! addresses the move actually touches, not the state dimension.
//!
//! The engine also checks, at runtime, the properties that make a kernel
//! sound — support preservation, dimension balance, and the involution
//! round-trip — and can reject-and-log on violations, which provably leaves
//! the kernel's stationary distribution intact ([kernel::CheckMode]).
//!
//! [zoo] carries worked model/kernel pairs from quick discrete test rigs to
//! split–merge mixtures, Gaussian-process structure search, and Hamiltonian
//! Monte Carlo; [oracle] provides brute-force and quadrature ground truth
//! used by the test suite to validate all of the above end to end.

pub mod addr;
pub mod autodiff;
pub mod cli;
pub mod dist;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod registry;
pub mod rng;
pub mod trace;
pub mod transform;
pub mod value;
pub mod zoo;

pub use addr::{Address, Component};
pub use rng::RandomSource;
pub use trace::Trace;
pub use value::{Discrete, Value};
