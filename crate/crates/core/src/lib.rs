//! Numerical verification toolkit for Poisson structures and integrable
//! Hamiltonian systems.
//!
//! Structures, Hamiltonians and generating functions are declared as parsed
//! expressions over a coordinate chart. The library then checks, at sampled
//! points, the algebraic conditions that characterise completely integrable,
//! superintegrable, Lie-algebra superintegrable, commutative partially
//! integrable and partially superintegrable systems: bracket identities,
//! Jacobi residuals, rank and corank laws, fitted structure constants,
//! Casimir properties, recursion operators, flow conservation and
//! canonical-form coordinate checks.
//!
//! Sign convention: the canonical bracket is
//! `{f, g} = ∂f/∂p_i ∂g/∂q^i − ∂f/∂q^i ∂g/∂p_i`, so `{p_i, q^j} = δ_i^j`,
//! and the Hamiltonian vector field of `f` has components
//! `θ_f^ν = w^{μν} ∂_μ f` (so `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q`).

pub mod catalog;
pub mod cli;
mod error;
pub mod expr;
pub mod flows;
pub mod integrability;
pub mod liealg;
pub mod linalg;
pub mod poisson;
pub mod sampling;
pub mod specfile;
pub mod transform;

pub use error::{Error, Result};
pub use expr::{parse, parse_predicate, ExprError, Expression, Jet1, Jet2, Predicate};
pub use liealg::StructureConstants;
pub use poisson::{BivectorAt, Chart, PoissonStructure, TwoForm};
