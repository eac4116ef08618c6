//! Computable entanglement bounds for bipartite quantum states.
//!
//! * [`linalg`]: Hermitian operators, partial transpose, spectral functions
//! * [`states`]: validated density matrices, named families, state files
//! * [`conic`]: Hermitian semidefinite programs and an interior-point solver
//! * [`measures`]: log-negativity, `E_W`, `E_M`, the one-copy PPT rate, the
//!   closed-form Rains bound of the `ρ_r` family and a conditional-gradient
//!   upper bound on the PPT relative entropy of entanglement
//!
//! ```
//! use entbound::measures::{e_m, MeasureConfig};
//! use entbound::states::max_entangled;
//!
//! let phi = max_entangled(3).unwrap();
//! let em = e_m(&phi, &MeasureConfig::default()).unwrap();
//! assert!((em.value - 3f64.log2()).abs() < 1e-6);
//! ```
//!
//! The guide in `book/` walks through each module; its code blocks run as
//! doctests of this crate.

pub mod conic;
pub mod linalg;
pub mod measures;
pub mod states;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/conic.md")]
    mod conic {}
    #[doc = include_str!("../../../book/src/nonadditivity.md")]
    mod nonadditivity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
