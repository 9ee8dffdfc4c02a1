//! Degree-k control Lyapunov machinery: symbolic vector fields, iterated and
//! set-valued Lie brackets, bracket Hamiltonians, sampled CLF verification
//! with margin functions, constructive steering along bracket-approximating
//! control words, and KL decay certificates for the synthesized runs.
//!
//! The guiding idea: a candidate Lyapunov function that fails the classical
//! dissipative inequality `inf_a <DU, f(x,a)> < 0` may still certify
//! asymptotic controllability if the inequality is relaxed to the infimum
//! over iterated Lie brackets up to degree `k`. This crate makes that notion
//! executable end to end: enter a system symbolically, verify the degree-k
//! inequality on a sampled region, estimate the margin function, steer to
//! the target with piecewise-constant commutator words, and check the
//! resulting trajectory against a constructed class-KL envelope.
//!
//! See the `book/` guide for concept chapters; its code snippets double as
//! doc-tests of this crate.

pub mod certify;
pub mod clf;
pub mod config;
pub mod expr;
pub mod field;
pub mod hamiltonian;
pub mod lie;
pub mod linalg;
pub mod report;
pub mod sample;
pub mod steering;

#[cfg(doctest)]
mod book_snippets {
    //! Runs every code block of the mdbook guide under `cargo test --doc`,
    //! keeping the book and the crate in sync.
    #[doc = include_str!("../../../book/src/expressions.md")]
    pub mod expressions {}
    #[doc = include_str!("../../../book/src/brackets.md")]
    pub mod brackets {}
    #[doc = include_str!("../../../book/src/hamiltonians.md")]
    pub mod hamiltonians {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
    #[doc = include_str!("../../../book/src/steering.md")]
    pub mod steering {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    pub mod certificates {}
}
