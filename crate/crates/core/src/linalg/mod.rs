//! Dense and banded Hermitian eigensolvers.

pub mod banded;
pub mod dense;
pub mod lanczos;
