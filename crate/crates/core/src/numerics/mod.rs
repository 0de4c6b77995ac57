//! Small numerical kernels shared by the physics modules.

pub mod interp;
pub mod quad;
pub mod smalleig;
pub mod tridiag;
