//! Numerical building blocks: special functions, quadrature, ODE
//! integration and least squares.

pub mod bessel;
pub mod lsq;
pub mod ode;
pub mod quadrature;
