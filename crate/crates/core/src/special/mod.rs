//! Numerical primitives behind the closed forms: the exponential integral,
//! `₂F₁(1, 2; 3; z)` and adaptive Gauss–Kronrod quadrature.

mod expint;
mod hyp2f1;
mod quadrature;

pub use expint::{e1_scaled, expint_e1, expint_ei};
pub use hyp2f1::hyp2f1_1_2_3;
pub use quadrature::{
    integrate, integrate_semi_infinite, integrate_semi_infinite_scaled, try_integrate,
    try_integrate_semi_infinite, Integral, QuadratureSpec,
};
