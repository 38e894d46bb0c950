//! Numerical laboratory for the mass of positive closed (1,1)-currents in
//! tubular neighborhoods of generating real submanifolds of C^n.
//!
//! The crate is organised around a handful of small geometric vocabularies:
//!
//! * [`forms`]: constant-coefficient real (1,1)-forms as Hermitian matrices and
//!   their exact wedge algebra against powers of the Kahler form
//!   beta = i ddbar |z|^2.
//! * [`jets`]: second-order jets (value, complex gradient, mixed Hessian) of
//!   real-valued fields, with product, chain and smooth-max combinators.
//! * [`manifold`]: real submanifolds given by defining systems rho_1..rho_m,
//!   the generating condition, distance, surface sampling, and the square-root
//!   tube weights u = (sqrt(w) + A w)^2 used in the mass bounds.
//! * [`currents`]: divisors, parametrized varieties and smooth psh potentials,
//!   with trace-mass estimators (coarea Monte Carlo and Gauss quadrature).
//! * [`mass_profile`]: tube mass profiles sigma(t) and the almost-monotone
//!   ratio sigma(t)/t^(m-1), plus the convex-body variant.
//! * [`zero_geometry`]: zeros of f restricted to M, maximal 2eps-separated
//!   packings, the packing constant, and Hausdorff measure estimates.
//! * [`potentials`]: radial mass functions nu_z, Newtonian potentials, the
//!   exponential bound, and exponential integrability on M.
//!
//! Normalization used throughout: with z_j = x_j + i y_j and the derivative
//! convention d/dz = (d/dx - i d/dy)/2, the Kahler form beta = i ddbar |z|^2
//! has beta^n / n! = 2^n times Lebesgue measure on R^(2n). Densities are
//! reported relative to Lebesgue measure with the 2^n factor applied
//! explicitly, and wedge coefficients are normalised so that the all-identity
//! product equals one.

pub mod currents;
pub mod forms;
pub mod jets;
pub mod manifold;
pub mod mass_profile;
pub mod potentials;
pub mod sampling;
pub mod zero_geometry;

pub use num_complex::Complex64;
