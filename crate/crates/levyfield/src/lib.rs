//! Infinitely divisible random measures given by characteristic triplets,
//! the random fields obtained by integrating kernels against them, exact
//! joint characteristic functions of those fields, grid simulation, and
//! statistical verification that simulated fields are infinitely divisible.
//!
//! Module map:
//! - [`basis`]: triplets (a, b, F), set functions, marginal cumulants
//! - [`kernels`]: kernel families and weighted combinations
//! - [`charfn`]: exact joint CF via iterated quadrature
//! - [`simulate`]: compound-Poisson grid simulation with small-jump handling
//! - [`verify`]: empirical CF, KS and positive-definiteness checks
//! - [`config`]: JSON model configuration
//! - [`cli`]: command drivers behind the `levyfield` binary

pub mod basis;
pub mod charfn;
pub mod cli;
pub mod config;
pub mod kernels;
pub mod quad;
pub mod simulate;
pub mod verify;
