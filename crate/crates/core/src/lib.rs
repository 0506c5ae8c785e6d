//! High-dimensional minimum-variance portfolios, analytically and by simulation.
//!
//! The analytic side ([`replica`], [`weights`]) gives the large-`N` saddle-point
//! solution of the minimum-variance problem with `r = N/T` held fixed, with
//! and without a ban on short positions (and for a general asymmetric ℓ1
//! penalty). The numerical side ([`optimizer`], [`mc`]) solves the same
//! problem exactly on synthetic samples so the two can be compared.
//!
//! # Normalization dictionary
//!
//! Every module uses the same conventions:
//!
//! | quantity | convention |
//! |---|---|
//! | weights | `Σ w_i = N` (budget `N`, weights of order one) |
//! | returns | `x_it ~ N(0, σ_i²/N)`, independent across `i` and `t` |
//! | sample covariance | `Ĉ_ij = (1/T) Σ_t x_it x_jt` |
//! | true risk | `Σ_i (σ_i²/N) w_i²`, equal to `1/c2` at the true optimum |
//! | moments | `c1 = (1/N) Σ 1/σ_i`, `c2 = (1/N) Σ 1/σ_i²` |
//! | chemical potential | `λ = ŵ'Ĉŵ / r`, ; free energy per asset `f = λ/2` without a finite ℓ1 penalty |
//! | relative estimation error | `q̃0 = Σ σ_i² ŵ_i² / Σ σ_i² w*_i² = q0 · c2` |
//!
//! The `λ` estimator follows from the cost `½ Σ_t (Σ_i w_i x_it)²` whose value
//! per asset is `T ŵ'Ĉŵ / (2N) = ŵ'Ĉŵ / (2r)`. As `r → 0` it tends to
//! `(1-r)/(r c2)`, the unconstrained saddle-point value.

pub mod cli;
pub mod error;
pub mod mc;
pub mod optimizer;
pub mod replica;
pub mod specfun;
#[cfg(test)]
mod testutil;
pub mod weights;

pub use error::{Error, Result};
pub use replica::{AssetUniverse, Penalty, RegularizerParams, ReplicaSolution};
