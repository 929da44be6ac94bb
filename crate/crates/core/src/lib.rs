//! Numerical machinery for cusp forms of half-integral weight `m = two_m/2`
//! on the groups `Γ₀(N)` (with `4 | N`) lifted to the metaplectic double
//! cover of `SL(2,ℝ)` through the theta multiplier.
//!
//! The crate is organised along the objects it computes:
//!
//! - [`group`] — exact arithmetic in the metaplectic group: branch
//!   conventions, the multiplication law, Iwasawa/Cartan coordinates,
//!   slash and lift actions, and the model functions `f_{k,m}`.
//! - [`arith`] — integer-side arithmetic: Kronecker symbols, the theta
//!   series `Θ` and its multiplier `J(γ,z)`, Dirichlet characters, and
//!   enumeration of group elements / cusp cosets of `Γ₀(N)`.
//! - [`series`] — truncated evaluation of the three Poincaré series
//!   families (reproducing kernels `Δ`, classical series `ψ_n`, and the
//!   averaged model functions `P f_{k,m}`) with explicit tail majorants.
//! - [`petersson`] — quadrature meshes for fundamental domains and the
//!   periodized plane, Petersson inner products, Cauchy-circle
//!   derivatives, and the reproducing-property verifiers.
//! - [`spectral`] — Fourier coefficient extraction, the two expansions of
//!   `Δ`, Hecke operators `T_{p²}`, and empirical sup-norm scans.
//! - [`nonvanishing`] — beta-distribution medians and the non-vanishing
//!   thresholds for the series `P f_{k,m}`.
//!
//! All types are immutable values and all operations are pure; everything
//! is safe to use from data-parallel contexts.

pub mod arith;
pub mod config;
pub mod error;
pub mod group;
pub mod kahan;
pub mod nonvanishing;
pub mod petersson;
pub mod series;
pub mod spectral;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

pub use arith::{coset_reps_infty, enumerate_group, DirichletCharacter, IntMatrix};
pub use group::{CartanCoords, HalfWeight, IwasawaCoords, MetElement};
pub use series::{SeriesFamily, SeriesSpec, SeriesValue, TruncationBudget};
