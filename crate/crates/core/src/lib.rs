//! Numerical laboratory for the Ricci-harmonic flow
//!
//! ```text
//! ∂t g = -2 Ric(g) + 4 du ⊗ du,    ∂t u = Δ_g u
//! ```
//!
//! on flat n-tori (n = 2, 3), together with the machinery needed to audit the
//! local L^p curvature estimate and the extension criterion for this flow:
//! cutoff-weighted curvature integrals, fitted inequality constants, Grönwall
//! comparison and the pointwise estimates feeding the Moser iteration.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs; file formats, scenarios and the command line live in
//! the companion `rhlab` crate.
//!
//! Conventions (used consistently by every module):
//!
//! * `R(X,Y)Z = ∇_X ∇_Y Z - ∇_Y ∇_X Z - ∇_[X,Y] Z`,
//!   `R_ijkl = g(R(∂_i, ∂_j)∂_k, ∂_l)`,
//! * `Ric_jk = g^il R_ijkl`, so the round sphere has positive Ricci curvature,
//! * `R = g^jk Ric_jk`, and in two dimensions `Ric = K g`, `R = 2K`,
//!   `R_xyyx = K det g`.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod curvature;
pub mod diff;
pub mod error;
pub mod extension;
pub mod flow;
pub mod gronwall;
pub mod grid;
pub mod linalg;
pub mod localization;
pub mod math;
pub mod monitor;
pub mod warped;

pub use error::{Error, Result};
pub use grid::{MetricField, PeriodicGrid, ScalarField, Slot, TensorField};
