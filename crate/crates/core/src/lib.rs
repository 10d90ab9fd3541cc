//! Assouad spectra of Gatzouras–Lalley self-affine carpets.
//!
//! The closed-form pipeline is [`summarize`] → [`build_partition`] →
//! [`spectrum`]. Two independent oracles reproduce the same numbers from
//! first principles: a variational optimiser over pairs of Bernoulli weights
//! ([`variational`]) and a symbolic covering count ([`covering`]).
//!
//! ```
//! use carpet_spectra::{fixtures, summarize, build_partition, spectrum};
//!
//! let k = fixtures::bm_three_map();
//! let s = summarize(&k);
//! let p = build_partition(&k, &s).unwrap();
//! let pt = spectrum(&k, &s, Some(&p), 0.95).unwrap();
//! assert!((pt.value - s.dim_assouad).abs() < 1e-12);
//! ```

pub mod carpet;
pub mod covering;
pub mod dimensions;
pub mod error;
pub mod fixtures;
pub mod input;
pub mod par;
pub mod pressure;
pub mod roots;
pub mod spectrum;
pub mod variational;

pub use carpet::{AffineMap, Column, GLCarpet};
pub use dimensions::{summarize, CarpetSummary};
pub use error::{Error, Result};
pub use par::Parallelism;
pub use pressure::{build_partition, g, psi, psi_prime, psi_second, PartitionPart, SpectrumPartition};
pub use spectrum::{
    classify_transitions, conjugate, parametric_point, phi, phi_inv, spectrum, spectrum_grid,
    spectrum_piecewise, uniform_thetas, Case, SpectrumPoint, Transition, TransitionKind,
};

