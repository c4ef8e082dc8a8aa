//! Neural acoustic fields over simulated room impulse responses: an
//! image-source simulator, a from-scratch reverse-mode autodiff engine, the
//! conditioned-MLP field model, interpolation/codec baselines and
//! latent-structure analysis, all behind one CLI.
//!
//! Built with the `parallel` feature (default) the heavy loops run on rayon;
//! without it every code path falls back to sequential execution with
//! identical results.

pub mod analysis;
pub mod autodiff;
pub mod baselines;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod exec;
pub mod field;
pub mod geom;
pub mod roomsim;
pub mod wav;

pub use error::{NafError, Result};
