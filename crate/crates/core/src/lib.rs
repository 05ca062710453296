//! Targeted digital twins.
//!
//! A targeted twin is a compact dynamical model of a few quantities of
//! interest (QoIs) of an expensive simulator, the "full digital twin". This
//! crate builds one end to end:
//!
//! 1. [`sims`] runs a full-DT system many times with randomly drawn hidden
//!    parameters and initial states, recording only QoI time series.
//! 2. [`pipeline`] slices those series into short bursts of `n_M + 1 + n_R`
//!    entries and stores them in a binary dataset.
//! 3. [`fml`] trains a memory-based flow map
//!    `V[n+1] = G(V[n], ..., V[n-n_M]; gamma)` on the multi-step loss.
//! 4. [`predict`] synchronizes the trained map with `n_M + 1` recorded
//!    steps and marches it forward, with spectral and error diagnostics.
//!
//! [`cli`] wires the stages into the `tdt` command.

pub mod cli;
pub mod error;
pub mod fml;
pub mod pipeline;
pub mod predict;
pub mod sims;
pub mod types;

pub use error::{Error, Result};
pub use fml::{FlowMapModel, TrainConfig};
pub use types::{Burst, BurstDataset, ExplicitParams, FourierSeries, QoiVector, Trajectory};
