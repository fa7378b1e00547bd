//! The CG3D forecaster: a CNN-GRU branch and a 3D-convolution branch run
//! side by side on the same input window, concatenated and mapped by a
//! linear head to `horizon` future (lead time, lat, lon, altitude) rows.
//!
//! ```text
//! window [W, ds+dt] ─┬─ spatial cols ─ conv2d stages ─ flatten ─┐
//!                    │  temporal cols ─ GRU ─ last state ───────┼─ dropout ─┐
//!                    └─ cube [1, D, Hc, Wc] ─ (conv3d, pool)* ─ flatten ─ dropout ─┴─ concat ─ dropout ─ dense ─ [H, 4]
//! ```
//!
//! Baselines drop one branch and keep their own head.

mod checkpoint;
mod config;
mod network;

pub use config::{C3dStage, Cg3dConfig, CnnStage, ModelKind, OUTPUT_DIM};
pub use network::{build_model, plan_shapes, BoundModel, Cg3dModel, ShapePlan};
