//! Mechanism design for multi-party machine-learning markets where each
//! agent's value depends on the models its competitors actually deploy.
//!
//! The crate provides valuation families with type-imposed externalities,
//! allocation and payment rules (MEP, VCG, the free mechanism), grid-based
//! auditors for incentive compatibility, individual rationality, budget
//! balance and efficiency, an exact decision procedure for the existence of
//! a desirable mechanism, and seeded experiment drivers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod error;
pub mod existence;
pub mod experiments;
pub mod mechanism;
pub mod numeric;
pub mod profile;
pub mod quality;
pub mod valuation;

pub use error::{Error, Result};
pub use existence::{desirable_exists, disparity_boundary, BoundaryResult, PaymentTable};
pub use mechanism::{Mechanism, Outcome};
pub use profile::{grid_points, GridSpec, Report, ReportProfile, TypeProfile};
pub use quality::{effective_quality, QualityFunction};
pub use valuation::{
    is_non_competitive, market_size, LinearExternalityModel, PowerMarketModel, ProportionalFixedMarketModel,
    QuasiMonotoneModel, Valuation,
};
