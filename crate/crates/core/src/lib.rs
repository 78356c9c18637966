//! Design-based randomization inference for finite populations.
//!
//! All randomness comes from the assignment mechanism; outcomes are fixed
//! constants. The crate provides finite-population moments and regularity
//! diagnostics ([`popstats`]), assignment mechanisms and an exhaustive
//! enumeration oracle ([`designs`]), contrast estimators and their exact
//! moments ([`estimators`]), sharp-null randomization tests ([`randtests`]),
//! instrumental-variable confidence sets ([`ivconf`]), the special functions
//! they rely on ([`distlib`]) and verification campaigns ([`harness`]).

pub mod designs;
pub mod distlib;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod ivconf;
pub mod linalg;
pub mod popstats;
pub mod randtests;
pub mod rng;

pub use designs::{Assignment, DesignSpec, FactorialSpec, RerandSpec};
pub use error::{Error, Result};
pub use estimators::{AdjustmentCoefs, EstimateReport, ObservedData, WaldRegion};
pub use ivconf::{IVData, IVSummary, QuadraticSet};
pub use popstats::{ContrastSpec, CovStructure, PopMoments, Population, PotentialTable};
pub use randtests::{Alternative, RankVector, TestResult, TiePolicy};

pub use nalgebra::{DMatrix, DVector};
