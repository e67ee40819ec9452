//! Random regular group testing in the linear regime: test designs, the
//! reduction to non-hard individuals, limiting offspring laws of the reduced
//! graph, Monte Carlo measurement, and population dynamics for
//! belief-propagation marginals.

pub mod analytic;
pub mod compare;
pub mod empirical;
pub mod error;
pub mod graph_model;
pub mod popdyn;
pub mod reduction;
pub mod seed;
pub mod stats;

pub use analytic::{AnalyticConstants, JointOffspringPmf, Laws, OffspringPmf, RootType};
pub use empirical::{EstimateReport, OffspringHistogram};
pub use error::{Error, Result};
pub use graph_model::{derive_params, BipartiteDesign, Configuration, Outcomes, Params};
pub use popdyn::{MarginalHistogram, MessagePopulation};
pub use reduction::{IndividualType, ReducedGraph, TypePartition};
pub use stats::ComparisonResult;
