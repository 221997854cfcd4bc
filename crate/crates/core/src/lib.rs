//! Demand-response charge scheduling for plug-in electric vehicle fleets.
//!
//! The pipeline: ingest or synthesize daily driving profiles, cluster them
//! into base behaviors, solve the clustered charging program for its dual
//! variables, turn those into per-cluster adjusted price vectors, and
//! dispatch individual vehicles online against a fleet-wide hourly charge
//! cap. A simulation harness compares the adjusted-price dispatcher against
//! three baselines.

pub mod cluster;
pub mod ingest;
pub mod lp;
pub mod scenario;
pub mod series;
pub mod vehicle;

pub use cluster::{assign_cluster, cluster_weights, kmeans, select_k, valuation_curve, ClusterSet};
pub use ingest::{load_profiles, load_series, synth_fleet, write_profiles, ProfileTable};
pub use scenario::{cap_from_load, Scenario};
pub use series::{HourlySeries, Unit};
pub use vehicle::{classify_profile, Vehicle, VehicleKind, VehicleParams};
