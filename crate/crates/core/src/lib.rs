//! Battery-assisted operation of a grid-constrained AI data center.
//!
//! The physics ([`physics`]) and network ([`grid`]) layers are generic over
//! the scalar type; the aliases below fix them to `f64`, which is what the
//! optimization layers use.

pub mod dispatch;
pub mod fixtures;
pub mod grid;
pub mod physics;
pub mod planner;
pub mod plant_model;
pub mod real;
pub mod scenario;

pub use real::Real;

pub type ComputeConfig = physics::ComputeConfig<f64>;
pub type ThermalConfig = physics::ThermalConfig<f64>;
pub type BessConfig = physics::BessConfig<f64>;
pub type PlantParams = physics::PlantParams<f64>;
pub type OperatingPoint = physics::OperatingPoint<f64>;
pub type SystemState = physics::SystemState<f64>;
pub type NetworkCase = grid::NetworkCase<f64>;
pub type DcNetwork = grid::DcNetwork<f64>;
pub type InjectionSeries = grid::InjectionSeries<f64>;
pub type PccLimitSeries = grid::PccLimitSeries<f64>;
