//! Highway micro-simulation with a Stackelberg game lane-change model.

pub mod collision;
pub mod config;
pub mod driver_control;
pub mod experiments;
pub mod game;
pub mod perception;
pub mod sim_engine;
pub mod vehicle_dynamics;
