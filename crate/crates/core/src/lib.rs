#![cfg_attr(not(feature = "std"), no_std)]
#![doc = include_str!("../README.md")]

extern crate alloc;

pub mod error;
pub mod forecast;
pub mod metrics;
pub mod model;
pub mod network;
pub mod optimizer;
pub mod qp;
pub mod rho;
pub mod scenario;
pub mod streams;

pub use error::{Error, Result};
