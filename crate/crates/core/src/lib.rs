//! Continuous-time quantum walk simulation of SK spin glasses on the direct
//! and LHZ parity embeddings, with physical-to-logical decoders and
//! spanning-tree coverage counting.

pub mod combinatorics;
pub mod decoders;
pub mod error;
pub mod harness;
pub mod heuristic;
pub mod ising;
pub mod lhz;
pub mod par;
pub mod walk;

pub use error::{Error, Result};
pub use ising::{
    energy, generate_sk, ground_state, load_instance, save_instance, GroundState, IsingInstance,
    SpinConfig,
};
pub use lhz::{build_layout, LhzLayout, PhysicalState, Syndrome};
pub use par::Execution;
