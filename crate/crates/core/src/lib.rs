//! Message-metered simulator for synchronous CONGEST networks with modeled
//! quantum subroutines.
//!
//! Quantum steps are not simulated register by register at protocol scale.
//! Each call samples from the exact outcome distribution of the subroutine
//! and charges its worst-case cost formula to the run's [`CostLedger`].
//! The [`statevec`] kernel evolves real state vectors on tiny star networks
//! and is used to cross-check those distributions.

pub mod error;
pub mod graphs;
pub mod harness;
pub mod netmodel;
pub mod protocols;
pub mod qprims;
pub mod statevec;

pub use error::{Error, Result};
pub use graphs::GraphSpec;
pub use netmodel::{Charge, CostLedger, Graph, NodeState, RandomSource, Status};
pub use protocols::{AgreementOutcome, LEOutcome};
pub use qprims::{GroverSchedule, OracleSpec, SearchConstants, WalkCosts};
