//! Pauli-basis process matrices and error matrices for quantum process tomography.
//!
//! The crate builds process matrices from unitaries, Kraus sets and Lindblad schedules,
//! factors desired gates out into error matrices, composes and corrects them, and
//! handles state-preparation and measurement (SPAM) errors in simulated tomography.

pub mod error;
pub mod linalg;
pub mod tol;

pub mod pauli_basis;
pub mod process_matrix;
pub mod error_matrix;
pub mod gates;
pub mod composition;
pub mod correction;
pub mod lindblad;
pub mod spam;
pub mod tomo_harness;
pub mod io;
pub mod cli;

pub use error::{Error, Result};
pub use error_matrix::{Convention, ErrorMatrix};
pub use process_matrix::ProcessMatrix;
