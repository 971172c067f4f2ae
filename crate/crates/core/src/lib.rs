//! Raman-type quantum memories in solid-state color centers.
//!
//! * [`qops`]: dense operators on the three-level atom ⊗ cavity space
//! * [`lambda`]: Λ-system Hamiltonian, control pulse, dark state and the
//!   analytic dark-state decay model
//! * [`dynamics`]: Lindblad propagation, writing efficiency and the
//!   universal sweeps (maximum cavity decay, detuning half-width)
//! * [`fom`]: defect properties to coupling constant, quality factor and
//!   acceptance bandwidth
//! * [`defectdb`]: defect nomenclature, database ingestion, ZPL matching
//!   and screening

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod defectdb;
pub mod dynamics;
pub mod fom;
pub mod integrate;
pub mod lambda;
pub mod qops;
