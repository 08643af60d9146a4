//! Finite combinatorics of delta-systems (sunflowers) and the product-space
//! witness construction built on top of them.
//!
//! The crate is organised bottom-up:
//!
//! * [`setfam`]: finite set families, single-level delta-system extraction
//!   (a complete backtracking oracle and the constructive Erdős–Rado
//!   recursion) and certificate verification.
//! * [`doubledelta`]: block-indexed families and two-level delta-system
//!   certificates.
//! * [`topo`]: finite spaces given by a basis, canonical open boxes in finite
//!   products and centeredness checks. Products are never materialised.
//! * [`precal`]: the finite `(n, k)`-centeredness / linkedness properties and
//!   per-coordinate chain selection.
//! * [`witness`]: support reduction, centered selections and assembly of a
//!   common point for finite subfamilies of boxes.
//! * [`gen`]: seeded generators.
//! * [`cli`]: the `deltakit` command-line front end and its JSON codecs.
//!
//! Every search is deterministic: ties are broken lexicographically on
//! indices, and any internal parallelism merges results in a fixed order.

pub mod cli;
pub mod doubledelta;
pub mod error;
pub mod gen;
pub mod precal;
pub mod setfam;
pub mod topo;
pub mod witness;

pub use doubledelta::{
    extract_double_delta, find_double_delta_exact, verify_double_delta, ConditionReport,
    DoubleDeltaCertificate, DoubleFamily, ExtractionParams,
};
pub use error::{Error, Result};
pub use precal::{
    chain_compose_select, has_centeredness_property, has_linked_property, PropertyQuery,
    PropertyReport,
};
pub use setfam::{
    er_threshold, find_delta_system_er, find_delta_system_exact, find_largest_delta_system,
    kernel_of, verify_delta_system, DeltaSystemCertificate, ElementId, FiniteSet, IndexedFamily,
};
pub use topo::{
    boxes_centered, is_centered, project_box, validate_space, FiniteSpace, OpenBox,
    ProductInstance, ValidationReport, Violation,
};
pub use witness::{
    assemble_witness, reduce_supports, run_pipeline, select_block_centered, select_kernel_centered,
    PartialPoint, PipelineParams, PipelineReport, Witness, WitnessPlan,
};

/// Limits on the exhaustive searches.
///
/// Operations that would exceed one of these return
/// [`Error::CapExceeded`] instead of silently sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Largest family handed to the exact delta-system finder.
    pub exact_family: usize,
    /// Total set count accepted by the exact double delta-system oracle.
    pub double_exact_sets: usize,
    /// Block count accepted by the exact double delta-system oracle.
    pub double_exact_blocks: usize,
    /// Basis size for the `(n, k)` property checkers.
    pub property_basis: usize,
    /// List length `n` for the `(n, k)` property checkers.
    pub property_n: usize,
    /// Points of a sub-product enumerated by the centered selections.
    pub selection_points: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            exact_family: 20,
            double_exact_sets: 12,
            double_exact_blocks: 4,
            property_basis: 6,
            property_n: 6,
            selection_points: 1 << 20,
        }
    }
}
