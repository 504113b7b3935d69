//! Tensor networks on ordered multigraphs.
//!
//! The value of a network `(G, T)` is
//! `Σ_{i ∈ [n]^E} ∏_v T_v[i_{e_1(v)}, .., i_{e_deg(v)}]`, with each vertex
//! reading its edges in its own fixed order. Also here: Wick's rule for
//! Gaussian moments of tensor contractions, BCP ratios for index patterns,
//! tensor-represented polynomials, alternating tensors on `vec(R^{M×N})`,
//! and the component-count inequality for alternating red/blue cycles.
//!
//! Brute-force evaluators refuse inputs with more than `2^30` index tuples.

pub mod battery;
mod bcp;
mod format;
mod graph;
mod lemma;
mod poly;
mod tensor;
mod wick;

pub use bcp::{bcp_ratio, bcp_ratio_bruteforce, validate_bcp_query, BcpQuery, BcpReport};
pub use format::{parse_network, NetworkFile, TensorSpec};
pub use graph::{
    eval_value_bruteforce, eval_value_contraction, OrderedMultigraph, TensorLabeling, BRUTE_FORCE_LOG2_BUDGET,
    FACTOR_LIMIT,
};
pub use lemma::{alt_cycle_component_bound_check, random_alt_cycles, CycleReport};
pub use poly::{poly_from_tensors, PolyTerm, TensorPoly};
pub use tensor::{alternating_tensor, DenseTensor, TensorStorage, MATERIALIZE_LIMIT};
pub use wick::{wick_expectation, wick_pairings};
