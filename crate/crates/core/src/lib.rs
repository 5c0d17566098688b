//! Training-free channel pruning planner.
//!
//! Layer activations are compared pairwise with normalized HSIC; layers that
//! share little information with the rest of the network are treated as more
//! important. The importances and a FLOPs or parameter budget define a
//! linear objective over per-group keep ratios under one quadratic
//! constraint, which [`qcqp_solver`] solves directly.

pub mod activation_store;
pub mod hsic_kernel;
pub mod importance_map;
pub mod net_model;
pub mod qcqp_solver;
pub mod planner;
pub mod synthetic;
pub mod verify;
