//! Semidefinite programs: a standard-form solver and the memory programs built on it.

pub mod lmi;
pub mod problem;
pub mod programs;
pub mod sectors;
pub mod seesaw;
pub mod solver;

pub use problem::{BlockSpec, Equality, HermSparse, LinearTerm, SdpProblem, SdpSolution, SolveStatus, Tolerances};
pub use programs::{
    build_ppt_membership, markov_robustness, ppt_robustness, robustness_from_weight, robustness_markovianity,
    robustness_quantum_memory, robustness_quantum_memory_with, PptOptions, PptRun, RobustnessResult, SymmetryChoice,
    MEMBERSHIP_THRESHOLD,
};
pub use seesaw::{seesaw_lower_bound, SeesawOptions, SeesawResult};
pub use solver::solve;
