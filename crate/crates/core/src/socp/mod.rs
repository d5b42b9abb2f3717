//! Second-order cone programs and the Finsler direction program.

mod finsler;
mod program;
mod solver;

pub use finsler::{
    build_finsler_program, build_finsler_program_with, solve_finsler, solve_finsler_with, solve_program,
    FinslerLayout, FinslerProgram, FinslerSolution, FinslerVariant, ProgramOptions,
};
pub use program::{ConeBlock, ConeProgram, SparseRow};
pub use solver::{check_kkt, dual_layout, solve, DualLayout, ConeSolution, ConeStatus, KktResiduals, DEFAULT_MAX_ITER, DEFAULT_TOL};
