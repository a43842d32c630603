//! Turns weakly supervised math word problems (text plus final answer,
//! no annotated equation) into verified problem-equation training pairs.
//!
//! The pipeline has two searching phases. The distillation phase drives
//! an external chat model through generate/check/correct loops and keeps
//! every equation that passes the token-alphabet format check and the
//! answer check. The refinement phase then fits a local searcher on the
//! solved pairs and iteratively beam-searches the unsolved remainder,
//! harvesting the shortest passing candidate per problem, and finally
//! re-infers the solved set to swap in more concise equations.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod distill;
pub mod equation;
pub mod export;
pub mod mask;
pub mod numeric;
pub mod pipeline;
pub mod refine;
pub mod report;
pub mod synth;
pub mod validate;

pub use equation::{Equation, SurfaceSyntax};
pub use mask::{MaskedProblem, NumberSlot, ProblemRecord};
