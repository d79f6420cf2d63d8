//! Problem encodings, evaluators, repair, exact oracles and generators.

mod encode;
mod evaluate;
mod factor;
mod generate;
mod oracle;
mod spec;

pub use encode::{encode, relaxation_cases, RelaxationCase};
pub use evaluate::{evaluate, is_feasible, repair, value, Evaluation};
pub use factor::{predicted_factor, PredictedFactor, FACTOR_NOTE};
pub use generate::{generate, Family, FamilyName, GEN_VERTEX_CAP};
pub use oracle::{oracle, search_space, OracleResult, ORACLE_CAP};
pub use spec::{PackingConstraint, Params, ProblemKind, ProblemSpec, FORMAT_VERSION};
