//! Level-`r` Lasserre moment relaxations of labeling instances and the
//! moment algebra around them (indexing, validation, marginals, conditioning).

mod build;
mod index;
mod instance;
mod moments;

pub use build::{build_sdp, build_sdp_with_cap, Relaxation};
pub use index::{
    assignments_up_to, build_index, build_index_with_cap, index_len, AssignmentIndex,
    MomentIndex, DEFAULT_INDEX_CAP,
};
pub use instance::{GlobalConstraint, LabelingInstance, Relation, Sense, Term};
pub use moments::{MomentMatrix, Tolerances, ValidationReport, Violation, ViolationClass};
