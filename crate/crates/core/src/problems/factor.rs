use serde::{Deserialize, Serialize};

use crate::embed::SpectralReport;

use super::spec::ProblemSpec;

/// Label attached to every predicted factor shown to users.
pub const FACTOR_NOTE: &str = "indicative, constants unverified";

const FACTOR_CONSTANT: f64 = 2.0;

/// Display value `1 + 2 / lambda_{r+1}` for cut-type kinds. When
/// `lambda_{r+1}` is zero the factor is infinite: `factor` is `None` and
/// `infinite` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedFactor {
    pub lambda: f64,
    pub factor: Option<f64>,
    pub infinite: bool,
    pub note: String,
}

impl PredictedFactor {
    pub fn is_infinite(&self) -> bool {
        self.infinite
    }

    /// The factor as a float, `inf` when infinite.
    pub fn value(&self) -> f64 {
        self.factor.unwrap_or(f64::INFINITY)
    }
}

pub fn predicted_factor(spec: &ProblemSpec, r: usize, spectrum: &SpectralReport) -> Option<PredictedFactor> {
    if !spec.kind.is_cut_spectral() {
        return None;
    }
    let lambda = spectrum.lambda(r + 1)?;
    let factor = (lambda > 1e-12).then(|| 1.0 + FACTOR_CONSTANT / lambda);
    Some(PredictedFactor {
        lambda,
        infinite: factor.is_none(),
        factor,
        note: FACTOR_NOTE.to_string(),
    })
}
