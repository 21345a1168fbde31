use serde::Serialize;

/// Precision, recall and their F-measure for one candidate/reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    /// Set when an empty side made the score undefined and zeros were reported.
    pub degenerate: bool,
}

impl ScoreTriple {
    pub fn new(precision: f64, recall: f64, f: f64) -> Self {
        Self {
            precision,
            recall,
            f,
            degenerate: false,
        }
    }

    pub fn degenerate() -> Self {
        Self {
            precision: 0.0,
            recall: 0.0,
            f: 0.0,
            degenerate: true,
        }
    }

    /// Builds the triple with `f = (1+β²)PR / (R + β²P)`.
    pub fn from_pr(precision: f64, recall: f64, beta: f64) -> Self {
        Self::new(precision, recall, f_measure(precision, recall, beta))
    }

    /// Each component clamped to `[0, 1]`.
    pub fn clamped(&self) -> Self {
        Self {
            precision: self.precision.clamp(0.0, 1.0),
            recall: self.recall.clamp(0.0, 1.0),
            f: self.f.clamp(0.0, 1.0),
            degenerate: self.degenerate,
        }
    }
}

pub fn f_measure(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = recall + b2 * precision;
    if precision == 0.0 || recall == 0.0 || denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}
