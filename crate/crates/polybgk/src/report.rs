//! Machine-readable verification results.

use serde::Serialize;

/// One verification check over a batch of sample fields.
///
/// `worst_margin` is the largest violation seen across the batch, measured in
/// whatever units the check defines (always normalized so that zero means
/// exact agreement). `pass` is `worst_margin <= tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(check: impl Into<String>, samples: usize, worst_margin: f64, tolerance: f64) -> Self {
        CheckResult {
            check: check.into(),
            samples,
            worst_margin,
            tolerance,
            pass: worst_margin <= tolerance,
        }
    }
}
