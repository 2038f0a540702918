//! Deterministic recovery-error bounds and the inequality oracles behind them.
//!
//! The vector side bounds how far any suitably sparse, data-consistent
//! candidate can sit from the true sparse solution of an underdetermined
//! system; the matrix side does the same for low-rank recovery under a
//! linear measurement operator. Every bound is a closed-form expression in
//! a handful of spectral constants, so each evaluation function takes the
//! constants as [`crate::spectral::SpectralCertificate`] values and lets the
//! certificate mode decide whether the result is certified or estimate-only.

pub mod matrix;
pub mod vector;

/// Both sides of an evaluated inequality plus the verdict.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// lhs <= rhs up to 1e-12 relative slack on the right side.
    pub holds: bool,
    /// True when every constant entering `rhs` is certified (exact or
    /// analytic), so `holds == false` is a genuine counterexample rather
    /// than an artifact of an estimated constant.
    pub certified: bool,
}

impl InequalityCheck {
    pub(crate) fn evaluate(lhs: f64, rhs: f64, certified: bool) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + 1e-12),
            certified,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_uses_relative_slack() {
        assert!(InequalityCheck::evaluate(1.0, 1.0, true).holds);
        assert!(InequalityCheck::evaluate(0.0, 0.0, true).holds);
        // One part in 1e13 over the line still passes; one in 1e11 does not.
        assert!(InequalityCheck::evaluate(1.0 + 1e-13, 1.0, true).holds);
        assert!(!InequalityCheck::evaluate(1.0 + 1e-11, 1.0, true).holds);
        let c = InequalityCheck::evaluate(2.0, 1.0, false);
        assert!(!c.holds);
        assert!(!c.certified);
    }
}
