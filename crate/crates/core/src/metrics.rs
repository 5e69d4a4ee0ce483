//! Energy accuracy of a generated trajectory against a reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1 − |E_gen − E_ref| / E_ref.
pub fn accuracy(e_gen: f64, e_ref: f64) -> Result<f64> {
    if !(e_ref > 0.0) || !e_gen.is_finite() {
        return Err(Error::contract(format!("accuracy needs a positive reference energy, got {e_ref} (generated {e_gen})")));
    }
    Ok(1.0 - (e_gen - e_ref).abs() / e_ref)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub e_generated: f64,
    pub e_reference: f64,
    pub ra: f64,
}

impl AccuracyReport {
    pub fn new(e_generated: f64, e_reference: f64) -> Result<Self> {
        Ok(AccuracyReport { e_generated, e_reference, ra: accuracy(e_generated, e_reference)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_energies() {
        // 1 − 47/1693 and 1 − 66/1693
        assert!((accuracy(1740.0, 1693.0).unwrap() - 1646.0 / 1693.0).abs() < 1e-15);
        assert_eq!((accuracy(1740.0, 1693.0).unwrap() * 1000.0).round() / 1000.0, 0.972);
        assert_eq!((accuracy(1759.0, 1693.0).unwrap() * 1000.0).round() / 1000.0, 0.961);
        assert!((accuracy(1759.0, 1693.0).unwrap() - 0.9610159480212640).abs() < 1e-15);
        assert_eq!(accuracy(1693.0, 1693.0).unwrap(), 1.0);
        assert_eq!(accuracy(1646.0, 1693.0).unwrap(), accuracy(1740.0, 1693.0).unwrap());
        assert!(accuracy(10.0, 0.0).is_err());
        assert!(accuracy(f64::NAN, 1.0).is_err());
    }
}
