use serde::{Deserialize, Serialize};

use super::{from_db, to_db, AnalysisError, Result};

/// Removes the LO-independent electronic floor from a noise level measured
/// relative to the pump-off (shot + electronic) reference.
///
/// `clearance` is the linear ratio of that reference to the electronic floor
/// alone; an infinite clearance leaves the level unchanged.
pub fn correct_electronic(raw_db: f64, clearance: f64) -> Result<f64> {
    if !(clearance > 1.0) {
        return Err(AnalysisError::Domain(format!(
            "clearance must exceed 1, got {clearance}"
        )));
    }
    if clearance.is_infinite() {
        return Ok(raw_db);
    }
    let e = clearance.recip();
    let r = from_db(raw_db);
    if r <= e {
        return Err(AnalysisError::Unphysical {
            raw_db,
            electronic_fraction: e,
        });
    }
    to_db((r - e) / (1.0 - e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeResult {
    pub raw_sq_db: f64,
    pub raw_asq_db: f64,
    pub corrected_sq_db: f64,
    pub corrected_asq_db: f64,
    /// Shot-plus-electronic to electronic ratio at the measurement LO power.
    pub clearance: f64,
}

impl SqueezeResult {
    pub fn from_raw(raw_sq_db: f64, raw_asq_db: f64, clearance: f64) -> Result<Self> {
        Ok(Self {
            raw_sq_db,
            raw_asq_db,
            corrected_sq_db: correct_electronic(raw_sq_db, clearance)?,
            corrected_asq_db: correct_electronic(raw_asq_db, clearance)?,
            clearance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Oracle: electronic fraction that maps a raw linear level onto a
    /// corrected one, solved from (r - e) / (1 - e) = c.
    fn fraction_for(raw_db: f64, corrected_db: f64) -> f64 {
        let r = 10f64.powf(raw_db / 10.0);
        let c = 10f64.powf(corrected_db / 10.0);
        (r - c) / (1.0 - c)
    }

    #[test]
    fn oracle_reproduces_reported_pair() {
        let e = fraction_for(-1.0, -1.6);
        assert!((e - 0.3326).abs() < 5e-4, "{e}");
        assert!((1.0 / e - 3.006).abs() < 5e-3);
    }

    #[test]
    fn examples() {
        let c = correct_electronic(-1.0, 3.006).unwrap();
        assert!((c + 1.6).abs() < 0.005, "{c}");
        let a = correct_electronic(1.2, 3.006).unwrap();
        assert!((a - 1.69).abs() < 0.01, "{a}");
        assert_eq!(correct_electronic(-0.7, f64::INFINITY).unwrap(), -0.7);
    }

    #[test]
    fn same_fraction_maps_both_reported_pairs() {
        let e = fraction_for(-1.0, -1.6);
        let a = correct_electronic(1.2, e.recip()).unwrap();
        assert!((a - 1.69).abs() <= 0.01, "{a}");
    }

    #[test]
    fn rejects_levels_below_the_electronic_floor() {
        assert!(matches!(
            correct_electronic(-6.0, 3.0),
            Err(AnalysisError::Unphysical { .. })
        ));
        assert!(correct_electronic(-1.0, 1.0).is_err());
        assert!(correct_electronic(-1.0, 0.5).is_err());
    }

    #[test]
    fn squeeze_result_corrects_both_quadratures() {
        let r = SqueezeResult::from_raw(-1.0, 1.2, 3.006).unwrap();
        assert!(r.corrected_sq_db.abs() >= r.raw_sq_db.abs());
        assert!(r.corrected_asq_db >= r.raw_asq_db);
    }

    proptest! {
        #[test]
        fn monotone_in_raw(a in -3.0..3.0f64, b in -3.0..3.0f64, c in 1.5..100.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if let (Ok(x), Ok(y)) = (correct_electronic(lo, c), correct_electronic(hi, c)) {
                prop_assert!(x <= y + 1e-12);
            }
        }

        #[test]
        fn approaches_identity(raw in -3.0..3.0f64) {
            let near = correct_electronic(raw, 1e9).unwrap();
            prop_assert!((near - raw).abs() < 1e-7);
        }

        #[test]
        fn enhances_squeezing_depth(raw in -2.5..-0.01f64, c in 3.0..1e6f64) {
            let corrected = correct_electronic(raw, c).unwrap();
            prop_assert!(corrected <= raw);
        }
    }
}
