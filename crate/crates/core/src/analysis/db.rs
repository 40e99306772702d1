use super::{AnalysisError, Result};

/// `10 log10(x)`; rejects non-positive input.
pub fn to_db(linear: f64) -> Result<f64> {
    if !(linear > 0.0) {
        return Err(AnalysisError::Domain(format!(
            "cannot express {linear} in dB"
        )));
    }
    Ok(10.0 * linear.log10())
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> Result<f64> {
    to_db(mw)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    from_db(dbm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(to_db(1.0).unwrap(), 0.0);
        assert!((to_db(0.6514).unwrap() + 1.862).abs() < 5e-4);
        assert!(to_db(0.0).is_err());
        assert!(to_db(-3.0).is_err());
        assert!((dbm_to_mw(-70.75) - 8.413951e-8).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn round_trip(x in 1e-12..1e12f64) {
            let back = from_db(to_db(x).unwrap());
            prop_assert!((back - x).abs() <= 1e-12 * x);
        }
    }
}
