use crate::error::{Error, Result};

fn check_range(range: (f64, f64)) -> Result<()> {
    if !(range.0 < range.1) || !range.0.is_finite() || !range.1.is_finite() {
        return Err(Error::Data(format!("invalid rating range {range:?}")));
    }
    Ok(())
}

/// Maps a global rating score onto `[0, 1]` within its range.
pub fn normalize_grs(grs: f64, range: (f64, f64)) -> Result<f64> {
    check_range(range)?;
    if !(range.0..=range.1).contains(&grs) {
        return Err(Error::Data(format!("rating {grs} outside range {range:?}")));
    }
    Ok((grs - range.0) / (range.1 - range.0))
}

pub fn denormalize_grs(y: f64, range: (f64, f64)) -> Result<f64> {
    check_range(range)?;
    Ok(range.0 + y * (range.1 - range.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(normalize_grs(6.0, (6.0, 30.0)).unwrap(), 0.0);
        assert_eq!(normalize_grs(30.0, (6.0, 30.0)).unwrap(), 1.0);
        assert_eq!(normalize_grs(21.0, (7.0, 35.0)).unwrap(), 0.5);
        assert!(normalize_grs(31.0, (6.0, 30.0)).is_err());
        assert!(normalize_grs(10.0, (30.0, 6.0)).is_err());
    }

    proptest! {
        #[test]
        fn compose_to_identity(lo in -50.0f64..50.0, width in 0.5f64..100.0, frac in 0.0f64..=1.0) {
            let range = (lo, lo + width);
            let g = lo + frac * width;
            let back = denormalize_grs(normalize_grs(g, range).unwrap(), range).unwrap();
            prop_assert!((back - g).abs() < 1e-12);
        }
    }
}
