use crate::error::{Error, Result};
use crate::numcore::Tensor2D;

/// Row indices kept when decimating `len` rows from `source` to `target` rate.
pub fn decimation_indices(len: usize, source: f64, target: f64) -> Result<Vec<usize>> {
    if !(target > 0.0) || !(source > 0.0) {
        return Err(Error::Config(format!(
            "sampling rates must be positive, got {source} -> {target}"
        )));
    }
    if target > source {
        return Err(Error::Config(format!(
            "cannot upsample from {source} to {target}"
        )));
    }
    let ratio = source / target;
    let mut out = Vec::new();
    for i in 0.. {
        let idx = (i as f64 * ratio).round() as usize;
        if idx >= len {
            break;
        }
        out.push(idx);
    }
    Ok(out)
}

/// Nearest-index decimation: keeps rows `round(i * source / target)`.
///
/// Every channel is decimated the same way; probabilities are not averaged.
pub fn resample(x: &Tensor2D, source: f64, target: f64) -> Result<Tensor2D> {
    let idx = decimation_indices(x.rows(), source, target)?;
    Ok(x.select_rows(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_rates_identity() {
        let x = Tensor2D::from_vec(5, 2, (0..10).map(f64::from).collect()).unwrap();
        assert_eq!(resample(&x, 5.0, 5.0).unwrap(), x);
    }

    #[test]
    fn halving_keeps_even_rows() {
        let x = Tensor2D::column(&(0..10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(
            resample(&x, 10.0, 5.0).unwrap().data(),
            &[0.0, 2.0, 4.0, 6.0, 8.0]
        );
    }

    #[test]
    fn long_video_to_half_fps() {
        // index-set oracle: the kept rows are exactly the multiples of 50 below L
        for len in [299_000usize, 299_001, 299_049, 299_050] {
            let idx = decimation_indices(len, 25.0, 0.5).unwrap();
            let oracle: Vec<usize> = (0..len).filter(|i| i % 50 == 0).collect();
            assert_eq!(idx, oracle);
            assert_eq!(idx.len(), len.div_ceil(50));
        }
    }

    #[test]
    fn bad_rates() {
        let x = Tensor2D::zeros(3, 1);
        assert!(matches!(resample(&x, 5.0, 0.0), Err(Error::Config(_))));
        assert!(matches!(resample(&x, 5.0, -1.0), Err(Error::Config(_))));
        assert!(matches!(resample(&x, 5.0, 10.0), Err(Error::Config(_))));
    }
}
