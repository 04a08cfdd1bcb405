use crate::error::{Error, Result};

/// Spearman correlation with a flag for constant inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Srocc {
    pub rho: f64,
    /// Either input was constant; `rho` is reported as 0.
    pub degenerate: bool,
}

/// Average (fractional) ranks starting at 1; tied values share the mean of
/// the positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean((i+1)..=j)
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rank-order correlation: Pearson correlation of average ranks.
pub fn srocc(a: &[f64], b: &[f64]) -> Result<Srocc> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!(
            "srocc on vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Usage(format!(
            "srocc needs at least 2 points, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Usage("srocc on NaN input".into()));
    }
    Ok(match pearson(&average_ranks(a), &average_ranks(b)) {
        Some(rho) => Srocc {
            rho,
            degenerate: false,
        },
        None => Srocc {
            rho: 0.0,
            degenerate: true,
        },
    })
}

/// Largest magnitude accepted by [`fisher_z_average`] before clamping.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-7;

/// Averages correlations in Fisher z space: `tanh(mean(atanh(r)))`.
pub fn fisher_z_average(rs: &[f64]) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::Usage("fisher z average of no correlations".into()));
    }
    let mut z = 0.0;
    for &r in rs {
        if r.is_nan() {
            return Err(Error::Usage("fisher z average of NaN".into()));
        }
        let c = if r.abs() >= 1.0 {
            log::warn!("correlation {r} clamped to ±{FISHER_CLAMP} for Fisher z averaging");
            r.signum() * FISHER_CLAMP
        } else {
            r
        };
        z += c.atanh();
    }
    Ok((z / rs.len() as f64).tanh())
}
