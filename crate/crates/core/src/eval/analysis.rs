use crate::error::{Error, Result};
use crate::model::{ForwardTrace, PathSet};
use crate::numcore::Tensor2D;

use super::srocc;

fn is_constant(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

/// Mean over trials of the mean over paths of `|srocc(S_m * W_m, x[:, channel])|`.
///
/// Paths outside `paths` or missing from a trace are skipped. The proxy
/// path is dropped from a trial's average when its weighted score sequence
/// is constant; other constant sequences count as 0.
pub fn correlation_analysis(
    traces: &[ForwardTrace],
    features: &[&Tensor2D],
    channel: usize,
    paths: &PathSet,
) -> Result<f64> {
    if traces.len() != features.len() {
        return Err(Error::Usage(format!(
            "{} traces but {} feature sequences",
            traces.len(),
            features.len()
        )));
    }
    if traces.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (trace, x) in traces.iter().zip(features) {
        if channel >= x.cols() {
            return Err(Error::Usage(format!(
                "channel {channel} out of range for {} channels",
                x.cols()
            )));
        }
        if x.rows() != trace.len() {
            return Err(Error::Usage(format!(
                "trace length {} vs feature length {}",
                trace.len(),
                x.rows()
            )));
        }
        let column = x.channel(channel);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (id, p) in &trace.paths {
            if !paths.contains(*id) {
                continue;
            }
            let ws = p.weighted_scores();
            if id.is_proxy() && is_constant(&ws) {
                continue;
            }
            count += 1;
            if ws.len() >= 2 {
                sum += srocc(&ws, &column)?.rho.abs();
            }
        }
        if count > 0 {
            total += sum / count as f64;
        }
    }
    Ok(total / traces.len() as f64)
}
