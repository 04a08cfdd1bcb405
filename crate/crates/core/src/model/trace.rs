use std::io::{self, Write};

use super::ForwardTrace;

/// Writes `t,path,score,weight,weighted_score` rows, one per path and time step.
pub fn write_trace_csv<W: Write>(trace: &ForwardTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "t,path,score,weight,weighted_score")?;
    for (id, p) in &trace.paths {
        for t in 0..p.scores.rows() {
            let s = p.scores.data()[t];
            let w = p.weights.data()[t];
            writeln!(out, "{t},{id},{s},{w},{}", s * w)?;
        }
    }
    Ok(())
}
