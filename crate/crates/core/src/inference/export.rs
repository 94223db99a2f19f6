use std::io::Write;

use super::estimate::{MapResult, PosteriorChain, PosteriorSummary};

/// Rows `k,v,accepted` with `accepted` as 0/1.
pub fn write_chain_csv<W: Write>(chain: &PosteriorChain, mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,v,accepted")?;
    for (k, (v, a)) in chain.samples.iter().zip(&chain.accepted).enumerate() {
        writeln!(out, "{k},{v:.16e},{}", *a as u8)?;
    }
    Ok(())
}

/// Rows `iter,v,objective` with the best vertex per iteration.
pub fn write_map_trace_csv<W: Write>(map: &MapResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "iter,v,objective")?;
    for e in &map.trace {
        writeln!(out, "{},{:.16e},{:.16e}", e.iter, e.v, e.objective)?;
    }
    Ok(())
}

/// `key = value` lines; either estimate may be missing.
pub fn write_summary<W: Write>(
    map: Option<&MapResult>,
    chain: Option<(&PosteriorChain, &PosteriorSummary)>,
    mut out: W,
) -> std::io::Result<()> {
    if let Some(m) = map {
        writeln!(out, "map_v = {:.10}", m.v_hat)?;
        writeln!(out, "map_objective = {:.10e}", m.objective)?;
        writeln!(out, "map_iterations = {}", m.iterations)?;
        writeln!(out, "map_converged = {}", m.converged)?;
    }
    if let Some((c, s)) = chain {
        writeln!(out, "pcn_beta = {}", c.beta)?;
        writeln!(out, "pcn_steps = {}", c.samples.len() - 1)?;
        writeln!(out, "pcn_burn_in = {}", c.burn_in)?;
        writeln!(out, "posterior_mean = {:.10}", s.mean)?;
        writeln!(out, "posterior_variance = {:.10e}", s.variance)?;
        writeln!(out, "posterior_std = {:.10e}", s.std_dev)?;
        writeln!(out, "posterior_mcse = {:.10e}", s.mcse)?;
        writeln!(out, "acceptance_rate = {:.6}", s.acceptance_rate)?;
        writeln!(out, "forward_failures = {}", c.forward_failures)?;
        writeln!(
            out,
            "histogram_range = {:.10} {:.10}",
            s.histogram.lo, s.histogram.hi
        )?;
        let counts: Vec<String> = s.histogram.counts.iter().map(|c| c.to_string()).collect();
        writeln!(out, "histogram_counts = {}", counts.join(" "))?;
    }
    Ok(())
}
