//! Per-round regret traces as plot-ready CSV.

use std::fs;
use std::path::Path;

use crate::diagnostics::Trajectory;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "t,seed,action_index,y,instant_regret,cum_regret,u_sq,beta,delta,contained";

/// `%.12g`: 12 significant digits, trailing zeros trimmed, exponent form
/// outside `[1e-4, 1e12)`.
pub fn format_g12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Renders the traces, ordered by seed and then round.
pub fn regret_csv(traces: &[&Trajectory]) -> Result<String> {
    if let Some(first) = traces.first() {
        if traces.iter().any(|t| t.horizon() != first.horizon()) {
            return Err(Error::invalid("traces must share a horizon"));
        }
    }
    let mut ordered: Vec<&Trajectory> = traces.to_vec();
    ordered.sort_by_key(|t| t.seed);

    let mut out =
        String::with_capacity(64 + 96 * ordered.iter().map(|t| t.steps.len()).sum::<usize>());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for traj in ordered {
        let mut cum = 0.0;
        for s in &traj.steps {
            cum += s.instant_regret;
            let row = [
                s.t.to_string(),
                traj.seed.to_string(),
                s.action_index.to_string(),
                format_g12(s.y),
                format_g12(s.instant_regret),
                format_g12(cum),
                format_g12(s.u_sq),
                format_g12(s.beta),
                format_g12(s.delta),
                u8::from(s.contained).to_string(),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn emit_regret_csv(traces: &[&Trajectory], path: &Path) -> Result<()> {
    let text = regret_csv(traces)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
