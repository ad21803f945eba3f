use serde::{Deserialize, Serialize};

use super::FlowTrace;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub holds: bool,
    /// max over rows of |ln(d(s)/d(0))| / (C·L·|s|).
    pub max_ratio: f64,
    pub violation_index: Option<usize>,
    pub rows_checked: usize,
}

/// Checks d(0)e^{−CL|s|}(1−slack) ≤ d(s) ≤ d(0)e^{CL|s|}(1+slack) on every row.
pub fn distance_monitor(trace: &FlowTrace, cl: f64, slack: f64) -> EnvelopeReport {
    let d0 = trace.rows.first().map_or(0.0, |r| r.d_omega);
    let mut report = EnvelopeReport { holds: true, max_ratio: 0.0, violation_index: None, rows_checked: trace.rows.len() };
    for (i, r) in trace.rows.iter().enumerate() {
        let s = r.s.abs();
        let ok = if d0 == 0.0 {
            r.d_omega == 0.0
        } else {
            let g = (cl * s).exp();
            r.d_omega <= d0 * g * (1.0 + slack) && r.d_omega >= d0 / g * (1.0 - slack)
        };
        if d0 > 0.0 && r.d_omega > 0.0 && s > 0.0 {
            let ratio = (r.d_omega / d0).ln().abs() / (cl * s);
            if ratio.is_finite() {
                report.max_ratio = report.max_ratio.max(ratio);
            }
        }
        if !ok && report.holds {
            report.holds = false;
            report.violation_index = Some(i);
        }
    }
    report
}
