//! Flat `key = value` rendering of summaries.

use std::fmt::Write;

use crate::metrics::{SummaryMetrics, WindowMetrics};

fn policy_name(w: &WindowMetrics) -> &'static str {
    w.policy.map_or("mixed", |p| p.as_str())
}

fn window_lines(out: &mut String, prefix: &str, w: &WindowMetrics, per_sm: bool) {
    let _ = writeln!(out, "{prefix}t0 = {}", w.t0);
    let _ = writeln!(out, "{prefix}t1 = {}", w.t1);
    let _ = writeln!(out, "{prefix}policy = {}", policy_name(w));
    let _ = writeln!(out, "{prefix}samples = {}", w.samples);
    let _ = writeln!(out, "{prefix}f_s_mean_hz = {}", w.f_s_mean);
    let _ = writeln!(out, "{prefix}ripple_max_pct = {}", w.max_ripple_pct());
    let _ = writeln!(out, "{prefix}i_z_max_ratio = {}", w.max_i_z_ratio());
    let _ = writeln!(out, "{prefix}tracking_rmse_max_pct = {}", w.max_tracking_rmse_pct());
    let _ = writeln!(out, "{prefix}p_ac_w = {}", w.p_ac);
    let _ = writeln!(out, "{prefix}p_dc_w = {}", w.p_dc);
    for ph in &w.phases {
        let p = format!("{prefix}phase.{}.", ph.phase);
        let _ = writeln!(out, "{p}f_s_upper_hz = {}", ph.f_s_upper);
        let _ = writeln!(out, "{p}f_s_lower_hz = {}", ph.f_s_lower);
        let _ = writeln!(out, "{p}f_s_mean_hz = {}", ph.f_s_mean);
        let _ = writeln!(out, "{p}i_z_max_ratio = {}", ph.i_z_max_ratio);
        let _ = writeln!(out, "{p}tracking_rmse_pct = {}", ph.tracking_rmse_pct);
        if per_sm {
            for (k, (f, r)) in ph.f_s.iter().zip(&ph.ripple_pct).enumerate() {
                let _ = writeln!(out, "{p}sm{:02}.f_s_hz = {f}", k + 1);
                let _ = writeln!(out, "{p}sm{:02}.ripple_pct = {r}", k + 1);
            }
        }
    }
}

/// Aggregate window with per-submodule detail, then one block per segment.
pub fn render(summary: &SummaryMetrics) -> String {
    let mut out = String::new();
    window_lines(&mut out, "", &summary.aggregate, true);
    for (k, seg) in summary.segments.iter().enumerate() {
        window_lines(&mut out, &format!("segment.{k:03}."), seg, false);
    }
    out
}
