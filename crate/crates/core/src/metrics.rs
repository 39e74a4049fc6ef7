//! Evaluation quantities computed from recorded time series.
//!
//! Windows are half-open on the left: a sample at time `t` belongs to
//! `(t0, t1]`. That keeps transition counts additive over any partition.
//!
//! [`MetricsCollector`] consumes [`Row`]s one at a time and is the only path
//! used for run summaries, so feeding it the rows of a CSV written at
//! decimation 1 reproduces the in-memory summary exactly.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::controller::SortPolicy;
use crate::error::{Error, Result};
use crate::io::sink::{PhaseLabel, Row};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    pub t0: T,
    pub t1: T,
}

impl<T: Scalar> Window<T> {
    pub fn new(t0: T, t1: T) -> Self {
        Window { t0, t1 }
    }

    pub fn contains(&self, t: T) -> bool {
        t > self.t0 && t <= self.t1
    }

    fn check(&self, metric: &'static str) -> Result<()> {
        if self.t1 > self.t0 {
            Ok(())
        } else {
            Err(Error::UndefinedMetric {
                metric,
                reason: format!("empty window ({}, {}]", self.t0, self.t1),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub value: T,
}

/// Status history of one submodule.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchTrace<T> {
    pub initial: bool,
    /// `(time, new_status)`; consecutive statuses differ, times non-decreasing.
    pub events: Vec<(T, bool)>,
}

impl<T: Scalar> SwitchTrace<T> {
    pub fn new(initial: bool) -> Self {
        SwitchTrace {
            initial,
            events: Vec::new(),
        }
    }

    pub fn current(&self) -> bool {
        self.events.last().map_or(self.initial, |&(_, s)| s)
    }

    /// Records the status observed at `t`; only changes are stored.
    pub fn observe(&mut self, t: T, status: bool) -> Result<()> {
        if let Some(&(last, _)) = self.events.last() {
            if t < last {
                return Err(Error::Contract(format!("trace time {t} precedes {last}")));
            }
        }
        if status != self.current() {
            self.events.push((t, status));
        }
        Ok(())
    }

    pub fn from_samples(samples: &[(T, bool)]) -> Result<Self> {
        let mut it = samples.iter();
        let mut trace = SwitchTrace::new(it.next().is_some_and(|&(_, s)| s));
        for &(t, s) in it {
            trace.observe(t, s)?;
        }
        Ok(trace)
    }

    pub fn transitions_in(&self, window: Window<T>) -> usize {
        self.events.iter().filter(|(t, _)| window.contains(*t)).count()
    }
}

/// Switching cycles per second: transitions in the window over twice its length.
pub fn effective_switching_frequency<T: Scalar>(trace: &SwitchTrace<T>, window: Window<T>) -> Result<T> {
    window.check("effective_switching_frequency")?;
    let count = T::from_count(trace.transitions_in(window));
    Ok(count / (T::lit(2.0) * (window.t1 - window.t0)))
}

fn in_window<T: Scalar>(series: &[Sample<T>], window: Window<T>) -> impl Iterator<Item = T> + '_ {
    series.iter().filter(move |s| window.contains(s.t)).map(|s| s.value)
}

/// Peak-to-peak excursion as a percentage of `nominal`.
pub fn ripple_percent<T: Scalar>(series: &[Sample<T>], nominal: T, window: Window<T>) -> Result<T> {
    window.check("ripple_percent")?;
    if !(nominal > T::zero()) {
        return Err(Error::Contract(format!("nominal must be > 0, got {nominal}")));
    }
    let (lo, hi) = in_window(series, window).fold((None, None), |(lo, hi): (Option<T>, Option<T>), v| {
        (Some(lo.map_or(v, |l| l.min(v))), Some(hi.map_or(v, |h| h.max(v))))
    });
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(T::lit(100.0) * (hi - lo) / nominal),
        _ => Err(Error::UndefinedMetric {
            metric: "ripple_percent",
            reason: "no samples in window".into(),
        }),
    }
}

/// `max|i_z| / max|i|` over the window.
pub fn circulating_ratio<T: Scalar>(i_z: &[Sample<T>], i: &[Sample<T>], window: Window<T>) -> Result<T> {
    window.check("circulating_ratio")?;
    let max_abs = |s: &[Sample<T>]| in_window(s, window).fold(T::zero(), |m, v| m.max(v.abs()));
    let amplitude = max_abs(i);
    if amplitude == T::zero() {
        return Err(Error::UndefinedMetric {
            metric: "circulating_ratio",
            reason: "AC current amplitude is zero".into(),
        });
    }
    Ok(max_abs(i_z) / amplitude)
}

/// RMS of `i - i_ref` as a percentage of the reference amplitude `max|i_ref|`.
pub fn tracking_rmse<T: Scalar>(i: &[Sample<T>], i_ref: &[Sample<T>], window: Window<T>) -> Result<T> {
    window.check("tracking_rmse")?;
    if i.len() != i_ref.len() || i.iter().zip(i_ref).any(|(a, b)| a.t != b.t) {
        return Err(Error::Contract("i and i_ref are not on the same time grid".into()));
    }
    let mut sum_sq = T::zero();
    let mut count = 0usize;
    let mut amplitude = T::zero();
    for (a, b) in i.iter().zip(i_ref).filter(|(a, _)| window.contains(a.t)) {
        let e = a.value - b.value;
        sum_sq = sum_sq + e * e;
        amplitude = amplitude.max(b.value.abs());
        count += 1;
    }
    if count == 0 || amplitude == T::zero() {
        return Err(Error::UndefinedMetric {
            metric: "tracking_rmse",
            reason: "no samples or zero reference amplitude".into(),
        });
    }
    Ok(T::lit(100.0) * (sum_sq / T::from_count(count)).sqrt() / amplitude)
}

/// Results for one phase leg over one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMetrics {
    pub phase: String,
    /// Per submodule, upper arm then lower arm (hertz).
    pub f_s: Vec<f64>,
    pub f_s_upper: f64,
    pub f_s_lower: f64,
    pub f_s_mean: f64,
    /// Per submodule peak-to-peak ripple (percent of nominal).
    pub ripple_pct: Vec<f64>,
    pub i_z_max_ratio: f64,
    pub tracking_rmse_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowMetrics {
    pub t0: f64,
    pub t1: f64,
    /// Policy active on every sample, `None` if it changed inside the window.
    pub policy: Option<SortPolicy>,
    pub samples: usize,
    pub phases: Vec<PhaseMetrics>,
    /// Mean over every monitored submodule.
    pub f_s_mean: f64,
    /// Mean AC terminal power of converter 1 (watt).
    pub p_ac: f64,
    /// Mean DC power into converter 1 (watt).
    pub p_dc: f64,
}

impl WindowMetrics {
    pub fn max_ripple_pct(&self) -> f64 {
        self.phases
            .iter()
            .flat_map(|p| p.ripple_pct.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn max_i_z_ratio(&self) -> f64 {
        self.phases.iter().map(|p| p.i_z_max_ratio).fold(0.0, f64::max)
    }

    pub fn max_tracking_rmse_pct(&self) -> f64 {
        self.phases.iter().map(|p| p.tracking_rmse_pct).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryMetrics {
    /// Analysis window (after settling).
    pub aggregate: WindowMetrics,
    /// Tumbling segments from t = 0.
    pub segments: Vec<WindowMetrics>,
}

impl SummaryMetrics {
    /// Segments lying entirely inside the analysis window.
    pub fn steady_segments(&self) -> impl Iterator<Item = &WindowMetrics> {
        let (t0, t1) = (self.aggregate.t0, self.aggregate.t1);
        self.segments
            .iter()
            .filter(move |s| s.t0 >= t0 - 1e-12 && s.t1 <= t1 + 1e-12 && s.samples > 0)
    }

    /// Largest per-segment ripple of any submodule in the steady segments.
    pub fn steady_ripple_pct(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for seg in self.steady_segments() {
            let all: Vec<f64> = seg.phases.iter().flat_map(|p| p.ripple_pct.iter().copied()).collect();
            if out.is_empty() {
                out = all;
            } else {
                for (o, v) in out.iter_mut().zip(all) {
                    *o = o.max(v);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct PhaseAcc {
    transitions: Vec<usize>,
    v_min: Vec<f64>,
    v_max: Vec<f64>,
    max_abs_i_z: f64,
    max_abs_i: f64,
    max_abs_i_ref: f64,
    sum_sq_err: f64,
    count: usize,
}

impl PhaseAcc {
    fn new(m: usize) -> Self {
        PhaseAcc {
            transitions: vec![0; m],
            v_min: vec![f64::INFINITY; m],
            v_max: vec![f64::NEG_INFINITY; m],
            max_abs_i_z: 0.0,
            max_abs_i: 0.0,
            max_abs_i_ref: 0.0,
            sum_sq_err: 0.0,
            count: 0,
        }
    }

    fn add(&mut self, row: &Row, changed: &[bool]) {
        for (k, &c) in changed.iter().enumerate() {
            self.transitions[k] += c as usize;
            self.v_min[k] = self.v_min[k].min(row.v_c[k]);
            self.v_max[k] = self.v_max[k].max(row.v_c[k]);
        }
        self.max_abs_i_z = self.max_abs_i_z.max(row.i_z.abs());
        self.max_abs_i = self.max_abs_i.max(row.i.abs());
        self.max_abs_i_ref = self.max_abs_i_ref.max(row.i_ref.abs());
        let e = row.i - row.i_ref;
        self.sum_sq_err += e * e;
        self.count += 1;
    }

    fn finish(&self, label: PhaseLabel, duration: f64, nominal: f64) -> PhaseMetrics {
        let m = self.transitions.len();
        let f_s: Vec<f64> = if duration > 0.0 {
            self.transitions.iter().map(|&c| c as f64 / (2.0 * duration)).collect()
        } else {
            vec![0.0; m]
        };
        let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let ripple_pct = self
            .v_min
            .iter()
            .zip(&self.v_max)
            .map(|(&lo, &hi)| if self.count > 0 { 100.0 * (hi - lo) / nominal } else { 0.0 })
            .collect();
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        PhaseMetrics {
            phase: label.to_string(),
            f_s_upper: mean(&f_s[..m / 2]),
            f_s_lower: mean(&f_s[m / 2..]),
            f_s_mean: mean(&f_s),
            f_s,
            ripple_pct,
            i_z_max_ratio: ratio(self.max_abs_i_z, self.max_abs_i),
            tracking_rmse_pct: if self.count > 0 {
                ratio(100.0 * (self.sum_sq_err / self.count as f64).sqrt(), self.max_abs_i_ref)
            } else {
                0.0
            },
        }
    }
}

#[derive(Debug, Clone)]
struct WindowAcc {
    window: Window<f64>,
    policy: Option<Option<SortPolicy>>,
    phases: BTreeMap<PhaseLabel, PhaseAcc>,
    p_ac_sum: f64,
    p_dc_sum: f64,
    times: usize,
    last_t: f64,
}

impl WindowAcc {
    fn new(window: Window<f64>) -> Self {
        WindowAcc {
            window,
            policy: None,
            phases: BTreeMap::new(),
            p_ac_sum: 0.0,
            p_dc_sum: 0.0,
            times: 0,
            last_t: window.t0,
        }
    }

    fn add(&mut self, row: &Row, changed: &[bool], first_label: PhaseLabel) {
        self.policy = Some(match self.policy {
            None => Some(row.policy),
            Some(Some(p)) if p == row.policy => Some(p),
            Some(_) => None,
        });
        self.phases
            .entry(row.phase)
            .or_insert_with(|| PhaseAcc::new(row.v_c.len()))
            .add(row, changed);
        self.p_ac_sum += (row.v_low - row.v_up) / 2.0 * row.i;
        if row.phase == first_label {
            self.p_dc_sum += row.v_dc_link * row.i_dc_link;
            self.times += 1;
        }
        self.last_t = row.t;
    }

    fn finish(&self, t1: f64, nominal: f64) -> WindowMetrics {
        let duration = t1 - self.window.t0;
        let phases: Vec<PhaseMetrics> = self
            .phases
            .iter()
            .map(|(label, acc)| acc.finish(*label, duration, nominal))
            .collect();
        let all_fs: Vec<f64> = phases.iter().flat_map(|p| p.f_s.iter().copied()).collect();
        let per_time = |sum: f64| if self.times > 0 { sum / self.times as f64 } else { 0.0 };
        WindowMetrics {
            t0: self.window.t0,
            t1,
            policy: self.policy.flatten(),
            samples: self.times,
            f_s_mean: if all_fs.is_empty() { 0.0 } else { all_fs.iter().sum::<f64>() / all_fs.len() as f64 },
            phases,
            p_ac: per_time(self.p_ac_sum),
            p_dc: per_time(self.p_dc_sum),
        }
    }
}

/// Streaming summary over converter-1 rows.
#[derive(Debug, Clone)]
pub struct MetricsCollector {
    nominal: f64,
    segment: f64,
    aggregate: WindowAcc,
    segments: Vec<WindowAcc>,
    previous: BTreeMap<PhaseLabel, Vec<bool>>,
    first_label: PhaseLabel,
    last_t: Option<f64>,
}

impl MetricsCollector {
    /// `nominal` is the capacitor reference for ripple; rows with `t` in
    /// `analysis` feed the aggregate; `segment` sets the tumbling length.
    pub fn new(nominal: f64, analysis: Window<f64>, segment: f64) -> Result<Self> {
        if !(nominal > 0.0) {
            return Err(Error::field("nominal", "must be > 0"));
        }
        if !(segment > 0.0) {
            return Err(Error::field("segment", "must be > 0"));
        }
        Ok(MetricsCollector {
            nominal,
            segment,
            aggregate: WindowAcc::new(analysis),
            segments: Vec::new(),
            previous: BTreeMap::new(),
            first_label: PhaseLabel::new(1, 0),
            last_t: None,
        })
    }

    fn segment_index(&self, t: f64) -> usize {
        let x = t / self.segment;
        let r = x.round();
        let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
        (k as usize).saturating_sub(1)
    }

    pub fn observe(&mut self, row: &Row) {
        if row.phase.mmc != 1 {
            return;
        }
        let changed: Vec<bool> = match self.previous.get(&row.phase) {
            Some(prev) => prev.iter().zip(&row.u).map(|(a, b)| a != b).collect(),
            None => vec![false; row.u.len()],
        };
        self.previous.insert(row.phase, row.u.clone());

        let idx = self.segment_index(row.t);
        while self.segments.len() <= idx {
            let k = self.segments.len() as f64;
            self.segments.push(WindowAcc::new(Window::new(k * self.segment, (k + 1.0) * self.segment)));
        }
        self.segments[idx].add(row, &changed, self.first_label);
        if self.aggregate.window.contains(row.t) {
            self.aggregate.add(row, &changed, self.first_label);
        }
        self.last_t = Some(row.t);
    }

    pub fn finish(&self) -> SummaryMetrics {
        let end = self.last_t.unwrap_or(0.0);
        let agg_t1 = self.aggregate.window.t1.min(end).max(self.aggregate.window.t0);
        SummaryMetrics {
            aggregate: self.aggregate.finish(agg_t1, self.nominal),
            segments: self
                .segments
                .iter()
                .map(|s| s.finish(s.window.t1.min(end), self.nominal))
                .collect(),
        }
    }
}

/// Recomputes a summary from stored rows.
pub fn summarize_rows(rows: &[Row], nominal: f64, analysis: Window<f64>, segment: f64) -> Result<SummaryMetrics> {
    let mut collector = MetricsCollector::new(nominal, analysis, segment)?;
    for row in rows {
        collector.observe(row);
    }
    Ok(collector.finish())
}
