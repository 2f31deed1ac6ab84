//! From a guessing-advantage bound δ to privacy parameters.
//!
//! Every event belongs to one group: first events of all cases share the
//! start group (values are start offsets); every other event is grouped by
//! its transition (values are gaps to the predecessor). Values are min–max
//! normalized per group, so the range used when inverting the advantage
//! bound is 1 in normalized units.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dafsa::{self, AnnotatedLog, Dafsa, TransitionId};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::log_io::{EventLog, SECONDS_PER_DAY};

/// Slack on the guessing window so values sitting exactly on its edge are
/// not lost to rounding.
const WINDOW_SLACK: f64 = 1e-12;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Prior guessing probability when nothing is known about the value
/// distribution: `(1 - δ) / 2`.
pub fn worst_case_prior(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok((1.0 - delta) / 2.0)
}

/// Largest ε keeping the posterior-minus-prior advantage at most `delta`
/// for a value of range `range`:
/// `ε = -ln( P/(1-P) · (1/(δ+P) - 1) ) / r`.
///
/// Returns [`Error::Unboundable`] when `P + δ ≥ 1`.
pub fn epsilon_from_advantage(prior: f64, delta: f64, range: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::domain(format!("prior must lie in (0, 1), got {prior}")));
    }
    if !(range > 0.0) {
        return Err(Error::domain(format!("range must be positive, got {range}")));
    }
    if prior + delta >= 1.0 {
        return Err(Error::Unboundable { prior, delta });
    }
    let odds = prior / (1.0 - prior);
    let slack = 1.0 / (delta + prior) - 1.0;
    Ok(-(odds * slack).ln() / range)
}

/// ε for one-sided (replication only) noise: the closed-form root of
/// `δ = e^{-ε}·tanh(ε/4) + 1 - e^{-ε}`.
pub fn epsilon_oversampling(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let c = 6f64.cbrt();
    let inner = 2.0 * delta.powi(3) + 21.0 * delta.powi(2) - 48.0 * delta + 25.0;
    let b = (3f64.sqrt() * inner.max(0.0).sqrt() - 9.0 * delta + 9.0).cbrt();
    if b <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-2.0 * (b / (c * c) - (delta - 1.0) / (c * b)).ln())
}

/// Attacker guessing precision, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Precisions {
    pub start_seconds: f64,
    pub time_seconds: f64,
}

impl Default for Precisions {
    fn default() -> Self {
        Precisions {
            start_seconds: SECONDS_PER_DAY as f64,
            time_seconds: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupKey {
    Start,
    Transition(TransitionId),
}

/// Value distribution of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub key: GroupKey,
    /// Normalized values, ascending.
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// `max - min` in seconds.
    pub range: f64,
    /// Guessing precision as a fraction of the range, in `[0, 1]`.
    pub precision: f64,
}

impl GroupStats {
    pub fn new(key: GroupKey, raw: &[f64], precision_seconds: f64) -> Result<GroupStats> {
        if raw.is_empty() {
            return Err(Error::domain("group has no values"));
        }
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        let stats = GroupStats {
            key,
            values: Vec::new(),
            min,
            max,
            range,
            precision: if range > 0.0 {
                (precision_seconds / range).clamp(0.0, 1.0)
            } else {
                0.0
            },
        };
        let mut values: Vec<f64> = raw.iter().map(|&x| stats.normalize(x)).collect();
        values.sort_by(f64::total_cmp);
        Ok(GroupStats { values, ..stats })
    }

    pub fn is_degenerate(&self) -> bool {
        self.range <= 0.0
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            ((raw - self.min) / self.range).clamp(0.0, 1.0)
        }
    }

    /// Seconds per normalized unit when de-normalizing noise. A degenerate
    /// group has no range, so its largest value (or, failing that, the
    /// guessing precision) stands in.
    pub fn noise_unit(&self, precision_seconds: f64) -> f64 {
        if !self.is_degenerate() {
            self.range
        } else if self.max > 0.0 {
            self.max
        } else {
            precision_seconds
        }
    }
}

/// `P_k = F(t + p) - F(t - p)` over the group's normalized values, counting
/// the closed window `[t - p, t + p]`. Degenerate groups fall back to the
/// worst-case prior.
pub fn empirical_prior(group: &GroupStats, value: f64, delta: f64) -> Result<f64> {
    if group.values.is_empty() {
        return Err(Error::domain("group has no values"));
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::domain(format!("normalized value {value} outside [0, 1]")));
    }
    if group.is_degenerate() {
        return worst_case_prior(delta);
    }
    let lo = value - group.precision - WINDOW_SLACK;
    let hi = value + group.precision + WINDOW_SLACK;
    let below = group.values.partition_point(|&v| v < lo);
    let upto = group.values.partition_point(|&v| v <= hi);
    Ok((upto - below) as f64 / group.values.len() as f64)
}

/// Fills `norm_time`, `precision`, `prior` and `group_range` on every event.
pub fn estimate_priors(
    annotated: &mut AnnotatedLog,
    delta: f64,
    precisions: Precisions,
    exec: Execution,
) -> Result<Vec<GroupStats>> {
    check_delta(delta)?;
    let mut members: BTreeMap<GroupKey, Vec<(usize, usize)>> = BTreeMap::new();
    for (c, case) in annotated.cases.iter().enumerate() {
        for (k, e) in case.events.iter().enumerate() {
            let key = if k == 0 {
                GroupKey::Start
            } else {
                GroupKey::Transition(e.transition)
            };
            members.entry(key).or_default().push((c, k));
        }
    }
    let groups: Vec<(GroupKey, Vec<(usize, usize)>)> = members.into_iter().collect();

    let log: &AnnotatedLog = annotated;
    let results = exec.map(&groups, |(key, positions)| -> Result<(GroupStats, Vec<[f64; 4]>)> {
        let precision_seconds = match key {
            GroupKey::Start => precisions.start_seconds,
            GroupKey::Transition(_) => precisions.time_seconds,
        };
        let raw: Vec<f64> = positions
            .iter()
            .map(|&(c, k)| log.cases[c].events[k].rel_time as f64)
            .collect();
        let stats = GroupStats::new(*key, &raw, precision_seconds)?;
        let unit = stats.noise_unit(precision_seconds);
        let fields = raw
            .iter()
            .map(|&x| {
                let norm = stats.normalize(x);
                Ok([norm, stats.precision, empirical_prior(&stats, norm, delta)?, unit])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((stats, fields))
    });

    let mut out = Vec::with_capacity(groups.len());
    for ((_, positions), result) in groups.iter().zip(results) {
        let (stats, fields) = result?;
        for (&(c, k), [norm, precision, prior, unit]) in positions.iter().zip(fields) {
            let e = &mut annotated.cases[c].events[k];
            e.norm_time = norm;
            e.precision = precision;
            e.prior = prior;
            e.group_range = unit;
        }
        out.push(stats);
    }
    Ok(out)
}

/// Drops every case containing an event whose prior satisfies `P + δ ≥ 1`.
/// Returns the survivors and the removed case ids.
pub fn filter_cases(annotated: &AnnotatedLog, delta: f64) -> Result<(AnnotatedLog, Vec<String>)> {
    check_delta(delta)?;
    let risky = |c: &dafsa::AnnotatedCase| c.events.iter().any(|e| e.prior + delta >= 1.0);
    let removed: Vec<String> = annotated
        .cases
        .iter()
        .filter(|c| risky(c))
        .map(|c| c.case_id.clone())
        .collect();
    let kept = annotated.retain_cases(|c| !risky(c));
    if kept.cases.is_empty() && !annotated.cases.is_empty() {
        return Err(Error::Unreleasable { delta });
    }
    Ok((kept, removed))
}

/// Result of repeated filtering: the automaton and annotation are rebuilt
/// over the surviving cases and priors re-estimated until no case is removed.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub dafsa: Dafsa<String>,
    pub annotated: AnnotatedLog,
    pub groups: Vec<GroupStats>,
    pub removed: Vec<String>,
    pub rounds: usize,
}

pub fn filter_to_fixed_point(
    log: &EventLog,
    delta: f64,
    precisions: Precisions,
    exec: Execution,
) -> Result<Filtered> {
    let mut current = log.clone();
    let mut removed = Vec::new();
    let mut rounds = 0;
    loop {
        let (dafsa, mut annotated) = dafsa::prepare(&current)?;
        let groups = estimate_priors(&mut annotated, delta, precisions, exec)?;
        rounds += 1;
        let (kept, dropped) = filter_cases(&annotated, delta)?;
        if dropped.is_empty() {
            return Ok(Filtered {
                dafsa,
                annotated,
                groups,
                removed,
                rounds,
            });
        }
        removed.extend(dropped);
        current = kept.to_event_log()?;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Replicate and delete cases, no filtering.
    Sample,
    /// Filter high-risk cases first, then sample.
    FilterSample,
    /// Replicate only; the released variant set equals the input's.
    Oversample,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(Mode::Sample),
            "filter_sample" | "filter-sample" => Ok(Mode::FilterSample),
            "oversample" => Ok(Mode::Oversample),
            other => Err(Error::domain(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sample => "sample",
            Mode::FilterSample => "filter_sample",
            Mode::Oversample => "oversample",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonPlan {
    pub delta: f64,
    pub epsilon_d: f64,
    pub mode: Mode,
    pub filtered_case_ids: Vec<String>,
    pub scale_by_trace_length: bool,
    pub longest_trace: usize,
}

/// ε for the variant-frequency noise in the given mode.
pub fn epsilon_d(delta: f64, mode: Mode) -> Result<f64> {
    match mode {
        Mode::Sample | Mode::FilterSample => epsilon_from_advantage(worst_case_prior(delta)?, delta, 1.0),
        Mode::Oversample => epsilon_oversampling(delta),
    }
}

/// Sets `epsilon_t` on every event from its prior. Events with `P + δ ≥ 1`
/// already satisfy the bound without noise and get `+∞`. With
/// `scale_by_trace_length`, every finite value is divided by the longest
/// trace length.
pub fn assign_event_epsilons(annotated: &mut AnnotatedLog, delta: f64, scale_by_trace_length: bool) -> Result<()> {
    check_delta(delta)?;
    let m = annotated.longest_trace().max(1) as f64;
    for e in annotated.events_mut() {
        let eps = match epsilon_from_advantage(e.prior, delta, 1.0) {
            Ok(eps) => eps,
            Err(Error::Unboundable { .. }) => f64::INFINITY,
            Err(Error::Domain(_)) if e.prior >= 1.0 => f64::INFINITY,
            Err(err) => return Err(err),
        };
        e.epsilon_t = if scale_by_trace_length { eps / m } else { eps };
    }
    Ok(())
}

/// Assigns per-event ε from the (already estimated) priors and fixes ε_d.
pub fn build_epsilon_plan(
    annotated: &mut AnnotatedLog,
    delta: f64,
    mode: Mode,
    scale_by_trace_length: bool,
    filtered_case_ids: Vec<String>,
) -> Result<EpsilonPlan> {
    if annotated.cases.is_empty() {
        return Err(Error::Unreleasable { delta });
    }
    assign_event_epsilons(annotated, delta, scale_by_trace_length)?;
    Ok(EpsilonPlan {
        delta,
        epsilon_d: epsilon_d(delta, mode)?,
        mode,
        filtered_case_ids,
        scale_by_trace_length,
        longest_trace: annotated.longest_trace(),
    })
}
