//! End-to-end release: calibration, sampling, timing noise and finalization.

use serde::Serialize;

use crate::anonymizer::{
    self, apply_oversampling, apply_sampling, compress_timestamps, finalize, inject_time_noise, NoiseDraws, Released,
    Stream,
};
use crate::calibration::{build_epsilon_plan, estimate_priors, filter_to_fixed_point, Filtered, Mode, Precisions};
use crate::dafsa::{contingency_table, prepare, Dafsa, TransitionVariantIndex};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::log_io::EventLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunParams {
    pub delta: f64,
    pub mode: Mode,
    pub precisions: Precisions,
    pub compress: bool,
    pub scale_by_trace_length: bool,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            delta: 0.3,
            mode: Mode::Sample,
            precisions: Precisions::default(),
            compress: true,
            scale_by_trace_length: false,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

impl RunParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        let Precisions {
            start_seconds,
            time_seconds,
        } = self.precisions;
        if !(start_seconds > 0.0 && start_seconds.is_finite() && time_seconds > 0.0 && time_seconds.is_finite()) {
            return Err(Error::domain("precisions must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSize {
    pub cases: usize,
    pub events: usize,
    pub variants: usize,
}

impl LogSize {
    pub fn of(log: &EventLog) -> LogSize {
        LogSize {
            cases: log.len(),
            events: log.event_count(),
            variants: log.variant_set().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRow {
    pub id: usize,
    pub source: usize,
    pub label: String,
    pub target: usize,
    pub count: u64,
}

fn transition_rows(dafsa: &Dafsa<String>, counts: impl Fn(usize) -> u64) -> Vec<TransitionRow> {
    dafsa
        .transitions()
        .iter()
        .enumerate()
        .map(|(id, t)| TransitionRow {
            id,
            source: t.source,
            label: t.label.clone(),
            target: t.target,
            count: counts(id),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionNoise {
    #[serde(flatten)]
    pub transition: TransitionRow,
    pub needed_noise: i64,
    pub added_noise: i64,
    /// Smallest finite ε_t among events on this transition; null if none.
    pub min_epsilon_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSummary {
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
    /// Events released without time noise.
    pub unbounded: usize,
}

impl EpsilonSummary {
    fn of(values: impl Iterator<Item = f64>) -> EpsilonSummary {
        let mut finite = Vec::new();
        let mut unbounded = 0;
        for v in values {
            if v.is_finite() {
                finite.push(v);
            } else {
                unbounded += 1;
            }
        }
        finite.sort_by(f64::total_cmp);
        EpsilonSummary {
            min: finite.first().copied(),
            median: finite.get(finite.len() / 2).copied(),
            max: finite.last().copied(),
            unbounded,
        }
    }
}

/// Everything about a release except wall-clock runtime, so identical
/// parameters give identical reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport {
    pub params: RunParams,
    pub epsilon_d: f64,
    pub input: LogSize,
    pub released: LogSize,
    pub dafsa_states: usize,
    pub dafsa_transitions: usize,
    pub filtered_cases: usize,
    pub filtered_case_ids: Vec<String>,
    pub filter_rounds: usize,
    pub longest_trace: usize,
    pub replications: usize,
    pub deletions: usize,
    pub sampling_iterations: usize,
    pub sampling_capped: bool,
    pub compression_factor: f64,
    pub epsilon_t: EpsilonSummary,
    pub transitions: Vec<TransitionNoise>,
}

fn case_start_range(log: &EventLog) -> f64 {
    let starts = log.traces().iter().map(|t| t.start().0);
    match (starts.clone().min(), starts.max()) {
        (Some(lo), Some(hi)) => (hi - lo) as f64,
        _ => 0.0,
    }
}

pub fn anonymize(log: &EventLog, params: &RunParams) -> Result<(Released, PrivacyReport)> {
    params.validate()?;
    if log.is_empty() {
        return Err(Error::Validation("event log contains no events".into()));
    }
    let Filtered {
        dafsa,
        mut annotated,
        removed,
        rounds,
        ..
    } = match params.mode {
        Mode::FilterSample => filter_to_fixed_point(log, params.delta, params.precisions, params.exec)?,
        Mode::Sample | Mode::Oversample => {
            let (dafsa, mut annotated) = prepare(log)?;
            let groups = estimate_priors(&mut annotated, params.delta, params.precisions, params.exec)?;
            Filtered {
                dafsa,
                annotated,
                groups,
                removed: Vec::new(),
                rounds: 0,
            }
        }
    };
    let plan = build_epsilon_plan(
        &mut annotated,
        params.delta,
        params.mode,
        params.scale_by_trace_length,
        removed,
    )?;

    let mut index = TransitionVariantIndex::build(&annotated, &dafsa);
    let draws = NoiseDraws::draw(
        dafsa.transition_count(),
        plan.epsilon_d,
        &mut anonymizer::stream_rng(params.seed, Stream::TransitionDraws),
    )?;
    let mut picks = anonymizer::stream_rng(params.seed, Stream::CasePicks);
    let (mut draft, stats) = match params.mode {
        Mode::Oversample => apply_oversampling(&annotated, &mut index, &draws, &mut picks)?,
        Mode::Sample | Mode::FilterSample => apply_sampling(&annotated, &mut index, &draws, &mut picks)?,
    };
    if stats.capped {
        log::warn!("sampling stopped at the iteration cap before every transition met its noise");
    }
    inject_time_noise(&mut draft, &annotated, params.seed, params.exec);
    let compression_factor = if params.compress {
        compress_timestamps(&mut draft, case_start_range(log))
    } else {
        1.0
    };
    let released = finalize(&draft, &annotated, plan.epsilon_d, params.seed)?;

    let counts = contingency_table(&annotated);
    let mut min_eps = vec![None::<f64>; dafsa.transition_count()];
    for e in annotated.events() {
        if e.epsilon_t.is_finite() {
            let slot = &mut min_eps[e.transition];
            *slot = Some(slot.map_or(e.epsilon_t, |m| m.min(e.epsilon_t)));
        }
    }
    let transitions = transition_rows(&dafsa, |t| counts.get(t))
        .into_iter()
        .map(|row| TransitionNoise {
            needed_noise: index.needed_noise[row.id],
            added_noise: index.added_noise[row.id],
            min_epsilon_t: min_eps[row.id],
            transition: row,
        })
        .collect();

    let report = PrivacyReport {
        params: *params,
        epsilon_d: plan.epsilon_d,
        input: LogSize::of(log),
        released: LogSize::of(&released.log),
        dafsa_states: dafsa.state_count(),
        dafsa_transitions: dafsa.transition_count(),
        filtered_cases: plan.filtered_case_ids.len(),
        filtered_case_ids: plan.filtered_case_ids,
        filter_rounds: rounds,
        longest_trace: plan.longest_trace,
        replications: stats.replications,
        deletions: stats.deletions,
        sampling_iterations: stats.iterations,
        sampling_capped: stats.capped,
        compression_factor,
        epsilon_t: EpsilonSummary::of(released.epsilons.per_event.iter().flatten().copied()),
        transitions,
    };
    Ok((released, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    #[serde(flatten)]
    pub size: LogSize,
    pub dafsa_states: usize,
    pub dafsa_transitions: usize,
    pub contingency_table: Vec<TransitionRow>,
}

pub fn inspect(log: &EventLog) -> Result<(Summary, Dafsa<String>)> {
    let (dafsa, annotated) = prepare(log)?;
    let counts = contingency_table(&annotated);
    let summary = Summary {
        size: LogSize::of(log),
        dafsa_states: dafsa.state_count(),
        dafsa_transitions: dafsa.transition_count(),
        contingency_table: transition_rows(&dafsa, |t| counts.get(t)),
    };
    Ok((summary, dafsa))
}
