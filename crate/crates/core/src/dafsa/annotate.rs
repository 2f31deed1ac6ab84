use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{build_minimal_dafsa, Dafsa, StateId, TransitionId};
use crate::error::{Error, Result};
use crate::log_io::{compute_relative_times, Event, EventLog, RelativeTimes, Timestamp, Trace};

/// An event linked to the automaton transition that produced it, plus the
/// calibration fields filled in by [`crate::calibration`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedEvent {
    pub activity: String,
    pub timestamp: Timestamp,
    pub transition: TransitionId,
    pub source_state: StateId,
    pub target_state: StateId,
    /// Start offset for the first event of a case, gap to the predecessor otherwise.
    pub rel_time: i64,
    pub norm_time: f64,
    pub precision: f64,
    pub prior: f64,
    pub epsilon_t: f64,
    /// Seconds per normalized unit of this event's group.
    pub group_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedCase {
    pub case_id: String,
    pub variant: usize,
    pub events: Vec<AnnotatedEvent>,
}

impl AnnotatedCase {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn path(&self) -> impl Iterator<Item = TransitionId> + '_ {
        self.events.iter().map(|e| e.transition)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedLog {
    pub log_start: Timestamp,
    pub cases: Vec<AnnotatedCase>,
    /// Variant id to label sequence, ids in order of first appearance.
    pub variants: Vec<Vec<String>>,
}

impl AnnotatedLog {
    pub fn event_count(&self) -> usize {
        self.cases.iter().map(AnnotatedCase::len).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &AnnotatedEvent> + '_ {
        self.cases.iter().flat_map(|c| c.events.iter())
    }

    pub fn events_mut(&mut self) -> impl Iterator<Item = &mut AnnotatedEvent> + '_ {
        self.cases.iter_mut().flat_map(|c| c.events.iter_mut())
    }

    pub fn longest_trace(&self) -> usize {
        self.cases.iter().map(AnnotatedCase::len).max().unwrap_or(0)
    }

    /// Keeps the cases for which `keep` holds; variant ids are unchanged.
    pub fn retain_cases(&self, mut keep: impl FnMut(&AnnotatedCase) -> bool) -> AnnotatedLog {
        AnnotatedLog {
            log_start: self.log_start,
            cases: self.cases.iter().filter(|c| keep(c)).cloned().collect(),
            variants: self.variants.clone(),
        }
    }

    /// The plain log behind the annotation.
    pub fn to_event_log(&self) -> Result<EventLog> {
        EventLog::from_traces(
            self.cases
                .iter()
                .map(|c| Trace {
                    case_id: c.case_id.clone(),
                    events: c
                        .events
                        .iter()
                        .map(|e| Event::new(e.activity.clone(), e.timestamp))
                        .collect(),
                })
                .collect(),
        )
    }
}

/// Links every event to the transition reached by replaying its case prefix.
pub fn annotate_log(log: &EventLog, times: &RelativeTimes, dafsa: &Dafsa<String>) -> Result<AnnotatedLog> {
    let mut variant_ids: HashMap<Vec<&str>, usize> = HashMap::new();
    let mut variants: Vec<Vec<String>> = Vec::new();
    let mut cases = Vec::with_capacity(log.len());

    for (i, trace) in log.traces().iter().enumerate() {
        let word = trace.variant();
        let path = dafsa.path(&word[..]).ok_or_else(|| {
            Error::Consistency(format!(
                "variant of case '{}' is not accepted by the automaton",
                trace.case_id
            ))
        })?;
        let next_id = variants.len();
        let variant = *variant_ids.entry(word.clone()).or_insert_with(|| {
            variants.push(word.iter().map(|s| s.to_string()).collect());
            next_id
        });
        let events = trace
            .events
            .iter()
            .zip(path)
            .enumerate()
            .map(|(k, (event, t))| {
                let tr = dafsa.transition(t);
                AnnotatedEvent {
                    activity: event.activity.clone(),
                    timestamp: event.timestamp,
                    transition: t,
                    source_state: tr.source,
                    target_state: tr.target,
                    rel_time: if k == 0 {
                        times.start_offsets[i]
                    } else {
                        times.deltas[i][k - 1]
                    },
                    norm_time: 0.0,
                    precision: 0.0,
                    prior: 0.0,
                    epsilon_t: f64::INFINITY,
                    group_range: 0.0,
                }
            })
            .collect();
        cases.push(AnnotatedCase {
            case_id: trace.case_id.clone(),
            variant,
            events,
        });
    }
    Ok(AnnotatedLog {
        log_start: times.log_start,
        cases,
        variants,
    })
}

/// Builds the automaton over the log's variants and annotates the log with it.
pub fn prepare(log: &EventLog) -> Result<(Dafsa<String>, AnnotatedLog)> {
    let dafsa = build_minimal_dafsa(log.variant_set())?;
    let times = compute_relative_times(log);
    let annotated = annotate_log(log, &times, &dafsa)?;
    Ok((dafsa, annotated))
}

/// Occurrence count per transition; transitions nobody traverses are absent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContingencyTable {
    pub counts: BTreeMap<TransitionId, u64>,
}

impl ContingencyTable {
    pub fn get(&self, t: TransitionId) -> u64 {
        self.counts.get(&t).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TransitionId, u64)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }
}

pub fn contingency_table(annotated: &AnnotatedLog) -> ContingencyTable {
    let mut counts = BTreeMap::new();
    for e in annotated.events() {
        *counts.entry(e.transition).or_insert(0) += 1;
    }
    ContingencyTable { counts }
}

/// Transition → variants → cases lookup with the per-transition noise
/// bookkeeping used by the sampling loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionVariantIndex {
    /// Indexed by transition id; only variants with at least one case.
    pub variants_by_transition: Vec<BTreeSet<usize>>,
    /// Indexed by variant id; positions into `AnnotatedLog::cases`.
    pub cases_by_variant: Vec<Vec<usize>>,
    /// Indexed by variant id.
    pub paths: Vec<Vec<TransitionId>>,
    pub needed_noise: Vec<i64>,
    pub added_noise: Vec<i64>,
}

impl TransitionVariantIndex {
    pub fn build(annotated: &AnnotatedLog, dafsa: &Dafsa<String>) -> TransitionVariantIndex {
        let n_variants = annotated.variants.len();
        let mut cases_by_variant = vec![Vec::new(); n_variants];
        for (i, case) in annotated.cases.iter().enumerate() {
            cases_by_variant[case.variant].push(i);
        }
        let paths: Vec<Vec<TransitionId>> = annotated
            .variants
            .iter()
            .map(|w| dafsa.path(&w[..]).unwrap_or_default())
            .collect();
        let mut variants_by_transition = vec![BTreeSet::new(); dafsa.transition_count()];
        for (v, path) in paths.iter().enumerate() {
            if cases_by_variant[v].is_empty() {
                continue;
            }
            for &t in path {
                variants_by_transition[t].insert(v);
            }
        }
        let n_transitions = dafsa.transition_count();
        TransitionVariantIndex {
            variants_by_transition,
            cases_by_variant,
            paths,
            needed_noise: vec![0; n_transitions],
            added_noise: vec![0; n_transitions],
        }
    }

    pub fn transition_count(&self) -> usize {
        self.variants_by_transition.len()
    }

    pub fn case_count(&self) -> usize {
        self.cases_by_variant.iter().map(Vec::len).sum()
    }

    /// Cases whose variant traverses `t`.
    pub fn cases_through(&self, t: TransitionId) -> impl Iterator<Item = usize> + '_ {
        self.variants_by_transition[t]
            .iter()
            .flat_map(|&v| self.cases_by_variant[v].iter().copied())
    }
}
