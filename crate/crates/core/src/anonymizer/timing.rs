use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::sampling::Draft;
use super::{laplace_sample, stream_rng, Stream};
use crate::dafsa::AnnotatedLog;
use crate::error::Result;
use crate::exec::Execution;
use crate::log_io::{EpsilonAnnotations, Event, EventLog, Trace, SECONDS_PER_DAY};

/// Words of the time-noise stream reserved for each released copy.
const WORDS_PER_COPY: u128 = 1 << 32;

/// Adds `Lap(1/ε)` noise to every start offset and gap in normalized units,
/// scaled back by the event's group unit and clamped at zero. Each copy reads
/// its own window of the time-noise stream, so the result does not depend on
/// `exec`.
pub fn inject_time_noise(draft: &mut Draft, annotated: &AnnotatedLog, seed: u64, exec: Execution) {
    exec.for_each_mut(&mut draft.cases, |i, case| {
        let mut rng = stream_rng(seed, Stream::TimeNoise);
        rng.set_word_pos(i as u128 * WORDS_PER_COPY);
        let source = &annotated.cases[case.origin].events;
        for (k, (time, &eps)) in case.times.iter_mut().zip(&case.epsilons).enumerate() {
            let Ok(noise) = laplace_sample(1.0 / eps, &mut rng) else {
                continue;
            };
            *time = (*time + noise * source[k].group_range).max(0.0);
        }
    });
}

/// `orig / (anon + orig) · 1/2`, or 1 when both ranges are zero.
pub fn compression_factor(original_range: f64, anonymized_range: f64) -> f64 {
    if original_range + anonymized_range <= 0.0 {
        1.0
    } else {
        original_range / (anonymized_range + original_range) * 0.5
    }
}

/// Scales every start offset by the compression factor and returns it.
/// `original_range` is the input's span between first and last case start.
pub fn compress_timestamps(draft: &mut Draft, original_range_seconds: f64) -> f64 {
    let starts = draft.cases.iter().filter_map(|c| c.times.first().copied());
    let (lo, hi) = starts.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if lo > hi {
        return 1.0;
    }
    let day = SECONDS_PER_DAY as f64;
    let factor = compression_factor(original_range_seconds / day, (hi - lo) / day);
    for case in &mut draft.cases {
        if let Some(start) = case.times.first_mut() {
            *start *= factor;
        }
    }
    factor
}

#[derive(Debug, Clone, PartialEq)]
pub struct Released {
    pub log: EventLog,
    pub epsilons: EpsilonAnnotations,
}

fn fresh_id<R: Rng + ?Sized>(rng: &mut R, taken: &mut HashSet<String>) -> String {
    loop {
        let bytes: [u8; 16] = rng.gen();
        let id: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
        if taken.insert(id.clone()) {
            return id;
        }
    }
}

/// Rebuilds absolute timestamps, shuffles the copies and gives every one a
/// fresh random 128-bit hex case id.
pub fn finalize(draft: &Draft, annotated: &AnnotatedLog, epsilon_d: f64, seed: u64) -> Result<Released> {
    let mut order: Vec<usize> = (0..draft.cases.len()).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Shuffle));
    let mut id_rng = stream_rng(seed, Stream::CaseIds);
    let mut taken = HashSet::with_capacity(order.len());

    let mut traces = Vec::with_capacity(order.len());
    let mut per_event = Vec::with_capacity(order.len());
    for &i in &order {
        let case = &draft.cases[i];
        let source = &annotated.cases[case.origin].events;
        let mut t = annotated.log_start;
        let events = source
            .iter()
            .zip(&case.times)
            .map(|(e, &rel)| {
                t = t.offset(rel.round() as i64);
                Event::new(e.activity.clone(), t)
            })
            .collect();
        traces.push(Trace {
            case_id: fresh_id(&mut id_rng, &mut taken),
            events,
        });
        per_event.push(case.epsilons.clone());
    }
    let per_trace = vec![epsilon_d; traces.len()];
    Ok(Released {
        log: EventLog::from_traces(traces)?,
        epsilons: EpsilonAnnotations { per_event, per_trace },
    })
}
