//! Seeded random event logs for tests, benchmarks and sweeps.
//!
//! Variants are edits of one base sequence, so they share prefixes and
//! suffixes the way real process variants do.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::log_io::{Event, EventLog, Timestamp, Trace, SECONDS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub cases: usize,
    /// Distinct variants to aim for; fewer are produced if the alphabet and
    /// length cannot supply them.
    pub variants: usize,
    pub activities: usize,
    pub base_length: usize,
    /// Case starts are spread uniformly over this many days.
    pub span_days: i64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Roughly the size of the public Sepsis log: ~1050 cases, ~850
    /// variants, 16 activities, ~15,000 events.
    pub fn sepsis_scale(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            cases: 1050,
            variants: 850,
            activities: 16,
            base_length: 14,
            span_days: 500,
            seed,
        }
    }
}

fn activity_name(i: usize) -> String {
    let letter = (b'A' + (i % 26) as u8) as char;
    if i < 26 {
        letter.to_string()
    } else {
        format!("{letter}{}", i / 26)
    }
}

fn mutate<R: Rng>(base: &[usize], activities: usize, rng: &mut R) -> Vec<usize> {
    let mut word = base.to_vec();
    let edits = 1 + (rng.gen::<f64>().ln() / 0.5f64.ln()).floor() as usize;
    for _ in 0..edits {
        let pos = rng.gen_range(0..=word.len());
        match rng.gen_range(0..4) {
            0 if word.len() > 1 && pos < word.len() => {
                word.remove(pos);
            }
            1 if pos + 1 < word.len() => word.swap(pos, pos + 1),
            2 if pos < word.len() => word[pos] = rng.gen_range(0..activities),
            _ => word.insert(pos, rng.gen_range(0..activities)),
        }
    }
    word
}

pub fn generate(config: &SyntheticConfig) -> Result<EventLog> {
    if config.cases == 0 || config.variants == 0 || config.activities == 0 || config.base_length == 0 {
        return Err(Error::domain("synthetic log needs cases, variants, activities and length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names: Vec<String> = (0..config.activities).map(activity_name).collect();
    let base: Vec<usize> = (0..config.base_length).map(|_| rng.gen_range(0..config.activities)).collect();

    let wanted = config.variants.min(config.cases);
    let mut seen = BTreeSet::new();
    let mut variants = Vec::with_capacity(wanted);
    seen.insert(base.clone());
    variants.push(base.clone());
    let mut attempts = 0;
    while variants.len() < wanted && attempts < 50 * wanted {
        attempts += 1;
        let parent = variants.choose(&mut rng).cloned().unwrap_or_else(|| base.clone());
        let word = mutate(&parent, config.activities, &mut rng);
        if seen.insert(word.clone()) {
            variants.push(word);
        }
    }

    // every variant once, the remaining cases skewed toward low ranks
    let mut assignment: Vec<usize> = (0..variants.len()).collect();
    let weights: Vec<f64> = (1..=variants.len()).map(|r| 1.0 / r as f64).collect();
    let dist = rand::distributions::WeightedIndex::new(&weights).map_err(|e| Error::domain(e.to_string()))?;
    while assignment.len() < config.cases {
        assignment.push(rng.sample(&dist));
    }
    assignment.shuffle(&mut rng);

    let origin = Timestamp::parse("2020-01-01T00:00:00").expect("valid literal");
    let span = (config.span_days.max(1) * SECONDS_PER_DAY) as i64;
    let traces = assignment
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut t = origin.offset(rng.gen_range(0..span));
            let mut prev: Option<usize> = None;
            let events = variants[v]
                .iter()
                .map(|&a| {
                    if let Some(p) = prev {
                        // gap scale depends on the activity pair
                        let mean = 60 + ((p * 31 + a * 17) % 40) as i64 * 300;
                        t = t.offset((mean as f64 * rng.gen_range(0.25..1.75)) as i64);
                    }
                    prev = Some(a);
                    Event::new(names[a].clone(), t)
                })
                .collect();
            Trace {
                case_id: format!("case-{i}"),
                events,
            }
        })
        .collect();
    EventLog::from_traces(traces)
}
