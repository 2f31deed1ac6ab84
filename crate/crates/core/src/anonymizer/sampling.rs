use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::NoiseDraws;
use crate::dafsa::{AnnotatedLog, TransitionVariantIndex};
use crate::error::{Error, Result};

/// Upper bound on loop iterations. Counters only grow toward their need, so
/// the loop settles after at most one iteration per transition; the cap is a
/// guard.
pub const MAX_SAMPLING_ITERATIONS: usize = 1_000_000;

/// One released copy of an input case, in relative time.
#[derive(Debug, Clone, PartialEq)]
pub struct DraftCase {
    /// Position of the source case in the annotated log.
    pub origin: usize,
    /// Total number of released copies of `origin`.
    pub replicas: usize,
    /// Start offset followed by the gaps, in seconds.
    pub times: Vec<f64>,
    /// Effective per-event ε after dividing by `replicas`.
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draft {
    pub cases: Vec<DraftCase>,
    /// Copies per input case; 0 for deleted cases.
    pub multiplicities: Vec<usize>,
}

impl Draft {
    /// Expands per-case multiplicities into copies, copies of one case adjacent.
    pub fn from_multiplicities(annotated: &AnnotatedLog, multiplicities: Vec<usize>) -> Draft {
        let mut cases = Vec::with_capacity(multiplicities.iter().sum());
        for (origin, (&n, case)) in multiplicities.iter().zip(&annotated.cases).enumerate() {
            for _ in 0..n {
                cases.push(DraftCase {
                    origin,
                    replicas: n,
                    times: case.events.iter().map(|e| e.rel_time as f64).collect(),
                    epsilons: case.events.iter().map(|e| e.epsilon_t / n as f64).collect(),
                });
            }
        }
        Draft { cases, multiplicities }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleStats {
    pub iterations: usize,
    pub replications: usize,
    pub deletions: usize,
    /// The iteration cap stopped the loop before every need was met.
    pub capped: bool,
}

struct Counts<'a> {
    index: &'a TransitionVariantIndex,
    multiplicity: Vec<usize>,
    live: Vec<u64>,
}

impl<'a> Counts<'a> {
    fn new(annotated: &AnnotatedLog, index: &'a TransitionVariantIndex) -> Self {
        let mut live = vec![0u64; index.transition_count()];
        for case in &annotated.cases {
            for t in case.path() {
                live[t] += 1;
            }
        }
        Counts {
            index,
            multiplicity: vec![1; annotated.cases.len()],
            live,
        }
    }

    fn pick_case<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Option<usize> {
        let candidates: Vec<usize> = self.index.cases_through(t).collect();
        let weights: Vec<usize> = candidates.iter().map(|&c| self.multiplicity[c]).collect();
        let dist = WeightedIndex::new(&weights).ok()?;
        Some(candidates[dist.sample(rng)])
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) one copy of `case`. The
    /// move is booked on every transition of its path whose need points the
    /// same way (or that needs nothing); moves against a transition's need are not booked, which keeps
    /// every counter monotone.
    fn apply(&mut self, case: usize, variant: usize, sign: i64, added: &mut [i64]) {
        if sign > 0 {
            self.multiplicity[case] += 1;
        } else {
            self.multiplicity[case] -= 1;
        }
        for &t in &self.index.paths[variant] {
            let need = self.index.needed_noise[t];
            if need == 0 || need.signum() == sign {
                added[t] += sign;
            }
            self.live[t] = (self.live[t] as i64 + sign) as u64;
        }
    }
}

fn check(annotated: &AnnotatedLog, index: &TransitionVariantIndex, draws: &NoiseDraws) -> Result<()> {
    if draws.len() != index.transition_count() {
        return Err(Error::Consistency(format!(
            "{} draws for {} transitions",
            draws.len(),
            index.transition_count()
        )));
    }
    if index.case_count() != annotated.cases.len() {
        return Err(Error::Consistency("index was built for a different log".into()));
    }
    Ok(())
}

fn run<R: Rng + ?Sized>(
    annotated: &AnnotatedLog,
    index: &mut TransitionVariantIndex,
    needed: Vec<i64>,
    rng: &mut R,
) -> Result<(Draft, SampleStats)> {
    index.needed_noise = needed;
    index.added_noise = vec![0; index.transition_count()];
    let mut added = std::mem::take(&mut index.added_noise);
    let mut stats = SampleStats::default();
    let snapshot = index.clone();
    let mut counts = Counts::new(annotated, &snapshot);

    loop {
        let deficient: Vec<usize> = (0..snapshot.transition_count())
            .filter(|&t| added[t].abs() < snapshot.needed_noise[t].abs() && counts.live[t] > 0)
            .collect();
        if deficient.is_empty() {
            break;
        }
        if stats.iterations == MAX_SAMPLING_ITERATIONS {
            stats.capped = true;
            break;
        }
        stats.iterations += 1;

        let weights: Vec<u64> = deficient.iter().map(|&t| counts.live[t]).collect();
        let t = deficient[WeightedIndex::new(&weights)
            .map_err(|e| Error::Consistency(e.to_string()))?
            .sample(rng)];
        let need = snapshot.needed_noise[t];
        let sign = need.signum();
        let remaining = need.abs() - added[t].abs();
        for _ in 0..remaining {
            let Some(case) = counts.pick_case(t, rng) else {
                break;
            };
            counts.apply(case, annotated.cases[case].variant, sign, &mut added);
            if sign > 0 {
                stats.replications += 1;
            } else {
                stats.deletions += 1;
            }
        }
    }

    index.added_noise = added;
    Ok((Draft::from_multiplicities(annotated, counts.multiplicity), stats))
}

/// Replicates and deletes whole cases until every transition that still has
/// live cases carries at least `|z|` moves.
pub fn apply_sampling<R: Rng + ?Sized>(
    annotated: &AnnotatedLog,
    index: &mut TransitionVariantIndex,
    draws: &NoiseDraws,
    rng: &mut R,
) -> Result<(Draft, SampleStats)> {
    check(annotated, index, draws)?;
    run(annotated, index, draws.moves.clone(), rng)
}

/// Like [`apply_sampling`] with `|z|` replications and no deletions.
pub fn apply_oversampling<R: Rng + ?Sized>(
    annotated: &AnnotatedLog,
    index: &mut TransitionVariantIndex,
    draws: &NoiseDraws,
    rng: &mut R,
) -> Result<(Draft, SampleStats)> {
    check(annotated, index, draws)?;
    run(annotated, index, draws.moves.iter().map(|z| z.abs()).collect(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymizer::{stream_rng, Stream};
    use crate::dafsa::{contingency_table, prepare, Dafsa};
    use crate::log_io::fixtures::running_example;
    use crate::log_io::{Event, EventLog, Timestamp, Trace};

    fn setup(log: &EventLog) -> (Dafsa<String>, AnnotatedLog, TransitionVariantIndex) {
        let (d, a) = prepare(log).unwrap();
        let idx = TransitionVariantIndex::build(&a, &d);
        (d, a, idx)
    }

    fn recount(a: &AnnotatedLog, draft: &Draft, transitions: usize) -> Vec<i64> {
        let mut out = vec![0i64; transitions];
        for c in &draft.cases {
            for t in a.cases[c.origin].path() {
                out[t] += 1;
            }
        }
        out
    }

    fn linear_log(cases: usize) -> EventLog {
        EventLog::from_traces(
            (0..cases)
                .map(|i| Trace {
                    case_id: i.to_string(),
                    events: ["x", "y", "z"]
                        .iter()
                        .enumerate()
                        .map(|(k, a)| Event::new(*a, Timestamp(1000 * i as i64 + 10 * k as i64)))
                        .collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_draws_leave_log_unchanged() {
        let (_, a, mut idx) = setup(&running_example());
        let mut rng = stream_rng(1, Stream::CasePicks);
        let zero = NoiseDraws::zero(idx.transition_count());
        let (draft, stats) = apply_sampling(&a, &mut idx, &zero, &mut rng).unwrap();
        assert_eq!(draft.multiplicities, vec![1; 6]);
        assert_eq!(stats.iterations, 0);
        let (draft, _) = apply_oversampling(&a, &mut idx, &zero, &mut rng).unwrap();
        assert_eq!(draft.cases.len(), 6);
    }

    #[test]
    fn single_variant_replication() {
        let (d, a, mut idx) = setup(&linear_log(4));
        let mut moves = vec![0; d.transition_count()];
        moves[0] = 2;
        let mut rng = stream_rng(2, Stream::CasePicks);
        let (draft, stats) = apply_sampling(&a, &mut idx, &NoiseDraws { moves }, &mut rng).unwrap();
        assert_eq!(stats.replications, 2);
        assert_eq!(draft.cases.len(), 6);
        let before = contingency_table(&a);
        let after = recount(&a, &draft, d.transition_count());
        for (t, c) in before.iter() {
            assert_eq!(after[t], c as i64 + 2);
        }
        assert_eq!(idx.added_noise, vec![2, 2, 2]);
    }

    #[test]
    fn deletion_is_capped_by_available_cases() {
        let (d, a, mut idx) = setup(&linear_log(3));
        let mut moves = vec![0; d.transition_count()];
        moves[1] = -10;
        let mut rng = stream_rng(3, Stream::CasePicks);
        let (draft, stats) = apply_sampling(&a, &mut idx, &NoiseDraws { moves }, &mut rng).unwrap();
        assert!(draft.cases.is_empty());
        assert_eq!(stats.deletions, 3);
        assert!(recount(&a, &draft, 3).iter().all(|&c| c == 0));
        assert!(!stats.capped);
    }

    #[test]
    fn oversampling_replicates_over_traversing_variants() {
        let (d, a, mut idx) = setup(&running_example());
        // transition after the common prefix into C: traversed by every variant
        let c = d.transitions().iter().position(|t| t.label == "C").unwrap();
        let mut moves = vec![0; d.transition_count()];
        moves[c] = -3;
        let mut rng = stream_rng(4, Stream::CasePicks);
        let (draft, stats) = apply_oversampling(&a, &mut idx, &NoiseDraws { moves }, &mut rng).unwrap();
        assert_eq!(stats.replications, 3);
        assert_eq!(stats.deletions, 0);
        assert_eq!(draft.cases.len(), 9);
        assert_eq!(idx.added_noise[c], 3);
        let released: std::collections::BTreeSet<usize> = draft.cases.iter().map(|x| a.cases[x.origin].variant).collect();
        assert_eq!(released.len(), a.variants.len());
    }

    #[test]
    fn exit_condition_holds_on_counters() {
        let (d, a, _) = setup(&running_example());
        for seed in 0..200u64 {
            let mut idx = TransitionVariantIndex::build(&a, &d);
            let draws = NoiseDraws::draw(d.transition_count(), 0.5, &mut stream_rng(seed, Stream::TransitionDraws)).unwrap();
            let mut rng = stream_rng(seed, Stream::CasePicks);
            let (draft, stats) = apply_sampling(&a, &mut idx, &draws, &mut rng).unwrap();
            assert!(!stats.capped);
            let live = recount(&a, &draft, d.transition_count());
            let before = contingency_table(&a);
            for t in 0..d.transition_count() {
                assert!(idx.added_noise[t].abs() >= draws.moves[t].abs() || live[t] == 0);
                assert!(draws.moves[t] == 0 || idx.added_noise[t] * draws.moves[t] >= 0);
            }
            assert!(stats.iterations <= d.transition_count());
            if draws.moves.iter().all(|&z| z >= 0) {
                for t in 0..d.transition_count() {
                    assert!(live[t] >= before.get(t) as i64 + idx.added_noise[t]);
                }
            }
        }
    }

    #[test]
    fn replicas_divide_epsilon() {
        let (_, mut a, _) = setup(&running_example());
        a.events_mut().for_each(|e| e.epsilon_t = 1.5);
        let draft = Draft::from_multiplicities(&a, vec![3, 0, 1, 1, 1, 1]);
        assert_eq!(draft.cases.len(), 7);
        assert!(draft.cases[..3].iter().all(|c| c.replicas == 3 && c.epsilons.iter().all(|&e| e == 0.5)));
        assert_eq!(draft.cases[3].origin, 2);
    }
}
