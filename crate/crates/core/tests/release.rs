mod common;

use common::running_example;
use evlogdp::calibration::Precisions;
use evlogdp::log_io::{parse_event_log, write_event_log, LogFormat};
use evlogdp::metrics::evaluate;
use evlogdp::synthetic::{generate, SyntheticConfig};
use evlogdp::{anonymize, Execution, Mode, RunParams};
use proptest::prelude::*;

const GOLDEN: &str = include_str!("data/golden_filter_sample_seed7.csv");

fn params(mode: Mode, seed: u64) -> RunParams {
    RunParams {
        mode,
        seed,
        ..RunParams::default()
    }
}

#[test]
fn released_log_round_trips_through_both_formats() {
    let (released, _) = anonymize(&running_example(), &params(Mode::Sample, 1)).unwrap();
    for format in [LogFormat::Csv, LogFormat::Xes] {
        let mut bytes = Vec::new();
        write_event_log(&released.log, format, Some(&released.epsilons), &mut bytes).unwrap();
        let back = parse_event_log(&bytes[..], format, None).unwrap();
        assert!(back.structurally_eq(&released.log), "{format}");
    }
}

#[test]
fn csv_output_carries_epsilon_columns() {
    let (released, report) = anonymize(&running_example(), &params(Mode::FilterSample, 2)).unwrap();
    let mut bytes = Vec::new();
    write_event_log(&released.log, LogFormat::Csv, Some(&released.epsilons), &mut bytes).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with("case_id,activity,timestamp,epsilon_per_event,epsilon_per_trace\n"));
    assert_eq!(text.lines().count(), 1 + released.log.event_count());
    assert!((report.epsilon_d - 1.238).abs() < 1e-3);
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["params"]["mode"], "filter_sample");
    assert!(json["transitions"].as_array().unwrap().len() == report.dafsa_transitions);
}

#[test]
fn worked_example_release_is_pinned() {
    let (released, _) = anonymize(&running_example(), &params(Mode::FilterSample, 7)).unwrap();
    let mut bytes = Vec::new();
    write_event_log(&released.log, LogFormat::Csv, Some(&released.epsilons), &mut bytes).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden_filter_sample_seed7.csv");
        std::fs::write(path, &bytes).unwrap();
        return;
    }
    assert_eq!(String::from_utf8(bytes).unwrap(), GOLDEN);
}

#[test]
fn coarse_precision_leaves_only_degenerate_groups_noisy() {
    // a window wider than every group gives prior 1 and ε_t = ∞; groups
    // with a single distinct value keep the worst-case prior
    let p = RunParams {
        precisions: Precisions {
            start_seconds: 1e9,
            time_seconds: 1e9,
        },
        ..params(Mode::Sample, 3)
    };
    let (released, report) = anonymize(&running_example(), &p).unwrap();
    assert!(report.epsilon_t.unbounded > 0);
    let worst = report.epsilon_d;
    for e in released.epsilons.per_event.iter().flatten() {
        assert!(e.is_infinite() || *e <= worst + 1e-12);
    }
}

#[test]
fn scaling_by_trace_length_shrinks_epsilon() {
    let log = running_example();
    let (_, plain) = anonymize(&log, &params(Mode::Sample, 4)).unwrap();
    let scaled = RunParams {
        scale_by_trace_length: true,
        ..params(Mode::Sample, 4)
    };
    let (_, scaled) = anonymize(&log, &scaled).unwrap();
    let (a, b) = (plain.transitions[0].min_epsilon_t, scaled.transitions[0].min_epsilon_t);
    if let (Some(a), Some(b)) = (a, b) {
        assert!((b - a / 4.0).abs() < 1e-12);
    }
}

#[test]
fn evaluation_of_a_release() {
    let log = generate(&SyntheticConfig {
        cases: 200,
        variants: 40,
        activities: 8,
        base_length: 6,
        span_days: 30,
        seed: 5,
    })
    .unwrap();
    let (released, _) = anonymize(&log, &params(Mode::Sample, 5)).unwrap();
    let m = evaluate(&log, &released.log).unwrap();
    assert!((0.0..=1.0).contains(&m.jaccard));
    assert_eq!(m.false_positives, 0);
    assert!(m.emd_freq >= 0.0 && m.emd_time_months >= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variant_sets_never_grow(
        cases in 1usize..40,
        activities in 1usize..8,
        seed in any::<u64>(),
        delta in 0.05f64..0.95,
        mode in prop::sample::select(vec![Mode::Sample, Mode::FilterSample, Mode::Oversample]),
    ) {
        let log = generate(&SyntheticConfig {
            cases,
            variants: cases.min(10),
            activities,
            base_length: 4,
            span_days: 20,
            seed,
        }).unwrap();
        let p = RunParams { delta, mode, seed, exec: Execution::Sequential, ..RunParams::default() };
        match anonymize(&log, &p) {
            Ok((released, _)) => {
                let input = log.variant_set();
                let out = released.log.variant_set();
                if mode == Mode::Oversample {
                    prop_assert_eq!(out, input);
                } else {
                    prop_assert!(out.is_subset(&input));
                }
                for t in released.log.traces() {
                    prop_assert!(t.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
                }
            }
            Err(evlogdp::Error::Unreleasable { .. }) => prop_assert_eq!(mode, Mode::FilterSample),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
