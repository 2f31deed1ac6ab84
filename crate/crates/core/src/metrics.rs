//! Utility loss between an original and a released log.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::log_io::EventLog;

pub const SECONDS_PER_MONTH: f64 = 30.0 * 24.0 * 3600.0;

/// `1 - |A ∩ B| / |A ∪ B|`; two empty sets are at distance 0.
pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - a.intersection(b).count() as f64 / union as f64
}

pub fn jaccard_variants(a: &EventLog, b: &EventLog) -> f64 {
    jaccard_distance(&a.variant_set(), &b.variant_set())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Arc {
    pub frequency: u64,
    pub total_time_months: f64,
}

/// Directly-follows graph annotated with frequency and total elapsed time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dfg {
    pub nodes: BTreeSet<String>,
    pub arcs: BTreeMap<(String, String), Arc>,
}

pub fn build_dfg(log: &EventLog) -> Dfg {
    let mut dfg = Dfg::default();
    for trace in log.traces() {
        for e in &trace.events {
            if !dfg.nodes.contains(&e.activity) {
                dfg.nodes.insert(e.activity.clone());
            }
        }
        for w in trace.events.windows(2) {
            let arc = dfg
                .arcs
                .entry((w[0].activity.clone(), w[1].activity.clone()))
                .or_default();
            arc.frequency += 1;
            arc.total_time_months += (w[1].timestamp.0 - w[0].timestamp.0) as f64 / SECONDS_PER_MONTH;
        }
    }
    dfg
}

/// 1-D Wasserstein distance between the empirical distributions of `u`
/// and `v`: `∫ |F_u - F_v| dx`.
pub fn emd(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::domain("emd needs two non-empty samples"));
    }
    if u.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::domain("emd samples must be finite"));
    }
    let mut a = u.to_vec();
    let mut b = v.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);

    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        prev = x;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub jaccard: f64,
    pub emd_freq: f64,
    pub emd_time_months: f64,
    pub original_variants: usize,
    pub released_variants: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub original_cases: usize,
    pub released_cases: usize,
    /// How the two DFGs were turned into samples for the EMD.
    pub emd_method: &'static str,
}

const EMD_METHOD: &str = "arc-union aligned weights, zero padded, 1-D Wasserstein; month = 30 days";

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "jaccard,emd_freq,emd_time_months,original_variants,released_variants,false_negatives,false_positives,original_cases,released_cases";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.jaccard,
            self.emd_freq,
            self.emd_time_months,
            self.original_variants,
            self.released_variants,
            self.false_negatives,
            self.false_positives,
            self.original_cases,
            self.released_cases
        )
    }
}

/// Arc weights of both graphs over the union of their arcs, absent arcs as 0.
fn aligned(a: &Dfg, b: &Dfg, weight: impl Fn(&Arc) -> f64) -> (Vec<f64>, Vec<f64>) {
    let keys: BTreeSet<&(String, String)> = a.arcs.keys().chain(b.arcs.keys()).collect();
    let pick = |g: &Dfg, k: &(String, String)| g.arcs.get(k).map(&weight).unwrap_or(0.0);
    keys.into_iter().map(|k| (pick(a, k), pick(b, k))).unzip()
}

pub fn evaluate(original: &EventLog, released: &EventLog) -> Result<MetricsReport> {
    let vo = original.variant_set();
    let vr = released.variant_set();
    let (go, gr) = (build_dfg(original), build_dfg(released));

    let emd_or_zero = |(x, y): (Vec<f64>, Vec<f64>)| if x.is_empty() { Ok(0.0) } else { emd(&x, &y) };
    Ok(MetricsReport {
        jaccard: jaccard_distance(&vo, &vr),
        emd_freq: emd_or_zero(aligned(&go, &gr, |a| a.frequency as f64))?,
        emd_time_months: emd_or_zero(aligned(&go, &gr, |a| a.total_time_months))?,
        original_variants: vo.len(),
        released_variants: vr.len(),
        false_negatives: vo.difference(&vr).count(),
        false_positives: vr.difference(&vo).count(),
        original_cases: original.len(),
        released_cases: released.len(),
        emd_method: EMD_METHOD,
    })
}
