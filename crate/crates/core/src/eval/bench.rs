//! Wall-clock comparison of full expansion and sampling.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::expand::{expand_full, ExpandOptions};
use crate::graph::HeteroGraph;
use crate::metapath::MetaPath;
use crate::walk::{all_starts, sample_relation, SampleBudget};
use crate::Execution;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSettings {
    pub budget: SampleBudget,
    pub seed: u64,
    /// Timed repetitions after one untimed warm-up run.
    pub reps: usize,
    pub expand: ExpandOptions,
    pub exec: Execution,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            budget: SampleBudget::default(),
            seed: 0,
            reps: 3,
            expand: ExpandOptions::default(),
            exec: Execution::Sequential,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub metapath: String,
    pub method: &'static str,
    /// `None` when full expansion hit the size cap.
    pub median_ms: Option<f64>,
    /// Total count of the generated relation (paths or completed walks).
    pub count: f64,
    /// Sampled over full median time, on sampled rows only.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn ratio(&self, metapath: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metapath == metapath && r.method == "sampled")
            .and_then(|r| r.ratio)
    }

    pub fn to_csv(&self, stamp: &[String]) -> String {
        let mut out = String::new();
        for s in stamp {
            let _ = writeln!(out, "# {s}");
        }
        out.push_str("metapath,method,median_ms,count,ratio\n");
        let opt = |v: Option<f64>, prec: usize| v.map_or("NA".to_string(), |x| format!("{x:.prec$}"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.metapath,
                r.method,
                opt(r.median_ms, 3),
                r.count,
                opt(r.ratio, 6)
            );
        }
        out
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn time_median<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut last = f()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        last = f()?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok((median(&mut times), last))
}

/// Times both generation methods for each meta-path from every valid start.
/// A full expansion that exceeds the size cap is reported with no time
/// instead of failing the benchmark.
pub fn bench_generation(graph: &HeteroGraph, metapaths: &[MetaPath], settings: &BenchSettings) -> Result<BenchReport> {
    if settings.reps < 3 {
        return Err(Error::InvalidParameter("benchmarks need at least 3 repetitions".into()));
    }
    let mut report = BenchReport::default();
    for mp in metapaths {
        let starts = all_starts(graph, mp)?;
        let full = time_median(settings.reps, || expand_full(graph, mp, &starts, settings.expand, settings.exec));
        let full = match full {
            Ok((ms, r)) => Some((ms, r.total_count())),
            Err(Error::ExpansionTooLarge { projected, cap, .. }) => {
                log::warn!("{}: full expansion aborted, projected {projected} entries over cap {cap}", mp.label());
                None
            }
            Err(e) => return Err(e),
        };
        let (s_ms, sampled) = time_median(settings.reps, || {
            sample_relation(graph, mp, &starts, settings.budget, settings.seed, settings.exec)
        })?;
        report.rows.push(BenchRow {
            metapath: mp.label().to_string(),
            method: "full",
            median_ms: full.map(|f| f.0),
            count: full.map_or(f64::NAN, |f| f.1),
            ratio: None,
        });
        report.rows.push(BenchRow {
            metapath: mp.label().to_string(),
            method: "sampled",
            median_ms: Some(s_ms),
            count: sampled.total_count(),
            ratio: full.map(|f| s_ms / f.0),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn csv_marks_missing_values() {
        let rep = BenchReport {
            rows: vec![
                BenchRow { metapath: "umgm".into(), method: "full", median_ms: None, count: f64::NAN, ratio: None },
                BenchRow { metapath: "umgm".into(), method: "sampled", median_ms: Some(1.5), count: 10.0, ratio: None },
            ],
        };
        assert_eq!(
            rep.to_csv(&[]),
            "metapath,method,median_ms,count,ratio\numgm,full,NA,NaN,NA\numgm,sampled,1.500,10,NA\n"
        );
    }
}
