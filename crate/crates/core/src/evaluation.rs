//! Bucketed RMSE of count estimates against actual test-set counts.

use std::fmt::Write as _;
use std::io::Write;

use crate::counts::CountTable;
use crate::error::{Error, Result};
use crate::estimators::NameModel;
use crate::exec::Execution;
use crate::records::{Mode, NameKey, PersonSet};

/// Contiguous inclusive count ranges covering `[1, ∞)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketSpec {
    lows: Vec<u64>,
}

impl Default for BucketSpec {
    fn default() -> Self {
        BucketSpec { lows: vec![1, 2, 6, 21, 101] }
    }
}

impl BucketSpec {
    /// Buckets from their lower bounds; the first must be 1 and the rest
    /// strictly increasing. The last bucket is open-ended.
    pub fn from_lower_bounds(lows: Vec<u64>) -> Result<Self> {
        if lows.first() != Some(&1) || lows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!("bucket lower bounds must start at 1 and increase: {lows:?}")));
        }
        Ok(BucketSpec { lows })
    }

    pub fn len(&self) -> usize {
        self.lows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lows.is_empty()
    }

    /// Inclusive bounds of bucket `i`; `None` upper bound means unbounded.
    pub fn bounds(&self, i: usize) -> (u64, Option<u64>) {
        (self.lows[i], self.lows.get(i + 1).map(|n| n - 1))
    }

    pub fn label(&self, i: usize) -> String {
        match self.bounds(i) {
            (lo, Some(hi)) if lo == hi => lo.to_string(),
            (lo, Some(hi)) => format!("{lo}-{hi}"),
            (lo, None) => format!(">{}", lo - 1),
        }
    }

    pub fn bucket_of(&self, count: u64) -> Result<usize> {
        if count < 1 {
            return Err(Error::InvalidConfig("bucket lookup needs count >= 1".into()));
        }
        Ok(self.lows.partition_point(|&lo| lo <= count) - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketResult {
    pub lo: u64,
    pub hi: Option<u64>,
    /// `None` for a bucket without names.
    pub sigma: Option<f64>,
    pub names: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub population: u64,
    pub buckets: Vec<BucketResult>,
}

/// Unique test names with their counts C(x) in the test population S.
#[derive(Debug, Clone)]
pub struct TestCounts {
    mode: Mode,
    population: u64,
    entries: Vec<(NameKey, u64)>,
}

impl TestCounts {
    pub fn from_persons(test: &PersonSet, mode: Mode) -> Result<Self> {
        Self::from_persons_with(test, mode, Execution::default())
    }

    pub fn from_persons_with(test: &PersonSet, mode: Mode, exec: Execution) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::Empty("test set has no persons".into()));
        }
        let table = CountTable::build_with(test, mode, exec)?;
        Ok(TestCounts { mode, population: table.total(), entries: table.full_entries() })
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn entries(&self) -> &[(NameKey, u64)] {
        &self.entries
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

pub fn rmse_by_bucket(model: &NameModel, test: &PersonSet, spec: &BucketSpec) -> Result<EvalReport> {
    let counts = TestCounts::from_persons(test, model.mode())?;
    rmse_by_bucket_counts(model, &counts, spec, Execution::default())
}

/// σ per bucket over unique test names, with estimates `|S| · P(x)`.
pub fn rmse_by_bucket_counts(model: &NameModel, test: &TestCounts, spec: &BucketSpec, exec: Execution) -> Result<EvalReport> {
    if test.mode != model.mode() {
        return Err(Error::ModeMismatch { expected: model.mode(), found: test.mode });
    }
    let s = test.population;
    let errors: Vec<Result<(usize, f64)>> = exec.map(&test.entries, |(name, count)| {
        let est = model.estimate_count(name, s)?.estimate;
        Ok((spec.bucket_of(*count)?, (est - *count as f64).powi(2)))
    });
    let mut sums = vec![0.0; spec.len()];
    let mut names = vec![0usize; spec.len()];
    for e in errors {
        let (b, sq) = e?;
        sums[b] += sq;
        names[b] += 1;
    }
    let buckets = (0..spec.len())
        .map(|i| {
            let (lo, hi) = spec.bounds(i);
            let sigma = (names[i] > 0).then(|| (sums[i] / names[i] as f64).sqrt());
            BucketResult { lo, hi, sigma, names: names[i] }
        })
        .collect();
    Ok(EvalReport { model: model.kind().to_string(), population: s, buckets })
}

/// Reports for several models on one test set, sorted by model kind, with
/// the per-bucket minima flagged.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub reports: Vec<EvalReport>,
    /// `best[m][b]`: model `m` attains the minimum σ of bucket `b`.
    pub best: Vec<Vec<bool>>,
    pub spec: BucketSpec,
}

pub fn compare_models(models: &[&NameModel], test: &TestCounts, spec: &BucketSpec, exec: Execution) -> Result<Comparison> {
    if let Some(m) = models.iter().find(|m| m.mode() != test.mode) {
        return Err(Error::ModeMismatch { expected: test.mode, found: m.mode() });
    }
    let mut sorted: Vec<&NameModel> = models.to_vec();
    sorted.sort_by_key(|m| m.kind());
    let reports = sorted
        .iter()
        .map(|m| rmse_by_bucket_counts(m, test, spec, exec))
        .collect::<Result<Vec<_>>>()?;
    let best = flag_minima(&reports, spec.len());
    Ok(Comparison { reports, best, spec: spec.clone() })
}

fn flag_minima(reports: &[EvalReport], buckets: usize) -> Vec<Vec<bool>> {
    let mins: Vec<Option<f64>> = (0..buckets)
        .map(|b| reports.iter().filter_map(|r| r.buckets[b].sigma).min_by(f64::total_cmp))
        .collect();
    reports
        .iter()
        .map(|r| (0..buckets).map(|b| r.buckets[b].sigma.is_some() && r.buckets[b].sigma == mins[b]).collect())
        .collect()
}

impl Comparison {
    /// CSV `model,bucket_lo,bucket_hi,sigma,n_names`; unbounded `hi` is `inf`,
    /// an empty bucket's sigma is `NA`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "bucket_lo", "bucket_hi", "sigma", "n_names"])?;
        for r in &self.reports {
            for b in &r.buckets {
                w.write_record([
                    r.model.clone(),
                    b.lo.to_string(),
                    b.hi.map_or_else(|| "inf".to_string(), |h| h.to_string()),
                    b.sigma.map_or_else(|| "NA".to_string(), |s| s.to_string()),
                    b.names.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned plain-text table; a `*` marks the best value per bucket.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<6}", "model");
        for i in 0..self.spec.len() {
            let _ = write!(out, "{:>14}", format!("sigma_{}", self.spec.label(i)));
        }
        out.push('\n');
        for (r, flags) in self.reports.iter().zip(&self.best) {
            let _ = write!(out, "{:<6}", r.model);
            for (b, best) in r.buckets.iter().zip(flags) {
                let cell = match b.sigma {
                    Some(s) => format!("{s:.3}{}", if *best { "*" } else { " " }),
                    None => "NA ".to_string(),
                };
                let _ = write!(out, "{cell:>14}");
            }
            out.push('\n');
        }
        out
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn sigma(errors: &[f64]) -> f64 {
        (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
    }

    proptest! {
        #[test]
        fn perfect_addition_never_raises_sigma(errs in prop::collection::vec(-50.0f64..50.0, 1..40)) {
            let before = sigma(&errs);
            let mut more = errs.clone();
            more.push(0.0);
            let k = errs.len() as f64;
            let after = sigma(&more);
            prop_assert!((after * after - k * before * before / (k + 1.0)).abs() < 1e-9 * (1.0 + before * before));
            prop_assert!(after <= before + 1e-12);
        }

        #[test]
        fn bucket_partition_is_total(counts in prop::collection::vec(1u64..1000, 1..100)) {
            let spec = BucketSpec::default();
            let mut sizes = vec![0usize; spec.len()];
            for &c in &counts {
                let b = spec.bucket_of(c).unwrap();
                let (lo, hi) = spec.bounds(b);
                prop_assert!(lo <= c && hi.is_none_or(|h| c <= h));
                sizes[b] += 1;
            }
            prop_assert_eq!(sizes.iter().sum::<usize>(), counts.len());
        }
    }
}
