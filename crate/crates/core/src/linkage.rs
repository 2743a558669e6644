//! Identical-name record linkage gated by a uniqueness probability.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::NameModel;
use crate::exec::Execution;
use crate::records::{NameKey, NamedRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessStrategy {
    /// P(exactly one bearer | at least one) under Poisson(λ) occupancy.
    #[default]
    PoissonConditional,
    /// 1 if λ < 1, else 0.
    DeterministicCount,
}

impl UniquenessStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            UniquenessStrategy::PoissonConditional => "poisson_conditional",
            UniquenessStrategy::DeterministicCount => "deterministic_count",
        }
    }
}

impl fmt::Display for UniquenessStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UniquenessStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "poisson_conditional" | "poisson" => Ok(UniquenessStrategy::PoissonConditional),
            "deterministic_count" | "deterministic" => Ok(UniquenessStrategy::DeterministicCount),
            _ => Err(Error::InvalidConfig(format!("unknown uniqueness strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkageConfig {
    pub threshold: f64,
    pub strategy: UniquenessStrategy,
    /// |S|, the population the record mentions are drawn from.
    pub population: u64,
}

impl LinkageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        if self.population == 0 {
            return Err(Error::InvalidConfig("linkage population must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkageResult {
    pub threshold: f64,
    pub linked_pairs: u64,
    pub correct_pairs: u64,
    /// `None` when nothing is linked or ground truth is missing.
    pub precision: Option<f64>,
    /// `None` when ground truth is missing or there are no true pairs.
    pub recall: Option<f64>,
}

/// Records sharing one normalized name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameGroup {
    pub name: NameKey,
    /// Indices into the record slice, ascending.
    pub records: Vec<usize>,
}

impl NameGroup {
    pub fn candidate_pairs(&self) -> u64 {
        pairs(self.records.len() as u64)
    }
}

fn pairs(q: u64) -> u64 {
    q * q.saturating_sub(1) / 2
}

/// Partitions records by name; groups come out sorted by name.
pub fn group_identical(records: &[NamedRecord]) -> Vec<NameGroup> {
    let mut by_name: HashMap<&NameKey, Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        by_name.entry(&r.name).or_default().push(i);
    }
    let mut groups: Vec<NameGroup> =
        by_name.into_iter().map(|(name, records)| NameGroup { name: name.clone(), records }).collect();
    groups.sort_unstable_by(|a, b| a.name.cmp(&b.name));
    groups
}

pub fn candidate_pairs(groups: &[NameGroup]) -> u64 {
    groups.iter().map(NameGroup::candidate_pairs).sum()
}

pub fn uniqueness_from_lambda(lambda: f64, strategy: UniquenessStrategy) -> Result<f64> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Numerical(format!("expected bearer count λ = {lambda} is not a finite non-negative number")));
    }
    Ok(match strategy {
        UniquenessStrategy::DeterministicCount => f64::from(u8::from(lambda < 1.0)),
        UniquenessStrategy::PoissonConditional if lambda == 0.0 => 1.0,
        UniquenessStrategy::PoissonConditional => (lambda / lambda.exp_m1()).min(1.0),
    })
}

pub fn uniqueness_probability(model: &NameModel, name: &NameKey, strategy: UniquenessStrategy, population: u64) -> Result<f64> {
    if population == 0 {
        return Err(Error::InvalidConfig("linkage population must be >= 1".into()));
    }
    let lambda = model.estimate_count(name, population)?.estimate;
    uniqueness_from_lambda(lambda, strategy)
}

/// Truth and uniqueness score per group of two or more records.
#[derive(Debug, Clone)]
pub struct ScoredGroups {
    /// `(uniqueness, candidate pairs, correct pairs)`, sorted by uniqueness.
    groups: Vec<(f64, u64, u64)>,
    /// Number of same-person record pairs in the data; `None` without truth.
    true_pairs: Option<u64>,
}

impl ScoredGroups {
    pub fn new(records: &[NamedRecord], model: &NameModel, strategy: UniquenessStrategy, population: u64) -> Result<Self> {
        Self::new_with(records, model, strategy, population, Execution::default())
    }

    pub fn new_with(
        records: &[NamedRecord],
        model: &NameModel,
        strategy: UniquenessStrategy,
        population: u64,
        exec: Execution,
    ) -> Result<Self> {
        let groups: Vec<NameGroup> = group_identical(records).into_iter().filter(|g| g.records.len() > 1).collect();
        let scored: Vec<Result<(f64, u64, u64)>> = exec.map(&groups, |g| {
            let u = uniqueness_probability(model, &g.name, strategy, population)?;
            Ok((u, g.candidate_pairs(), same_person_pairs(g.records.iter().map(|&i| &records[i]))))
        });
        let mut groups = scored.into_iter().collect::<Result<Vec<_>>>()?;
        groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let true_pairs = records
            .iter()
            .all(|r| r.person_id.is_some())
            .then(|| same_person_pairs(records.iter()));
        Ok(ScoredGroups { groups, true_pairs })
    }

    pub fn true_pairs(&self) -> Option<u64> {
        self.true_pairs
    }

    pub fn at(&self, threshold: f64) -> LinkageResult {
        let start = self.groups.partition_point(|g| g.0 <= threshold);
        let (linked, correct) = self.groups[start..].iter().fold((0, 0), |(l, c), g| (l + g.1, c + g.2));
        self.result(threshold, linked, correct)
    }

    fn result(&self, threshold: f64, linked: u64, correct: u64) -> LinkageResult {
        let precision = match self.true_pairs {
            Some(_) if linked > 0 => Some(correct as f64 / linked as f64),
            _ => None,
        };
        let recall = match self.true_pairs {
            Some(t) if t > 0 => Some(correct as f64 / t as f64),
            _ => None,
        };
        LinkageResult { threshold, linked_pairs: linked, correct_pairs: correct, precision, recall }
    }

    /// One result per threshold of an ascending grid, from suffix sums.
    pub fn sweep(&self, grid: &[f64]) -> Result<Vec<LinkageResult>> {
        validate_grid(grid)?;
        let mut suffix = vec![(0u64, 0u64); self.groups.len() + 1];
        for (i, g) in self.groups.iter().enumerate().rev() {
            suffix[i] = (suffix[i + 1].0 + g.1, suffix[i + 1].1 + g.2);
        }
        Ok(grid
            .iter()
            .map(|&t| {
                let (linked, correct) = suffix[self.groups.partition_point(|g| g.0 <= t)];
                self.result(t, linked, correct)
            })
            .collect())
    }
}

fn same_person_pairs<'a>(records: impl Iterator<Item = &'a NamedRecord>) -> u64 {
    let mut per_person: HashMap<&str, u64> = HashMap::new();
    for r in records {
        if let Some(p) = &r.person_id {
            *per_person.entry(p.as_str()).or_default() += 1;
        }
    }
    per_person.values().map(|&k| pairs(k)).sum()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("threshold grid is empty".into()));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidConfig("thresholds must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("threshold grid must be sorted ascending".into()));
    }
    Ok(())
}

/// Links every group whose uniqueness probability exceeds the threshold.
pub fn link(records: &[NamedRecord], model: &NameModel, config: &LinkageConfig) -> Result<LinkageResult> {
    config.validate()?;
    Ok(ScoredGroups::new(records, model, config.strategy, config.population)?.at(config.threshold))
}

/// The linked record pairs themselves, as ascending index pairs `(i, j)`, `i < j`, sorted.
pub fn linked_pair_set(records: &[NamedRecord], model: &NameModel, config: &LinkageConfig) -> Result<Vec<(usize, usize)>> {
    config.validate()?;
    let mut out = Vec::new();
    for g in group_identical(records).into_iter().filter(|g| g.records.len() > 1) {
        if uniqueness_probability(model, &g.name, config.strategy, config.population)? > config.threshold {
            for (k, &i) in g.records.iter().enumerate() {
                out.extend(g.records[k + 1..].iter().map(|&j| (i, j)));
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

pub fn sweep(
    records: &[NamedRecord],
    model: &NameModel,
    strategy: UniquenessStrategy,
    population: u64,
    grid: &[f64],
) -> Result<Vec<LinkageResult>> {
    validate_grid(grid)?;
    ScoredGroups::new(records, model, strategy, population)?.sweep(grid)
}

/// Parses `lo:hi:step` into an inclusive ascending grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("grid must look like lo:hi:step, got `{spec}`"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| ((lo + i as f64 * step) * 1e10).round() / 1e10).collect();
    validate_grid(&grid)?;
    Ok(grid)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// CSV `t,linked_pairs,correct_pairs,precision,recall`.
pub fn write_sweep_csv<W: Write>(out: W, results: &[LinkageResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "linked_pairs", "correct_pairs", "precision", "recall"])?;
    for r in results {
        w.write_record([
            r.threshold.to_string(),
            r.linked_pairs.to_string(),
            r.correct_pairs.to_string(),
            opt(r.precision),
            opt(r.recall),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::Mode;

    fn rec(id: usize, person: Option<&str>, last: &str) -> NamedRecord {
        NamedRecord { record_id: format!("r{id}"), person_id: person.map(str::to_string), name: NameKey::double("a", last) }
    }

    #[test]
    fn grouping_counts_pairs() {
        let rs = vec![rec(0, None, "x"), rec(1, None, "x"), rec(2, None, "y")];
        let g = group_identical(&rs);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].records, vec![0, 1]);
        assert_eq!(candidate_pairs(&g), 1);
        let five: Vec<_> = (0..5).map(|i| rec(i, None, "z")).collect();
        assert_eq!(candidate_pairs(&group_identical(&five)), 10);
        assert_eq!(g[0].name.mode, Mode::Double);
    }

    #[test]
    fn uniqueness_closed_form() {
        let p = UniquenessStrategy::PoissonConditional;
        assert_eq!(uniqueness_from_lambda(0.0, p).unwrap(), 1.0);
        assert!((uniqueness_from_lambda(1e-12, p).unwrap() - 1.0).abs() < 1e-11);
        let e = std::f64::consts::E;
        assert!((uniqueness_from_lambda(1.0, p).unwrap() - (1.0 / e) / (1.0 - 1.0 / e)).abs() < 1e-15);
        assert!((uniqueness_from_lambda(1.0, p).unwrap() - 0.5820).abs() < 1e-4);
        let d = UniquenessStrategy::DeterministicCount;
        assert_eq!(uniqueness_from_lambda(0.5, d).unwrap(), 1.0);
        assert_eq!(uniqueness_from_lambda(2.0, d).unwrap(), 0.0);
        assert_eq!(uniqueness_from_lambda(1.0, d).unwrap(), 0.0);
        assert!(uniqueness_from_lambda(f64::NAN, p).is_err());
        assert!(uniqueness_from_lambda(f64::INFINITY, d).is_err());
        assert_eq!(uniqueness_from_lambda(800.0, p).unwrap(), 0.0);
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:0.05").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 1.0);
        assert_eq!(g[3], 0.15);
        assert_eq!(parse_grid("0:1:0.01").unwrap().len(), 101);
        assert_eq!(parse_grid("0.5:0.5:0.1").unwrap(), vec![0.5]);
        for bad in ["0:1", "1:0:0.1", "0:1:0", "a:b:c", "0:2:0.5"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.5, 0.2]).is_err());
    }

    #[test]
    fn strategy_names() {
        for s in [UniquenessStrategy::PoissonConditional, UniquenessStrategy::DeterministicCount] {
            assert_eq!(s.as_str().parse::<UniquenessStrategy>().unwrap(), s);
        }
        assert!("fuzzy".parse::<UniquenessStrategy>().is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = [
            LinkageResult { threshold: 0.0, linked_pairs: 4, correct_pairs: 2, precision: Some(0.5), recall: Some(1.0) },
            LinkageResult { threshold: 1.0, linked_pairs: 0, correct_pairs: 0, precision: None, recall: Some(0.0) },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,linked_pairs,correct_pairs,precision,recall\n0,4,2,0.5,1\n1,0,0,NA,0\n"
        );
    }

    #[test]
    fn config_validation() {
        let ok = LinkageConfig { threshold: 0.5, strategy: UniquenessStrategy::default(), population: 10 };
        assert!(ok.validate().is_ok());
        assert!(LinkageConfig { threshold: 1.5, ..ok }.validate().is_err());
        assert!(LinkageConfig { population: 0, ..ok }.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn uniqueness_is_monotone(a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let p = UniquenessStrategy::PoissonConditional;
            let (ul, uh) = (uniqueness_from_lambda(lo, p).unwrap(), uniqueness_from_lambda(hi, p).unwrap());
            proptest::prop_assert!((0.0..=1.0).contains(&ul) && (0.0..=1.0).contains(&uh));
            proptest::prop_assert!(uh <= ul + 1e-15);
        }
    }
}
