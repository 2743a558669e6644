//! Synthetic populations with known ground truth.
//!
//! Each component is drawn from a finite Zipf law over `types` ranks. The
//! coupling κ ties components together: with probability κ the middle name
//! is a fixed function of the last name and the first name a fixed function
//! of the middle name; otherwise each is drawn independently. κ = 0 gives
//! independent components, κ = 1 deterministic `ℓ → m → f` mappings.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)` and one stream per block of 4096 persons, so outputs
//! are identical across platforms, thread counts and execution strategies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::records::{NameKey, Person, PersonSet, RawRecord, RecordSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentDist {
    pub types: u64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub persons: usize,
    pub first: ComponentDist,
    pub middle: ComponentDist,
    pub last: ComponentDist,
    /// κ in [0, 1].
    pub coupling: f64,
    /// Records per person are `1 + Geometric(p)`, mean `1/p`.
    pub records_p: f64,
    pub seed: u64,
}

/// The default population has an LNRE full-name spectrum: at 10^4 persons
/// more than half of the distinct full names are hapaxes.
impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            persons: 100_000,
            first: ComponentDist { types: 2_000, exponent: 1.1 },
            middle: ComponentDist { types: 1_500, exponent: 1.1 },
            last: ComponentDist { types: 50_000, exponent: 1.05 },
            coupling: 0.3,
            records_p: 0.5,
            seed: 42,
        }
    }
}

const BLOCK: usize = 4096;
const STREAM_MAPS: u64 = 1 << 48;
const STREAM_PERSONS: u64 = 2 << 48;
const STREAM_RECORDS: u64 = 3 << 48;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.persons < 1 {
            return bad("population must be >= 1".into());
        }
        for (name, d) in [("first", self.first), ("middle", self.middle), ("last", self.last)] {
            if d.types < 1 || !(d.exponent > 0.0) {
                return bad(format!("{name}: need types >= 1 and exponent > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return bad(format!("coupling {} outside [0,1]", self.coupling));
        }
        if !(self.records_p > 0.0 && self.records_p <= 1.0) {
            return bad(format!("records_p {} outside (0,1]", self.records_p));
        }
        Ok(())
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn zipf(d: ComponentDist) -> Result<Zipf<f64>> {
    Zipf::new(d.types as f64, d.exponent).map_err(|e| Error::InvalidConfig(format!("zipf: {e}")))
}

fn draw(z: &Zipf<f64>, rng: &mut ChaCha8Rng) -> u64 {
    z.sample(rng) as u64 - 1
}

/// Draws a population. Person ids are `p<index>`, component names
/// `f<rank>`, `m<rank>`, `l<rank>` with rank 0 the most frequent.
pub fn generate_population(config: &SynthConfig) -> Result<PersonSet> {
    generate_population_with(config, Execution::default())
}

pub fn generate_population_with(config: &SynthConfig, exec: Execution) -> Result<PersonSet> {
    config.validate()?;
    let (zf, zm, zl) = (zipf(config.first)?, zipf(config.middle)?, zipf(config.last)?);
    let mut maps = rng(config.seed, STREAM_MAPS);
    let middle_of_last: Vec<u64> = (0..config.last.types).map(|_| draw(&zm, &mut maps)).collect();
    let first_of_middle: Vec<u64> = (0..config.middle.types).map(|_| draw(&zf, &mut maps)).collect();

    let blocks = config.persons.div_ceil(BLOCK);
    let chunks: Vec<Vec<Person>> = exec.map_range(blocks, |b| {
        let mut r = rng(config.seed, STREAM_PERSONS | b as u64);
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(config.persons);
        (lo..hi)
            .map(|i| {
                let l = draw(&zl, &mut r);
                let m = if r.random::<f64>() < config.coupling { middle_of_last[l as usize] } else { draw(&zm, &mut r) };
                let f = if r.random::<f64>() < config.coupling { first_of_middle[m as usize] } else { draw(&zf, &mut r) };
                Person {
                    person_id: format!("p{i}"),
                    name: NameKey::triple(&format!("f{f}"), &format!("m{m}"), &format!("l{l}")),
                }
            })
            .collect()
    });
    PersonSet::from_persons(chunks.into_iter().flatten().collect())
}

/// Emits `1 + Geometric(p)` records per person with fresh ids `r<n>`,
/// numbered in person order.
pub fn generate_records(persons: &PersonSet, config: &SynthConfig) -> Result<RecordSet> {
    generate_records_with(persons, config, Execution::default())
}

pub fn generate_records_with(persons: &PersonSet, config: &SynthConfig, exec: Execution) -> Result<RecordSet> {
    config.validate()?;
    let geo = Geometric::new(config.records_p).map_err(|e| Error::InvalidConfig(format!("geometric: {e}")))?;
    let blocks = persons.len().div_ceil(BLOCK);
    let per_person: Vec<Vec<u64>> = exec.map_range(blocks, |b| {
        let mut r = rng(config.seed, STREAM_RECORDS | b as u64);
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(persons.len());
        (lo..hi).map(|_| 1 + geo.sample(&mut r)).collect()
    });
    let mut records = Vec::new();
    for (p, k) in persons.persons.iter().zip(per_person.into_iter().flatten()) {
        for _ in 0..k {
            records.push(RawRecord {
                record_id: format!("r{}", records.len()),
                person_id: Some(p.person_id.clone()),
                first: p.name.first.clone(),
                middle: Some(p.name.middle.clone()).filter(|m| !m.is_empty()),
                last: p.name.last.clone(),
            });
        }
    }
    Ok(RecordSet { records, skipped: Vec::new() })
}

/// Writes raw records as TSV `id tin first middle last`, the default ingest layout.
pub fn write_records<W: std::io::Write>(out: W, records: &RecordSet) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    w.write_record(["id", "tin", "first", "middle", "last"])?;
    for r in &records.records {
        w.write_record([
            r.record_id.as_str(),
            r.person_id.as_deref().unwrap_or(""),
            &r.first,
            r.middle.as_deref().unwrap_or(""),
            &r.last,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::counts::CountTable;
    use crate::estimators::{prob_markov, prob_mle_full};
    use crate::records::{parse_records, FormatConfig, Mode};
    use crate::spectrum::{spectrum, Target};

    fn small(persons: usize) -> SynthConfig {
        SynthConfig { persons, ..Default::default() }
    }

    /// Plug-in mutual information (nats) between first and middle names.
    fn mutual_information(set: &PersonSet) -> f64 {
        let n = set.len() as f64;
        let (mut joint, mut a, mut b) = (HashMap::new(), HashMap::new(), HashMap::new());
        for p in &set.persons {
            *joint.entry((&p.name.first, &p.name.middle)).or_insert(0.0) += 1.0;
            *a.entry(&p.name.first).or_insert(0.0) += 1.0;
            *b.entry(&p.name.middle).or_insert(0.0) += 1.0;
        }
        joint.iter().map(|((f, m), c)| c / n * (c * n / (a[f] * b[m])).ln()).sum()
    }

    #[test]
    fn independent_components_have_no_mutual_information() {
        let cfg = SynthConfig {
            persons: 100_000,
            first: ComponentDist { types: 20, exponent: 1.1 },
            middle: ComponentDist { types: 20, exponent: 1.1 },
            coupling: 0.0,
            ..Default::default()
        };
        let mi = mutual_information(&generate_population(&cfg).unwrap());
        assert!(mi < 0.01, "MI = {mi}");
        let coupled = SynthConfig { coupling: 0.8, ..cfg };
        assert!(mutual_information(&generate_population(&coupled).unwrap()) > 0.1);
    }

    #[test]
    fn full_coupling_makes_the_chain_exact() {
        let cfg = SynthConfig { coupling: 1.0, ..small(20_000) };
        let set = generate_population(&cfg).unwrap();
        let table = CountTable::build(&set, Mode::Triple).unwrap();
        for (name, _) in table.full_entries() {
            let (chain, mle) = (prob_markov(&table, &name).unwrap(), prob_mle_full(&table, &name).unwrap());
            assert!((chain - mle).abs() <= 1e-12 * mle, "{name}: {chain} vs {mle}");
        }
    }

    #[test]
    fn population_is_deterministic() {
        let cfg = small(10_000);
        let a = generate_population_with(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a, generate_population_with(&cfg, Execution::Sequential).unwrap());
        assert_ne!(a, generate_population(&SynthConfig { seed: 43, ..cfg }).unwrap());
    }

    #[test]
    fn default_population_is_lnre() {
        let set = generate_population(&small(10_000)).unwrap();
        let s = spectrum(&CountTable::build(&set, Mode::Triple).unwrap(), Target::Full).unwrap();
        assert!(s.hapaxes() as f64 / s.types() as f64 > 0.5);
        assert_eq!(s.tokens(), 10_000);
    }

    #[test]
    fn single_record_per_person() {
        let cfg = SynthConfig { records_p: 1.0, ..small(500) };
        let set = generate_population(&cfg).unwrap();
        assert_eq!(generate_records(&set, &cfg).unwrap().len(), 500);
    }

    #[test]
    fn record_counts_follow_the_geometric_law() {
        let cfg = SynthConfig { records_p: 0.4, ..small(10_000) };
        let set = generate_population(&cfg).unwrap();
        let recs = generate_records(&set, &cfg).unwrap();
        let mean = recs.len() as f64 / set.len() as f64;
        let (mu, var) = (1.0 / 0.4, 0.6 / 0.16);
        assert!((mean - mu).abs() < 3.0 * (var / set.len() as f64).sqrt(), "mean {mean}");

        let mut per: HashMap<&str, u64> = HashMap::new();
        for r in &recs.records {
            *per.entry(r.person_id.as_deref().unwrap()).or_default() += 1;
        }
        assert_eq!(per.len(), set.len());
        let pairs: u64 = per.values().map(|k| k * (k - 1) / 2).sum();
        let brute = {
            let ids: Vec<&str> = recs.records.iter().map(|r| r.person_id.as_deref().unwrap()).collect();
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.chunk_by(|a, b| a == b).map(|g| (g.len() * (g.len() - 1) / 2) as u64).sum::<u64>()
        };
        assert_eq!(pairs, brute);
    }

    #[test]
    fn records_round_trip_through_ingest_format() {
        let cfg = small(300);
        let set = generate_population(&cfg).unwrap();
        let recs = generate_records(&set, &cfg).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        assert_eq!(parse_records(&buf[..], &FormatConfig::default()).unwrap(), recs);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig { coupling: 1.5, ..small(10) },
            SynthConfig { records_p: 0.0, ..small(10) },
            SynthConfig { persons: 0, ..small(10) },
            SynthConfig { last: ComponentDist { types: 0, exponent: 1.0 }, ..small(10) },
        ] {
            assert!(generate_population(&cfg).is_err());
        }
    }
}
