//! Frequency spectra: how many distinct names occur exactly `r` times.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::counts::{Component, CountTable, Pair};
use crate::error::{Error, Result};
use crate::hash::sha256_hex;

/// Which distribution of a [`CountTable`] a spectrum describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Full,
    First,
    Middle,
    Last,
    FirstMiddle,
    MiddleLast,
    FirstLast,
}

impl Target {
    pub const ALL: [Target; 7] = [
        Target::Full,
        Target::First,
        Target::Middle,
        Target::Last,
        Target::FirstMiddle,
        Target::MiddleLast,
        Target::FirstLast,
    ];

    pub fn component(c: Component) -> Self {
        match c {
            Component::First => Target::First,
            Component::Middle => Target::Middle,
            Component::Last => Target::Last,
        }
    }

    pub fn pair(p: Pair) -> Self {
        match p {
            Pair::FirstMiddle => Target::FirstMiddle,
            Pair::MiddleLast => Target::MiddleLast,
            Pair::FirstLast => Target::FirstLast,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Full => "full",
            Target::First => "first",
            Target::Middle => "middle",
            Target::Last => "last",
            Target::FirstMiddle => "first-middle",
            Target::MiddleLast => "middle-last",
            Target::FirstLast => "first-last",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown spectrum target `{s}`")))
    }
}

/// Map `r -> N_r` with zero classes omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySpectrum {
    classes: BTreeMap<u64, u64>,
}

impl FrequencySpectrum {
    /// Builds the spectrum of a multiset of per-type counts; zero counts are ignored.
    pub fn from_counts<I: IntoIterator<Item = u64>>(counts: I) -> Self {
        let mut classes = BTreeMap::new();
        for c in counts.into_iter().filter(|&c| c > 0) {
            *classes.entry(c).or_default() += 1;
        }
        FrequencySpectrum { classes }
    }

    /// Builds from explicit `(r, N_r)` pairs; zero entries are dropped.
    pub fn from_classes<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Result<Self> {
        let mut classes = BTreeMap::new();
        for (r, n) in pairs {
            if r == 0 {
                return Err(Error::InvalidConfig("spectrum class r must be >= 1".into()));
            }
            if n > 0 && classes.insert(r, n).is_some() {
                return Err(Error::InvalidConfig(format!("spectrum class r={r} given twice")));
            }
        }
        Ok(FrequencySpectrum { classes })
    }

    /// N_r, zero for unpopulated classes.
    pub fn get(&self, r: u64) -> u64 {
        self.classes.get(&r).copied().unwrap_or(0)
    }

    /// Number of types V.
    pub fn types(&self) -> u64 {
        self.classes.values().sum()
    }

    /// Number of tokens N.
    pub fn tokens(&self) -> u64 {
        self.classes.iter().map(|(r, n)| r * n).sum()
    }

    pub fn hapaxes(&self) -> u64 {
        self.get(1)
    }

    pub fn max_class(&self) -> Option<u64> {
        self.classes.keys().next_back().copied()
    }

    /// Smallest populated class strictly above `r`.
    pub fn next_class(&self, r: u64) -> Option<(u64, u64)> {
        self.classes.range(r + 1..).next().map(|(a, b)| (*a, *b))
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.classes.iter().map(|(a, b)| (*a, *b))
    }

    /// Short content hash identifying the spectrum.
    pub fn fingerprint(&self) -> String {
        let mut text = String::new();
        for (r, n) in self.iter() {
            text.push_str(&format!("{r},{n}\n"));
        }
        sha256_hex(text.as_bytes())[..16].to_string()
    }

    /// CSV `r,N_r`, ascending in r.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "N_r"])?;
        for (r, n) in self.iter() {
            w.write_record([r.to_string(), n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let mut pairs = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<u64> {
                rec.get(j)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::MalformedRow { row: i + 2, message: "expected `r,N_r` integers".into() })
            };
            pairs.push((num(0)?, num(1)?));
        }
        Self::from_classes(pairs)
    }
}

/// Spectrum of one distribution in a count table.
pub fn spectrum(table: &CountTable, target: Target) -> Result<FrequencySpectrum> {
    let s = match target {
        Target::Full => FrequencySpectrum::from_counts(table.full_counts()),
        Target::First => FrequencySpectrum::from_counts(table.vocab(Component::First).counts().iter().copied()),
        Target::Middle => FrequencySpectrum::from_counts(table.vocab(Component::Middle).counts().iter().copied()),
        Target::Last => FrequencySpectrum::from_counts(table.vocab(Component::Last).counts().iter().copied()),
        Target::FirstMiddle => FrequencySpectrum::from_counts(table.pair_counts(Pair::FirstMiddle)),
        Target::MiddleLast => FrequencySpectrum::from_counts(table.pair_counts(Pair::MiddleLast)),
        Target::FirstLast => FrequencySpectrum::from_counts(table.pair_counts(Pair::FirstLast)),
    };
    if s.is_empty() {
        return Err(Error::Empty(format!("no counts for spectrum target {target}")));
    }
    Ok(s)
}
