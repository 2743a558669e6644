//! Person counts for full names, their components and component pairs.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::records::{Mode, NameKey, PersonSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    First,
    Middle,
    Last,
}

/// An ordered component pair `(a, b)`; conditionals read as `P(a | b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pair {
    FirstMiddle,
    MiddleLast,
    FirstLast,
}

impl Pair {
    pub fn components(self) -> (Component, Component) {
        match self {
            Pair::FirstMiddle => (Component::First, Component::Middle),
            Pair::MiddleLast => (Component::Middle, Component::Last),
            Pair::FirstLast => (Component::First, Component::Last),
        }
    }
}

/// Interned component names with their person counts. Ids follow the
/// lexicographic order of the names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn from_sorted(entries: Vec<(String, u64)>) -> Self {
        let index = entries.iter().enumerate().map(|(i, (n, _))| (n.clone(), i as u32)).collect();
        let (names, counts) = entries.into_iter().unzip();
        Vocab { names, counts, index }
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn count(&self, name: &str) -> u64 {
        self.id(name).map_or(0, |i| self.counts[i as usize])
    }

    pub fn count_of(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    /// Number of distinct names.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.names.iter().map(String::as_str).zip(self.counts.iter().copied())
    }
}

/// Middle id stored for name doubles.
pub const NO_MIDDLE: u32 = u32::MAX;

pub type FullKey = [u32; 3];

/// A name resolved against a table's vocabularies; `None` marks a component
/// never seen in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved {
    pub first: Option<u32>,
    pub middle: Option<u32>,
    pub last: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    mode: Mode,
    total: u64,
    first: Vocab,
    middle: Vocab,
    last: Vocab,
    full: HashMap<FullKey, u64>,
    first_middle: HashMap<(u32, u32), u64>,
    middle_last: HashMap<(u32, u32), u64>,
    first_last: HashMap<(u32, u32), u64>,
}

const CHUNK: usize = 16 * 1024;

type Tally<'a> = [HashMap<&'a str, u64>; 3];

#[derive(Default)]
struct PairTally {
    full: HashMap<FullKey, u64>,
    fm: HashMap<(u32, u32), u64>,
    ml: HashMap<(u32, u32), u64>,
    fl: HashMap<(u32, u32), u64>,
}

fn merge_into<K: std::hash::Hash + Eq>(mut a: HashMap<K, u64>, mut b: HashMap<K, u64>) -> HashMap<K, u64> {
    if a.len() < b.len() {
        std::mem::swap(&mut a, &mut b);
    }
    for (k, v) in b {
        *a.entry(k).or_default() += v;
    }
    a
}

fn sorted_vocab(map: HashMap<&str, u64>) -> Vocab {
    let mut entries: Vec<(String, u64)> = map.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    entries.sort_unstable();
    Vocab::from_sorted(entries)
}

impl CountTable {
    pub fn build(persons: &PersonSet, mode: Mode) -> Result<Self> {
        Self::build_with(persons, mode, Execution::default())
    }

    /// Counts persons in chunks and merges the partial tables.
    pub fn build_with(persons: &PersonSet, mode: Mode, exec: Execution) -> Result<Self> {
        if let Some(p) = persons.persons.iter().find(|p| p.name.mode != mode) {
            return Err(Error::ModeMismatch { expected: mode, found: p.name.mode });
        }
        let people = &persons.persons;
        let [first, middle, last] = exec.fold_chunks(
            people,
            CHUNK,
            Tally::default,
            |mut t, chunk| {
                for p in chunk {
                    *t[0].entry(p.name.first.as_str()).or_default() += 1;
                    if mode == Mode::Triple {
                        *t[1].entry(p.name.middle.as_str()).or_default() += 1;
                    }
                    *t[2].entry(p.name.last.as_str()).or_default() += 1;
                }
                t
            },
            |[a0, a1, a2], [b0, b1, b2]| [merge_into(a0, b0), merge_into(a1, b1), merge_into(a2, b2)],
        );
        let (first, middle, last) = (sorted_vocab(first), sorted_vocab(middle), sorted_vocab(last));

        let ids: Vec<FullKey> = exec.map(people, |p| {
            let m = match mode {
                Mode::Triple => middle.id(&p.name.middle).expect("middle interned"),
                Mode::Double => NO_MIDDLE,
            };
            [first.id(&p.name.first).expect("first interned"), m, last.id(&p.name.last).expect("last interned")]
        });
        let tally = exec.fold_chunks(
            &ids,
            CHUNK,
            PairTally::default,
            |mut t, chunk| {
                for &[f, m, l] in chunk {
                    *t.full.entry([f, m, l]).or_default() += 1;
                    *t.fl.entry((f, l)).or_default() += 1;
                    if m != NO_MIDDLE {
                        *t.fm.entry((f, m)).or_default() += 1;
                        *t.ml.entry((m, l)).or_default() += 1;
                    }
                }
                t
            },
            |a, b| PairTally {
                full: merge_into(a.full, b.full),
                fm: merge_into(a.fm, b.fm),
                ml: merge_into(a.ml, b.ml),
                fl: merge_into(a.fl, b.fl),
            },
        );
        Ok(CountTable {
            mode,
            total: people.len() as u64,
            first,
            middle,
            last,
            full: tally.full,
            first_middle: tally.fm,
            middle_last: tally.ml,
            first_last: tally.fl,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Total persons N.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn vocab(&self, c: Component) -> &Vocab {
        match c {
            Component::First => &self.first,
            Component::Middle => &self.middle,
            Component::Last => &self.last,
        }
    }

    fn pair_map(&self, p: Pair) -> &HashMap<(u32, u32), u64> {
        match p {
            Pair::FirstMiddle => &self.first_middle,
            Pair::MiddleLast => &self.middle_last,
            Pair::FirstLast => &self.first_last,
        }
    }

    pub fn resolve(&self, name: &NameKey) -> Resolved {
        Resolved {
            first: self.first.id(&name.first),
            middle: match self.mode {
                Mode::Triple => self.middle.id(&name.middle),
                Mode::Double => None,
            },
            last: self.last.id(&name.last),
        }
    }

    /// Full-name count C(x); zero when unseen.
    pub fn count(&self, name: &NameKey) -> u64 {
        if name.mode != self.mode {
            return 0;
        }
        self.count_resolved(&self.resolve(name))
    }

    pub fn count_resolved(&self, r: &Resolved) -> u64 {
        let (Some(f), Some(l)) = (r.first, r.last) else { return 0 };
        let m = match self.mode {
            Mode::Triple => match r.middle {
                Some(m) => m,
                None => return 0,
            },
            Mode::Double => NO_MIDDLE,
        };
        self.full.get(&[f, m, l]).copied().unwrap_or(0)
    }

    pub fn component_count(&self, c: Component, name: &str) -> u64 {
        self.vocab(c).count(name)
    }

    pub fn component_count_id(&self, c: Component, id: Option<u32>) -> u64 {
        id.map_or(0, |i| self.vocab(c).count_of(i))
    }

    pub fn pair_count(&self, p: Pair, a: &str, b: &str) -> u64 {
        let (ca, cb) = p.components();
        self.pair_count_id(p, self.vocab(ca).id(a), self.vocab(cb).id(b))
    }

    pub fn pair_count_id(&self, p: Pair, a: Option<u32>, b: Option<u32>) -> u64 {
        match (a, b) {
            (Some(a), Some(b)) => self.pair_map(p).get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Number of distinct full names.
    pub fn full_types(&self) -> usize {
        self.full.len()
    }

    pub fn full_counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.full.values().copied()
    }

    pub fn pair_counts(&self, p: Pair) -> impl Iterator<Item = u64> + '_ {
        self.pair_map(p).values().copied()
    }

    pub fn pair_entries(&self, p: Pair) -> impl Iterator<Item = ((u32, u32), u64)> + '_ {
        self.pair_map(p).iter().map(|(k, v)| (*k, *v))
    }

    fn full_name(&self, k: &FullKey) -> NameKey {
        match self.mode {
            Mode::Triple => NameKey::triple(self.first.name(k[0]), self.middle.name(k[1]), self.last.name(k[2])),
            Mode::Double => NameKey::double(self.first.name(k[0]), self.last.name(k[2])),
        }
    }

    /// Full names with their counts, sorted by name.
    pub fn full_entries(&self) -> Vec<(NameKey, u64)> {
        let mut v: Vec<_> = self.full.iter().map(|(k, c)| (self.full_name(k), *c)).collect();
        v.sort_unstable();
        v
    }

    /// Exports full-name counts as CSV `key,count`, sorted by key.
    pub fn write_full_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut rows: Vec<(String, u64)> = self.full.iter().map(|(k, c)| (self.full_name(k).key_string(), *c)).collect();
        rows.sort_unstable();
        write_key_counts(out, rows)
    }

    pub fn write_component_csv<W: Write>(&self, c: Component, out: W) -> Result<()> {
        write_key_counts(out, self.vocab(c).iter().map(|(n, c)| (n.to_string(), c)))
    }

    pub fn write_pair_csv<W: Write>(&self, p: Pair, out: W) -> Result<()> {
        let (ca, cb) = p.components();
        let (va, vb) = (self.vocab(ca), self.vocab(cb));
        let mut rows: Vec<(String, u64)> =
            self.pair_map(p).iter().map(|((a, b), c)| (format!("{}|{}", va.name(*a), vb.name(*b)), *c)).collect();
        rows.sort_unstable();
        write_key_counts(out, rows)
    }
}

fn write_key_counts<W: Write>(out: W, rows: impl IntoIterator<Item = (String, u64)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "count"])?;
    for (k, c) in rows {
        w.write_record([k, c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Serialized form: vocabularies in id order and count maps as sorted rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTableData {
    pub mode: Mode,
    pub total: u64,
    pub first: Vec<(String, u64)>,
    pub middle: Vec<(String, u64)>,
    pub last: Vec<(String, u64)>,
    pub full: Vec<(u32, u32, u32, u64)>,
    pub first_middle: Vec<(u32, u32, u64)>,
    pub middle_last: Vec<(u32, u32, u64)>,
    pub first_last: Vec<(u32, u32, u64)>,
}

fn pair_rows(m: &HashMap<(u32, u32), u64>) -> Vec<(u32, u32, u64)> {
    let mut v: Vec<_> = m.iter().map(|(&(a, b), &c)| (a, b, c)).collect();
    v.sort_unstable();
    v
}

impl From<&CountTable> for CountTableData {
    fn from(t: &CountTable) -> Self {
        let vocab = |v: &Vocab| v.iter().map(|(n, c)| (n.to_string(), c)).collect();
        let mut full: Vec<_> = t.full.iter().map(|(k, &c)| (k[0], k[1], k[2], c)).collect();
        full.sort_unstable();
        CountTableData {
            mode: t.mode,
            total: t.total,
            first: vocab(&t.first),
            middle: vocab(&t.middle),
            last: vocab(&t.last),
            full,
            first_middle: pair_rows(&t.first_middle),
            middle_last: pair_rows(&t.middle_last),
            first_last: pair_rows(&t.first_last),
        }
    }
}

impl TryFrom<CountTableData> for CountTable {
    type Error = Error;

    fn try_from(d: CountTableData) -> Result<Self> {
        let bad = |m: &str| Error::ModelFile(format!("count table: {m}"));
        let check_sorted = |v: &[(String, u64)]| v.windows(2).all(|w| w[0].0 < w[1].0);
        if !check_sorted(&d.first) || !check_sorted(&d.middle) || !check_sorted(&d.last) {
            return Err(bad("vocabulary not sorted"));
        }
        let full_sum: u64 = d.full.iter().map(|r| r.3).sum();
        if full_sum != d.total {
            return Err(bad("full-name counts do not sum to total"));
        }
        let (nf, nm, nl) = (d.first.len() as u32, d.middle.len() as u32, d.last.len() as u32);
        let middle_ok = |m: u32| match d.mode {
            Mode::Triple => m < nm,
            Mode::Double => m == NO_MIDDLE,
        };
        if d.full.iter().any(|&(f, m, l, _)| f >= nf || l >= nl || !middle_ok(m)) {
            return Err(bad("id out of range"));
        }
        let pairs = |rows: Vec<(u32, u32, u64)>, na: u32, nb: u32| -> Result<HashMap<(u32, u32), u64>> {
            if rows.iter().any(|&(a, b, _)| a >= na || b >= nb) {
                return Err(bad("pair id out of range"));
            }
            Ok(rows.into_iter().map(|(a, b, c)| ((a, b), c)).collect())
        };
        Ok(CountTable {
            mode: d.mode,
            total: d.total,
            full: d.full.into_iter().map(|(f, m, l, c)| ([f, m, l], c)).collect(),
            first_middle: pairs(d.first_middle, nf, nm)?,
            middle_last: pairs(d.middle_last, nm, nl)?,
            first_last: pairs(d.first_last, nf, nl)?,
            first: Vocab::from_sorted(d.first),
            middle: Vocab::from_sorted(d.middle),
            last: Vocab::from_sorted(d.last),
        })
    }
}
