//! Raw record ingestion, name normalization, person deduplication and the
//! train/test split.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hash::keyed_u64;

/// Whether names are first/middle/last triples or first/last doubles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Triple,
    Double,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Triple => "triple",
            Mode::Double => "double",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triple" => Ok(Mode::Triple),
            "double" => Ok(Mode::Double),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub record_id: String,
    pub person_id: Option<String>,
    pub first: String,
    pub middle: Option<String>,
    pub last: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub row: usize,
    pub reason: String,
}

/// Parsed rows plus the tally of rows rejected in lenient mode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordSet {
    pub records: Vec<RawRecord>,
    pub skipped: Vec<SkippedRow>,
}

impl RecordSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

/// Which input columns hold which field. Person id and middle name are
/// optional: a named column missing from the header is treated as absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub record_id: ColumnRef,
    pub person_id: Option<ColumnRef>,
    pub first: ColumnRef,
    pub middle: Option<ColumnRef>,
    pub last: ColumnRef,
}

impl Default for ColumnMap {
    fn default() -> Self {
        let name = |s: &str| ColumnRef::Name(s.to_string());
        ColumnMap {
            record_id: name("id"),
            person_id: Some(name("tin")),
            first: name("first"),
            middle: Some(name("middle")),
            last: name("last"),
        }
    }
}

impl ColumnMap {
    /// Positional map in the order `id, tin, first, middle, last`.
    pub fn positional() -> Self {
        ColumnMap {
            record_id: ColumnRef::Index(0),
            person_id: Some(ColumnRef::Index(1)),
            first: ColumnRef::Index(2),
            middle: Some(ColumnRef::Index(3)),
            last: ColumnRef::Index(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatConfig {
    pub delimiter: u8,
    pub has_header: bool,
    pub columns: ColumnMap,
    /// Strict mode fails on the first malformed row; lenient mode skips it.
    pub strict: bool,
}

impl Default for FormatConfig {
    fn default() -> Self {
        FormatConfig { delimiter: b'\t', has_header: true, columns: ColumnMap::default(), strict: true }
    }
}

impl FormatConfig {
    pub fn csv() -> Self {
        FormatConfig { delimiter: b',', ..Default::default() }
    }
}

struct ResolvedColumns {
    record_id: usize,
    person_id: Option<usize>,
    first: usize,
    middle: Option<usize>,
    last: usize,
}

fn resolve(map: &ColumnMap, header: Option<&csv::ByteRecord>) -> Result<ResolvedColumns> {
    let find = |r: &ColumnRef, mandatory: bool| -> Result<Option<usize>> {
        match r {
            ColumnRef::Index(i) => Ok(Some(*i)),
            ColumnRef::Name(name) => {
                let Some(h) = header else {
                    return Err(Error::InvalidConfig(format!(
                        "column `{name}` referenced by name but input has no header"
                    )));
                };
                let pos = h.iter().position(|f| f == name.as_bytes());
                match (pos, mandatory) {
                    (None, true) => Err(Error::MissingColumn(name.clone())),
                    (p, _) => Ok(p),
                }
            }
        }
    };
    let mandatory = |r: &ColumnRef| find(r, true).map(|o| o.expect("mandatory column resolved"));
    let optional = |r: &Option<ColumnRef>| -> Result<Option<usize>> {
        match r {
            Some(r) => find(r, false),
            None => Ok(None),
        }
    };
    Ok(ResolvedColumns {
        record_id: mandatory(&map.record_id)?,
        person_id: optional(&map.person_id)?,
        first: mandatory(&map.first)?,
        middle: optional(&map.middle)?,
        last: mandatory(&map.last)?,
    })
}

fn field<'a>(rec: &'a csv::ByteRecord, idx: usize, what: &str) -> std::result::Result<&'a str, String> {
    let bytes = rec.get(idx).ok_or_else(|| format!("missing field `{what}` (column {idx})"))?;
    std::str::from_utf8(bytes).map_err(|_| format!("field `{what}` is not valid UTF-8"))
}

fn row_to_record(rec: &csv::ByteRecord, cols: &ResolvedColumns) -> std::result::Result<RawRecord, String> {
    let record_id = field(rec, cols.record_id, "id")?.trim();
    if record_id.is_empty() {
        return Err("empty record id".into());
    }
    let person_id = match cols.person_id {
        Some(i) => Some(field(rec, i, "person id")?.trim()).filter(|s| !s.is_empty()),
        None => None,
    };
    let first = field(rec, cols.first, "first")?;
    if first.trim().is_empty() {
        return Err("empty first name".into());
    }
    let middle = match cols.middle {
        Some(i) => Some(field(rec, i, "middle")?.to_string()),
        None => None,
    };
    let last = field(rec, cols.last, "last")?;
    if last.trim().is_empty() {
        return Err("empty last name".into());
    }
    Ok(RawRecord {
        record_id: record_id.to_string(),
        person_id: person_id.map(str::to_string),
        first: first.to_string(),
        middle,
        last: last.to_string(),
    })
}

/// Parses delimited text into raw records.
pub fn parse_records<R: Read>(input: R, format: &FormatConfig) -> Result<RecordSet> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.has_header)
        .flexible(true)
        .from_reader(input);
    let header = if format.has_header { Some(reader.byte_headers()?.clone()) } else { None };
    let cols = resolve(&format.columns, header.as_ref())?;

    let mut out = RecordSet::default();
    let mut seen = HashSet::new();
    let mut rec = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
                if format.strict {
                    return Err(Error::MalformedRow { row, message: e.to_string() });
                }
                out.skipped.push(SkippedRow { row, reason: e.to_string() });
                continue;
            }
        }
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        match row_to_record(&rec, &cols) {
            Ok(r) => {
                if !seen.insert(r.record_id.clone()) {
                    if format.strict {
                        return Err(Error::DuplicateRecord { row, id: r.record_id });
                    }
                    out.skipped.push(SkippedRow { row, reason: format!("duplicate record id `{}`", r.record_id) });
                    continue;
                }
                out.records.push(r);
            }
            Err(message) => {
                if format.strict {
                    return Err(Error::MalformedRow { row, message });
                }
                out.skipped.push(SkippedRow { row, reason: message });
            }
        }
    }
    Ok(out)
}

/// A normalized full name, the unit of identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NameKey {
    pub first: String,
    /// Empty in double mode.
    pub middle: String,
    pub last: String,
    pub mode: Mode,
}

impl NameKey {
    pub fn triple(first: &str, middle: &str, last: &str) -> Self {
        NameKey { first: first.into(), middle: middle.into(), last: last.into(), mode: Mode::Triple }
    }

    pub fn double(first: &str, last: &str) -> Self {
        NameKey { first: first.into(), middle: String::new(), last: last.into(), mode: Mode::Double }
    }

    /// `first|middle|last`, or `first|last` for doubles.
    pub fn key_string(&self) -> String {
        match self.mode {
            Mode::Triple => format!("{}|{}|{}", self.first, self.middle, self.last),
            Mode::Double => format!("{}|{}", self.first, self.last),
        }
    }
}

impl fmt::Display for NameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Mode::Triple => write!(f, "{} {} {}", self.first, self.middle, self.last),
            Mode::Double => write!(f, "{} {}", self.first, self.last),
        }
    }
}

/// One `pattern -> replacement` suffix rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixRule {
    pub pattern: String,
    pub replacement: String,
}

/// Normalization pipeline: trim, case-fold and whitespace collapse on every
/// component, then the ordered suffix table on middle and last names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationRules {
    pub mode: Mode,
    pub suffix_rules: Vec<SuffixRule>,
}

impl Default for NormalizationRules {
    fn default() -> Self {
        NormalizationRules { mode: Mode::Triple, suffix_rules: Vec::new() }
    }
}

const MAX_REWRITES: usize = 32;

impl NormalizationRules {
    pub fn new(mode: Mode) -> Self {
        NormalizationRules { mode, suffix_rules: Vec::new() }
    }

    pub fn with_suffix_rules<I, S>(mut self, rules: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        self.suffix_rules.extend(rules.into_iter().map(|(p, r)| SuffixRule {
            pattern: fold(p.as_ref()),
            replacement: fold(r.as_ref()),
        }));
        self
    }

    /// Parses a rule file: one `pattern→replacement` (or `pattern->replacement`)
    /// per line. Blank lines and lines starting with `#` are ignored.
    pub fn parse_rule_file(mode: Mode, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (p, r) = line
                .split_once('→')
                .or_else(|| line.split_once("->"))
                .ok_or_else(|| Error::InvalidRule { line: i + 1, message: "expected `pattern→replacement`".into() })?;
            if fold(p).is_empty() {
                return Err(Error::InvalidRule { line: i + 1, message: "empty pattern".into() });
            }
            pairs.push((p.to_string(), r.to_string()));
        }
        Ok(NormalizationRules::new(mode).with_suffix_rules(pairs))
    }

    fn rewrite(&self, mut s: String) -> Result<String> {
        for _ in 0..MAX_REWRITES {
            let Some(rule) = self.suffix_rules.iter().find(|r| s.ends_with(&r.pattern)) else {
                return Ok(s);
            };
            s.truncate(s.len() - rule.pattern.len());
            s.push_str(&rule.replacement);
            s = fold(&s);
        }
        Err(Error::RulesDiverge(s))
    }
}

/// Case-fold and collapse whitespace runs to single spaces.
fn fold(s: &str) -> String {
    let lower = s.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for w in lower.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

pub fn normalize_parts(first: &str, middle: Option<&str>, last: &str, rules: &NormalizationRules) -> Result<NameKey> {
    let first = fold(first);
    if first.is_empty() {
        return Err(Error::EmptyName("first name"));
    }
    let last = rules.rewrite(fold(last))?;
    if last.is_empty() {
        return Err(Error::EmptyName("last name"));
    }
    let middle = match rules.mode {
        Mode::Double => String::new(),
        Mode::Triple => {
            let m = rules.rewrite(fold(middle.unwrap_or("")))?;
            if m.is_empty() {
                return Err(Error::EmptyName("middle name"));
            }
            m
        }
    };
    Ok(NameKey { first, middle, last, mode: rules.mode })
}

/// Normalizes the name of one raw record. Idempotent on its own output.
pub fn normalize(raw: &RawRecord, rules: &NormalizationRules) -> Result<NameKey> {
    normalize_parts(&raw.first, raw.middle.as_deref(), &raw.last, rules)
}

/// A record after normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedRecord {
    pub record_id: String,
    pub person_id: Option<String>,
    pub name: NameKey,
}

pub fn normalize_records(records: &RecordSet, rules: &NormalizationRules, exec: Execution) -> Result<Vec<NamedRecord>> {
    exec.map(&records.records, |r| {
        normalize(r, rules).map(|name| NamedRecord {
            record_id: r.record_id.clone(),
            person_id: r.person_id.clone(),
            name,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Person {
    pub person_id: String,
    pub name: NameKey,
}

/// Distinct persons, sorted by person id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PersonSet {
    pub persons: Vec<Person>,
    /// Persons whose records carried more than one distinct name.
    pub conflicts: usize,
}

impl PersonSet {
    /// Builds a set from arbitrary persons; fails on a repeated person id.
    pub fn from_persons(mut persons: Vec<Person>) -> Result<Self> {
        persons.sort();
        if let Some(w) = persons.windows(2).find(|w| w[0].person_id == w[1].person_id) {
            return Err(Error::InvalidConfig(format!("duplicate person id `{}`", w[0].person_id)));
        }
        Ok(PersonSet { persons, conflicts: 0 })
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn mode(&self) -> Option<Mode> {
        self.persons.first().map(|p| p.name.mode)
    }

    /// The same persons with names reduced to `mode` (triples to doubles
    /// drop the middle name).
    pub fn project(&self, mode: Mode) -> Result<PersonSet> {
        let persons = self
            .persons
            .iter()
            .map(|p| {
                let name = match (p.name.mode, mode) {
                    (a, b) if a == b => p.name.clone(),
                    (Mode::Triple, Mode::Double) => NameKey::double(&p.name.first, &p.name.last),
                    (found, expected) => return Err(Error::ModeMismatch { expected, found }),
                };
                Ok(Person { person_id: p.person_id.clone(), name })
            })
            .collect::<Result<_>>()?;
        Ok(PersonSet { persons, conflicts: self.conflicts })
    }
}

/// Collapses records to one entry per person id. Conflicting names resolve
/// to the most frequent one, ties to the lexicographically smallest.
pub fn dedupe_persons(records: &[NamedRecord]) -> Result<PersonSet> {
    let mut by_person: HashMap<&str, HashMap<&NameKey, usize>> = HashMap::new();
    for r in records {
        let pid = r.person_id.as_deref().ok_or_else(|| Error::MissingPersonId(r.record_id.clone()))?;
        *by_person.entry(pid).or_default().entry(&r.name).or_default() += 1;
    }
    let mut conflicts = 0;
    let mut persons: Vec<Person> = by_person
        .into_iter()
        .map(|(pid, names)| {
            if names.len() > 1 {
                conflicts += 1;
            }
            let (name, _) = names
                .into_iter()
                .max_by(|(a, ca), (b, cb)| ca.cmp(cb).then_with(|| b.cmp(a)))
                .expect("person has at least one name");
            Person { person_id: pid.to_string(), name: name.clone() }
        })
        .collect();
    persons.sort();
    Ok(PersonSet { persons, conflicts })
}

/// Splits persons into `(train, test)` with `|train| = round(fraction * n)`.
///
/// Membership is decided by ranking persons on a keyed hash of
/// `(seed, person_id)`, so it does not depend on input order.
pub fn split_train_test(persons: &PersonSet, fraction: f64, seed: u64) -> Result<(PersonSet, PersonSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction {fraction} outside (0,1)")));
    }
    if persons.len() < 2 {
        return Err(Error::Empty("need at least two persons to split".into()));
    }
    let n_train = (fraction * persons.len() as f64).round() as usize;
    let mut ranked: Vec<(u64, usize)> = persons
        .persons
        .iter()
        .enumerate()
        .map(|(i, p)| (keyed_u64(seed, &p.person_id), i))
        .collect();
    ranked.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| persons.persons[a.1].person_id.cmp(&persons.persons[b.1].person_id)));
    let mut in_train = vec![false; persons.len()];
    for &(_, i) in &ranked[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(persons.len() - n_train));
    for (p, t) in persons.persons.iter().zip(in_train) {
        if t { train.push(p.clone()) } else { test.push(p.clone()) }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((PersonSet { persons: train, conflicts: 0 }, PersonSet { persons: test, conflicts: 0 }))
}

/// Writes persons as TSV with header `person_id first middle last`.
pub fn write_persons<W: Write>(out: W, persons: &PersonSet) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    w.write_record(["person_id", "first", "middle", "last"])?;
    for p in &persons.persons {
        w.write_record([&p.person_id, &p.name.first, &p.name.middle, &p.name.last])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_persons`]. Names are taken as already
/// normalized and are not rewritten.
pub fn read_persons<R: Read>(input: R, mode: Mode) -> Result<PersonSet> {
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(input);
    let mut persons = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let get = |j: usize| rec.get(j).ok_or_else(|| Error::MalformedRow { row, message: format!("missing column {j}") });
        let (pid, first, middle, last) = (get(0)?, get(1)?, get(2)?, get(3)?);
        if pid.is_empty() || first.is_empty() || last.is_empty() {
            return Err(Error::MalformedRow { row, message: "empty person id or name".into() });
        }
        let name = match mode {
            Mode::Triple if middle.is_empty() => {
                return Err(Error::MalformedRow { row, message: "empty middle name in triple mode".into() })
            }
            Mode::Triple => NameKey::triple(first, middle, last),
            Mode::Double => NameKey::double(first, last),
        };
        persons.push(Person { person_id: pid.to_string(), name });
    }
    PersonSet::from_persons(persons)
}

/// Writes normalized records in the default ingest layout
/// (`id tin first middle last`), so the output can be re-ingested.
pub fn write_named_records<W: Write>(out: W, records: &[NamedRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    w.write_record(["id", "tin", "first", "middle", "last"])?;
    for r in records {
        w.write_record([
            r.record_id.as_str(),
            r.person_id.as_deref().unwrap_or(""),
            &r.name.first,
            &r.name.middle,
            &r.name.last,
        ])?;
    }
    w.flush()?;
    Ok(())
}
