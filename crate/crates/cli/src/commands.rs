use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use namepop::counts::Pair;
use namepop::evaluation::compare_models;
use namepop::linkage::{linked_pair_set, parse_grid, write_sweep_csv, ScoredGroups};
use namepop::lnre::{fit_lnre, write_growth_csv};
use namepop::records::{
    dedupe_persons, normalize_records, parse_records, read_persons, split_train_test, write_named_records, write_persons,
    ColumnMap, ColumnRef, FormatConfig, NormalizationRules,
};
use namepop::spectrum::spectrum as spectrum_of;
use namepop::synth::{generate_population, generate_records, write_records};
use namepop::{
    BucketSpec, Component, CountTable, Execution, FitConfig, LinkageConfig, Mode, NameModel, NamedRecord, PersonSet,
    SmoothingConfig, SynthConfig, Target, TestCounts,
};

use crate::manifest::Run;
use crate::{
    CountsArgs, EvaluateArgs, FitArgs, Format, IngestArgs, LinkArgs, Linking, SpectrumArgs, SplitArgs, SweepArgs, SynthArgs,
};

/// Some requested models or fits failed while the rest were written.
#[derive(Debug)]
pub struct ModelsFailed {
    pub failed: Vec<String>,
    pub input: bool,
}

impl fmt::Display for ModelsFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.failed.len(), self.failed.join(", "))
    }
}

impl std::error::Error for ModelsFailed {}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> namepop::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn read_person_file(run: &mut Run, path: &Path, mode: Mode) -> Result<PersonSet> {
    let bytes = run.read(path)?;
    read_persons(bytes.as_slice(), mode).with_context(|| format!("reading persons from {}", path.display()))
}

fn load_model(run: &mut Run, path: &Path) -> Result<NameModel> {
    let bytes = run.read(path)?;
    NameModel::load(bytes.as_slice()).with_context(|| format!("loading model {}", path.display()))
}

fn read_named_records(run: &mut Run, path: &Path, mode: Mode) -> Result<Vec<NamedRecord>> {
    let bytes = run.read(path)?;
    let records = parse_records(bytes.as_slice(), &FormatConfig::default())
        .with_context(|| format!("reading records from {}", path.display()))?;
    Ok(normalize_records(&records, &NormalizationRules::new(mode), Execution::default())?)
}

fn components(mode: Mode) -> Vec<Component> {
    match mode {
        Mode::Triple => vec![Component::First, Component::Middle, Component::Last],
        Mode::Double => vec![Component::First, Component::Last],
    }
}

fn pairs(mode: Mode) -> Vec<Pair> {
    match mode {
        Mode::Triple => vec![Pair::FirstMiddle, Pair::MiddleLast, Pair::FirstLast],
        Mode::Double => vec![Pair::FirstLast],
    }
}

fn targets(mode: Mode) -> Vec<Target> {
    let mut out = vec![Target::Full];
    out.extend(components(mode).into_iter().map(Target::component));
    out.extend(pairs(mode).into_iter().map(Target::pair));
    out
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut run = Run::start("synth", &args.out.out_dir, args)?;
    let mut config = match &args.config {
        Some(path) => {
            let text = String::from_utf8(run.read(path)?).context("config is not UTF-8")?;
            toml::from_str::<SynthConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(n) = args.persons {
        config.persons = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(k) = args.coupling {
        config.coupling = k;
    }
    if let Some(p) = args.records_p {
        config.records_p = p;
    }
    run.seed(config.seed);

    let persons = run.timed("population", || generate_population(&config))?;
    let records = run.timed("records", || generate_records(&persons, &config))?;
    run.write("synth_persons.tsv", &csv_bytes(|b| write_persons(b, &persons))?)?;
    run.write("synth_records.tsv", &csv_bytes(|b| write_records(b, &records))?)?;
    run.write("synth_config.toml", toml::to_string(&config)?.as_bytes())?;
    println!("generated {} persons, {} records", persons.len(), records.len());
    run.finish()
}

fn column_map(spec: &str, header: bool) -> Result<ColumnMap> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let [id, tin, first, middle, last] = parts[..] else {
        bail!(namepop::Error::InvalidConfig(format!("--columns needs five entries, got {}", parts.len())));
    };
    let col = |s: &str| -> ColumnRef {
        match s.parse::<usize>() {
            Ok(i) if !header => ColumnRef::Index(i),
            _ => ColumnRef::Name(s.to_string()),
        }
    };
    let optional = |s: &str| (s != "-").then(|| col(s));
    Ok(ColumnMap { record_id: col(id), person_id: optional(tin), first: col(first), middle: optional(middle), last: col(last) })
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let mut run = Run::start("ingest", &args.out.out_dir, args)?;
    let mut format = match args.format {
        Format::Tsv => FormatConfig::default(),
        Format::Csv => FormatConfig::csv(),
    };
    format.has_header = !args.no_header;
    format.strict = !args.lenient;
    format.columns = match &args.columns {
        Some(spec) => column_map(spec, format.has_header)?,
        None if args.no_header => ColumnMap::positional(),
        None => ColumnMap::default(),
    };
    let rules = match &args.rules {
        Some(path) => {
            let text = String::from_utf8(run.read(path)?).context("rule file is not UTF-8")?;
            NormalizationRules::parse_rule_file(args.mode, &text)?
        }
        None => NormalizationRules::new(args.mode),
    };

    let bytes = run.read(&args.input)?;
    let raw = run
        .timed("parse", || parse_records(bytes.as_slice(), &format))
        .with_context(|| format!("parsing {}", args.input.display()))?;
    let named = run.timed("normalize", || normalize_records(&raw, &rules, Execution::default()))?;
    run.write("records.tsv", &csv_bytes(|b| write_named_records(b, &named))?)?;
    if !raw.skipped.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row", "reason"])?;
        for s in &raw.skipped {
            w.write_record([s.row.to_string(), s.reason.clone()])?;
        }
        run.write("skipped.csv", &w.into_inner()?)?;
    }

    let persons = if named.iter().all(|r| r.person_id.is_some()) {
        let persons = run.timed("dedupe", || dedupe_persons(&named))?;
        run.write("persons.tsv", &csv_bytes(|b| write_persons(b, &persons))?)?;
        Some(persons.len())
    } else {
        None
    };
    match persons {
        Some(p) => println!("ingested {} records ({} skipped), {p} persons", named.len(), raw.skipped.len()),
        None => println!(
            "ingested {} records ({} skipped); no person set written, some records lack a person id",
            named.len(),
            raw.skipped.len()
        ),
    }
    run.finish()
}

pub fn split(args: &SplitArgs) -> Result<()> {
    let mut run = Run::start("split", &args.out.out_dir, args)?;
    run.seed(args.seed);
    let persons = read_person_file(&mut run, &args.input, args.mode)?;
    let (train, test) = split_train_test(&persons, args.fraction, args.seed)?;
    run.write("train.tsv", &csv_bytes(|b| write_persons(b, &train))?)?;
    run.write("test.tsv", &csv_bytes(|b| write_persons(b, &test))?)?;
    println!("train {} persons, test {} persons", train.len(), test.len());
    run.finish()
}

pub fn model_file_name(kind: namepop::ModelKind) -> String {
    format!("model_{}.json", kind.roman())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let mut run = Run::start("fit", &args.out.out_dir, args)?;
    let train = read_person_file(&mut run, &args.input, args.mode)?;
    let table = Arc::new(run.timed("counts", || CountTable::build(&train, args.mode))?);
    let population = args.population.unwrap_or(2 * train.len() as u64);
    let config = SmoothingConfig {
        alpha: args.smoothing.alpha,
        katz_cutoff: args.smoothing.katz_cutoff,
        e_semantics: args.smoothing.e_semantics,
        ..SmoothingConfig::default()
    };
    config.validate()?;

    let mut report = csv::Writer::from_writer(Vec::new());
    report.write_record(["model", "status", "lnre_converged", "message"])?;
    let mut failed = Vec::new();
    let mut all_input = true;
    for &kind in &args.models.0 {
        let fitted = run.timed(&format!("fit_{}", kind.roman()), || {
            NameModel::fit(kind, table.clone(), config.clone(), population)
        });
        match fitted {
            Ok(model) => {
                let name = model_file_name(kind);
                run.write(&name, &csv_bytes(|b| model.save(b))?)?;
                let converged = if kind.needs_unseen_estimate() { model.lnre_converged().to_string() } else { "NA".into() };
                report.write_record([kind.roman(), "ok", &converged, &name])?;
                println!("model {kind}: wrote {name}");
            }
            Err(e) => {
                eprintln!("model {kind}: {e}");
                all_input &= e.is_input_error();
                report.write_record([kind.roman(), "failed", "NA", &e.to_string()])?;
                run.error(format!("model {kind}: {e}"));
                failed.push(format!("model {kind}"));
            }
        }
    }
    run.write("fit_report.csv", &report.into_inner()?)?;
    run.finish()?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(ModelsFailed { failed, input: all_input }.into())
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut run = Run::start("evaluate", &args.out.out_dir, args)?;
    let models = args.models.iter().map(|p| load_model(&mut run, p)).collect::<Result<Vec<_>>>()?;
    let mode = models[0].mode();
    let test = read_person_file(&mut run, &args.test, mode)?;
    let counts = TestCounts::from_persons(&test, mode)?;
    let spec = BucketSpec::from_lower_bounds(args.buckets.clone())?;
    let refs: Vec<&NameModel> = models.iter().collect();
    let comparison = run.timed("evaluate", || compare_models(&refs, &counts, &spec, Execution::default()))?;
    run.write("evaluation.csv", &csv_bytes(|b| comparison.write_csv(b))?)?;
    print!("{}", comparison.to_table());
    run.finish()
}

fn linkage_config(model: &NameModel, linking: &Linking, threshold: f64) -> LinkageConfig {
    LinkageConfig {
        threshold,
        strategy: linking.strategy,
        population: linking.population.unwrap_or(model.target_population()),
    }
}

pub fn link(args: &LinkArgs) -> Result<()> {
    let mut run = Run::start("link", &args.out.out_dir, args)?;
    let model = load_model(&mut run, &args.model)?;
    let records = read_named_records(&mut run, &args.linking.input, model.mode())?;
    let config = linkage_config(&model, &args.linking, args.threshold);
    let result = run.timed("link", || namepop::linkage::link(&records, &model, &config))?;
    let pairs = linked_pair_set(&records, &model, &config)?;

    run.write("link.csv", &csv_bytes(|b| write_sweep_csv(b, std::slice::from_ref(&result)))?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["record_a", "record_b"])?;
    for (i, j) in pairs {
        w.write_record([&records[i].record_id, &records[j].record_id])?;
    }
    run.write("links.csv", &w.into_inner()?)?;
    let show = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
    println!(
        "t={} linked={} correct={} precision={} recall={}",
        result.threshold,
        result.linked_pairs,
        result.correct_pairs,
        show(result.precision),
        show(result.recall)
    );
    run.finish()
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let mut run = Run::start("sweep", &args.out.out_dir, args)?;
    let grid = parse_grid(&args.grid)?;
    let models = args.models.iter().map(|p| load_model(&mut run, p)).collect::<Result<Vec<_>>>()?;
    let mut records: BTreeMap<Mode, Vec<NamedRecord>> = BTreeMap::new();
    let mut series = Vec::new();
    for model in &models {
        let kind = model.kind();
        if series.iter().any(|(k, _)| *k == kind) {
            bail!(namepop::Error::InvalidConfig(format!("model {kind} given twice")));
        }
        if let std::collections::btree_map::Entry::Vacant(slot) = records.entry(model.mode()) {
            slot.insert(read_named_records(&mut run, &args.linking.input, model.mode())?);
        }
        let config = linkage_config(model, &args.linking, 0.0);
        let results = run.timed(&format!("sweep_{}", kind.roman()), || -> namepop::Result<_> {
            ScoredGroups::new(&records[&model.mode()], model, config.strategy, config.population)?.sweep(&grid)
        })?;
        let name = format!("sweep_{}.csv", kind.roman());
        run.write(&name, &csv_bytes(|b| write_sweep_csv(b, &results))?)?;
        println!("model {kind}: {} thresholds, wrote {name}", results.len());
        series.push((kind, results));
    }
    let labelled: Vec<(String, _)> = series.into_iter().map(|(k, r)| (format!("{k} ({})", k.description()), r)).collect();
    run.write("sweep.svg", namepop::svg::sweep_chart(&labelled).as_bytes())?;
    run.finish()
}

pub fn spectrum(args: &SpectrumArgs) -> Result<()> {
    let mut run = Run::start("spectrum", &args.out.out_dir, args)?;
    let persons = read_person_file(&mut run, &args.input, args.mode)?;
    let table = CountTable::build(&persons, args.mode)?;
    let selected = if args.target.is_empty() { targets(args.mode) } else { args.target.clone() };
    let mut failed = Vec::new();
    let mut all_input = true;
    for target in selected {
        let spec = spectrum_of(&table, target)?;
        run.write(&format!("spectrum_{target}.csv"), &csv_bytes(|b| spec.write_csv(b))?)?;
        println!("{target}: N={} V={} V1={}", spec.tokens(), spec.types(), spec.hapaxes());
        if args.predict.is_empty() {
            continue;
        }
        let fitted = run.timed(&format!("lnre_{target}"), || fit_lnre(&spec, &FitConfig::default())).and_then(|m| {
            let rows = args.predict.iter().map(|&n| m.predict_unseen(spec.types(), n)).collect::<namepop::Result<Vec<_>>>()?;
            Ok((m, rows))
        });
        match fitted {
            Ok((model, rows)) => {
                run.write(&format!("lnre_{target}.json"), &serde_json::to_vec_pretty(&model)?)?;
                run.write(&format!("growth_{target}.csv"), &csv_bytes(|b| write_growth_csv(b, &rows))?)?;
                if !model.converged {
                    eprintln!("{target}: LNRE fit degenerate (alpha={:.4})", model.alpha);
                }
            }
            Err(e) => {
                eprintln!("{target}: {e}");
                all_input &= e.is_input_error();
                run.error(format!("{target}: {e}"));
                failed.push(format!("fit {target}"));
            }
        }
    }
    run.finish()?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(ModelsFailed { failed, input: all_input }.into())
    }
}

pub fn counts(args: &CountsArgs) -> Result<()> {
    let mut run = Run::start("counts", &args.out.out_dir, args)?;
    let persons = read_person_file(&mut run, &args.input, args.mode)?;
    let table = CountTable::build(&persons, args.mode)?;
    run.write("counts_full.csv", &csv_bytes(|b| table.write_full_csv(b))?)?;
    for c in components(args.mode) {
        let name = format!("counts_{}.csv", Target::component(c));
        run.write(&name, &csv_bytes(|b| table.write_component_csv(c, b))?)?;
    }
    for p in pairs(args.mode) {
        let name = format!("counts_{}.csv", Target::pair(p));
        run.write(&name, &csv_bytes(|b| table.write_pair_csv(p, b))?)?;
    }
    println!("{} persons, {} distinct full names", table.total(), table.full_types());
    run.finish()
}
