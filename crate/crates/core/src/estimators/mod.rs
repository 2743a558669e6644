//! Name-popularity models I–IX.
//!
//! | kind | estimate of P(f m ℓ) (triples) |
//! |------|--------------------------------|
//! | I    | 1/|S| (every name unique) |
//! | II   | C(fmℓ)/N |
//! | III  | P(f) P(m) P(ℓ), all MLE |
//! | IV   | P(f given m) P(m given ℓ) P(ℓ), all MLE |
//! | V    | chain, Laplace factors with α = 1 |
//! | VI   | chain, Laplace factors with α = 1/N |
//! | VII  | chain, Good-Turing factors |
//! | VIII | chain, Katz factors |
//! | IX   | chain, pseudo-Laplace factors (a score) |
//!
//! Doubles use `P(f given ℓ) P(ℓ)` for the chain and `P(f) P(ℓ)` for III.
//! Good-Turing and Katz conditionals are the ratio of the smoothed pair
//! probability to the smoothed marginal, clamped to `[0, 1]`.

mod file;
pub mod smoothing;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::counts::{Component, CountTable, Pair, Resolved};
use crate::error::{Error, Result};
use crate::lnre::{fit_lnre, FitConfig, GrowthPrediction, LnreModel};
use crate::records::{Mode, NameKey};
use crate::spectrum::{spectrum, FrequencySpectrum, Target};
pub use file::FORMAT_ID;
use smoothing::{prob_good_turing, prob_katz, prob_laplace, prob_mle, prob_pseudo_laplace, GtFallback};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "I")]
    AlwaysOne,
    #[serde(rename = "II")]
    MleFull,
    #[serde(rename = "III")]
    Independence,
    #[serde(rename = "IV")]
    Markov,
    #[serde(rename = "V")]
    AddOne,
    #[serde(rename = "VI")]
    LaplaceSmall,
    #[serde(rename = "VII")]
    GoodTuring,
    #[serde(rename = "VIII")]
    Katz,
    #[serde(rename = "IX")]
    PseudoLaplace,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::AlwaysOne,
        ModelKind::MleFull,
        ModelKind::Independence,
        ModelKind::Markov,
        ModelKind::AddOne,
        ModelKind::LaplaceSmall,
        ModelKind::GoodTuring,
        ModelKind::Katz,
        ModelKind::PseudoLaplace,
    ];

    pub fn roman(self) -> &'static str {
        ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX"][self as usize]
    }

    pub fn description(self) -> &'static str {
        match self {
            ModelKind::AlwaysOne => "always 1",
            ModelKind::MleFull => "MLE of full names",
            ModelKind::Independence => "independent components",
            ModelKind::Markov => "MLE chain",
            ModelKind::AddOne => "Laplace chain, alpha=1",
            ModelKind::LaplaceSmall => "Laplace chain, alpha=1/N",
            ModelKind::GoodTuring => "Good-Turing chain",
            ModelKind::Katz => "Katz chain",
            ModelKind::PseudoLaplace => "pseudo-Laplace chain",
        }
    }

    /// Kinds that need unseen-type estimates from an LNRE fit.
    pub fn needs_unseen_estimate(self) -> bool {
        matches!(self, ModelKind::GoodTuring | ModelKind::Katz)
    }

    /// Distributions whose unseen-type estimate E the kind consumes.
    pub fn unseen_targets(self, mode: Mode) -> Vec<Target> {
        if !self.needs_unseen_estimate() {
            return Vec::new();
        }
        match mode {
            Mode::Triple => vec![Target::FirstMiddle, Target::Middle, Target::MiddleLast, Target::Last],
            Mode::Double => vec![Target::FirstLast, Target::Last],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.roman())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.roman().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model kind `{s}` (expected I..IX)")))
    }
}

/// How the unseen-type count E is read off the LNRE fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ESemantics {
    /// Expected number of distinct names in S that are absent from training.
    #[default]
    Unseen,
    /// Expected number of hapaxes in S.
    Hapax,
}

impl std::str::FromStr for ESemantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unseen" => Ok(ESemantics::Unseen),
            "hapax" => Ok(ESemantics::Hapax),
            other => Err(Error::InvalidConfig(format!("unknown E semantics `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// α of the pseudo-Laplace model IX.
    pub alpha: f64,
    pub katz_cutoff: u64,
    pub gt_fallback: GtFallback,
    pub e_semantics: ESemantics,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { alpha: 1.0, katz_cutoff: 3, gt_fallback: GtFallback::Unadjusted, e_semantics: ESemantics::Unseen }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.katz_cutoff < 1 {
            return Err(Error::InvalidConfig("katz cutoff must be >= 1".into()));
        }
        Ok(())
    }
}

/// E for one distribution, with the fit it came from when there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnseenEstimate {
    pub target: Target,
    pub types: f64,
    pub lnre: Option<LnreModel>,
    pub prediction: Option<GrowthPrediction>,
}

impl UnseenEstimate {
    pub fn manual(target: Target, types: f64) -> Self {
        UnseenEstimate { target, types, lnre: None, prediction: None }
    }
}

/// Fits LNRE models for `targets` and turns each into E for a population of
/// `population` persons. E is floored at one type.
pub fn fit_unseen_estimates(
    table: &CountTable,
    targets: &[Target],
    population: u64,
    semantics: ESemantics,
    fit: &FitConfig,
) -> Result<BTreeMap<Target, UnseenEstimate>> {
    let mut out = BTreeMap::new();
    for &target in targets {
        let spec = spectrum(table, target)?;
        let model = fit_lnre(&spec, fit)?;
        let prediction = model.predict_unseen(spec.types(), population.max(spec.tokens()))?;
        let raw = match semantics {
            ESemantics::Unseen => prediction.expected_unseen,
            ESemantics::Hapax => prediction.expected_hapaxes,
        };
        out.insert(target, UnseenEstimate { target, types: raw.max(1.0), lnre: Some(model), prediction: Some(prediction) });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    Mle,
    Laplace(f64),
    GoodTuring,
    Katz,
    PseudoLaplace(f64),
}

/// A fitted model. Immutable; probability queries are pure.
#[derive(Debug, Clone)]
pub struct NameModel {
    kind: ModelKind,
    config: SmoothingConfig,
    table: Arc<CountTable>,
    target_population: u64,
    unseen: BTreeMap<Target, UnseenEstimate>,
    spectra: BTreeMap<Target, FrequencySpectrum>,
}

impl NameModel {
    /// Fits `kind` on `table`; Good-Turing and Katz fit their own LNRE
    /// models. `target_population` is the size |S| the estimates are for.
    pub fn fit(kind: ModelKind, table: Arc<CountTable>, config: SmoothingConfig, target_population: u64) -> Result<Self> {
        let targets = kind.unseen_targets(table.mode());
        let unseen = if targets.is_empty() {
            BTreeMap::new()
        } else {
            fit_unseen_estimates(&table, &targets, target_population, config.e_semantics, &FitConfig::default())
                .map_err(|e| match e {
                    Error::DegenerateSpectrum(_) | Error::Empty(_) | Error::Numerical(_) => {
                        Error::MissingUnseenEstimate { kind: kind.to_string(), target: targets[0] }
                    }
                    other => other,
                })?
        };
        Self::with_unseen(kind, table, config, target_population, unseen)
    }

    /// Builds a model from precomputed unseen-type estimates.
    pub fn with_unseen(
        kind: ModelKind,
        table: Arc<CountTable>,
        config: SmoothingConfig,
        target_population: u64,
        unseen: BTreeMap<Target, UnseenEstimate>,
    ) -> Result<Self> {
        config.validate()?;
        if target_population == 0 {
            return Err(Error::InvalidConfig("target population must be >= 1".into()));
        }
        if kind != ModelKind::AlwaysOne && table.total() == 0 {
            return Err(Error::Empty(format!("model {kind} needs a nonempty training table")));
        }
        let mut spectra = BTreeMap::new();
        for target in kind.unseen_targets(table.mode()) {
            let est = unseen
                .get(&target)
                .ok_or_else(|| Error::MissingUnseenEstimate { kind: kind.to_string(), target })?;
            if !(est.types > 0.0) {
                return Err(Error::InvalidConfig(format!("E for {target} must be > 0, got {}", est.types)));
            }
            spectra.insert(target, spectrum(&table, target)?);
        }
        let unseen = unseen.into_iter().filter(|(t, _)| spectra.contains_key(t)).collect();
        Ok(NameModel { kind, config, table, target_population, unseen, spectra })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn mode(&self) -> Mode {
        self.table.mode()
    }

    pub fn config(&self) -> &SmoothingConfig {
        &self.config
    }

    pub fn table(&self) -> &Arc<CountTable> {
        &self.table
    }

    pub fn target_population(&self) -> u64 {
        self.target_population
    }

    pub fn unseen_estimates(&self) -> &BTreeMap<Target, UnseenEstimate> {
        &self.unseen
    }

    /// True unless one of the LNRE fits behind E did not converge.
    pub fn lnre_converged(&self) -> bool {
        self.unseen.values().all(|u| u.lnre.as_ref().is_none_or(|m| m.converged))
    }

    fn factor(&self) -> Option<Factor> {
        let n = self.table.total() as f64;
        match self.kind {
            ModelKind::AlwaysOne | ModelKind::MleFull | ModelKind::Independence => None,
            ModelKind::Markov => Some(Factor::Mle),
            ModelKind::AddOne => Some(Factor::Laplace(1.0)),
            ModelKind::LaplaceSmall => Some(Factor::Laplace(1.0 / n)),
            ModelKind::GoodTuring => Some(Factor::GoodTuring),
            ModelKind::Katz => Some(Factor::Katz),
            ModelKind::PseudoLaplace => Some(Factor::PseudoLaplace(self.config.alpha)),
        }
    }

    fn smoothed(&self, factor: Factor, count: u64, target: Target, total: u64, vocab: usize) -> Result<f64> {
        let fallback = self.config.gt_fallback;
        let e = |t: Target| self.unseen[&t].types;
        match factor {
            Factor::Mle => Ok(if total == 0 { 0.0 } else { count as f64 / total as f64 }),
            Factor::Laplace(a) => prob_laplace(count, total, a, vocab),
            Factor::PseudoLaplace(a) => prob_pseudo_laplace(count, total, a),
            Factor::GoodTuring => prob_good_turing(count, &self.spectra[&target], self.table.total(), e(target), fallback),
            Factor::Katz => prob_katz(
                count,
                &self.spectra[&target],
                self.table.total(),
                e(target),
                self.config.katz_cutoff,
                fallback,
            ),
        }
    }

    /// P(a given b) for the pair `(a, b)`.
    fn conditional(&self, factor: Factor, pair: Pair, joint: u64, context: u64) -> Result<f64> {
        let (ca, cb) = pair.components();
        match factor {
            Factor::GoodTuring | Factor::Katz => {
                let n = self.table.total();
                let pj = self.smoothed(factor, joint, Target::pair(pair), n, 0)?;
                let pm = self.smoothed(factor, context, Target::component(cb), n, 0)?;
                Ok(if pm > 0.0 { (pj / pm).clamp(0.0, 1.0) } else { 0.0 })
            }
            _ => self.smoothed(factor, joint, Target::pair(pair), context, self.table.vocab(ca).len()),
        }
    }

    fn unigram(&self, factor: Factor, c: Component, count: u64) -> Result<f64> {
        self.smoothed(factor, count, Target::component(c), self.table.total(), self.table.vocab(c).len())
    }

    fn chain(&self, factor: Factor, r: &Resolved) -> Result<f64> {
        let t = &*self.table;
        let c_l = t.component_count_id(Component::Last, r.last);
        let p_l = self.unigram(factor, Component::Last, c_l)?;
        match t.mode() {
            Mode::Triple => {
                let c_m = t.component_count_id(Component::Middle, r.middle);
                let f_m = self.conditional(factor, Pair::FirstMiddle, t.pair_count_id(Pair::FirstMiddle, r.first, r.middle), c_m)?;
                let m_l = self.conditional(factor, Pair::MiddleLast, t.pair_count_id(Pair::MiddleLast, r.middle, r.last), c_l)?;
                Ok(f_m * m_l * p_l)
            }
            Mode::Double => {
                let f_l = self.conditional(factor, Pair::FirstLast, t.pair_count_id(Pair::FirstLast, r.first, r.last), c_l)?;
                Ok(f_l * p_l)
            }
        }
    }

    /// The model's smoothed P(a given b) for a component pair, e.g.
    /// `(FirstMiddle, "ivan", "petrovich")` for P(f = ivan given m = petrovich).
    pub fn conditional_probability(&self, pair: Pair, a: &str, b: &str) -> Result<f64> {
        let factor = self.factor().ok_or_else(|| {
            Error::InvalidConfig(format!("model {} has no conditional factors", self.kind))
        })?;
        let t = &*self.table;
        let (ca, cb) = pair.components();
        let (ia, ib) = (t.vocab(ca).id(a), t.vocab(cb).id(b));
        self.conditional(factor, pair, t.pair_count_id(pair, ia, ib), t.component_count_id(cb, ib))
    }

    /// P(x) with the model's own target population (only model I uses it).
    pub fn probability(&self, name: &NameKey) -> Result<f64> {
        self.probability_in(name, self.target_population)
    }

    /// P(x) for a population of `population` persons.
    pub fn probability_in(&self, name: &NameKey, population: u64) -> Result<f64> {
        if name.mode != self.mode() {
            return Err(Error::ModeMismatch { expected: self.mode(), found: name.mode });
        }
        let t = &*self.table;
        match self.kind {
            ModelKind::AlwaysOne => prob_always_one(population),
            ModelKind::MleFull => prob_mle(t.count(name), t.total()),
            ModelKind::Independence => prob_independence(t, name),
            _ => self.chain(self.factor().expect("chain kinds have a factor"), &t.resolve(name)),
        }
    }

    /// Expected number of bearers of `name` among `population` persons.
    pub fn estimate_count(&self, name: &NameKey, population: u64) -> Result<CountEstimate> {
        if population == 0 {
            return Err(Error::InvalidConfig("population size must be >= 1".into()));
        }
        let estimate = match self.kind {
            // |S| C(x) / N in one rounding, so train = test reproduces counts exactly
            ModelKind::MleFull => {
                self.probability_in(name, population)?;
                population as f64 * self.table.count(name) as f64 / self.table.total() as f64
            }
            _ => population as f64 * self.probability_in(name, population)?,
        };
        Ok(CountEstimate { name: name.clone(), estimate })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountEstimate {
    pub name: NameKey,
    pub estimate: f64,
}

/// Model I: every name is carried by exactly one person.
pub fn prob_always_one(population: u64) -> Result<f64> {
    if population == 0 {
        return Err(Error::InvalidConfig("population size must be >= 1".into()));
    }
    Ok(1.0 / population as f64)
}

/// Model II.
pub fn prob_mle_full(table: &CountTable, name: &NameKey) -> Result<f64> {
    prob_mle(table.count(name), table.total())
}

/// Model III: product of component MLEs.
pub fn prob_independence(table: &CountTable, name: &NameKey) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::Empty("independence model over an empty table".into()));
    }
    let n = n as f64;
    let r = table.resolve(name);
    let f = table.component_count_id(Component::First, r.first) as f64 / n;
    let l = table.component_count_id(Component::Last, r.last) as f64 / n;
    Ok(match table.mode() {
        Mode::Triple => f * (table.component_count_id(Component::Middle, r.middle) as f64 / n) * l,
        Mode::Double => f * l,
    })
}

/// Model IV: MLE chain; a factor with a zero conditioning count is zero.
pub fn prob_markov(table: &CountTable, name: &NameKey) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::Empty("chain model over an empty table".into()));
    }
    let r = table.resolve(name);
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let c_l = table.component_count_id(Component::Last, r.last);
    let p_l = c_l as f64 / n as f64;
    Ok(match table.mode() {
        Mode::Triple => {
            let c_m = table.component_count_id(Component::Middle, r.middle);
            ratio(table.pair_count_id(Pair::FirstMiddle, r.first, r.middle), c_m)
                * ratio(table.pair_count_id(Pair::MiddleLast, r.middle, r.last), c_l)
                * p_l
        }
        Mode::Double => ratio(table.pair_count_id(Pair::FirstLast, r.first, r.last), c_l) * p_l,
    })
}
