//! LNRE (large number of rare events) models: fitting a finite
//! Zipf–Mandelbrot type density to a frequency spectrum and extrapolating
//! the expected vocabulary size and spectrum to larger samples.
//!
//! The fZM type density is `g(π) = C · π^(−α−1)` on `[A, B]`, with `C` fixed
//! by `∫ π g(π) dπ = 1`. Under Poisson sampling of `N` tokens
//!
//! ```text
//! E[V_m(N)] = C N^α / m! · [Γ(m−α, NA) − Γ(m−α, NB)]
//! E[V(N)]   = C/α · [A^−α (1−e^−NA) − B^−α (1−e^−NB) + N^α (Γ(1−α, NA) − Γ(1−α, NB))]
//! ```

pub mod gamma;
pub mod simplex;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::FrequencySpectrum;
use gamma::{gamma_mass_between, ln_gamma};
use simplex::{minimize, SimplexConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Fzm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnreModel {
    pub family: Family,
    /// Shape α in (0, 1).
    pub alpha: f64,
    /// Lower cutoff A on type probabilities.
    pub lower: f64,
    /// Upper cutoff B > A.
    pub upper: f64,
    /// Normalization C, derived from the other three.
    pub norm: f64,
    /// Sample size and vocabulary of the fitted spectrum (zero for a model
    /// built from known parameters).
    pub fitted_tokens: u64,
    pub fitted_types: u64,
    pub fingerprint: String,
    /// Chi-squared cost at the optimum.
    pub cost: f64,
    pub converged: bool,
}

fn fzm_norm(alpha: f64, lower: f64, upper: f64) -> f64 {
    (1.0 - alpha) / (upper.powf(1.0 - alpha) - lower.powf(1.0 - alpha))
}

impl LnreModel {
    /// An fZM model with known parameters.
    pub fn fzm(alpha: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("fZM shape {alpha} outside (0,1)")));
        }
        if !(lower > 0.0 && upper > lower && upper.is_finite()) {
            return Err(Error::InvalidConfig(format!("fZM cutoffs need 0 < A < B, got A={lower}, B={upper}")));
        }
        Ok(LnreModel {
            family: Family::Fzm,
            alpha,
            lower,
            upper,
            norm: fzm_norm(alpha, lower, upper),
            fitted_tokens: 0,
            fitted_types: 0,
            fingerprint: String::new(),
            cost: 0.0,
            converged: true,
        })
    }

    /// Total number of types in the population, `E[V(∞)]`.
    pub fn population_types(&self) -> f64 {
        self.norm * (self.lower.powf(-self.alpha) - self.upper.powf(-self.alpha)) / self.alpha
    }

    /// Expected vocabulary size at sample size `n`.
    pub fn expected_types(&self, n: f64) -> Result<f64> {
        if n <= 0.0 {
            return Ok(0.0);
        }
        let (a, lo, hi) = (self.alpha, self.lower, self.upper);
        let (na, nb) = (n * lo, n * hi);
        let s = 1.0 - a;
        let tail = (a * n.ln() + ln_gamma(s)).exp() * gamma_mass_between(s, na, nb)?;
        let v = self.norm / a * (lo.powf(-a) * -(-na).exp_m1() - hi.powf(-a) * -(-nb).exp_m1() + tail);
        Ok(v.max(0.0))
    }

    /// Expected number of types occurring exactly `m` times at sample size `n`.
    pub fn expected_spectrum(&self, n: f64, m: u64) -> Result<f64> {
        if m == 0 {
            return Err(Error::InvalidConfig("spectrum class m must be >= 1".into()));
        }
        if n <= 0.0 {
            return Ok(0.0);
        }
        let s = m as f64 - self.alpha;
        let log_scale = self.norm.ln() + self.alpha * n.ln() + ln_gamma(s) - ln_gamma(m as f64 + 1.0);
        Ok(log_scale.exp() * gamma_mass_between(s, n * self.lower, n * self.upper)?)
    }

    /// Growth prediction at `target_tokens`, given the vocabulary observed
    /// at the fitted size.
    pub fn predict_unseen(&self, observed_types: u64, target_tokens: u64) -> Result<GrowthPrediction> {
        if target_tokens < self.fitted_tokens {
            return Err(Error::InvalidConfig(format!(
                "target size {target_tokens} below fitted size {}; use binomial interpolation",
                self.fitted_tokens
            )));
        }
        let n = target_tokens as f64;
        let expected_types = self.expected_types(n)?;
        Ok(GrowthPrediction {
            target_tokens,
            expected_types,
            expected_hapaxes: self.expected_spectrum(n, 1)?,
            expected_unseen: (expected_types - observed_types as f64).max(0.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthPrediction {
    pub target_tokens: u64,
    pub expected_types: f64,
    pub expected_hapaxes: f64,
    pub expected_unseen: f64,
}

/// Writes predictions as CSV `target_N,expected_V,expected_V1,expected_unseen`.
pub fn write_growth_csv<W: Write>(out: W, rows: &[GrowthPrediction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target_N", "expected_V", "expected_V1", "expected_unseen"])?;
    for g in rows {
        w.write_record([
            g.target_tokens.to_string(),
            g.expected_types.to_string(),
            g.expected_hapaxes.to_string(),
            g.expected_unseen.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Spectrum classes `N_1..N_k` entering the cost together with V.
    pub classes: u64,
    pub simplex: SimplexConfig,
    /// Fits whose optimum has α outside this band, or `B/A` below
    /// `min_cutoff_ratio`, or whose spectrum has no types in the fitted
    /// classes, are flagged as not converged: the family has degenerated
    /// rather than fitted.
    pub alpha_band: (f64, f64),
    pub min_cutoff_ratio: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            classes: 15,
            simplex: SimplexConfig::default(),
            alpha_band: (0.005, 0.995),
            min_cutoff_ratio: 2.0,
        }
    }
}

struct Params {
    alpha: f64,
    lower: f64,
    upper: f64,
}

// θ = (logit α, ln B); A follows from matching the observed vocabulary.
fn decode(theta: &[f64], n: f64, types: f64) -> Params {
    let alpha = 1.0 / (1.0 + (-theta[0]).exp());
    let upper = theta[1].exp();
    Params { alpha, lower: solve_lower(alpha, upper, n, types), upper }
}

fn encode(alpha: f64, upper: f64) -> [f64; 2] {
    [(alpha / (1.0 - alpha)).ln(), upper.ln()]
}

fn model_of(p: &Params) -> Option<LnreModel> {
    LnreModel::fzm(p.alpha, p.lower, p.upper).ok().filter(|m| m.norm.is_finite() && m.norm > 0.0)
}

fn chi2(model: &LnreModel, observed: &[(f64, f64)], n: f64) -> f64 {
    let mut cost = 0.0;
    for &(m, obs) in observed {
        let expected = if m == 0.0 { model.expected_types(n) } else { model.expected_spectrum(n, m as u64) };
        match expected {
            Ok(e) if e.is_finite() => cost += (obs - e).powi(2) / e.max(1.0),
            _ => return f64::INFINITY,
        }
    }
    cost
}

/// Lower cutoff that makes `E[V(n)]` equal the observed vocabulary, for
/// fixed shape and upper cutoff (bisection in ln A). When no cutoff reaches
/// the vocabulary the nearest bracket end is returned.
fn solve_lower(alpha: f64, upper: f64, n: f64, types: f64) -> f64 {
    let (mut lo, mut hi) = ((upper * 1e-14).ln(), (upper * 0.5).ln());
    let v = |ln_a: f64| LnreModel::fzm(alpha, ln_a.exp(), upper).and_then(|m| m.expected_types(n)).unwrap_or(f64::NAN);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        // smaller A admits more types
        if v(mid) > types {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Fits an fZM model by minimizing the chi-squared distance between the
/// observed `(V, N_1..N_k)` and their expectations, with the lower cutoff
/// tied to the observed vocabulary so that `E[V(N)] = V`. Three fixed
/// starting points; deterministic.
pub fn fit_lnre(spectrum: &FrequencySpectrum, config: &FitConfig) -> Result<LnreModel> {
    let types = spectrum.types();
    if types < 3 || spectrum.num_classes() < 2 {
        return Err(Error::DegenerateSpectrum(format!(
            "need V >= 3 and two populated classes, got V={types} with {} class(es)",
            spectrum.num_classes()
        )));
    }
    let n = spectrum.tokens() as f64;
    let v = types as f64;
    let mut observed = vec![(0.0, v)];
    observed.extend((1..=config.classes).map(|m| (m as f64, spectrum.get(m) as f64)));

    let alpha0 = (spectrum.hapaxes() as f64 / v).clamp(0.05, 0.95);
    let upper0 = (2.0 * spectrum.max_class().unwrap_or(1) as f64 / n).min(1.0);
    let starts = [alpha0, 0.5 * alpha0, 0.5 * (1.0 + alpha0)];

    let objective = |theta: &[f64]| match model_of(&decode(theta, n, v)) {
        Some(m) => chi2(&m, &observed, n),
        None => f64::INFINITY,
    };

    let mut best: Option<simplex::Minimum> = None;
    for alpha in starts {
        let m = minimize(objective, &encode(alpha, upper0), &config.simplex);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    let p = decode(&best.x, n, v);
    let mut model = model_of(&p)
        .ok_or_else(|| Error::Numerical(format!("fZM fit ended at invalid parameters {:?}", best.x)))?;
    let rare_types: f64 = observed[1..].iter().map(|&(_, o)| o).sum();
    let degenerate = p.alpha < config.alpha_band.0
        || p.alpha > config.alpha_band.1
        || p.upper / p.lower < config.min_cutoff_ratio
        || rare_types == 0.0;
    model.fitted_tokens = spectrum.tokens();
    model.fitted_types = types;
    model.fingerprint = spectrum.fingerprint();
    model.cost = best.value;
    model.converged = best.converged && best.value.is_finite() && !degenerate;
    Ok(model)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Expected `V_m` in a uniform subsample of `n0` out of the spectrum's `N`
/// tokens (each token kept independently with probability `n0/N`).
pub fn binomial_interpolate(spectrum: &FrequencySpectrum, n0: u64, m: u64) -> Result<f64> {
    let n = spectrum.tokens();
    if n0 > n {
        return Err(Error::InvalidConfig(format!("subsample size {n0} exceeds sample size {n}")));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("spectrum class m must be >= 1".into()));
    }
    if n0 == n {
        return Ok(spectrum.get(m) as f64);
    }
    if n0 == 0 {
        return Ok(0.0);
    }
    let p = n0 as f64 / n as f64;
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    Ok(spectrum
        .iter()
        .filter(|&(r, _)| r >= m)
        .map(|(r, nr)| nr as f64 * (ln_choose(r, m) + m as f64 * lp + (r - m) as f64 * lq).exp())
        .sum())
}

/// Expected vocabulary of the same subsample.
pub fn binomial_interpolate_types(spectrum: &FrequencySpectrum, n0: u64) -> Result<f64> {
    let n = spectrum.tokens();
    if n0 > n {
        return Err(Error::InvalidConfig(format!("subsample size {n0} exceeds sample size {n}")));
    }
    let q = 1.0 - n0 as f64 / n.max(1) as f64;
    Ok(spectrum.iter().map(|(r, nr)| nr as f64 * (1.0 - q.powi(r as i32))).sum())
}
