#![allow(dead_code)]

use namepop::FrequencySpectrum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

/// Finite Zipf-Mandelbrot type density `C π^(-α-1)` on `[a, b]`.
#[derive(Debug, Clone, Copy)]
pub struct Fzm {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl Fzm {
    pub fn norm(&self) -> f64 {
        (1.0 - self.alpha) / (self.b.powf(1.0 - self.alpha) - self.a.powf(1.0 - self.alpha))
    }

    pub fn types(&self) -> f64 {
        self.norm() / self.alpha * (self.a.powf(-self.alpha) - self.b.powf(-self.alpha))
    }

    /// `∫ g(π) f(π) dπ`, composite Simpson in `ln π`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let (u0, u1) = (self.a.ln(), self.b.ln());
        let k = 40_000;
        let h = (u1 - u0) / k as f64;
        let c = self.norm();
        let g = |u: f64| c * (-self.alpha * u).exp() * f(u.exp());
        let mut s = g(u0) + g(u1);
        for i in 1..k {
            s += g(u0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    pub fn expected_types(&self, n: f64) -> f64 {
        self.integrate(|p| -(-n * p).exp_m1())
    }

    /// Type probabilities by inverse-CDF sampling of the type density, one
    /// jittered draw per quantile stratum so the population tracks the density.
    pub fn sample_probabilities(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let s = self.types().round() as usize;
        let (lo, hi) = (self.a.powf(-self.alpha), self.b.powf(-self.alpha));
        (0..s)
            .map(|i| {
                let u = (i as f64 + rng.random::<f64>()) / s as f64;
                (lo - u * (lo - hi)).powf(-1.0 / self.alpha)
            })
            .collect()
    }
}

/// Poisson-sampled counts `Poisson(n π_i)` for every type.
pub fn poisson_counts(probs: &[f64], n: f64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    probs
        .iter()
        .map(|&p| Poisson::new(n * p).map(|d| d.sample(rng) as u64).unwrap_or(0))
        .collect()
}

pub fn spectrum_of(counts: &[u64]) -> FrequencySpectrum {
    FrequencySpectrum::from_counts(counts.iter().copied().filter(|&c| c > 0))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean and standard error of `N_m` over `reps` Bernoulli(p) thinnings of
/// every token, for m = 1..=max_m.
pub fn thinned_spectrum_stats(counts: &[u64], p: f64, max_m: usize, reps: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    let mut sum = vec![0.0; max_m + 1];
    let mut sq = vec![0.0; max_m + 1];
    let mut tally = vec![0u64; max_m + 1];
    for _ in 0..reps {
        tally.iter_mut().for_each(|t| *t = 0);
        for &c in counts {
            let k = Binomial::new(c, p).unwrap().sample(&mut r) as usize;
            if (1..=max_m).contains(&k) {
                tally[k] += 1;
            }
        }
        for m in 1..=max_m {
            let v = tally[m] as f64;
            sum[m] += v;
            sq[m] += v * v;
        }
    }
    let n = reps as f64;
    (1..=max_m)
        .map(|m| {
            let mean = sum[m] / n;
            let var = (sq[m] / n - mean * mean).max(0.0) * n / (n - 1.0);
            (mean, (var / n).sqrt())
        })
        .collect()
}
