//! Nelder–Mead simplex minimizer.

#[derive(Debug, Clone)]
pub struct SimplexConfig {
    pub max_iterations: usize,
    /// Stop when the spread of objective values is below
    /// `f_tolerance * (1 + |f_best|)` and the simplex is smaller than `x_tolerance`.
    pub f_tolerance: f64,
    pub x_tolerance: f64,
    pub initial_step: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig { max_iterations: 4000, f_tolerance: 1e-12, x_tolerance: 1e-9, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() { f64::INFINITY } else { v }
}

/// Minimizes `f` from `start`. NaN objective values count as +∞.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], config: &SimplexConfig) -> Minimum {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += config.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(&f, v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= config.f_tolerance * (1.0 + values[0].abs()) && size <= config.x_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

        let reflected = along(-REFLECT);
        let fr = eval(&f, &reflected);
        if fr < values[0] {
            let expanded = along(-REFLECT * EXPAND);
            let fe = eval(&f, &expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(-REFLECT * CONTRACT);
            let fc = eval(&f, &c);
            (c, fc)
        } else {
            let c = along(CONTRACT);
            let fc = eval(&f, &c);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            for j in 0..n {
                simplex[i][j] = simplex[0][j] + SHRINK * (simplex[i][j] - simplex[0][j]);
            }
            values[i] = eval(&f, &simplex[i]);
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("nonempty simplex");
    Minimum { x: simplex[best].clone(), value: values[best], iterations, converged }
}
