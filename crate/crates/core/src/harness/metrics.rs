use serde::Serialize;

/// Mean of per-agent revenues.
pub fn social_welfare(revenues: &[f64]) -> f64 {
    if revenues.is_empty() {
        return 0.0;
    }
    revenues.iter().sum::<f64>() / revenues.len() as f64
}

/// Dispersion of revenues across agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn fairness_spread(revenues: &[f64]) -> Spread {
    let mean = social_welfare(revenues);
    let n = revenues.len().max(1) as f64;
    let std = (revenues.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = revenues.to_vec();
    sorted.sort_by(f64::total_cmp);
    Spread {
        std,
        min: quantile(&sorted, 0.0),
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: quantile(&sorted, 1.0),
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Mean of the trailing `window` values ending at each position.
pub fn running_average(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub const RUNNING_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub period: u64,
    pub training: bool,
    pub welfare: f64,
    pub running_avg: f64,
    pub density_mse: Option<f64>,
    pub entropy_mean: Option<f64>,
    pub epsilon: Option<f64>,
    /// Mean loss of the gradient updates in the period.
    pub loss_mean: Option<f64>,
    /// Mean local-coordinate density loss of those updates (density variants).
    pub density_loss_mean: Option<f64>,
    pub agent_revenues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub learner: String,
    pub seed: u64,
    pub periods: Vec<PeriodRecord>,
    /// Per-agent mean revenue per period over the evaluation window.
    pub final_revenues: Vec<f64>,
    pub wall_clock_secs: f64,
}

impl MetricsLog {
    pub fn eval_periods(&self) -> impl Iterator<Item = &PeriodRecord> {
        self.periods.iter().filter(|p| !p.training)
    }

    /// Mean welfare over the evaluation window.
    pub fn converged_welfare(&self) -> f64 {
        let w: Vec<f64> = self.eval_periods().map(|p| p.welfare).collect();
        social_welfare(&w)
    }

    pub fn fairness(&self) -> Spread {
        fairness_spread(&self.final_revenues)
    }

    /// Density-prediction error per period, training periods only.
    pub fn training_density_mse(&self) -> Vec<f64> {
        self.periods
            .iter()
            .filter(|p| p.training)
            .filter_map(|p| p.density_mse)
            .collect()
    }
}
