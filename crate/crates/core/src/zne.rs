//! Zero-noise extrapolation study: logical-noise ladders from distance
//! scaling or from fractional effective distances, a survival-observable
//! forward model under a shot budget, and exponential extrapolation.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderSource {
    /// Odd code distances.
    Ds,
    /// Fractional effective distances at fixed code distance.
    Hook,
    /// Measured rates of optimizer snapshots.
    Trajectory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLadder {
    pub labels: Vec<f64>,
    pub rates: Vec<f64>,
    pub source: LadderSource,
}

impl NoiseLadder {
    /// A ladder from measured rates, e.g. logical error rates of trajectory
    /// snapshots labelled by their effective distance.
    pub fn from_rates(labels: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let ladder = NoiseLadder {
            labels,
            rates,
            source: LadderSource::Trajectory,
        };
        ladder.validate()?;
        Ok(ladder)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.rates.len() || self.labels.is_empty() {
            return Err(Error::Argument("ladder needs one rate per label".into()));
        }
        if self.rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Argument("ladder rates must lie in (0, 1)".into()));
        }
        let mut pairs: Vec<(f64, f64)> = self.labels.iter().copied().zip(self.rates.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0 || w[1].1 >= w[0].1) {
            return Err(Error::Argument("ladder rates must strictly decrease with the label".into()));
        }
        Ok(())
    }
}

/// Logical error rates for `d_values`: Λ^−⌈d/2⌉ for distance scaling,
/// Λ^−(d+1)/2 for fractional effective distances.
pub fn ladder(source: LadderSource, d_values: &[f64], lambda: f64) -> Result<NoiseLadder> {
    if !(lambda > 1.0) {
        return Err(Error::Argument(format!("suppression factor {lambda} is not above threshold (must be > 1)")));
    }
    if d_values.windows(2).any(|w| w[1] >= w[0]) || d_values.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Argument("distances must be positive and decreasing".into()));
    }
    let rates = d_values
        .iter()
        .map(|&d| match source {
            LadderSource::Ds => {
                if d.fract() != 0.0 || d as u64 % 2 == 0 {
                    Err(Error::Argument(format!("distance scaling needs odd integer distances, got {d}")))
                } else {
                    Ok(lambda.powf(-(d / 2.0).ceil()))
                }
            }
            LadderSource::Hook => Ok(lambda.powf(-(d + 1.0) / 2.0)),
            LadderSource::Trajectory => Err(Error::Argument("use NoiseLadder::from_rates for trajectories".into())),
        })
        .collect::<Result<Vec<f64>>>()?;
    let out = NoiseLadder {
        labels: d_values.to_vec(),
        rates,
        source,
    };
    out.validate()?;
    Ok(out)
}

/// Survival probability of a depth-`depth` circuit whose gates each fail
/// with probability `rate`.
pub fn survival_probability(rate: f64, depth: usize) -> f64 {
    (1.0 - rate).powi(depth as i32)
}

/// Sample mean of the survival observable over `shots` shots.
pub fn simulate_expectation(rate: f64, depth: usize, shots: u64, seed: u64) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Argument("depth must be at least 1".into()));
    }
    if shots == 0 {
        return Ok(f64::NAN);
    }
    let p = survival_probability(rate, depth);
    let mut rng = crate::rng(seed);
    let hits = Binomial::new(shots, p.clamp(0.0, 1.0))
        .map_err(|e| Error::Argument(e.to_string()))?
        .sample(&mut rng);
    Ok(hits as f64 / shots as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    Exponential,
    Richardson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZneResult {
    pub estimate: f64,
    pub ideal: f64,
    pub bias: f64,
    pub means: Vec<f64>,
    pub shots: Vec<u64>,
    pub method: FitMethod,
    pub fit_error: Option<String>,
}

/// Least-squares fit of y = A·exp(−B·x): the amplitude is solved in closed
/// form for each B and B by golden-section search on the residual.
/// Returns (A, B) or None when the optimum sits on the search bracket.
pub fn fit_exponential(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let amp = |b: f64| {
        let (num, den) = x.iter().zip(y).fold((0.0, 0.0), |(n, d), (&xi, &yi)| {
            let e = (-b * xi).exp();
            (n + yi * e, d + e * e)
        });
        num / den
    };
    let resid = |b: f64| {
        let a = amp(b);
        x.iter().zip(y).map(|(&xi, &yi)| (yi - a * (-b * xi).exp()).powi(2)).sum::<f64>()
    };
    let xmax = x.iter().copied().fold(0.0, f64::max);
    if !(xmax > 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 50.0 / xmax);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (resid(c), resid(d));
    for _ in 0..200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = resid(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = resid(d);
        }
    }
    let b = (lo + hi) / 2.0;
    let span = 50.0 / xmax;
    if b < 1e-9 * span || b > span * (1.0 - 1e-6) {
        return None;
    }
    let a = amp(b);
    a.is_finite().then_some((a, b))
}

/// Value at x = 0 of the interpolating polynomial through the points.
pub fn richardson(x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        let mut w = 1.0;
        for j in 0..x.len() {
            if j != i {
                w *= x[j] / (x[j] - x[i]);
            }
        }
        total += w * y[i];
    }
    total
}

/// Extrapolates the per-level means of a ladder to zero noise. Levels with
/// no shots are ignored.
pub fn extrapolate(ladder: &NoiseLadder, means: &[f64], shots: &[u64], depth: usize) -> Result<ZneResult> {
    if means.len() != ladder.rates.len() || shots.len() != means.len() {
        return Err(Error::Argument("one mean and shot count per ladder level".into()));
    }
    if means.len() < 3 {
        return Err(Error::Argument("extrapolation needs at least 3 levels".into()));
    }
    let ideal = 1.0;
    let (x, y): (Vec<f64>, Vec<f64>) = ladder
        .rates
        .iter()
        .zip(means)
        .zip(shots)
        .filter(|&(_, &s)| s > 0)
        .map(|((&r, &m), _)| (r * depth as f64, m))
        .unzip();
    let result = |estimate: f64, method, fit_error| ZneResult {
        estimate,
        ideal,
        bias: (estimate - ideal).abs(),
        means: means.to_vec(),
        shots: shots.to_vec(),
        method,
        fit_error,
    };
    if x.len() < 3 {
        return Ok(result(
            f64::NAN,
            FitMethod::Exponential,
            Some(format!("only {} levels received shots", x.len())),
        ));
    }
    if y.windows(2).all(|w| w[0] == w[1]) {
        return Ok(result(y[0], FitMethod::Exponential, Some("all means are equal".into())));
    }
    Ok(match fit_exponential(&x, &y) {
        Some((a, _)) => result(a, FitMethod::Exponential, None),
        None => result(richardson(&x, &y), FitMethod::Richardson, None),
    })
}

/// The three distance ranges of the comparison, as (distance-scaling,
/// fractional) pairs.
pub fn default_ranges() -> Vec<(Vec<f64>, Vec<f64>)> {
    vec![
        (vec![13.0, 11.0, 9.0, 7.0], vec![13.0, 12.5, 12.0, 11.5]),
        (vec![11.0, 9.0, 7.0, 5.0], vec![11.0, 10.5, 10.0, 9.5]),
        (vec![9.0, 7.0, 5.0, 3.0], vec![9.0, 8.5, 8.0, 7.5]),
    ]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareConfig {
    pub ranges: Vec<(Vec<f64>, Vec<f64>)>,
    pub lambda: f64,
    pub budget: u64,
    pub seeds: u64,
    pub depth: usize,
    /// Fraction of the budget per level; uniform when unset.
    pub allocation: Option<Vec<f64>>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            ranges: default_ranges(),
            lambda: 2.0,
            budget: 20_000,
            seeds: 20,
            depth: 50,
            allocation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub range: usize,
    pub ds_labels: Vec<f64>,
    pub hook_labels: Vec<f64>,
    pub ds_mean_bias: f64,
    pub ds_std_bias: f64,
    pub hook_mean_bias: f64,
    pub hook_std_bias: f64,
    /// DS mean bias over Hook mean bias.
    pub improvement: f64,
    /// Seeds where the Hook estimate was closer to the ideal value.
    pub hook_wins: u64,
    /// Runs whose fit reported an error.
    pub fit_errors: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub range: usize,
    pub seed: u64,
    pub source: LadderSource,
    pub estimate: f64,
    pub bias: f64,
    pub method: FitMethod,
    pub fit_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub summaries: Vec<RangeSummary>,
    pub rows: Vec<CompareRow>,
}

fn split_budget(budget: u64, levels: usize, allocation: Option<&[f64]>) -> Result<Vec<u64>> {
    let weights: Vec<f64> = match allocation {
        Some(a) if a.len() == levels && a.iter().all(|&w| w >= 0.0) && a.iter().sum::<f64>() > 0.0 => a.to_vec(),
        Some(_) => return Err(Error::Argument("allocation needs one non-negative weight per level".into())),
        None => vec![1.0; levels],
    };
    let total: f64 = weights.iter().sum();
    let mut shots: Vec<u64> = weights.iter().map(|w| (budget as f64 * w / total).floor() as u64).collect();
    let mut rest = budget - shots.iter().sum::<u64>();
    for (s, w) in shots.iter_mut().zip(&weights) {
        if rest == 0 {
            break;
        }
        if *w > 0.0 {
            *s += 1;
            rest -= 1;
        }
    }
    Ok(shots)
}

fn run_ladder(l: &NoiseLadder, shots: &[u64], depth: usize, seed: u64, stream: u64) -> Result<ZneResult> {
    let means = l
        .rates
        .iter()
        .zip(shots)
        .enumerate()
        .map(|(i, (&r, &s))| simulate_expectation(r, depth, s, crate::derive_seed(seed, stream, i as u64)))
        .collect::<Result<Vec<f64>>>()?;
    extrapolate(l, &means, shots, depth)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

/// Runs both ladders per range and seed and aggregates the bias.
pub fn compare(cfg: &CompareConfig) -> Result<CompareReport> {
    if cfg.seeds == 0 {
        return Err(Error::Argument("seeds must be at least 1".into()));
    }
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for (ri, (ds_d, hook_d)) in cfg.ranges.iter().enumerate() {
        let ds = ladder(LadderSource::Ds, ds_d, cfg.lambda)?;
        let hook = ladder(LadderSource::Hook, hook_d, cfg.lambda)?;
        let ds_shots = split_budget(cfg.budget, ds.rates.len(), cfg.allocation.as_deref())?;
        let hook_shots = split_budget(cfg.budget, hook.rates.len(), cfg.allocation.as_deref())?;
        let runs: Vec<(ZneResult, ZneResult)> = (0..cfg.seeds)
            .into_par_iter()
            .map(|seed| {
                Ok((
                    run_ladder(&ds, &ds_shots, cfg.depth, seed, 2 * ri as u64)?,
                    run_ladder(&hook, &hook_shots, cfg.depth, seed, 2 * ri as u64 + 1)?,
                ))
            })
            .collect::<Result<_>>()?;
        let ds_bias: Vec<f64> = runs.iter().map(|r| r.0.bias).collect();
        let hook_bias: Vec<f64> = runs.iter().map(|r| r.1.bias).collect();
        let (ds_mean_bias, ds_std_bias) = mean_std(&ds_bias);
        let (hook_mean_bias, hook_std_bias) = mean_std(&hook_bias);
        summaries.push(RangeSummary {
            range: ri,
            ds_labels: ds.labels.clone(),
            hook_labels: hook.labels.clone(),
            ds_mean_bias,
            ds_std_bias,
            hook_mean_bias,
            hook_std_bias,
            improvement: ds_mean_bias / hook_mean_bias,
            hook_wins: runs.iter().filter(|r| r.1.bias < r.0.bias).count() as u64,
            fit_errors: runs
                .iter()
                .map(|r| r.0.fit_error.is_some() as u64 + r.1.fit_error.is_some() as u64)
                .sum(),
        });
        for (seed, (a, b)) in runs.into_iter().enumerate() {
            for (source, r) in [(LadderSource::Ds, a), (LadderSource::Hook, b)] {
                rows.push(CompareRow {
                    range: ri,
                    seed: seed as u64,
                    source,
                    estimate: r.estimate,
                    bias: r.bias,
                    method: r.method,
                    fit_error: r.fit_error,
                });
            }
        }
    }
    Ok(CompareReport { summaries, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ds_ladder_rates() {
        let l = ladder(LadderSource::Ds, &[13.0, 11.0, 9.0, 7.0], 2.0).unwrap();
        assert_eq!(l.rates, vec![2f64.powi(-7), 2f64.powi(-6), 2f64.powi(-5), 2f64.powi(-4)]);
        for w in l.rates.windows(2) {
            assert!((w[0] / w[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn hook_ladder_rates() {
        let l = ladder(LadderSource::Hook, &[13.0, 12.5, 12.0, 11.5], 2.0).unwrap();
        let want = [-7.0, -6.75, -6.5, -6.25].map(|e: f64| 2f64.powf(e));
        for (a, b) in l.rates.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_ratio_is_one_over_lambda() {
        let l = ladder(LadderSource::Ds, &[9.0, 7.0], 2.14).unwrap();
        assert!((l.rates[0] / l.rates[1] - 1.0 / 2.14).abs() < 1e-12);
    }

    #[test]
    fn bad_ladders_are_rejected() {
        assert!(ladder(LadderSource::Ds, &[5.0, 3.0], 1.0).is_err());
        assert!(ladder(LadderSource::Ds, &[3.0, 5.0], 2.0).is_err());
        assert!(ladder(LadderSource::Ds, &[6.0, 4.0], 2.0).is_err());
        assert!(NoiseLadder::from_rates(vec![3.0, 2.0], vec![0.1, 0.05]).is_err());
        assert!(NoiseLadder::from_rates(vec![3.0, 2.0], vec![0.05, 0.1]).is_ok());
    }

    #[test]
    fn zero_rate_survives_exactly() {
        assert_eq!(simulate_expectation(0.0, 50, 1000, 3).unwrap(), 1.0);
        assert!(simulate_expectation(0.1, 0, 1000, 3).is_err());
    }

    #[test]
    fn sample_mean_converges() {
        let r = 2f64.powi(-4);
        let p = survival_probability(r, 50);
        let n = 1_000_000;
        let m = simulate_expectation(r, 50, n, 9).unwrap();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((m - p).abs() < 5.0 * sigma, "{m} vs {p}");
    }

    #[test]
    fn noiseless_means_extrapolate_to_one() {
        let l = ladder(LadderSource::Hook, &[9.0, 8.5, 8.0, 7.5], 2.0).unwrap();
        let r = extrapolate(&l, &[1.0; 4], &[5000; 4], 50).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.bias, 0.0);
    }

    #[test]
    fn model_matched_means_recover_amplitude() {
        let l = ladder(LadderSource::Ds, &[9.0, 7.0, 5.0, 3.0], 2.0).unwrap();
        let (a, b) = (0.93, 1.3);
        let means: Vec<f64> = l.rates.iter().map(|r| a * (-b * r * 50.0).exp()).collect();
        let r = extrapolate(&l, &means, &[1; 4], 50).unwrap();
        assert_eq!(r.method, FitMethod::Exponential);
        assert!((r.estimate - a).abs() < 1e-9, "{}", r.estimate);
    }

    #[test]
    fn extrapolation_is_scale_equivariant() {
        let l = ladder(LadderSource::Hook, &[11.0, 10.5, 10.0, 9.5], 2.0).unwrap();
        let means = [0.61, 0.55, 0.49, 0.40];
        let base = extrapolate(&l, &means, &[1; 4], 50).unwrap().estimate;
        let scaled: Vec<f64> = means.iter().map(|m| m * 0.7).collect();
        let s = extrapolate(&l, &scaled, &[1; 4], 50).unwrap().estimate;
        assert!((s - 0.7 * base).abs() < 1e-6, "{s} vs {}", 0.7 * base);
    }

    #[test]
    fn richardson_is_exact_on_polynomials() {
        let x = [0.5, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v + 0.5 * v * v).collect();
        assert!((richardson(&x, &y) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn budget_is_split_exactly() {
        assert_eq!(split_budget(20_000, 4, None).unwrap(), vec![5000; 4]);
        assert_eq!(split_budget(10, 4, None).unwrap().iter().sum::<u64>(), 10);
        assert_eq!(split_budget(100, 4, Some(&[1.0, 0.0, 0.0, 0.0])).unwrap(), vec![100, 0, 0, 0]);
    }

    #[test]
    fn one_level_allocation_is_flagged() {
        let cfg = CompareConfig {
            ranges: vec![default_ranges().remove(0)],
            seeds: 3,
            allocation: Some(vec![1.0, 0.0, 0.0, 0.0]),
            ..CompareConfig::default()
        };
        let rep = compare(&cfg).unwrap();
        assert_eq!(rep.summaries[0].fit_errors, 6);
        assert!(rep.summaries[0].ds_mean_bias.is_nan());
    }

    #[test]
    fn comparison_is_reproducible() {
        let cfg = CompareConfig {
            seeds: 4,
            ..CompareConfig::default()
        };
        let a = compare(&cfg).unwrap();
        let b = compare(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3 * 4 * 2);
    }
}
