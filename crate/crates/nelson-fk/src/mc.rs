//! Deterministic parallel Monte Carlo over path streams.
//!
//! Path `i` always uses stream `first_stream + i` of the master seed, and
//! results are reduced in stream order, so estimates do not depend on the
//! thread count.

use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McControls {
    pub seed: u64,
    pub n_paths: usize,
    #[serde(default)]
    pub first_stream: u64,
    /// Worker threads; `None` reads `NELSON_FK_THREADS`, then uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for McControls {
    fn default() -> Self {
        McControls { seed: 1, n_paths: 1000, first_stream: 0, threads: None }
    }
}

impl McControls {
    pub fn streams(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_paths as u64).map(move |i| self.first_stream + i)
    }

    fn thread_count(&self) -> Option<usize> {
        self.threads.or_else(|| std::env::var("NELSON_FK_THREADS").ok().and_then(|s| s.parse().ok()))
    }
}

/// Evaluate `f(stream)` for every path; the output is in stream order.
pub fn run_paths<T, F>(ctrl: &McControls, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let streams: Vec<u64> = ctrl.streams().collect();
    let work = || streams.par_iter().map(|&s| f(s)).collect::<Result<Vec<T>>>();
    match ctrl.thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> McEstimate {
        let n = xs.len();
        if n == 0 {
            return McEstimate { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let (mut mean, mut m2) = (0.0, 0.0);
        for (i, &x) in xs.iter().enumerate() {
            let d = x - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        McEstimate { mean, stderr: (var / n as f64).sqrt(), n }
    }

    pub fn variance(&self) -> f64 {
        self.stderr * self.stderr * self.n as f64
    }
}

/// Ordinary least squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_in_stream_order_for_any_pool() {
        for threads in [1, 4, 16] {
            let c = McControls { seed: 0, n_paths: 100, first_stream: 5, threads: Some(threads) };
            let v = run_paths(&c, |s| Ok(s * 2)).unwrap();
            assert_eq!(v, (5..105).map(|s| s * 2).collect::<Vec<_>>());
        }
    }

    #[test]
    fn estimate_of_constant() {
        let e = McEstimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0];
        let (s, i) = linear_fit(&x, &[3.0, 5.0, 7.0]);
        assert!((s - 2.0).abs() < 1e-14 && (i - 1.0).abs() < 1e-14);
    }
}
