//! Timing harness comparing each naive kernel with its fast counterpart on
//! identical inputs. A row is only produced when both paths agree.

use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    alignment_fast, alignment_naive, intra_diversity_fast, intra_diversity_naive, AlignmentContext,
};
use crate::selection::{pareto_budgeted, pareto_budgeted_naive, ParetoPoint};
use crate::types::TokenMatrix;

pub const DIVERSITY_TOL: f64 = 1e-6;
pub const ALIGNMENT_ABS_TOL: f64 = 1e-4;
pub const ALIGNMENT_REL_TOL: f64 = 1e-5;

/// Minimum wall time of one timed batch, so microsecond kernels are not
/// dominated by timer resolution.
const MIN_BATCH_SECS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Diversity,
    Alignment,
    Pareto,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Diversity => "diversity",
            Kernel::Alignment => "alignment",
            Kernel::Pareto => "pareto",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub n: usize,
    pub dim: usize,
    /// Text tokens, alignment only.
    pub text_tokens: usize,
    /// Selection size, Pareto only.
    pub budget: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl BenchParams {
    /// Default problem sizes: diversity at N=8192, alignment at N_v=8192
    /// with 128 text tokens, Pareto at N=500 selecting 14.
    pub fn defaults(kernel: Kernel) -> Self {
        let (n, dim) = match kernel {
            Kernel::Diversity => (8192, 64),
            Kernel::Alignment => (8192, 256),
            Kernel::Pareto => (500, 2),
        };
        Self {
            n,
            dim,
            text_tokens: 128,
            budget: 14,
            repeats: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub kernel: Kernel,
    pub n: usize,
    pub dim: usize,
    /// Median seconds per call.
    pub t_naive: f64,
    pub t_fast: f64,
    pub speedup: f64,
    pub max_abs_err: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median per-call time over `repeats` batches, after one untimed warm-up
/// call that also sizes the batch.
fn time_median<T>(repeats: usize, mut f: impl FnMut() -> T) -> f64 {
    let start = Instant::now();
    black_box(f());
    let warm = start.elapsed().as_secs_f64().max(1e-9);
    let inner = ((MIN_BATCH_SECS / warm).ceil() as usize).clamp(1, 100_000);
    let samples = (0..repeats.max(1))
        .map(|_| {
            let start = Instant::now();
            for _ in 0..inner {
                black_box(f());
            }
            start.elapsed().as_secs_f64() / inner as f64
        })
        .collect();
    median(samples)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Result<TokenMatrix> {
    let data = (0..rows * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
        .collect();
    TokenMatrix::new(rows, dim, data)
}

fn disagreement(kernel: Kernel, detail: String) -> Error {
    Error::BenchDisagreement {
        kernel: kernel.to_string(),
        detail,
    }
}

/// Time both paths of `kernel` and check that they agree.
pub fn run(kernel: Kernel, p: &BenchParams) -> Result<BenchResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (t_naive, t_fast, max_abs_err) = match kernel {
        Kernel::Diversity => {
            let m = random_matrix(&mut rng, p.n, p.dim)?;
            let naive = intra_diversity_naive(&m);
            let fast = intra_diversity_fast(&m);
            let err = (fast - naive).abs();
            if err > DIVERSITY_TOL * naive.abs().max(1.0) {
                return Err(disagreement(
                    kernel,
                    format!("|{fast} - {naive}| = {err:e}"),
                ));
            }
            let tn = time_median(p.repeats, || intra_diversity_naive(black_box(&m)));
            let tf = time_median(p.repeats, || intra_diversity_fast(black_box(&m)));
            (tn, tf, err)
        }
        Kernel::Alignment => {
            let tokens = random_matrix(&mut rng, p.n, p.dim)?;
            let text = random_matrix(&mut rng, p.text_tokens, p.dim)?;
            let naive = alignment_naive(&tokens, &text, false)?;
            let ctx = AlignmentContext::new(&text, false)?;
            let fast = alignment_fast(&tokens, &ctx)?;
            let mut err = 0.0f64;
            for (f, n) in fast.iter().zip(&naive) {
                let e = (f - n).abs();
                if e > ALIGNMENT_ABS_TOL || e > ALIGNMENT_REL_TOL * n.abs().max(1.0) {
                    return Err(disagreement(kernel, format!("|{f} - {n}| = {e:e}")));
                }
                err = err.max(e);
            }
            let tn = time_median(p.repeats, || {
                alignment_naive(black_box(&tokens), &text, false)
            });
            let tf = time_median(p.repeats, || {
                let ctx = AlignmentContext::new(black_box(&text), false)?;
                alignment_fast(black_box(&tokens), &ctx)
            });
            (tn, tf, err)
        }
        Kernel::Pareto => {
            let points: Vec<ParetoPoint> = (0..p.n)
                .map(|i| ParetoPoint::new(i, rng.random::<f64>(), -2.0 * rng.random::<f64>()))
                .collect();
            let naive = pareto_budgeted_naive(&points, p.budget)?;
            let fast = pareto_budgeted(&points, p.budget)?;
            if naive != fast {
                return Err(disagreement(kernel, format!("{naive:?} != {fast:?}")));
            }
            let tn = time_median(p.repeats, || {
                pareto_budgeted_naive(black_box(&points), p.budget)
            });
            let tf = time_median(p.repeats, || pareto_budgeted(black_box(&points), p.budget));
            (tn, tf, 0.0)
        }
    };
    Ok(BenchResult {
        kernel,
        n: p.n,
        dim: p.dim,
        t_naive,
        t_fast,
        speedup: t_naive / t_fast.max(1e-12),
        max_abs_err,
    })
}

/// Fixed-width table of results.
pub fn format_table(rows: &[BenchResult]) -> String {
    let mut out = format!(
        "{:<10} {:>7} {:>5} {:>12} {:>12} {:>10} {:>11}\n",
        "kernel", "n", "dim", "naive_ms", "fast_ms", "speedup", "max_err"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<10} {:>7} {:>5} {:>12.4} {:>12.4} {:>9.2}x {:>11.2e}\n",
            r.kernel.to_string(),
            r.n,
            r.dim,
            r.t_naive * 1e3,
            r.t_fast * 1e3,
            r.speedup,
            r.max_abs_err
        ));
    }
    out
}
