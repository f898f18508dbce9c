//! Redundancy signals and per-token scores.
//!
//! Each quadratic definition has a `*_naive` reference form. Where a
//! linear-time identity exists (sum-of-unit-rows for diversity, expanded
//! squared distance for alignment) it is provided as `*_fast`; the two are
//! kept side by side so the fast path can always be checked against the
//! pairwise definition.

use crate::error::{Error, Result};
use crate::par;
use crate::types::{TokenBundle, TokenMatrix};

/// Value returned by [`s_factor`] when inter-image variation vanishes while
/// intra-image diversity does not. Any positive `lambda` clips it to 1.
pub const SATURATED_S: f64 = f64::MAX;

const DEGENERATE: f64 = 1e-9;
const MIN_MEAN_NORM: f64 = 1e-12;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn dot_mixed(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, y)| f64::from(x) * y).sum()
}

/// `1 - cos` between two unit vectors, clamped to `[0, 2]`.
#[inline]
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - dot(a, b)).clamp(0.0, 2.0)
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na < MIN_MEAN_NORM || nb < MIN_MEAN_NORM {
        return None;
    }
    Some(dot(a, b) / (na * nb))
}

/// Sum of the unit rows of `m`.
pub fn unit_row_sum(m: &TokenMatrix) -> Vec<f64> {
    let mut s = vec![0.0; m.dim()];
    for i in 0..m.rows() {
        for (acc, x) in s.iter_mut().zip(m.unit_row(i)) {
            *acc += x;
        }
    }
    s
}

/// Mean pairwise cosine distance over ordered pairs, by enumeration.
pub fn intra_diversity_naive(img: &TokenMatrix) -> f64 {
    let n = img.rows();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let ui = img.unit_row(i);
        for j in (i + 1)..n {
            total += 1.0 - dot(ui, img.unit_row(j));
        }
    }
    // each unordered pair counted for both orders
    (2.0 * total / (n * (n - 1)) as f64).clamp(0.0, 2.0)
}

/// Same quantity as [`intra_diversity_naive`] via `||S||^2 = N + sum_{i!=j} cos`.
pub fn intra_diversity_fast(img: &TokenMatrix) -> f64 {
    let n = img.rows();
    if n < 2 {
        return 0.0;
    }
    let s = unit_row_sum(img);
    let nf = n as f64;
    let pairs = nf * (nf - 1.0);
    ((pairs - (dot(&s, &s) - nf)) / pairs).clamp(0.0, 2.0)
}

/// Per-image diversity and its mean over images. Images are scored
/// concurrently; the mean is reduced in image order.
pub fn intra_diversity_mean(bundle: &TokenBundle, fast: bool) -> (Vec<f64>, f64) {
    let per_image = par::map_slice(bundle.images(), |img| {
        if fast {
            intra_diversity_fast(img)
        } else {
            intra_diversity_naive(img)
        }
    });
    let mean = per_image.iter().sum::<f64>() / per_image.len() as f64;
    (per_image, mean)
}

/// Mean of the raw (unnormalized) rows.
pub fn image_mean(img: &TokenMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; img.dim()];
    for i in 0..img.rows() {
        for (acc, &x) in mean.iter_mut().zip(img.row(i)) {
            *acc += f64::from(x);
        }
    }
    let n = img.rows().max(1) as f64;
    mean.iter_mut().for_each(|x| *x /= n);
    mean
}

/// Cosine distance between consecutive images' mean embeddings. Entry
/// `k - 2` holds `d_k` for `k = 2..=n`; empty for a single image.
///
/// `ZeroMeanImage(k)` uses the 1-based image number.
pub fn inter_variation_steps(bundle: &TokenBundle) -> Result<Vec<f64>> {
    let means = par::map_slice(bundle.images(), image_mean);
    (1..means.len())
        .map(|k| {
            let c = cosine(&means[k], &means[k - 1]).ok_or_else(|| {
                let bad = if dot(&means[k - 1], &means[k - 1]).sqrt() < MIN_MEAN_NORM {
                    k
                } else {
                    k + 1
                };
                Error::ZeroMeanImage(bad)
            })?;
            Ok((1.0 - c).clamp(0.0, 2.0))
        })
        .collect()
}

/// Position-wise variant: mean cosine distance between tokens at the same
/// index in consecutive images. Diagnostic only. Sensitive to token order,
/// unlike [`inter_variation_steps`].
///
/// `PositionMismatch(k)` uses the 1-based image number.
pub fn inter_variation_positionwise(bundle: &TokenBundle) -> Result<Vec<f64>> {
    let images = bundle.images();
    (1..images.len())
        .map(|k| {
            let (prev, cur) = (&images[k - 1], &images[k]);
            if prev.rows() != cur.rows() {
                return Err(Error::PositionMismatch(k + 1));
            }
            let m = cur.rows();
            let total: f64 = (0..m)
                .map(|i| 1.0 - dot(cur.unit_row(i), prev.unit_row(i)))
                .sum();
            Ok((total / m as f64).clamp(0.0, 2.0))
        })
        .collect()
}

pub fn inter_variation_mean(steps: &[f64]) -> Result<f64> {
    if steps.is_empty() {
        return Err(Error::EmptySteps);
    }
    Ok(steps.iter().sum::<f64>() / steps.len() as f64)
}

/// Ratio of intra-image diversity to inter-image variation.
///
/// Single image (`d_inter` absent) and fully degenerate inputs give the
/// neutral value 1. Vanishing `d_inter` with non-zero diversity gives
/// [`SATURATED_S`].
pub fn s_factor(d_intra_mean: f64, d_inter: Option<f64>) -> f64 {
    let Some(d_inter) = d_inter else {
        return 1.0;
    };
    if d_inter < DEGENERATE {
        if d_intra_mean < DEGENERATE {
            1.0
        } else {
            SATURATED_S
        }
    } else {
        d_intra_mean / d_inter
    }
}

/// Text statistics reused by every alignment score: the mean text
/// embedding and the mean squared text-token norm.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentContext {
    pub mu_t: Vec<f64>,
    pub c_t: f64,
    pub m_text: usize,
    pub on_normalized: bool,
}

impl AlignmentContext {
    pub fn new(text: &TokenMatrix, on_normalized: bool) -> Result<Self> {
        let m = text.rows();
        if m == 0 {
            return Err(Error::EmptyText);
        }
        let mut mu_t = vec![0.0; text.dim()];
        let mut c_t = 0.0;
        for j in 0..m {
            if on_normalized {
                let t = text.unit_row(j);
                for (acc, x) in mu_t.iter_mut().zip(t) {
                    *acc += x;
                }
                c_t += dot(t, t);
            } else {
                for (acc, &x) in mu_t.iter_mut().zip(text.row(j)) {
                    *acc += f64::from(x);
                }
                c_t += text.norm_sq(j);
            }
        }
        let mf = m as f64;
        mu_t.iter_mut().for_each(|x| *x /= mf);
        Ok(Self {
            mu_t,
            c_t: c_t / mf,
            m_text: m,
            on_normalized,
        })
    }
}

fn check_dims(a: &TokenMatrix, b: usize) -> Result<()> {
    if a.dim() != b {
        return Err(Error::DimMismatch {
            expected: b,
            got: a.dim(),
        });
    }
    Ok(())
}

/// Negative mean squared distance from each token to every text token,
/// by enumeration.
pub fn alignment_naive(
    tokens: &TokenMatrix,
    text: &TokenMatrix,
    on_normalized: bool,
) -> Result<Vec<f64>> {
    check_dims(tokens, text.dim())?;
    let m = text.rows();
    if m == 0 {
        return Err(Error::EmptyText);
    }
    let mut out = Vec::with_capacity(tokens.rows());
    for i in 0..tokens.rows() {
        let mut total = 0.0;
        for j in 0..m {
            total += if on_normalized {
                tokens
                    .unit_row(i)
                    .iter()
                    .zip(text.unit_row(j))
                    .map(|(x, t)| (x - t) * (x - t))
                    .sum::<f64>()
            } else {
                tokens
                    .row(i)
                    .iter()
                    .zip(text.row(j))
                    .map(|(&x, &t)| {
                        let d = f64::from(x) - f64::from(t);
                        d * d
                    })
                    .sum::<f64>()
            };
        }
        out.push(-total / m as f64);
    }
    Ok(out)
}

/// Alignment via `-||x||^2 - C + 2 x.mu_t`, linear in token and text counts.
pub fn alignment_fast(tokens: &TokenMatrix, ctx: &AlignmentContext) -> Result<Vec<f64>> {
    check_dims(tokens, ctx.mu_t.len())?;
    Ok((0..tokens.rows())
        .map(|i| {
            if ctx.on_normalized {
                let x = tokens.unit_row(i);
                -dot(x, x) - ctx.c_t + 2.0 * dot(x, &ctx.mu_t)
            } else {
                -tokens.norm_sq(i) - ctx.c_t + 2.0 * dot_mixed(tokens.row(i), &ctx.mu_t)
            }
        })
        .collect())
}

/// Per-token mean cosine distance to every other token, by enumeration.
pub fn token_diversity_naive(candidates: &TokenMatrix) -> Result<Vec<f64>> {
    let n = candidates.rows();
    if n < 2 {
        return Err(Error::TooFewTokens(n));
    }
    Ok((0..n)
        .map(|i| {
            let ui = candidates.unit_row(i);
            let total: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| 1.0 - dot(ui, candidates.unit_row(j)))
                .sum();
            (total / (n - 1) as f64).clamp(0.0, 2.0)
        })
        .collect())
}

/// Per-token diversity via `v_i = (N - x_i.S) / (N - 1)`.
pub fn token_diversity_fast(candidates: &TokenMatrix) -> Result<Vec<f64>> {
    let n = candidates.rows();
    if n < 2 {
        return Err(Error::TooFewTokens(n));
    }
    let s = unit_row_sum(candidates);
    let nf = n as f64;
    Ok((0..n)
        .map(|i| ((nf - dot(candidates.unit_row(i), &s)) / (nf - 1.0)).clamp(0.0, 2.0))
        .collect())
}
