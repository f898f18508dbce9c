//! Integer token budgets: the stage-1 total and its split across images.

use crate::error::{Error, Result};
use crate::metrics::SATURATED_S;

/// Stage-1 retention size `m_min + round((m_max - m_min) * clip(lambda * s, 0, 1))`,
/// rounding half away from zero.
pub fn stage1_budget(s: f64, m_min: usize, m_max: usize, lambda: f64) -> usize {
    let scale = if s >= SATURATED_S {
        1.0
    } else {
        let x = lambda * s;
        if x.is_nan() {
            0.0
        } else {
            x.clamp(0.0, 1.0)
        }
    };
    let span = m_max.saturating_sub(m_min) as f64;
    m_min + (span * scale).round() as usize
}

/// Per-image retention weights: each image's diversity, with the last image
/// promoted to the maximum weight when there are more than two images.
/// All-zero weights fall back to uniform.
pub fn image_weights(d_intra_per_image: &[f64], last_image_rule: bool) -> Vec<f64> {
    let n = d_intra_per_image.len();
    let mut w = d_intra_per_image.to_vec();
    if last_image_rule && n > 2 {
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        w[n - 1] = max;
    }
    if n > 0 && w.iter().all(|&x| x <= 0.0) {
        return vec![1.0 / n as f64; n];
    }
    w
}

/// Split `m1` tokens across images proportionally to `weights`, with every
/// image receiving between 1 and `caps[k]` tokens and the total exactly `m1`.
///
/// Shares are integerized by largest remainder (ties to the lower index).
/// Units displaced by the caps, or needed to lift empty images to 1, are
/// moved one at a time according to each image's gap to its ideal share.
pub fn per_image_budgets(weights: &[f64], m1: usize, caps: &[usize]) -> Result<Vec<usize>> {
    let n = weights.len();
    let capacity: usize = caps.iter().sum();
    if n == 0 || caps.len() != n || m1 < n || m1 > capacity || caps.contains(&0) {
        return Err(Error::InfeasibleBudget {
            m1,
            images: n,
            capacity,
        });
    }
    let total_w: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total_w <= 0.0 {
        return Err(Error::BadConfig(format!(
            "invalid image weights {weights:?}"
        )));
    }

    let ideal: Vec<f64> = weights.iter().map(|w| w * m1 as f64 / total_w).collect();
    let mut budget: Vec<usize> = ideal.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = budget.iter().sum();
    let mut by_remainder: Vec<usize> = (0..n).collect();
    by_remainder.sort_by(|&x, &y| {
        let rx = ideal[x] - ideal[x].floor();
        let ry = ideal[y] - ideal[y].floor();
        ry.partial_cmp(&rx)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    // floor(q) sums to at most m1 and loses less than one unit per image
    for &k in by_remainder.iter().take(m1.saturating_sub(assigned)) {
        budget[k] += 1;
    }

    // clamp into [1, cap], tracking the units that must be re-placed
    let mut surplus = 0usize;
    let mut deficit = 0usize;
    for k in 0..n {
        if budget[k] > caps[k] {
            surplus += budget[k] - caps[k];
            budget[k] = caps[k];
        }
        if budget[k] == 0 {
            deficit += 1;
            budget[k] = 1;
        }
    }
    let gap = |b: &[usize], k: usize| ideal[k] - b[k] as f64;

    // net effect: give away `surplus`, take back `deficit`
    let (give, take) = if surplus >= deficit {
        (surplus - deficit, 0)
    } else {
        (0, deficit - surplus)
    };
    for _ in 0..give {
        let k = pick(n, |k| budget[k] < caps[k], |k| gap(&budget, k), true)
            .expect("m1 <= capacity leaves room");
        budget[k] += 1;
    }
    for _ in 0..take {
        let k =
            pick(n, |k| budget[k] > 1, |k| gap(&budget, k), false).expect("m1 >= n leaves a donor");
        budget[k] -= 1;
    }
    debug_assert_eq!(budget.iter().sum::<usize>(), m1);
    Ok(budget)
}

/// Feasible index with the largest (or smallest) key; ties to the lower index.
fn pick(
    n: usize,
    feasible: impl Fn(usize) -> bool,
    key: impl Fn(usize) -> f64,
    largest: bool,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for k in (0..n).filter(|&k| feasible(k)) {
        let v = key(k);
        let better = match best {
            None => true,
            Some((_, b)) => {
                if largest {
                    v > b
                } else {
                    v < b
                }
            }
        };
        if better {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}
