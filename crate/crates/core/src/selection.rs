//! Greedy dispersion-maximizing subset selection and two-objective Pareto
//! selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::dot;
use crate::par;
use crate::types::{GreedyObjective, TokenMatrix};

const SCORE_CHUNK: usize = 256;

/// Pick `k` tokens that approximately maximize mean pairwise cosine
/// distance. Returns sorted local indices.
///
/// Seeds with the farthest pair (lexicographically smallest on ties), then
/// adds one token per step. With [`GreedyObjective::SumDistance`] the next
/// token minimizes `x_c . S` where `S` is the sum of the selected unit rows,
/// which is the same as maximizing its summed distance to the selection.
/// [`GreedyObjective::MinDistance`] maximizes the distance to the nearest
/// selected token. Ties go to the lowest index.
pub fn greedy_rep_max(
    tokens: &TokenMatrix,
    k: usize,
    objective: GreedyObjective,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::BadBudget(k));
    }
    let n = tokens.rows();
    if k >= n {
        return Ok((0..n).collect());
    }
    let (first, second) = farthest_pair(tokens);
    if k == 1 {
        return Ok(vec![first]);
    }

    let mut chosen = vec![false; n];
    chosen[first] = true;
    chosen[second] = true;
    let mut selected = vec![first, second];

    match objective {
        GreedyObjective::SumDistance => {
            let mut sum: Vec<f64> = tokens
                .unit_row(first)
                .iter()
                .zip(tokens.unit_row(second))
                .map(|(a, b)| a + b)
                .collect();
            while selected.len() < k {
                let scores = par::map_range(n, SCORE_CHUNK, |c| {
                    if chosen[c] {
                        f64::INFINITY
                    } else {
                        dot(tokens.unit_row(c), &sum)
                    }
                });
                let next = argmin_unchosen(&scores, &chosen);
                chosen[next] = true;
                selected.push(next);
                for (acc, x) in sum.iter_mut().zip(tokens.unit_row(next)) {
                    *acc += x;
                }
            }
        }
        GreedyObjective::MinDistance => {
            let mut nearest = par::map_range(n, SCORE_CHUNK, |c| {
                let u = tokens.unit_row(c);
                (1.0 - dot(u, tokens.unit_row(first))).min(1.0 - dot(u, tokens.unit_row(second)))
            });
            while selected.len() < k {
                let next = argmax_unchosen(&nearest, &chosen);
                chosen[next] = true;
                selected.push(next);
                let u_next = tokens.unit_row(next);
                let updated = par::map_range(n, SCORE_CHUNK, |c| {
                    nearest[c].min(1.0 - dot(tokens.unit_row(c), u_next))
                });
                nearest = updated;
            }
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

/// The pair `(i, j)`, `i < j`, with the largest cosine distance. Rows are
/// scanned concurrently and reduced in row order.
fn farthest_pair(tokens: &TokenMatrix) -> (usize, usize) {
    let n = tokens.rows();
    let per_row = par::map_range(n - 1, 8, |i| {
        let ui = tokens.unit_row(i);
        let mut best = (i + 1, f64::NEG_INFINITY);
        for j in (i + 1)..n {
            let d = 1.0 - dot(ui, tokens.unit_row(j));
            if d > best.1 {
                best = (j, d);
            }
        }
        best
    });
    let mut best = (0, 1, f64::NEG_INFINITY);
    for (i, &(j, d)) in per_row.iter().enumerate() {
        if d > best.2 {
            best = (i, j, d);
        }
    }
    (best.0, best.1)
}

fn argmin_unchosen(scores: &[f64], chosen: &[bool]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (c, &s) in scores.iter().enumerate() {
        if chosen[c] {
            continue;
        }
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((c, s));
        }
    }
    best.expect("at least one unchosen token").0
}

fn argmax_unchosen(scores: &[f64], chosen: &[bool]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (c, &s) in scores.iter().enumerate() {
        if chosen[c] {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.expect("at least one unchosen token").0
}

/// Mean cosine distance over unordered pairs of `subset`.
pub fn greedy_objective_value(tokens: &TokenMatrix, subset: &[usize]) -> Result<f64> {
    if subset.len() < 2 {
        return Err(Error::BadSubset(format!(
            "need at least 2 indices, got {}",
            subset.len()
        )));
    }
    let mut seen = vec![false; tokens.rows()];
    for &i in subset {
        if i >= tokens.rows() {
            return Err(Error::BadSubset(format!("index {i} out of range")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::BadSubset(format!("duplicate index {i}")));
        }
    }
    let mut total = 0.0;
    for (p, &i) in subset.iter().enumerate() {
        for &j in &subset[p + 1..] {
            total += 1.0 - dot(tokens.unit_row(i), tokens.unit_row(j));
        }
    }
    let pairs = subset.len() * (subset.len() - 1) / 2;
    Ok(total / pairs as f64)
}

/// A candidate in the (diversity, alignment) objective plane. Both
/// objectives are maximized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub index: usize,
    pub v: f64,
    pub a: f64,
}

impl ParetoPoint {
    pub fn new(index: usize, v: f64, a: f64) -> Self {
        Self { index, v, a }
    }

    /// `self` is at least as good in both objectives and strictly better
    /// in one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.v >= other.v && self.a >= other.a && (self.v > other.v || self.a > other.a)
    }
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// v descending, then a descending, then index ascending.
fn scan_order(p: &ParetoPoint, q: &ParetoPoint) -> Ordering {
    cmp_f64(q.v, p.v)
        .then_with(|| cmp_f64(q.a, p.a))
        .then_with(|| p.index.cmp(&q.index))
}

/// Drop points whose `(v, a)` exactly repeats a lower-index point. Order
/// of the survivors is preserved.
pub fn collapse_duplicates(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&x, &y| scan_order(&points[x], &points[y]));
    let mut keep = vec![true; points.len()];
    for w in order.windows(2) {
        let (p, q) = (&points[w[0]], &points[w[1]]);
        if p.v == q.v && p.a == q.a {
            keep[w[1]] = false;
        }
    }
    points
        .iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}

/// Non-dominated points by pairwise comparison. Returns their `index`
/// values in ascending order.
pub fn pareto_front_naive(points: &[ParetoPoint]) -> Vec<usize> {
    let mut front: Vec<usize> = points
        .iter()
        .filter(|p| !points.iter().any(|q| q.dominates(p)))
        .map(|p| p.index)
        .collect();
    front.sort_unstable();
    front
}

/// Positions (into `order`) of the front among the points listed in
/// `order`, which must already be in scan order.
fn scan_front(points: &[ParetoPoint], order: &[usize]) -> Vec<usize> {
    let mut front = Vec::new();
    let mut best_a = f64::NEG_INFINITY;
    for (pos, &i) in order.iter().enumerate() {
        if front.is_empty() || points[i].a > best_a {
            best_a = points[i].a;
            front.push(pos);
        }
    }
    front
}

/// Non-dominated points by sorting on `v` and scanning for new maxima of
/// `a`. Same output as [`pareto_front_naive`] on duplicate-free input.
pub fn pareto_front_sortscan(points: &[ParetoPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&x, &y| scan_order(&points[x], &points[y]));
    let mut front: Vec<usize> = scan_front(points, &order)
        .into_iter()
        .map(|pos| points[order[pos]].index)
        .collect();
    front.sort_unstable();
    front
}

/// 1-based competition ranks of `values` in descending order.
fn competition_ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| cmp_f64(values[y], values[x]));
    let mut ranks = vec![0; values.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && values[order[pos - 1]] == values[i] {
            ranks[order[pos - 1]]
        } else {
            pos + 1
        };
    }
    ranks
}

/// Members of an overflowing front, best first: lower rank-sum, then lower
/// index.
fn rank_front(front: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let v_ranks = competition_ranks(&front.iter().map(|p| p.v).collect::<Vec<_>>());
    let a_ranks = competition_ranks(&front.iter().map(|p| p.a).collect::<Vec<_>>());
    let mut order: Vec<usize> = (0..front.len()).collect();
    order.sort_by_key(|&i| (v_ranks[i] + a_ranks[i], front[i].index));
    order.into_iter().map(|i| front[i]).collect()
}

fn check_budget(points: &[ParetoPoint], budget: usize) -> Result<Option<Vec<usize>>> {
    if budget == 0 {
        return Err(Error::BadBudget(budget));
    }
    if points.is_empty() {
        return Err(Error::BadSubset("no candidate points".into()));
    }
    if budget >= points.len() {
        let mut all: Vec<usize> = points.iter().map(|p| p.index).collect();
        all.sort_unstable();
        return Ok(Some(all));
    }
    Ok(None)
}

/// Exactly `budget` points chosen by peeling successive fronts. Whole
/// fronts are taken while they fit; the front that overflows is ranked by
/// rank-sum (see [`rank_front`]) and cut. Exact duplicates fall into later
/// fronts. Returns sorted `index` values.
pub fn pareto_budgeted(points: &[ParetoPoint], budget: usize) -> Result<Vec<usize>> {
    if let Some(all) = check_budget(points, budget)? {
        return Ok(all);
    }
    let mut alive: Vec<usize> = (0..points.len()).collect();
    alive.sort_by(|&x, &y| scan_order(&points[x], &points[y]));
    let mut out = Vec::with_capacity(budget);
    while out.len() < budget {
        let positions = scan_front(points, &alive);
        let front: Vec<ParetoPoint> = positions.iter().map(|&p| points[alive[p]]).collect();
        if !take_front(&mut out, front, budget) {
            break;
        }
        let mut on_front = positions.into_iter().peekable();
        let mut pos = 0;
        alive.retain(|_| {
            let drop = on_front.peek() == Some(&pos);
            if drop {
                on_front.next();
            }
            pos += 1;
            !drop
        });
    }
    out.sort_unstable();
    Ok(out)
}

/// [`pareto_budgeted`] built on the pairwise front. Reference for tests
/// and benchmarks.
pub fn pareto_budgeted_naive(points: &[ParetoPoint], budget: usize) -> Result<Vec<usize>> {
    if let Some(all) = check_budget(points, budget)? {
        return Ok(all);
    }
    let mut alive: Vec<ParetoPoint> = points.to_vec();
    let mut out = Vec::with_capacity(budget);
    while out.len() < budget {
        let ids = pareto_front_naive(&collapse_duplicates(&alive));
        let front: Vec<ParetoPoint> = alive
            .iter()
            .filter(|p| ids.binary_search(&p.index).is_ok())
            .copied()
            .collect();
        if !take_front(&mut out, front, budget) {
            break;
        }
        alive.retain(|p| ids.binary_search(&p.index).is_err());
    }
    out.sort_unstable();
    Ok(out)
}

/// Append a whole front if it fits, otherwise its best members up to the
/// budget. Returns whether peeling should continue.
fn take_front(out: &mut Vec<usize>, front: Vec<ParetoPoint>, budget: usize) -> bool {
    let quota = budget - out.len();
    if front.len() <= quota {
        out.extend(front.iter().map(|p| p.index));
        out.len() < budget
    } else {
        out.extend(rank_front(&front).iter().take(quota).map(|p| p.index));
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f32 = std::f32::consts::FRAC_1_SQRT_2;

    fn pts(raw: &[(f64, f64)]) -> Vec<ParetoPoint> {
        raw.iter()
            .enumerate()
            .map(|(i, &(v, a))| ParetoPoint::new(i, v, a))
            .collect()
    }

    fn mat(rows: &[&[f32]]) -> TokenMatrix {
        TokenMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn greedy_full_budget_is_identity() {
        let m = mat(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(
            greedy_rep_max(&m, 3, GreedyObjective::SumDistance).unwrap(),
            vec![0, 1, 2]
        );
        assert_eq!(
            greedy_rep_max(&m, 10, GreedyObjective::SumDistance).unwrap(),
            vec![0, 1, 2]
        );
        assert!(matches!(
            greedy_rep_max(&m, 0, GreedyObjective::SumDistance),
            Err(Error::BadBudget(0))
        ));
    }

    #[test]
    fn greedy_pair_tie_break() {
        let m = mat(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        for obj in [GreedyObjective::SumDistance, GreedyObjective::MinDistance] {
            assert_eq!(greedy_rep_max(&m, 2, obj).unwrap(), vec![0, 2]);
            assert_eq!(greedy_rep_max(&m, 1, obj).unwrap(), vec![0]);
        }
    }

    #[test]
    fn greedy_prefers_orthogonal_pair() {
        let m = mat(&[&[1.0, 0.0], &[0.0, 1.0], &[H, H]]);
        assert_eq!(
            greedy_rep_max(&m, 2, GreedyObjective::SumDistance).unwrap(),
            vec![0, 1]
        );
    }

    #[test]
    fn greedy_sum_vs_min_objective() {
        // after seeding with e1/-e1, the sum objective is indifferent
        // between e2 and the near-e1 token but min-distance is not
        let m = mat(&[
            &[1.0, 0.0, 0.0],
            &[-1.0, 0.0, 0.0],
            &[0.9, 0.1, 0.0],
            &[0.0, 1.0, 0.0],
        ]);
        let min = greedy_rep_max(&m, 3, GreedyObjective::MinDistance).unwrap();
        assert_eq!(min, vec![0, 1, 3]);
        let sum = greedy_rep_max(&m, 3, GreedyObjective::SumDistance).unwrap();
        assert_eq!(sum, vec![0, 1, 2]);
    }

    #[test]
    fn objective_value_examples() {
        let m = mat(&[&[1.0, 0.0], &[0.0, 1.0], &[H, H], &[1.0, 0.0]]);
        assert!((greedy_objective_value(&m, &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert!(greedy_objective_value(&m, &[0, 3]).unwrap().abs() < 1e-12);
        // unordered-pair mean equals the ordered-pair diversity of the set
        assert!((greedy_objective_value(&m, &[0, 1, 2]).unwrap() - 0.52860).abs() < 1e-4);
        assert!(greedy_objective_value(&m, &[0]).is_err());
        assert!(greedy_objective_value(&m, &[0, 0]).is_err());
        assert!(greedy_objective_value(&m, &[0, 9]).is_err());
    }

    #[test]
    fn front_examples() {
        let p = pts(&[(3.0, 1.0), (2.0, 2.0), (1.0, 3.0), (1.5, 1.5)]);
        assert_eq!(pareto_front_naive(&p), vec![0, 1, 2]);
        assert_eq!(pareto_front_sortscan(&p), vec![0, 1, 2]);

        let single = pts(&[(0.4, -2.0)]);
        assert_eq!(pareto_front_naive(&single), vec![0]);
        assert_eq!(pareto_front_sortscan(&single), vec![0]);

        let line: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 9.0 - i as f64)).collect();
        let line = pts(&line);
        assert_eq!(pareto_front_naive(&line).len(), 10);
        assert_eq!(pareto_front_sortscan(&line).len(), 10);
    }

    #[test]
    fn equal_v_group_keeps_max_a() {
        let p = pts(&[(1.0, 0.1), (1.0, 0.5), (1.0, 0.3)]);
        assert_eq!(pareto_front_naive(&p), vec![1]);
        assert_eq!(pareto_front_sortscan(&p), vec![1]);
    }

    #[test]
    fn duplicates_collapse_to_lowest_index() {
        let p = pts(&[(1.0, 1.0), (0.5, 2.0), (1.0, 1.0)]);
        let c = collapse_duplicates(&p);
        assert_eq!(c.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(pareto_front_sortscan(&p), vec![0, 1]);
        assert_eq!(pareto_front_naive(&c), vec![0, 1]);
    }

    #[test]
    fn budgeted_examples() {
        let p = pts(&[(3.0, 1.0), (2.0, 2.0), (1.0, 3.0)]);
        assert_eq!(pareto_budgeted(&p, 2).unwrap(), vec![0, 1]);
        assert_eq!(pareto_budgeted_naive(&p, 2).unwrap(), vec![0, 1]);
        assert_eq!(pareto_budgeted(&p, 5).unwrap(), vec![0, 1, 2]);

        let p = pts(&[(3.0, 1.0), (1.0, 3.0)]);
        assert_eq!(pareto_budgeted(&p, 1).unwrap(), vec![0]);
        assert!(matches!(pareto_budgeted(&p, 0), Err(Error::BadBudget(0))));
    }

    #[test]
    fn budgeted_peels_second_front() {
        // front 1: {0, 1}; front 2: {2, 3}; front 3: {4}
        let p = pts(&[(5.0, 1.0), (1.0, 5.0), (4.0, 0.5), (0.5, 4.0), (0.1, 0.1)]);
        assert_eq!(pareto_budgeted(&p, 2).unwrap(), vec![0, 1]);
        assert_eq!(pareto_budgeted(&p, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(pareto_budgeted(&p, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(pareto_budgeted_naive(&p, 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn budgeted_duplicates_fill_later() {
        let p = pts(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (0.0, 0.0)]);
        assert_eq!(pareto_budgeted(&p, 2).unwrap(), vec![0, 1]);
        assert_eq!(pareto_budgeted_naive(&p, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn competition_ranking() {
        assert_eq!(competition_ranks(&[3.0, 5.0, 3.0, 1.0]), vec![2, 1, 2, 4]);
    }
}
