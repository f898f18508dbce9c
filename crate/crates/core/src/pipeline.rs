//! End-to-end pruning: redundancy signals, budgets, per-image greedy
//! selection, pooled greedy filtering and budgeted Pareto selection.

use crate::allocation::{image_weights, per_image_budgets, stage1_budget};
use crate::error::{Error, Result};
use crate::metrics::{
    alignment_fast, alignment_naive, inter_variation_mean, inter_variation_positionwise,
    inter_variation_steps, intra_diversity_mean, s_factor, token_diversity_fast,
    token_diversity_naive, AlignmentContext,
};
use crate::par;
use crate::selection::{greedy_rep_max, pareto_budgeted, pareto_budgeted_naive, ParetoPoint};
use crate::types::{
    InterVariant, PruneConfig, RedundancyReport, Selection, StageSizes, TokenBundle, TokenMatrix,
    TokenScore,
};

/// Compute redundancy signals and stage-1 budgets. Selects nothing.
pub fn analyze(bundle: &TokenBundle, cfg: &PruneConfig) -> Result<RedundancyReport> {
    let budgets = cfg.resolve(bundle)?;
    let (d_intra_per_image, d_intra_mean) = intra_diversity_mean(bundle, cfg.fast_path);
    let d_k = match cfg.inter_variant {
        InterVariant::GlobalMean => inter_variation_steps(bundle)?,
        InterVariant::PositionWise => inter_variation_positionwise(bundle)?,
    };
    let d_inter = if d_k.is_empty() {
        None
    } else {
        Some(inter_variation_mean(&d_k)?)
    };
    let s = s_factor(d_intra_mean, d_inter);
    let m1 = stage1_budget(s, budgets.m_min, budgets.m_max, cfg.lambda);
    let weights = image_weights(&d_intra_per_image, cfg.last_image_rule);
    let per_image_budgets = per_image_budgets(&weights, m1, &bundle.token_counts())?;
    Ok(RedundancyReport {
        d_intra_per_image,
        d_intra_mean,
        d_k,
        d_inter,
        s,
        m1,
        per_image_budgets,
        budgets,
    })
}

/// Run the full two-stage pruning pipeline.
pub fn prune(bundle: &TokenBundle, cfg: &PruneConfig) -> Result<(RedundancyReport, Selection)> {
    if bundle.text().is_empty() {
        return Err(Error::EmptyText);
    }
    let report = analyze(bundle, cfg)?;
    let budgets = report.budgets;

    // intra-image stage, one independent greedy run per image
    let jobs: Vec<(usize, usize)> = report
        .per_image_budgets
        .iter()
        .copied()
        .enumerate()
        .collect();
    let stage1_local = par::map_slice(&jobs, |&(k, m)| {
        greedy_rep_max(bundle.image(k), m, cfg.greedy_objective)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut stage1_global = Vec::with_capacity(report.m1);
    let mut parts = Vec::with_capacity(bundle.n_images());
    for (k, local) in stage1_local.iter().enumerate() {
        stage1_global.extend(local.iter().map(|&i| bundle.offset(k) + i));
        parts.push(bundle.image(k).gather(local)?);
    }
    let pooled = TokenMatrix::concat(&parts.iter().collect::<Vec<_>>(), bundle.dim())?;

    // inter-image stage: pooled greedy filtering over X^(1) in image order
    let stage2_pos = greedy_rep_max(&pooled, budgets.m2, cfg.greedy_objective)?;
    let candidates = pooled.gather(&stage2_pos)?;
    let stage2_global: Vec<usize> = stage2_pos.iter().map(|&p| stage1_global[p]).collect();

    let v = if candidates.rows() < 2 {
        vec![0.0; candidates.rows()]
    } else if cfg.fast_path {
        token_diversity_fast(&candidates)?
    } else {
        token_diversity_naive(&candidates)?
    };
    let a = if cfg.fast_path {
        let ctx = AlignmentContext::new(bundle.text(), cfg.align_on_normalized)?;
        alignment_fast(&candidates, &ctx)?
    } else {
        alignment_naive(&candidates, bundle.text(), cfg.align_on_normalized)?
    };

    let points: Vec<ParetoPoint> = (0..candidates.rows())
        .map(|p| ParetoPoint::new(p, v[p], a[p]))
        .collect();
    let final_pos = if cfg.fast_path {
        pareto_budgeted(&points, budgets.m_final)?
    } else {
        pareto_budgeted_naive(&points, budgets.m_final)?
    };
    let kept_global: Vec<usize> = final_pos.iter().map(|&p| stage2_global[p]).collect();

    let mut kept_per_image = vec![Vec::new(); bundle.n_images()];
    for &g in &kept_global {
        let (k, i) = bundle.locate(g).expect("selected index within bundle");
        kept_per_image[k].push(i);
    }
    let scores = stage2_global
        .iter()
        .zip(v.iter().zip(&a))
        .map(|(&index, (&v, &a))| TokenScore { index, v, a })
        .collect();

    let selection = Selection {
        kept_per_image,
        stage_sizes: StageSizes {
            m0: bundle.total_tokens(),
            m1: stage1_global.len(),
            m2: stage2_global.len(),
            m_final: kept_global.len(),
        },
        kept_global,
        stage1_global,
        scores,
    };
    Ok((report, selection))
}

/// Materialize the kept tokens. Images left without tokens are dropped;
/// the text tokens are carried over unchanged.
pub fn apply_selection(bundle: &TokenBundle, sel: &Selection) -> Result<TokenBundle> {
    if sel.kept_per_image.len() != bundle.n_images() {
        return Err(Error::SelectionMismatch(format!(
            "selection covers {} images, bundle has {}",
            sel.kept_per_image.len(),
            bundle.n_images()
        )));
    }
    let mut images = Vec::new();
    for (k, kept) in sel.kept_per_image.iter().enumerate() {
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::SelectionMismatch(format!(
                "indices for image {k} are not strictly increasing"
            )));
        }
        if kept.is_empty() {
            continue;
        }
        images.push(bundle.image(k).gather(kept)?);
    }
    if images.is_empty() {
        return Err(Error::SelectionMismatch("selection keeps no tokens".into()));
    }
    TokenBundle::new(images, bundle.text().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FinalBudget;

    fn eye_bundle(n_images: usize, per_image: usize) -> TokenBundle {
        let dim = n_images * per_image;
        let images = (0..n_images)
            .map(|k| {
                let mut data = vec![0.0f32; per_image * dim];
                for i in 0..per_image {
                    data[i * dim + k * per_image + i] = 1.0;
                }
                TokenMatrix::new(per_image, dim, data).unwrap()
            })
            .collect();
        let mut text = vec![0.0f32; dim];
        text[0] = 1.0;
        TokenBundle::new(images, TokenMatrix::new(1, dim, text).unwrap()).unwrap()
    }

    #[test]
    fn single_image_is_neutral() {
        let b = eye_bundle(1, 6);
        let r = analyze(&b, &PruneConfig::default()).unwrap();
        assert_eq!(r.s, 1.0);
        assert!(r.d_k.is_empty());
        assert_eq!(r.d_inter, None);
        assert_eq!(r.per_image_budgets, vec![r.m1]);
    }

    #[test]
    fn identical_images_saturate() {
        let img = TokenMatrix::from_rows(&[[1.0f32, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let text = TokenMatrix::from_rows(&[[1.0f32, 0.0]]).unwrap();
        let b = TokenBundle::new(vec![img.clone(), img], text).unwrap();
        let cfg = PruneConfig {
            m_min: 2,
            m_max: 5,
            m2: 2,
            ..Default::default()
        };
        let r = analyze(&b, &cfg).unwrap();
        assert!(r.d_k[0] < 1e-9);
        assert_eq!(r.m1, 5);
    }

    #[test]
    fn orthonormal_trace() {
        // 3 images x 4 orthonormal tokens: every diversity is 1, every d_k
        // is 1, so s = 1 and all clamps bind at M_0 = 12
        let b = eye_bundle(3, 4);
        let cfg = PruneConfig::default();
        let (r, sel) = prune(&b, &cfg).unwrap();
        assert!(r.d_intra_per_image.iter().all(|&d| (d - 1.0).abs() < 1e-12));
        assert!((r.d_inter.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.m1, 12);
        assert_eq!(r.per_image_budgets, vec![4, 4, 4]);
        assert_eq!(r.budgets.m2, 12);
        // ratio 0.2 of 12 rounds to 2
        assert_eq!(r.budgets.m_final, 2);
        assert_eq!(
            sel.stage_sizes,
            StageSizes {
                m0: 12,
                m1: 12,
                m2: 12,
                m_final: 2
            }
        );
        assert_eq!(sel.stage1_global, (0..12).collect::<Vec<_>>());
        // v is equal for all; token 0 matches the text and is the only
        // front member, the rest tie on a and fall to the lowest index
        assert_eq!(sel.kept_global, vec![0, 1]);
        assert_eq!(sel.kept_per_image, vec![vec![0, 1], vec![], vec![]]);
    }

    #[test]
    fn keep_all_when_budget_covers_everything() {
        let b = eye_bundle(2, 3);
        let cfg = PruneConfig {
            final_budget: FinalBudget::Absolute(1000),
            ..Default::default()
        };
        let (_, sel) = prune(&b, &cfg).unwrap();
        assert_eq!(sel.kept_global, (0..6).collect::<Vec<_>>());
        assert_eq!(apply_selection(&b, &sel).unwrap(), b);
    }

    #[test]
    fn empty_text_rejected() {
        let img = TokenMatrix::from_rows(&[[1.0f32, 0.0]]).unwrap();
        let b = TokenBundle::new(vec![img], TokenMatrix::empty(2).unwrap()).unwrap();
        assert!(matches!(
            prune(&b, &PruneConfig::default()),
            Err(Error::EmptyText)
        ));
        assert!(analyze(&b, &PruneConfig::default()).is_ok());
    }

    #[test]
    fn apply_one_per_image() {
        let b = eye_bundle(3, 4);
        let sel = Selection {
            kept_per_image: vec![vec![1], vec![0], vec![3]],
            kept_global: vec![1, 4, 11],
            stage1_global: vec![],
            scores: vec![],
            stage_sizes: StageSizes {
                m0: 12,
                m1: 12,
                m2: 12,
                m_final: 3,
            },
        };
        let out = apply_selection(&b, &sel).unwrap();
        assert_eq!(out.n_images(), 3);
        assert!(out.images().iter().all(|m| m.rows() == 1));
        assert_eq!(out.image(2).row(0), b.image(2).row(3));

        let bad = Selection {
            kept_per_image: vec![vec![9], vec![], vec![]],
            ..sel
        };
        assert!(matches!(
            apply_selection(&b, &bad),
            Err(Error::SelectionMismatch(_))
        ));
    }
}
