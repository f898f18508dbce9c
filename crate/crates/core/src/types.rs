//! Validated embedding containers, configuration and result types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_ROW_NORM: f64 = 1e-12;

/// Dense row-major token embeddings, one row per token.
///
/// Raw values are stored as `f32`. Squared norms and the unit-normalized
/// view are computed once at construction in `f64`, and every downstream
/// reduction accumulates in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    norms_sq: Vec<f64>,
    unit: Vec<f64>,
}

impl TokenMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadConfig("embedding dimension must be >= 1".into()));
        }
        let expected = rows * dim;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: data.len(),
            });
        }
        let mut norms_sq = Vec::with_capacity(rows);
        let mut unit = Vec::with_capacity(expected);
        for (i, row) in data.chunks_exact(dim).enumerate() {
            let sq: f64 = row.iter().map(|&x| f64::from(x) * f64::from(x)).sum();
            let norm = sq.sqrt();
            if !norm.is_finite() || norm < MIN_ROW_NORM {
                return Err(Error::ZeroNormRow(i));
            }
            norms_sq.push(sq);
            unit.extend(row.iter().map(|&x| f64::from(x) / norm));
        }
        Ok(Self {
            rows,
            dim,
            data,
            norms_sq,
            unit,
        })
    }

    /// Build from a list of equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    /// A matrix with no rows.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(0, dim, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn unit_row(&self, i: usize) -> &[f64] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norm_sq(&self, i: usize) -> f64 {
        self.norms_sq[i]
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norms_sq
    }

    /// Copy the given rows (in the given order) into a new matrix. Cached
    /// norms and unit rows are copied, not recomputed.
    pub fn gather(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut norms_sq = Vec::with_capacity(indices.len());
        let mut unit = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::SelectionMismatch(format!(
                    "row {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
            norms_sq.push(self.norms_sq[i]);
            unit.extend_from_slice(self.unit_row(i));
        }
        Ok(Self {
            rows: indices.len(),
            dim: self.dim,
            data,
            norms_sq,
            unit,
        })
    }

    /// Stack several matrices of the same dimension vertically.
    pub fn concat(parts: &[&TokenMatrix], dim: usize) -> Result<Self> {
        let mut out = Self {
            rows: 0,
            dim,
            data: Vec::new(),
            norms_sq: Vec::new(),
            unit: Vec::new(),
        };
        for p in parts {
            if p.dim != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: p.dim,
                });
            }
            out.rows += p.rows;
            out.data.extend_from_slice(&p.data);
            out.norms_sq.extend_from_slice(&p.norms_sq);
            out.unit.extend_from_slice(&p.unit);
        }
        Ok(out)
    }
}

/// One pruning instance: per-image token matrices plus the text tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBundle {
    images: Vec<TokenMatrix>,
    text: TokenMatrix,
    dim: usize,
    offsets: Vec<usize>,
}

impl TokenBundle {
    pub fn new(images: Vec<TokenMatrix>, text: TokenMatrix) -> Result<Self> {
        let first = images.first().ok_or(Error::EmptyBundle)?;
        let dim = first.dim();
        let mut offsets = Vec::with_capacity(images.len() + 1);
        let mut total = 0;
        for (k, img) in images.iter().enumerate() {
            if img.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: img.dim(),
                });
            }
            if img.rows() == 0 {
                return Err(Error::EmptyImage(k));
            }
            offsets.push(total);
            total += img.rows();
        }
        offsets.push(total);
        if text.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: text.dim(),
            });
        }
        Ok(Self {
            images,
            text,
            dim,
            offsets,
        })
    }

    pub fn images(&self) -> &[TokenMatrix] {
        &self.images
    }

    pub fn image(&self, k: usize) -> &TokenMatrix {
        &self.images[k]
    }

    pub fn text(&self) -> &TokenMatrix {
        &self.text
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_images(&self) -> usize {
        self.images.len()
    }

    /// Total visual token count `M_0`.
    pub fn total_tokens(&self) -> usize {
        self.offsets[self.images.len()]
    }

    /// Global index of local token 0 of image `k`.
    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    pub fn token_counts(&self) -> Vec<usize> {
        self.images.iter().map(TokenMatrix::rows).collect()
    }

    /// Map a global token index back to `(image, local index)`.
    pub fn locate(&self, global: usize) -> Option<(usize, usize)> {
        if global >= self.total_tokens() {
            return None;
        }
        // offsets is sorted; find the last offset <= global
        let k = self.offsets.partition_point(|&o| o <= global) - 1;
        Some((k, global - self.offsets[k]))
    }
}

/// Final retention target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalBudget {
    Absolute(usize),
    /// Fraction of `M_0`, rounded half away from zero.
    Ratio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterVariant {
    #[default]
    GlobalMean,
    PositionWise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyObjective {
    #[default]
    SumDistance,
    MinDistance,
}

/// All pruning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneConfig {
    pub m_min: usize,
    pub m_max: usize,
    pub lambda: f64,
    pub m2: usize,
    pub final_budget: FinalBudget,
    pub last_image_rule: bool,
    pub inter_variant: InterVariant,
    pub align_on_normalized: bool,
    pub greedy_objective: GreedyObjective,
    pub fast_path: bool,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            m_min: 294,
            m_max: 454,
            lambda: 0.5,
            m2: 252,
            final_budget: FinalBudget::Ratio(0.2),
            last_image_rule: true,
            inter_variant: InterVariant::GlobalMean,
            align_on_normalized: false,
            greedy_objective: GreedyObjective::SumDistance,
            fast_path: true,
        }
    }
}

/// Budgets after clamping against a concrete bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedBudgets {
    pub m_min: usize,
    pub m_max: usize,
    pub m2: usize,
    pub m_final: usize,
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_min == 0 {
            return Err(Error::BadConfig("m_min must be >= 1".into()));
        }
        if self.m_min > self.m_max {
            return Err(Error::BadConfig(format!(
                "m_min ({}) exceeds m_max ({})",
                self.m_min, self.m_max
            )));
        }
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::BadConfig(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.m2 == 0 {
            return Err(Error::BadConfig("m2 must be >= 1".into()));
        }
        match self.final_budget {
            FinalBudget::Absolute(0) => {
                return Err(Error::BadConfig("final budget must be >= 1".into()))
            }
            FinalBudget::Ratio(r) if !(r > 0.0 && r < 1.0) => {
                return Err(Error::BadConfig(format!(
                    "retention ratio must lie in (0, 1), got {r}"
                )))
            }
            _ => {}
        }
        Ok(())
    }

    /// Clamp the configured budgets against a bundle so that
    /// `m_final <= m2 <= m_min <= m_max <= M_0` and `m_final >= 1`.
    pub fn resolve(&self, bundle: &TokenBundle) -> Result<ResolvedBudgets> {
        self.validate()?;
        let total = bundle.total_tokens();
        if total < bundle.n_images() {
            return Err(Error::BudgetUnsatisfiable {
                tokens: total,
                images: bundle.n_images(),
            });
        }
        let requested = match self.final_budget {
            FinalBudget::Absolute(n) => n,
            FinalBudget::Ratio(r) => (r * total as f64).round() as usize,
        };
        let m_max = self.m_max.min(total);
        let m_min = self.m_min.min(m_max);
        let m2 = self.m2.min(m_min);
        let m_final = requested.min(m2).max(1);
        Ok(ResolvedBudgets {
            m_min,
            m_max,
            m2,
            m_final,
        })
    }

    /// A copy of this config with the resolved budgets substituted in.
    pub fn with_budgets(&self, b: &ResolvedBudgets) -> Self {
        Self {
            m_min: b.m_min,
            m_max: b.m_max,
            m2: b.m2,
            final_budget: FinalBudget::Absolute(b.m_final),
            ..self.clone()
        }
    }
}

/// Redundancy signals and stage-1 budgets for one bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub d_intra_per_image: Vec<f64>,
    pub d_intra_mean: f64,
    pub d_k: Vec<f64>,
    /// Absent for single-image bundles.
    pub d_inter: Option<f64>,
    pub s: f64,
    pub m1: usize,
    pub per_image_budgets: Vec<usize>,
    pub budgets: ResolvedBudgets,
}

/// Diversity and alignment scores of one candidate token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    /// Global index into the original bundle.
    pub index: usize,
    pub v: f64,
    pub a: f64,
}

/// Token counts after each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSizes {
    pub m0: usize,
    pub m1: usize,
    pub m2: usize,
    pub m_final: usize,
}

/// Result of a full pruning run. All indices refer to original bundle
/// positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub kept_per_image: Vec<Vec<usize>>,
    pub kept_global: Vec<usize>,
    /// Global indices surviving the intra-image stage, ascending.
    pub stage1_global: Vec<usize>,
    /// Candidate set after global filtering, in ascending global index.
    pub scores: Vec<TokenScore>,
    pub stage_sizes: StageSizes,
}
