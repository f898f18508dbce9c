//! TTB1 token-bundle files, JSON result documents and the synthetic bundle
//! generator.
//!
//! TTB1 layout, all integers little-endian `u32`, all values little-endian
//! `f32`:
//!
//! ```text
//! "TTB1" | version=1 | n_images | n_text | dim | count[0..n_images]
//! image rows, image by image, row-major
//! text rows, row-major
//! ```

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    PruneConfig, RedundancyReport, ResolvedBudgets, Selection, TokenBundle, TokenMatrix,
};

pub const MAGIC: [u8; 4] = *b"TTB1";
pub const VERSION: u32 = 1;

/// Fixed-size part of a TTB1 header plus the per-image counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleFileHeader {
    pub n_images: u32,
    pub n_text: u32,
    pub dim: u32,
    pub per_image_counts: Vec<u32>,
}

fn to_u32(x: usize, what: &str) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::BadHeader(format!("{what} {x} does not fit in u32")))
}

pub fn encode_bundle(bundle: &TokenBundle) -> Result<Vec<u8>> {
    let n_values = bundle.total_tokens() * bundle.dim() + bundle.text().data().len();
    let mut out = Vec::with_capacity(20 + 4 * bundle.n_images() + 4 * n_values);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(bundle.n_images(), "image count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(bundle.text().rows(), "text count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(bundle.dim(), "dim")?.to_le_bytes());
    for img in bundle.images() {
        out.extend_from_slice(&to_u32(img.rows(), "token count")?.to_le_bytes());
    }
    for m in bundle.images().iter().chain(std::iter::once(bundle.text())) {
        for &x in m.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::TruncatedFile)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes = self.take(count.checked_mul(4).ok_or(Error::TruncatedFile)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }
}

pub fn decode_header(buf: &[u8]) -> Result<(BundleFileHeader, usize)> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let n_images = r.u32()?;
    let n_text = r.u32()?;
    let dim = r.u32()?;
    if n_images == 0 {
        return Err(Error::BadHeader("image count must be >= 1".into()));
    }
    if dim == 0 {
        return Err(Error::BadHeader("dim must be >= 1".into()));
    }
    let mut per_image_counts = Vec::new();
    for k in 0..n_images {
        let c = r.u32()?;
        if c == 0 {
            return Err(Error::BadHeader(format!("image {k} has zero tokens")));
        }
        per_image_counts.push(c);
    }
    Ok((
        BundleFileHeader {
            n_images,
            n_text,
            dim,
            per_image_counts,
        },
        r.pos,
    ))
}

pub fn decode_bundle(buf: &[u8]) -> Result<TokenBundle> {
    let (header, body) = decode_header(buf)?;
    let mut r = Reader { buf, pos: body };
    let dim = header.dim as usize;
    let mut images = Vec::with_capacity(header.per_image_counts.len());
    for &c in &header.per_image_counts {
        let rows = c as usize;
        let data = r.f32s(rows.checked_mul(dim).ok_or(Error::TruncatedFile)?)?;
        images.push(TokenMatrix::new(rows, dim, data)?);
    }
    let n_text = header.n_text as usize;
    let text = TokenMatrix::new(
        n_text,
        dim,
        r.f32s(n_text.checked_mul(dim).ok_or(Error::TruncatedFile)?)?,
    )?;
    if r.pos != buf.len() {
        return Err(Error::BadHeader(format!(
            "{} trailing bytes after payload",
            buf.len() - r.pos
        )));
    }
    TokenBundle::new(images, text)
}

pub fn write_bundle(bundle: &TokenBundle, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_bundle(bundle)?)?;
    Ok(())
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<TokenBundle> {
    decode_bundle(&fs::read(path)?)
}

/// The configuration as given plus the budgets it resolved to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(flatten)]
    pub params: PruneConfig,
    pub resolved: ResolvedBudgets,
}

/// JSON document written by `prune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub config: ConfigEcho,
    pub report: RedundancyReport,
    pub selection: Selection,
}

/// JSON document written by `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config: ConfigEcho,
    pub report: RedundancyReport,
}

pub fn result_document(
    cfg: &PruneConfig,
    report: &RedundancyReport,
    sel: &Selection,
) -> ResultDocument {
    ResultDocument {
        config: ConfigEcho {
            params: cfg.clone(),
            resolved: report.budgets,
        },
        report: report.clone(),
        selection: sel.clone(),
    }
}

pub fn report_document(cfg: &PruneConfig, report: &RedundancyReport) -> ReportDocument {
    ReportDocument {
        config: ConfigEcho {
            params: cfg.clone(),
            resolved: report.budgets,
        },
        report: report.clone(),
    }
}

fn write_json<T: Serialize>(doc: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_result(
    cfg: &PruneConfig,
    report: &RedundancyReport,
    sel: &Selection,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_json(&result_document(cfg, report, sel), path)
}

pub fn read_result(path: impl AsRef<Path>) -> Result<ResultDocument> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_report(
    cfg: &PruneConfig,
    report: &RedundancyReport,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_json(&report_document(cfg, report), path)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<PruneConfig> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Knobs for a seeded synthetic bundle.
///
/// Each image draws tokens around `clusters` unit prototypes with Gaussian
/// `noise`; prototypes of consecutive images move by `drift`. Noise drives
/// intra-image diversity, drift drives inter-image variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_images: usize,
    pub tokens_per_image: usize,
    pub dim: usize,
    pub seed: u64,
    pub clusters: usize,
    pub noise: f64,
    pub drift: f64,
    pub text_tokens: usize,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadSpec(m));
        if self.n_images == 0 || self.tokens_per_image == 0 || self.dim == 0 {
            return bad("images, tokens and dim must all be >= 1".into());
        }
        if self.clusters == 0 || self.clusters > self.tokens_per_image {
            return bad(format!(
                "clusters must lie in 1..={}, got {}",
                self.tokens_per_image, self.clusters
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return bad(format!("drift must be >= 0, got {}", self.drift));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-9 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// Random unit vectors, mutually orthogonal when `count <= dim`.
fn prototypes(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = gaussian(rng, dim);
        if out.len() < dim {
            for p in &out {
                let d: f64 = v.iter().zip(p).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(p).for_each(|(x, y)| *x -= d * y);
            }
        }
        if normalize(&mut v) {
            out.push(v);
        }
    }
    out
}

fn jitter(rng: &mut ChaCha8Rng, base: &[f64], scale: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = base
            .iter()
            .zip(gaussian(rng, base.len()))
            .map(|(b, g)| b + scale * g)
            .collect();
        if normalize(&mut v) {
            return v;
        }
    }
}

/// Deterministic synthetic bundle for a given spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TokenBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim;
    let mut protos = prototypes(&mut rng, spec.clusters, dim);
    let mut per_image_protos = Vec::with_capacity(spec.n_images);
    let mut images = Vec::with_capacity(spec.n_images);
    for k in 0..spec.n_images {
        if k > 0 && spec.drift > 0.0 {
            protos = protos
                .iter()
                .map(|p| {
                    let mut dir = gaussian(&mut rng, dim);
                    normalize(&mut dir);
                    let mut moved: Vec<f64> = p
                        .iter()
                        .zip(&dir)
                        .map(|(a, d)| a + spec.drift * d)
                        .collect();
                    if normalize(&mut moved) {
                        moved
                    } else {
                        dir
                    }
                })
                .collect();
        }
        let mut data = Vec::with_capacity(spec.tokens_per_image * dim);
        for i in 0..spec.tokens_per_image {
            let p = &protos[i % spec.clusters];
            let tok = if spec.noise > 0.0 {
                jitter(&mut rng, p, spec.noise)
            } else {
                p.clone()
            };
            data.extend(tok.iter().map(|&x| x as f32));
        }
        images.push(TokenMatrix::new(spec.tokens_per_image, dim, data)?);
        per_image_protos.push(protos.clone());
    }
    let mut text = Vec::with_capacity(spec.text_tokens * dim);
    for j in 0..spec.text_tokens {
        let k = rng.random_range(0..spec.n_images);
        let p = &per_image_protos[k][j % spec.clusters];
        text.extend(jitter(&mut rng, p, 0.5).iter().map(|&x| x as f32));
    }
    TokenBundle::new(images, TokenMatrix::new(spec.text_tokens, dim, text)?)
}
