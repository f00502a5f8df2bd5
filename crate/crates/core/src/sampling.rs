//! Seeded samplers: Gaussian matrices, Haar measure on (scaled) Stiefel
//! manifolds through the polar factor, the restricted Gaussian measure on
//! the approximation space, and the row truncations `pi^N_l(n)`.
//!
//! Sample `i` of a run draws only from stream `i` of a ChaCha8 generator
//! keyed by the seed, so output does not depend on scheduling.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{FMatrix, Field, Quat};
use crate::concentration::{is_member, ApproxSpaceParams};
use crate::decomp::thin_svd;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gaussian::as241;

pub const DEFAULT_ACCEPTANCE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub field: Field,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub scaled: bool,
    pub seed: u64,
    pub count: usize,
}

impl SamplerConfig {
    pub fn new(field: Field, big_n: usize, n: usize, scaled: bool, seed: u64, count: usize) -> Result<Self> {
        let cfg = SamplerConfig {
            field,
            big_n,
            n,
            scaled,
            seed,
            count,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > self.big_n {
            return Err(Error::InvalidSize {
                n: self.n,
                max: self.big_n,
            });
        }
        if self.count == 0 {
            return Err(Error::TooFewSamples { got: 0, min: 1 });
        }
        Ok(())
    }

    /// `sqrt(N^F - 1)` when scaled, otherwise `1`.
    pub fn radius(&self) -> f64 {
        if self.scaled {
            stiefel_radius(self.field, self.big_n)
        } else {
            1.0
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplerConfig { seed, ..self.clone() }
    }

    pub fn with_count(&self, count: usize) -> Self {
        SamplerConfig { count, ..self.clone() }
    }
}

/// `sqrt(N^F - 1)`.
pub fn stiefel_radius(field: Field, big_n: usize) -> f64 {
    (field.real_size(big_n) as f64 - 1.0).sqrt()
}

/// Independent seed for a named sub-experiment (SplitMix64 finalizer).
pub fn child_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replica `index`.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard normal by inversion of a 53-bit uniform in `(0, 1)`.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let k = rng.next_u64() >> 11;
    let u = (k as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    as241(u)
}

/// `N x n` matrix whose real coordinates are i.i.d. standard normal.
pub fn gaussian_matrix<R: RngCore>(field: Field, rows: usize, cols: usize, rng: &mut R) -> FMatrix {
    let dim = field.dim();
    FMatrix::from_fn(field, rows, cols, |_, _| {
        let mut q = [0.0; 4];
        for c in q.iter_mut().take(dim) {
            *c = standard_normal(rng);
        }
        Quat(q)
    })
}

pub fn gaussian_at(cfg: &SamplerConfig, index: usize) -> FMatrix {
    let mut rng = rng_for(cfg.seed, index as u64);
    gaussian_matrix(cfg.field, cfg.big_n, cfg.n, &mut rng)
}

pub fn sample_gaussian(cfg: &SamplerConfig, exec: Exec) -> Result<Vec<FMatrix>> {
    cfg.validate()?;
    Ok(exec.map_indexed(cfg.count, |i| gaussian_at(cfg, i)))
}

/// Haar sample `index`: the polar factor of a Gaussian matrix, redrawn from
/// the same stream in the rare rank-deficient case.
pub fn haar_at(cfg: &SamplerConfig, index: usize) -> FMatrix {
    let mut rng = rng_for(cfg.seed, index as u64);
    loop {
        let z = gaussian_matrix(cfg.field, cfg.big_n, cfg.n, &mut rng);
        let svd = thin_svd(&z).expect("n <= N checked by config");
        let top = svd.lambda[0];
        if svd.smallest() > 1e-12 * top.max(1e-300) {
            let q = svd.polar().q;
            return if cfg.scaled { q.scale(cfg.radius()) } else { q };
        }
        log::warn!("rank-deficient Gaussian draw at index {index}; resampling");
    }
}

pub fn sample_haar_stiefel(cfg: &SamplerConfig, exec: Exec) -> Result<Vec<FMatrix>> {
    cfg.validate()?;
    Ok(exec.map_indexed(cfg.count, |i| haar_at(cfg, i)))
}

/// `pi^N_l(n)`: keep the first `l` rows.
pub fn project_pi(z: &FMatrix, l: usize) -> Result<FMatrix> {
    if l == 0 || l > z.rows() {
        return Err(Error::InvalidSize { n: l, max: z.rows() });
    }
    Ok(z.top_rows(l))
}

#[derive(Clone, Debug)]
pub struct RestrictedSamples {
    pub samples: Vec<FMatrix>,
    pub acceptance_rate: f64,
    pub proposals: usize,
}

/// Rejection sampler for the Gaussian measure conditioned on the
/// approximation space. Proposal `i` is `gaussian_at(cfg, i)`; the first
/// `cfg.count` members in index order are returned.
pub fn sample_restricted_gaussian(
    cfg: &SamplerConfig,
    eps: f64,
    theta_val: f64,
    floor: f64,
    exec: Exec,
) -> Result<RestrictedSamples> {
    cfg.validate()?;
    for (name, v) in [("epsilon", eps), ("theta", theta_val)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::OutOfRange {
                name,
                value: v,
                range: "(0, 1)",
            });
        }
    }
    let params = ApproxSpaceParams::with_theta(cfg.field, cfg.big_n, cfg.n, eps, theta_val)?;
    let proposal = SamplerConfig {
        scaled: false,
        ..cfg.clone()
    };
    let batch = cfg.count.max(1024);
    let mut samples = Vec::with_capacity(cfg.count);
    let mut start = 0usize;
    loop {
        let drawn = exec.map_indexed(batch, |k| {
            let z = gaussian_at(&proposal, start + k);
            is_member(&z, &params).then_some(z)
        });
        for (k, z) in drawn.into_iter().enumerate() {
            if let Some(z) = z {
                samples.push(z);
                if samples.len() == cfg.count {
                    let proposals = start + k + 1;
                    return Ok(RestrictedSamples {
                        samples,
                        acceptance_rate: cfg.count as f64 / proposals as f64,
                        proposals,
                    });
                }
            }
        }
        start += batch;
        let rate = samples.len() as f64 / start as f64;
        if rate < floor {
            return Err(Error::AcceptanceFloor {
                rate,
                floor,
                proposals: start,
            });
        }
    }
}

/// Fraction of `cfg.count` Gaussian proposals that are members: a Monte
/// Carlo estimate of the Gaussian mass of the approximation space.
pub fn member_fraction(cfg: &SamplerConfig, params: &ApproxSpaceParams, exec: Exec) -> Result<f64> {
    cfg.validate()?;
    let proposal = SamplerConfig {
        scaled: false,
        ..cfg.clone()
    };
    let hits = exec.map_indexed(cfg.count, |i| is_member(&gaussian_at(&proposal, i), params));
    Ok(hits.iter().filter(|&&h| h).count() as f64 / cfg.count as f64)
}

/// Shortest round-trip decimal with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV row per sample: `idx, field, N, n, comp_0 .. comp_{4Nn-1}`,
/// components absent from the field left empty.
pub fn write_samples_csv<W: Write>(out: &mut W, cfg: &SamplerConfig, samples: &[FMatrix]) -> std::io::Result<()> {
    let width = 4 * cfg.big_n * cfg.n;
    let mut header = String::from("idx,field,N,n");
    for c in 0..width {
        header.push_str(&format!(",comp_{c}"));
    }
    header.push('\n');
    out.write_all(header.as_bytes())?;
    let dim = cfg.field.dim();
    for (idx, z) in samples.iter().enumerate() {
        let mut line = format!("{idx},{},{},{}", cfg.field.tag(), cfg.big_n, cfg.n);
        for q in z.data() {
            for (c, v) in q.0.iter().enumerate() {
                line.push(',');
                if c < dim {
                    line.push_str(&fmt_f64(*v));
                }
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn sidecar_json(cfg: &SamplerConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(field: Field, big_n: usize, n: usize, scaled: bool) -> SamplerConfig {
        SamplerConfig::new(field, big_n, n, scaled, 7, 16).unwrap()
    }

    #[test]
    fn deterministic_per_index() {
        let c = cfg(Field::H, 6, 2, false);
        assert_eq!(gaussian_at(&c, 3), gaussian_at(&c, 3));
        assert_ne!(gaussian_at(&c, 3), gaussian_at(&c, 4));
        let a = sample_gaussian(&c, Exec::Serial).unwrap();
        let b = sample_gaussian(&c, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn haar_samples_are_scaled_frames() {
        for field in Field::ALL {
            let c = cfg(field, 7, 3, true);
            let r2 = field.real_size(7) as f64 - 1.0;
            for z in sample_haar_stiefel(&c, Exec::Serial).unwrap() {
                let g = z.adjoint_mul(&z).unwrap();
                let target = FMatrix::identity(field, 3).scale(r2);
                assert!(g.sub(&target).unwrap().norm() <= 1e-8 * field.real_size(7) as f64);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::new(Field::R, 3, 4, false, 0, 1).is_err());
        assert!(SamplerConfig::new(Field::R, 3, 2, false, 0, 0).is_err());
    }

    #[test]
    fn projection() {
        let z = gaussian_at(&cfg(Field::C, 5, 2, false), 0);
        assert_eq!(project_pi(&z, 5).unwrap(), z);
        assert_eq!(project_pi(&z, 2).unwrap().shape(), (2, 2));
        assert!(project_pi(&z, 0).is_err());
        assert!(project_pi(&z, 6).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = SamplerConfig::new(Field::C, 2, 1, false, 1, 2).unwrap();
        let s = sample_gaussian(&c, Exec::Serial).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &c, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 4 + 8);
        let row: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(&row[..4], &["0", "c", "2", "1"]);
        assert!(!row[4].is_empty() && !row[5].is_empty());
        assert!(row[6].is_empty() && row[7].is_empty());
        let back: f64 = row[4].parse().unwrap();
        assert_eq!(back, s[0][(0, 0)].0[0]);
        assert!(!text.contains('\r'));
    }
}
