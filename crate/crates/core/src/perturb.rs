//! Perturbation sets and uniform sampling over them.
//!
//! A [`PerturbationSpec`] is a closed norm ball of radius `epsilon` in `d`
//! dimensions, together with the uniform distribution over it. L2 balls are
//! sampled by the radial inverse-CDF method (isotropic direction scaled by
//! `eps * u^(1/d)`), which stays exact in high dimension where rejection
//! sampling is hopeless. L-infinity balls sample each coordinate
//! independently.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    Linf,
}

/// A norm ball `{ delta : ||delta|| <= radius }` with its uniform law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub norm: NormKind,
    pub radius: f64,
    pub dim: usize,
}

impl PerturbationSpec {
    /// A zero radius is accepted as the degenerate ball `{0}`, which the
    /// evaluation module uses to cross-check that clean and perturbed
    /// metrics coincide when nothing is perturbed.
    pub fn new(norm: NormKind, radius: f64, dim: usize) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::invalid("radius", format!("must be >= 0, got {radius}")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        Ok(Self { norm, radius, dim })
    }

    pub fn l2(radius: f64, dim: usize) -> Result<Self> {
        Self::new(NormKind::L2, radius, dim)
    }

    pub fn linf(radius: f64, dim: usize) -> Result<Self> {
        Self::new(NormKind::Linf, radius, dim)
    }

    /// Draws one point uniformly from the ball.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }

    /// Same as [`sample`](Self::sample) but reuses a caller buffer; the hot
    /// Monte-Carlo loops go through this.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim, "buffer length must equal dim");
        if self.radius == 0.0 {
            out.fill(0.0);
            return;
        }
        match self.norm {
            NormKind::Linf => {
                for v in out.iter_mut() {
                    *v = rng.gen_range(-self.radius..=self.radius);
                }
            }
            NormKind::L2 => {
                let mut norm_sq = 0.0;
                loop {
                    for v in out.iter_mut() {
                        let g: f64 = rng.sample(StandardNormal);
                        *v = g;
                        norm_sq += g * g;
                    }
                    if norm_sq > 0.0 {
                        break;
                    }
                    norm_sq = 0.0;
                }
                let u: f64 = rng.gen_range(0.0..1.0);
                let scale = self.radius * u.powf(1.0 / self.dim as f64) / norm_sq.sqrt();
                let mut len_sq = 0.0;
                for v in out.iter_mut() {
                    *v *= scale;
                    len_sq += *v * *v;
                }
                // Guard against the normalization landing an ulp outside.
                let len = len_sq.sqrt();
                if len > self.radius {
                    let fix = self.radius / len;
                    for v in out.iter_mut() {
                        *v *= fix;
                    }
                }
            }
        }
    }

    /// Membership test, inclusive at the boundary (the ball is closed).
    pub fn contains(&self, delta: &[f64]) -> Result<bool> {
        if delta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: delta.len(),
            });
        }
        Ok(match self.norm {
            NormKind::L2 => {
                let norm_sq: f64 = delta.iter().map(|v| v * v).sum();
                norm_sq.sqrt() <= self.radius
            }
            NormKind::Linf => delta.iter().all(|v| v.abs() <= self.radius),
        })
    }

    /// Projects `delta` onto the ball in place.
    pub fn project(&self, delta: &mut [f64]) {
        assert_eq!(delta.len(), self.dim, "buffer length must equal dim");
        match self.norm {
            NormKind::L2 => {
                let norm: f64 = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > self.radius {
                    let scale = if norm > 0.0 { self.radius / norm } else { 0.0 };
                    for v in delta.iter_mut() {
                        *v *= scale;
                    }
                }
            }
            NormKind::Linf => {
                for v in delta.iter_mut() {
                    *v = v.clamp(-self.radius, self.radius);
                }
            }
        }
    }
}
