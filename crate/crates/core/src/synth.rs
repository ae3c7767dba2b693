//! Seeded generators for jointly low-rank and piecewise-constant data,
//! sparse sign corruption and sampling masks.
//!
//! Randomness comes from ChaCha8 seeded with a 64-bit seed; each generator
//! draws from its own ChaCha stream (0: factors, 1: corruption, 2: mask), so
//! changing one component never perturbs another. Gaussian draws use the
//! ziggurat sampler of `rand_distr::StandardNormal`. Trial `t` of an
//! experiment seeded with `s` uses [`subseed`]`(s, t)`.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{MnnError, Result};
use crate::tensor::{apply_mask, DenseMatrix, SampleMask};

const STREAM_FACTORS: u64 = 0;
const STREAM_CORRUPTION: u64 = 1;
const STREAM_MASK: u64 = 2;

/// Per-trial seed: `seed XOR (trial * 0x9E3779B97F4A7C15)` (wrapping).
pub fn subseed(seed: u64, trial: u64) -> u64 {
    seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub h: usize,
    pub w: usize,
    pub b: usize,
    /// Target rank.
    pub r: usize,
    /// Regions per factor plane.
    pub c: usize,
    pub seed: u64,
    /// Corrupted fraction (RPCA).
    pub rho_s: f64,
    /// Sampling ratio (MC).
    pub p: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            h: 16,
            w: 16,
            b: 30,
            r: 2,
            c: 10,
            seed: 0,
            rho_s: 0.05,
            p: 0.4,
        }
    }
}

impl GenConfig {
    pub fn n1(&self) -> usize {
        self.h * self.w
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.w == 0 || self.b == 0 {
            return Err(MnnError::config("h, w and b must be positive"));
        }
        if self.r == 0 || self.r > self.n1().min(self.b) {
            return Err(MnnError::config(format!(
                "rank {} outside 1..={}",
                self.r,
                self.n1().min(self.b)
            )));
        }
        if self.c == 0 || self.c > self.n1() {
            return Err(MnnError::config(format!(
                "region count {} outside 1..={}",
                self.c,
                self.n1()
            )));
        }
        check_fraction("rho_s", self.rho_s, true)?;
        check_fraction("p", self.p, false)?;
        Ok(())
    }
}

fn check_fraction(name: &str, v: f64, allow_zero: bool) -> Result<()> {
    let ok = v.is_finite() && v <= 1.0 && if allow_zero { v >= 0.0 } else { v > 0.0 };
    if ok {
        Ok(())
    } else {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        Err(MnnError::config(format!("{name} = {v} outside {range}")))
    }
}

/// `X0 = U V^T` with its factors.
#[derive(Clone, Debug)]
pub struct LowRankSample {
    pub x0: DenseMatrix<f64>,
    /// `(h*w) x r`; each column is a piecewise-constant plane.
    pub u: DenseMatrix<f64>,
    /// `b x r`.
    pub v: DenseMatrix<f64>,
}

/// Partitions an `h x w` grid into the Voronoi cells of `sites` under the
/// 4-neighbour (Manhattan) distance; ties go to the lower site index.
/// Returns the cell label of each pixel in column-major order.
pub fn voronoi_labels(h: usize, w: usize, sites: &[usize]) -> Vec<usize> {
    let mut labels = vec![0; h * w];
    for j in 0..w {
        for i in 0..h {
            let mut best = (usize::MAX, 0);
            for (k, &s) in sites.iter().enumerate() {
                let (si, sj) = (s % h, s / h);
                let d = si.abs_diff(i) + sj.abs_diff(j);
                if d < best.0 {
                    best = (d, k);
                }
            }
            labels[i + h * j] = best.1;
        }
    }
    labels
}

/// Low-rank, piecewise-smooth ground truth: every factor plane is split
/// into `c` random regions holding one standard normal value each, and the
/// band loadings are i.i.d. standard normal.
pub fn gen_lowrank_smooth(cfg: &GenConfig) -> Result<LowRankSample> {
    cfg.validate()?;
    let (h, w, n1) = (cfg.h, cfg.w, cfg.n1());
    let mut rng = rng_for(cfg.seed, STREAM_FACTORS);
    let mut u = DenseMatrix::zeros(n1, cfg.r);
    for k in 0..cfg.r {
        let sites = rand::seq::index::sample(&mut rng, n1, cfg.c).into_vec();
        let values: Vec<f64> = (0..cfg.c).map(|_| rng.sample(StandardNormal)).collect();
        for (p, &label) in voronoi_labels(h, w, &sites).iter().enumerate() {
            u[(p, k)] = values[label];
        }
    }
    let v = DenseMatrix::from_fn(cfg.b, cfg.r, |_, _| rng.sample(StandardNormal));
    let x0 = u.matmul(&v.transpose())?;
    Ok(LowRankSample { x0, u, v })
}

/// Seeded permutation of `0..n`; prefixes of it give nested uniform
/// supports of every cardinality.
fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

fn count_for(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Sparse `+-1` corruption on exactly `round(rho_s * rows * cols)` uniformly
/// chosen cells.
pub fn gen_sparse_corruption(rows: usize, cols: usize, rho_s: f64, seed: u64) -> Result<DenseMatrix<f64>> {
    check_fraction("rho_s", rho_s, true)?;
    let n = rows * cols;
    let mut rng = rng_for(seed, STREAM_CORRUPTION);
    let perm = permutation(n, &mut rng);
    let m = count_for(rho_s, n);
    let mut data = vec![0.0; n];
    for &cell in &perm[..m] {
        data[cell] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    DenseMatrix::new(rows, cols, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MaskScheme {
    /// Exactly `round(p n)` cells, uniformly without replacement.
    UniformM,
    /// Each cell kept independently with probability `p`.
    #[default]
    Bernoulli,
}

impl FromStr for MaskScheme {
    type Err = MnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform_m" | "uniform" => Ok(MaskScheme::UniformM),
            "bernoulli" => Ok(MaskScheme::Bernoulli),
            _ => Err(MnnError::config(format!("unknown mask scheme {s:?}"))),
        }
    }
}

pub fn gen_mask(rows: usize, cols: usize, p: f64, seed: u64, scheme: MaskScheme) -> Result<SampleMask> {
    check_fraction("p", p, false)?;
    let n = rows * cols;
    let mut rng = rng_for(seed, STREAM_MASK);
    let kept = match scheme {
        MaskScheme::UniformM => {
            let mut kept = vec![false; n];
            for &cell in &permutation(n, &mut rng)[..count_for(p, n)] {
                kept[cell] = true;
            }
            kept
        }
        MaskScheme::Bernoulli => (0..n).map(|_| rng.random::<f64>() < p).collect(),
    };
    SampleMask::new(rows, cols, kept)
}

/// Ground truth, corruption and observation for one RPCA trial.
#[derive(Clone, Debug)]
pub struct RpcaInstance {
    pub x0: DenseMatrix<f64>,
    pub s0: DenseMatrix<f64>,
    pub m: DenseMatrix<f64>,
}

pub fn gen_rpca_instance(cfg: &GenConfig) -> Result<RpcaInstance> {
    let x0 = gen_lowrank_smooth(cfg)?.x0;
    let s0 = gen_sparse_corruption(x0.rows(), x0.cols(), cfg.rho_s, cfg.seed)?;
    let m = x0.add(&s0);
    Ok(RpcaInstance { x0, s0, m })
}

/// Ground truth, sampling mask and observation for one MC trial.
#[derive(Clone, Debug)]
pub struct McInstance {
    pub x0: DenseMatrix<f64>,
    pub mask: SampleMask,
    pub m: DenseMatrix<f64>,
}

pub fn gen_mc_instance(cfg: &GenConfig, scheme: MaskScheme) -> Result<McInstance> {
    let x0 = gen_lowrank_smooth(cfg)?.x0;
    let mask = gen_mask(x0.rows(), x0.cols(), cfg.p, cfg.seed, scheme)?;
    let m = apply_mask(&x0, &mask)?;
    Ok(McInstance { x0, mask, m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::svd_thin;

    #[test]
    fn rank_one_single_region_is_constant_plane() {
        let cfg = GenConfig {
            r: 1,
            c: 1,
            ..GenConfig::default()
        };
        let s = gen_lowrank_smooth(&cfg).unwrap();
        let first = s.u[(0, 0)];
        assert!(s.u.as_slice().iter().all(|&v| v == first));
    }

    #[test]
    fn determinism() {
        let cfg = GenConfig {
            seed: 99,
            ..GenConfig::default()
        };
        let a = gen_rpca_instance(&cfg).unwrap();
        let b = gen_rpca_instance(&cfg).unwrap();
        assert_eq!(a.m, b.m);
        let c = gen_rpca_instance(&GenConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.x0, c.x0);
    }

    #[test]
    fn planes_piecewise_constant() {
        let cfg = GenConfig {
            r: 3,
            c: 7,
            seed: 5,
            ..GenConfig::default()
        };
        let s = gen_lowrank_smooth(&cfg).unwrap();
        for k in 0..3 {
            let mut vals = s.u.column(k);
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            assert!(vals.len() <= 7);
        }
    }

    #[test]
    fn numerical_rank() {
        let cfg = GenConfig {
            r: 5,
            seed: 3,
            ..GenConfig::default()
        };
        let x0 = gen_lowrank_smooth(&cfg).unwrap().x0;
        assert_eq!(svd_thin(&x0, 1e-8).unwrap().rank(), 5);
    }

    #[test]
    fn corruption_counts() {
        assert_eq!(gen_sparse_corruption(10, 10, 0.0, 1).unwrap().max_abs(), 0.0);
        let full = gen_sparse_corruption(10, 10, 1.0, 1).unwrap();
        assert!(full.as_slice().iter().all(|&v| v == 1.0 || v == -1.0));
        let some = gen_sparse_corruption(20, 10, 0.25, 1).unwrap();
        assert_eq!(some.as_slice().iter().filter(|&&v| v != 0.0).count(), 50);
        assert!(gen_sparse_corruption(2, 2, 1.5, 1).is_err());
    }

    #[test]
    fn corruption_supports_nest() {
        let a = gen_sparse_corruption(20, 20, 0.1, 4).unwrap();
        let b = gen_sparse_corruption(20, 20, 0.3, 4).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            if *x != 0.0 {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn masks() {
        assert_eq!(gen_mask(5, 5, 1.0, 0, MaskScheme::Bernoulli).unwrap().count(), 25);
        assert_eq!(gen_mask(5, 5, 1.0, 0, MaskScheme::UniformM).unwrap().count(), 25);
        assert_eq!(
            gen_mask(100, 100, 0.3, 0, MaskScheme::UniformM).unwrap().count(),
            3000
        );
        assert!(gen_mask(5, 5, 0.0, 0, MaskScheme::Bernoulli).is_err());
    }

    #[test]
    fn subseed_rule() {
        assert_eq!(subseed(7, 0), 7);
        assert_eq!(subseed(0, 1), 0x9E37_79B9_7F4A_7C15);
        assert_eq!(subseed(5, 2), 5 ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(2));
    }

    #[test]
    fn invalid_configs() {
        let base = GenConfig::default();
        assert!(GenConfig { r: 0, ..base.clone() }.validate().is_err());
        assert!(GenConfig { r: 31, ..base.clone() }.validate().is_err());
        assert!(GenConfig { c: 0, ..base.clone() }.validate().is_err());
        assert!(GenConfig { p: 0.0, ..base.clone() }.validate().is_err());
        assert!(GenConfig { rho_s: -0.1, ..base }.validate().is_err());
    }
}
