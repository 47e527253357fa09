//! Two interleaved half circles, with a rotated and partially relabelled
//! target domain.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DomainPair, DomainTag, Labeler, ShiftSpec};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Centre the target is rotated about (midpoint of the two moons).
pub const MOONS_CENTER: [f64; 2] = [0.5, 0.25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoonsSpec {
    pub n_source: usize,
    pub n_target: usize,
    pub rotation_deg: f64,
    pub noise_sd: f64,
    pub label_flip_rate: f64,
    pub seed: u64,
}

/// Labelling rule shared by both domains: the class of the nearest of the
/// four arcs (two source moons, two rotated moons). Under a non-zero flip
/// rate the target rule additionally flips the inner tips of the rotated
/// moons, those with arc parameter `t <= pi * flip_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoonsRule {
    pub rotation_rad: f64,
    pub flip_rate: f64,
    pub apply_flip: bool,
}

/// Nearest point parameters for one arc: `(distance, arc parameter t)`.
fn arc_distance(p: [f64; 2], class: usize) -> (f64, f64) {
    // upper: (cos t, sin t); lower: (1 - cos t, 0.5 - sin t), t in [0, pi]
    let q = match class {
        0 => [p[0], p[1]],
        _ => [1.0 - p[0], 0.5 - p[1]],
    };
    let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
    if q[1] >= 0.0 && r > 0.0 {
        let t = q[1].atan2(q[0]);
        ((r - 1.0).abs(), t)
    } else if r == 0.0 {
        (1.0, PI / 2.0)
    } else {
        let d0 = ((q[0] - 1.0).powi(2) + q[1] * q[1]).sqrt();
        let d1 = ((q[0] + 1.0).powi(2) + q[1] * q[1]).sqrt();
        if d0 <= d1 {
            (d0, 0.0)
        } else {
            (d1, PI)
        }
    }
}

fn rotate_about_center(p: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    let dx = p[0] - MOONS_CENTER[0];
    let dy = p[1] - MOONS_CENTER[1];
    [
        MOONS_CENTER[0] + c * dx - s * dy,
        MOONS_CENTER[1] + s * dx + c * dy,
    ]
}

impl MoonsRule {
    pub fn label(&self, x: &[f64]) -> usize {
        let p = [x[0], x[1]];
        let back = rotate_about_center(p, -self.rotation_rad);
        let mut best = (f64::INFINITY, 0usize, false, 0.0);
        for class in 0..2 {
            let (d, t) = arc_distance(p, class);
            if d < best.0 {
                best = (d, class, false, t);
            }
            let (d, t) = arc_distance(back, class);
            if d < best.0 {
                best = (d, class, true, t);
            }
        }
        let (_, class, rotated, t) = best;
        if self.apply_flip && rotated && self.flip_rate > 0.0 && t <= PI * self.flip_rate {
            1 - class
        } else {
            class
        }
    }
}

pub fn gen_two_moons_pair(spec: &MoonsSpec) -> Result<DomainPair> {
    if spec.n_source < 2 || spec.n_target < 2 {
        return Err(Error::contract("two moons needs at least 2 points per domain"));
    }
    if !(spec.noise_sd >= 0.0) || !spec.noise_sd.is_finite() {
        return Err(Error::contract("noise_sd must be a finite non-negative number"));
    }
    if !(0.0..0.5).contains(&spec.label_flip_rate) {
        return Err(Error::contract("label_flip_rate must lie in [0, 0.5)"));
    }
    if !spec.rotation_deg.is_finite() {
        return Err(Error::contract("rotation must be finite"));
    }
    let rotation_rad = spec.rotation_deg.to_radians();
    let f_source = MoonsRule {
        rotation_rad,
        flip_rate: spec.label_flip_rate,
        apply_flip: false,
    };
    let f_target = MoonsRule {
        apply_flip: true,
        ..f_source.clone()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd.max(0.0))
        .map_err(|e| Error::contract(format!("noise: {e}")))?;
    let sample = |n: usize, angle: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut data = Vec::with_capacity(2 * n);
        for i in 0..n {
            // alternate moons so class sizes differ by at most one
            let class = i % 2;
            let t = rng.random::<f64>() * PI;
            let base = if class == 0 {
                [t.cos(), t.sin()]
            } else {
                [1.0 - t.cos(), 0.5 - t.sin()]
            };
            let jitter = [noise.sample(rng), noise.sample(rng)];
            let p = rotate_about_center([base[0] + jitter[0], base[1] + jitter[1]], angle);
            data.extend_from_slice(&p);
        }
        data
    };
    let xs = Tensor::matrix(spec.n_source, 2, sample(spec.n_source, 0.0, &mut rng))?;
    let xt = Tensor::matrix(spec.n_target, 2, sample(spec.n_target, rotation_rad, &mut rng))?;
    let ys: Vec<usize> = xs.row_iter().map(|x| f_source.label(x)).collect();
    let yt: Vec<usize> = xt.row_iter().map(|x| f_target.label(x)).collect();

    DomainPair::new(
        Dataset::new(xs, Some(ys), DomainTag::Source, 2)?,
        Dataset::new(xt, None, DomainTag::Target, 2)?,
        yt,
        Some(Labeler::Moons(f_source)),
        Some(Labeler::Moons(f_target)),
        ShiftSpec::TwoMoons(spec.clone()),
    )
}
