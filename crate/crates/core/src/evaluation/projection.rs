use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 1000;
const START_SEED: u64 = 0x5eed;

/// One projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub label: usize,
}

fn mat_vec(c: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    (0..d).map(|i| (0..d).map(|j| c[i * d + j] * v[j]).sum()).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Leading eigenvector of the symmetric PSD matrix `c`, orthogonal to
/// `against`, with its eigenvalue.
fn power_iteration(c: &[f64], d: usize, against: Option<&[f64]>, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let orth = |v: &mut Vec<f64>| {
        if let Some(u) = against {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
    };
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    orth(&mut v);
    normalize(&mut v);
    for _ in 0..POWER_MAX_ITER {
        let mut w = mat_vec(c, d, &v);
        orth(&mut w);
        if normalize(&mut w) == 0.0 {
            return (v, 0.0);
        }
        let diff = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        v = w;
        if diff < POWER_TOLERANCE {
            break;
        }
    }
    let cv = mat_vec(c, d, &v);
    let lambda = v.iter().zip(&cv).map(|(a, b)| a * b).sum();
    (v, lambda)
}

/// Centers `latents` and projects them onto their top two principal
/// directions.
pub fn project_latents(latents: &[Vec<f64>], labels: &[usize]) -> Result<Vec<ProjectedPoint>> {
    if latents.len() < 3 {
        return Err(Error::Invalid(format!("projection needs at least 3 samples, got {}", latents.len())));
    }
    if latents.len() != labels.len() {
        return Err(Error::Invalid(format!("{} latents for {} labels", latents.len(), labels.len())));
    }
    let d = latents[0].len();
    if d < 2 || latents.iter().any(|r| r.len() != d) {
        return Err(Error::Invalid("latents must share a dimension of at least 2".into()));
    }
    let n = latents.len() as f64;
    let mut mean = vec![0.0; d];
    for r in latents {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
    }
    let centered: Vec<Vec<f64>> = latents
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in &centered {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += r[i] * r[j];
            }
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let (v1, l1) = power_iteration(&cov, d, None, &mut rng);
    let (v2, l2) = power_iteration(&cov, d, Some(&v1), &mut rng);
    let floor = 1e-12 * trace.max(f64::MIN_POSITIVE);
    if !(l1 > floor && l2 > floor) {
        return Err(Error::Degenerate("latents have fewer than two nonzero singular values".into()));
    }
    Ok(centered
        .iter()
        .zip(labels)
        .map(|(r, &label)| ProjectedPoint {
            x: r.iter().zip(&v1).map(|(a, b)| a * b).sum(),
            y: r.iter().zip(&v2).map(|(a, b)| a * b).sum(),
            label,
        })
        .collect())
}

/// CSV with header `x,y,label`.
pub fn projection_csv(points: &[ProjectedPoint]) -> String {
    let mut s = String::from("x,y,label\n");
    for p in points {
        let _ = writeln!(s, "{:?},{:?},{}", p.x, p.y, p.label);
    }
    s
}

pub fn write_projection(path: &Path, points: &[ProjectedPoint]) -> Result<()> {
    std::fs::write(path, projection_csv(points)).map_err(|e| Error::io(path, e))
}
