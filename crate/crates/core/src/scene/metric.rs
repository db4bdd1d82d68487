//! Trajectory error against a fine-step reference.

use crate::error::{Error, Result};
use crate::Vec3;

/// Surface positions sampled every `dt` seconds; `frames[i]` is at `i * dt`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub frames: Vec<Vec<Vec3>>,
}

impl Trajectory {
    /// Frame at time `t`, which must be an exact multiple of `dt` up to
    /// rounding.
    pub fn sample(&self, t: f64) -> Result<&[Vec3]> {
        let j = (t / self.dt).round();
        if j < 0.0 || (j * self.dt - t).abs() > 1e-9 * t.abs().max(self.dt) {
            return Err(Error::MissingSample(t));
        }
        self.frames
            .get(j as usize)
            .map(Vec::as_slice)
            .ok_or(Error::MissingSample(t))
    }
}

/// `sqrt(1/K sum_{i=1..K} 1/N_v |x_h(ih) - x_ref(ih)|^2)` with `K = floor(T/h)`.
pub fn error_metric(traj_h: &Trajectory, traj_ref: &Trajectory, h: f64, duration: f64) -> Result<f64> {
    let k = (duration / h + 1e-9).floor() as usize;
    if k == 0 {
        return Err(Error::InvalidScene("duration shorter than one step".into()));
    }
    let mut total = 0.0;
    for i in 1..=k {
        let t = i as f64 * h;
        let a = traj_h.sample(t)?;
        let b = traj_ref.sample(t)?;
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidScene("trajectories have different vertex counts".into()));
        }
        let sq: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
        total += sq / a.len() as f64;
    }
    Ok((total / k as f64).sqrt())
}

/// Least-squares slope of `log(error)` against `log(h)`; `None` with fewer
/// than two usable points.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
