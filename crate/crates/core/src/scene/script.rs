//! Keyframed rigid motion of a set of embedding nodes.

use nalgebra::{Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keyframe {
    pub t: f64,
    pub translation: Vec3,
    /// Axis-angle (rad).
    pub rotation: Vec3,
}

/// Drives `nodes` (global indices) rigidly about the centroid of their rest
/// positions. Translation is piecewise linear between keyframes, rotation
/// is spherical-linear, and the last keyframe is held afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptTrack {
    pub nodes: Vec<usize>,
    pub rest: Vec<Vec3>,
    pub pivot: Vec3,
    pub keyframes: Vec<Keyframe>,
}

impl ScriptTrack {
    pub fn new(nodes: Vec<usize>, rest: Vec<Vec3>, keyframes: Vec<Keyframe>) -> Result<Self> {
        if keyframes.is_empty() {
            return Err(Error::InvalidScene("script needs at least one keyframe".into()));
        }
        if keyframes.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidScene("keyframe times must be strictly increasing".into()));
        }
        if keyframes[0].t > 0.0 {
            return Err(Error::InvalidScene("first keyframe must be at t <= 0".into()));
        }
        let pivot = rest.iter().sum::<Vec3>() / rest.len().max(1) as f64;
        Ok(ScriptTrack {
            nodes,
            rest,
            pivot,
            keyframes,
        })
    }

    /// `(translation, rotation)` at time `t`.
    pub fn pose(&self, t: f64) -> (Vec3, Rotation3<f64>) {
        let k = &self.keyframes;
        let quat = |v: &Vec3| UnitQuaternion::from_scaled_axis(*v);
        let last = k.len() - 1;
        if t >= k[last].t {
            return (k[last].translation, quat(&k[last].rotation).to_rotation_matrix());
        }
        let i = k.iter().rposition(|f| f.t <= t).unwrap_or(0);
        let (a, b) = (&k[i], &k[i + 1]);
        let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let translation = a.translation + (b.translation - a.translation) * s;
        let rotation = quat(&a.rotation).slerp(&quat(&b.rotation), s).to_rotation_matrix();
        (translation, rotation)
    }

    /// Writes the scripted positions at time `t` into `q`.
    pub fn apply(&self, t: f64, q: &mut [Vec3]) {
        let (translation, rotation) = self.pose(t);
        for (&n, r) in self.nodes.iter().zip(&self.rest) {
            q[n] = self.pivot + rotation * (r - self.pivot) + translation;
        }
    }

    pub fn end_time(&self) -> f64 {
        self.keyframes.last().map_or(0.0, |k| k.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn piecewise_linear_translation() {
        let k = vec![
            Keyframe {
                t: 0.0,
                translation: Vec3::zeros(),
                rotation: Vec3::zeros(),
            },
            Keyframe {
                t: 1.0,
                translation: Vec3::new(0.0, 0.0, 1.0),
                rotation: Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
            },
        ];
        let track = ScriptTrack::new(vec![0, 1], vec![Vec3::x(), -Vec3::x()], k).unwrap();
        let mut q = vec![Vec3::zeros(); 2];
        track.apply(0.5, &mut q);
        assert_relative_eq!(q[0].z, 0.5, epsilon = 1e-15);
        track.apply(2.0, &mut q);
        assert_relative_eq!(q[0], Vec3::new(0.0, 1.0, 1.0), epsilon = 1e-12);
        assert!(ScriptTrack::new(vec![], vec![], vec![]).is_err());
    }
}
