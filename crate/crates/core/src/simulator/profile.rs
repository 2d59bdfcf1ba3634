//! Cubic Bézier speed profiles for a simulated manual rotation.

use rand::Rng;

/// Angular speed over one rotation stage, deg/s, normalized so the stage turns
/// through exactly the requested angle.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    /// Control ordinates before normalization, deg/s.
    pub control_points: [f64; 4],
    pub duration: f64,
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

/// Cubic Bernstein form.
pub fn bezier(points: &[f64; 4], t: f64) -> f64 {
    let u = 1.0 - t;
    u * u * u * points[0]
        + 3.0 * u * u * t * points[1]
        + 3.0 * u * t * t * points[2]
        + t * t * t * points[3]
}

impl SpeedProfile {
    /// Samples the curve at `round(duration · sample_rate)` evenly spaced
    /// parameters spanning `[0, 1]` and rescales so that `Σ ω_j · dt = angle`.
    /// Angle and rates must be positive; a non-positive curve is clamped at zero.
    pub fn from_control_points(
        control_points: [f64; 4],
        duration: f64,
        sample_rate: f64,
        angle: f64,
    ) -> Self {
        let n = ((duration * sample_rate).round() as usize).max(2);
        let dt = 1.0 / sample_rate;
        let raw: Vec<f64> = (0..n)
            .map(|j| bezier(&control_points, j as f64 / (n - 1) as f64).max(0.0))
            .collect();
        let integral = raw.iter().sum::<f64>() * dt;
        let gain = angle / integral;
        Self {
            control_points,
            duration,
            sample_rate,
            samples: raw.into_iter().map(|w| w * gain).collect(),
        }
    }

    /// Rectangle-rule integral of the samples, degrees.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.sample_rate
    }
}

/// Random profile with control ordinates drawn uniformly from
/// `control_range × angle / duration`.
pub fn bezier_profile<R: Rng + ?Sized>(
    rng: &mut R,
    duration: f64,
    sample_rate: f64,
    angle: f64,
    control_range: (f64, f64),
) -> SpeedProfile {
    let nominal = angle / duration;
    let mut cp = [0.0; 4];
    for c in cp.iter_mut() {
        *c = nominal * super::uniform(rng, control_range);
    }
    SpeedProfile::from_control_points(cp, duration, sample_rate, angle)
}
