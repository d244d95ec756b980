//! Synthetic pinhole detector on the normalized image plane.

use nalgebra::{Isometry3, Point3, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Points closer than this along the optical axis are not imaged, m.
pub const MIN_DEPTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Half width of the field of view on the normalized plane, `tan(half angle)`.
    pub half_extent: f64,
    /// Half width of the uniform noise added to each image coordinate.
    pub noise_amplitude: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { half_extent: 1.0, noise_amplitude: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    /// `(x/z, y/z)` plus noise; zero when not visible.
    pub q: Vector2<f64>,
    pub visible: bool,
}

/// Projects world points through a camera at `camera_in_world`.
///
/// Noise is drawn only for visible points and only when the amplitude is
/// positive, so a noiseless render never touches the generator.
pub fn render_points<R: Rng>(
    camera_in_world: &Isometry3<f64>,
    points_world: &[Vector3<f64>],
    config: &CameraConfig,
    rng: &mut R,
) -> Vec<ImagePoint> {
    points_world
        .iter()
        .map(|p| {
            let c = camera_in_world.inverse_transform_point(&Point3::from(*p));
            if !(c.z > MIN_DEPTH) {
                return ImagePoint { q: Vector2::zeros(), visible: false };
            }
            let mut q = Vector2::new(c.x / c.z, c.y / c.z);
            if q.x.abs() > config.half_extent || q.y.abs() > config.half_extent {
                return ImagePoint { q: Vector2::zeros(), visible: false };
            }
            if config.noise_amplitude > 0.0 {
                let a = config.noise_amplitude;
                q += Vector2::new(rng.random_range(-a..=a), rng.random_range(-a..=a));
            }
            ImagePoint { q, visible: true }
        })
        .collect()
}
