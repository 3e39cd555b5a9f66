//! Tile-based forward rasterization of a Gaussian cloud, the analytic
//! backward pass, and blur-aware rendering.

mod backward;
mod blur;
mod forward;
mod prepare;
pub mod reference;

pub use backward::render_backward;
pub use blur::{render_blur, render_blur_backward};
pub use forward::render;

use nalgebra::{Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, ImageRgb};
use crate::math::{CameraView, SHCoefficients, UnitQuaternion};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("cannot render an empty cloud")]
    EmptyCloud,
    #[error("backward pass needs the paired forward output: {0}")]
    MissingForwardState(String),
    #[error("blur config invalid: {0}")]
    BadBlurConfig(String),
}

/// One anisotropic Gaussian splat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    /// World-space center, meters.
    pub mean: Vector3<f64>,
    /// Log of the per-axis scales; `exp` keeps scales positive.
    pub log_scale: Vector3<f64>,
    pub rotation: UnitQuaternion,
    /// Sigmoid activation maps this to opacity in (0, 1).
    pub opacity_logit: f64,
    pub sh: SHCoefficients,
}

/// The optimized scene state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCloud {
    pub gaussians: Vec<Gaussian>,
    pub sh_degree: usize,
}

impl GaussianCloud {
    pub fn new(gaussians: Vec<Gaussian>, sh_degree: usize) -> Self {
        let expected = crate::math::sh_coeff_count(sh_degree);
        for g in &gaussians {
            assert_eq!(g.sh.coeffs.len(), expected, "non-uniform SH degree in cloud");
        }
        Self { gaussians, sh_degree }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Scalar parameters per splat: mean(3) + log_scale(3) + rotation(4) +
    /// opacity(1) + sh(3 per coefficient).
    pub fn params_per_splat(&self) -> usize {
        11 + 3 * crate::math::sh_coeff_count(self.sh_degree)
    }

    pub fn param_count(&self) -> usize {
        self.len() * self.params_per_splat()
    }

    /// Flat parameter access, used by finite-difference checks.
    pub fn get_param(&self, index: usize) -> f64 {
        let stride = self.params_per_splat();
        let g = &self.gaussians[index / stride];
        match index % stride {
            i @ 0..=2 => g.mean[i],
            i @ 3..=5 => g.log_scale[i - 3],
            6 => g.rotation.w,
            7 => g.rotation.x,
            8 => g.rotation.y,
            9 => g.rotation.z,
            10 => g.opacity_logit,
            i => {
                let k = i - 11;
                g.sh.coeffs[k / 3][k % 3]
            }
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let stride = self.params_per_splat();
        let g = &mut self.gaussians[index / stride];
        match index % stride {
            i @ 0..=2 => g.mean[i] = value,
            i @ 3..=5 => g.log_scale[i - 3] = value,
            6 => g.rotation.w = value,
            7 => g.rotation.x = value,
            8 => g.rotation.y = value,
            9 => g.rotation.z = value,
            10 => g.opacity_logit = value,
            i => {
                let k = i - 11;
                g.sh.coeffs[k / 3][k % 3] = value;
            }
        }
    }
}

/// Rasterizer output: linear-radiance RGB, accumulated opacity, per-pixel
/// blended-splat counts, and an optional expected-depth channel (figures
/// only, carries no gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub rgb: ImageRgb,
    pub alpha: Grid,
    pub contrib_count: Vec<u32>,
    pub depth: Option<Grid>,
}

/// Per-parameter gradients mirroring the cloud layout. Culled splats hold
/// zeros.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub d_mean: Vec<Vector3<f64>>,
    pub d_log_scale: Vec<Vector3<f64>>,
    pub d_rotation: Vec<Vector4<f64>>,
    pub d_opacity_logit: Vec<f64>,
    pub d_sh: Vec<Vec<[f64; 3]>>,
    /// Screen-space center gradient in NDC units, the densification signal.
    pub d_mean2d_ndc: Vec<Vector2<f64>>,
    /// True where the splat survived culling for this view.
    pub visible: Vec<bool>,
}

impl GradientBundle {
    pub fn zeros_like(cloud: &GaussianCloud) -> Self {
        let n = cloud.len();
        let k = crate::math::sh_coeff_count(cloud.sh_degree);
        Self {
            d_mean: vec![Vector3::zeros(); n],
            d_log_scale: vec![Vector3::zeros(); n],
            d_rotation: vec![Vector4::zeros(); n],
            d_opacity_logit: vec![0.0; n],
            d_sh: vec![vec![[0.0; 3]; k]; n],
            d_mean2d_ndc: vec![Vector2::zeros(); n],
            visible: vec![false; n],
        }
    }

    pub fn add_assign(&mut self, other: &GradientBundle) {
        assert_eq!(self.d_mean.len(), other.d_mean.len());
        for i in 0..self.d_mean.len() {
            self.d_mean[i] += other.d_mean[i];
            self.d_log_scale[i] += other.d_log_scale[i];
            self.d_rotation[i] += other.d_rotation[i];
            self.d_opacity_logit[i] += other.d_opacity_logit[i];
            for (a, b) in self.d_sh[i].iter_mut().zip(&other.d_sh[i]) {
                for c in 0..3 {
                    a[c] += b[c];
                }
            }
            self.d_mean2d_ndc[i] += other.d_mean2d_ndc[i];
            self.visible[i] = self.visible[i] || other.visible[i];
        }
    }

    pub fn scale(&mut self, k: f64) {
        for i in 0..self.d_mean.len() {
            self.d_mean[i] *= k;
            self.d_log_scale[i] *= k;
            self.d_rotation[i] *= k;
            self.d_opacity_logit[i] *= k;
            for a in self.d_sh[i].iter_mut() {
                for c in 0..3 {
                    a[c] *= k;
                }
            }
            self.d_mean2d_ndc[i] *= k;
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.d_mean.len() {
            m = m.max(self.d_mean[i].abs().max());
            m = m.max(self.d_log_scale[i].abs().max());
            m = m.max(self.d_rotation[i].abs().max());
            m = m.max(self.d_opacity_logit[i].abs());
            for a in &self.d_sh[i] {
                for c in 0..3 {
                    m = m.max(a[c].abs());
                }
            }
        }
        m
    }
}

/// Sub-poses spanning a frame exposure interval for blur-aware rendering.
#[derive(Debug, Clone)]
pub struct BlurConfig {
    /// Time-ordered views at the midpoints of the event integration windows
    /// inside the exposure; the blur render averages over them.
    pub sub_poses: Vec<CameraView>,
}

impl BlurConfig {
    pub fn n_eiw(&self) -> usize {
        self.sub_poses.len()
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.sub_poses.is_empty() {
            return Err(RenderError::BadBlurConfig("no sub-poses".into()));
        }
        if !self.sub_poses.windows(2).all(|w| w[0].time <= w[1].time) {
            return Err(RenderError::BadBlurConfig("sub-poses not time-ordered".into()));
        }
        Ok(())
    }
}

/// Rasterization thresholds and compositing settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub tile_size: usize,
    /// Splats with per-pixel alpha below this are skipped.
    pub alpha_cutoff: f64,
    /// Blending at a pixel terminates once transmittance would drop below
    /// this.
    pub transmittance_floor: f64,
    /// Screen-space footprint radius in standard deviations; non-finite
    /// covers every tile.
    pub radius_sigma: f64,
    pub background: [f64; 3],
    /// Evaluate SH only up to this degree (progressive unlocking); `None`
    /// uses the cloud's full degree.
    pub active_sh_degree: Option<usize>,
    /// Fill the alpha-weighted expected-depth channel.
    pub compute_depth: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            tile_size: 16,
            alpha_cutoff: 1.0 / 255.0,
            transmittance_floor: 1e-4,
            radius_sigma: 3.0,
            background: [0.0; 3],
            active_sh_degree: None,
            compute_depth: false,
        }
    }
}

impl RenderOptions {
    /// Cutoff-free settings: every splat is evaluated at every pixel it can
    /// influence and blending never terminates early. Used by oracle
    /// comparisons and exact gradient checks.
    pub fn exact() -> Self {
        Self {
            alpha_cutoff: 0.0,
            transmittance_floor: 0.0,
            radius_sigma: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn with_background(mut self, background: [f64; 3]) -> Self {
        self.background = background;
        self
    }
}
