//! Naive reference renderer: global depth sort, no tiles, every splat
//! evaluated at every pixel. Slow but simple; serves as the correctness
//! oracle for the tiled rasterizer.

use nalgebra::Matrix2;

use super::prepare::ALPHA_CLAMP;
use super::{GaussianCloud, RenderError, RenderOptions, RenderedImage};
use crate::grid::{Grid, ImageRgb};
use crate::math::{self, CameraView};

pub fn render(
    cloud: &GaussianCloud,
    view: &CameraView,
    options: &RenderOptions,
) -> Result<RenderedImage, RenderError> {
    if cloud.is_empty() {
        return Err(RenderError::EmptyCloud);
    }
    let cam_center = view.camera_center();
    let active_degree = options
        .active_sh_degree
        .map_or(cloud.sh_degree, |d| d.min(cloud.sh_degree));

    struct Flat {
        mean2d: (f64, f64),
        conic: Matrix2<f64>,
        depth: f64,
        color: [f64; 3],
        opacity: f64,
        index: usize,
    }

    let mut flats = Vec::new();
    for (index, g) in cloud.gaussians.iter().enumerate() {
        let rotation = g.rotation.normalized_copy();
        let cov3d = math::covariance_from_factors(g.log_scale.map(f64::exp), &rotation);
        let Ok(proj) = math::project_gaussian(&g.mean, &cov3d, view) else { continue };
        let det = proj.cov2d[(0, 0)] * proj.cov2d[(1, 1)] - proj.cov2d[(0, 1)] * proj.cov2d[(1, 0)];
        if det <= super::prepare::MIN_COV2D_DET {
            continue;
        }
        let conic = Matrix2::new(
            proj.cov2d[(1, 1)] / det,
            -proj.cov2d[(0, 1)] / det,
            -proj.cov2d[(1, 0)] / det,
            proj.cov2d[(0, 0)] / det,
        );
        let dir = (g.mean - cam_center).normalize();
        let sh = crate::math::SHCoefficients {
            coeffs: g.sh.coeffs[..math::sh_coeff_count(active_degree)].to_vec(),
        };
        flats.push(Flat {
            mean2d: (proj.mean2d.x, proj.mean2d.y),
            conic,
            depth: proj.depth,
            color: math::eval_sh(&sh, &dir),
            opacity: math::sigmoid(g.opacity_logit),
            index,
        });
    }
    flats.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap().then(a.index.cmp(&b.index)));

    let (w, h) = (view.width, view.height);
    let mut rgb = ImageRgb::zeros(w, h);
    let mut alpha = Grid::zeros(w, h);
    let mut contrib = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let mut transmittance = 1.0f64;
            let mut px = [0.0f64; 3];
            let mut n = 0u32;
            for f in &flats {
                let dx = fx - f.mean2d.0;
                let dy = fy - f.mean2d.1;
                let power = -0.5 * (f.conic[(0, 0)] * dx * dx + f.conic[(1, 1)] * dy * dy)
                    - f.conic[(0, 1)] * dx * dy;
                if power > 0.0 {
                    continue;
                }
                let a = (f.opacity * power.exp()).min(ALPHA_CLAMP);
                if a < options.alpha_cutoff {
                    continue;
                }
                let next_t = transmittance * (1.0 - a);
                if next_t < options.transmittance_floor {
                    break;
                }
                for c in 0..3 {
                    px[c] += f.color[c] * a * transmittance;
                }
                transmittance = next_t;
                n += 1;
            }
            for c in 0..3 {
                px[c] += options.background[c] * transmittance;
            }
            rgb.set_pixel(x, y, px);
            alpha.set(x, y, 1.0 - transmittance);
            contrib[y * w + x] = n;
        }
    }

    Ok(RenderedImage { rgb, alpha, contrib_count: contrib, depth: None })
}
