//! Shared projection, shading, culling, and tile assignment. Forward and
//! backward both run this pass so the backward replay sees identical
//! culling and ordering decisions.

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use super::{GaussianCloud, RenderOptions};
use crate::math::{self, CameraView};

/// Degenerate 2D covariances below this determinant are culled rather than
/// inverted.
pub(crate) const MIN_COV2D_DET: f64 = 1e-12;

/// Alpha saturates here; keeps `1 - alpha` bounded away from zero for the
/// back-to-front transmittance replay.
pub(crate) const ALPHA_CLAMP: f64 = 0.99;

#[derive(Debug, Clone)]
pub(crate) struct SplatGeom {
    pub mean_cam: Vector3<f64>,
    pub mean2d: Vector2<f64>,
    pub conic: Matrix2<f64>,
    pub depth: f64,
    pub color: [f64; 3],
    /// Unit view direction used for SH shading.
    pub view_dir: Vector3<f64>,
    pub opacity: f64,
    pub radius: f64,
}

pub(crate) struct PreparedScene {
    /// One entry per cloud splat; `None` where culled.
    pub splats: Vec<Option<SplatGeom>>,
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Per tile, splat indices sorted by (depth, index).
    pub tile_lists: Vec<Vec<u32>>,
    pub active_sh_degree: usize,
}

pub(crate) fn prepare(
    cloud: &GaussianCloud,
    view: &CameraView,
    options: &RenderOptions,
) -> PreparedScene {
    let active_sh_degree = options
        .active_sh_degree
        .map_or(cloud.sh_degree, |d| d.min(cloud.sh_degree));
    let cam_center = view.camera_center();

    let splats: Vec<Option<SplatGeom>> = cloud
        .gaussians
        .par_iter()
        .map(|g| {
            let rotation = g.rotation.normalized_copy();
            let scale = g.log_scale.map(f64::exp);
            let cov3d = math::covariance_from_factors(scale, &rotation);
            let proj = math::project_gaussian(&g.mean, &cov3d, view).ok()?;
            let det = proj.cov2d[(0, 0)] * proj.cov2d[(1, 1)] - proj.cov2d[(0, 1)] * proj.cov2d[(1, 0)];
            if det <= MIN_COV2D_DET {
                return None;
            }
            let conic = Matrix2::new(
                proj.cov2d[(1, 1)] / det,
                -proj.cov2d[(0, 1)] / det,
                -proj.cov2d[(1, 0)] / det,
                proj.cov2d[(0, 0)] / det,
            );
            let radius = if options.radius_sigma.is_finite() {
                let mid = 0.5 * (proj.cov2d[(0, 0)] + proj.cov2d[(1, 1)]);
                let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
                options.radius_sigma * lambda_max.sqrt()
            } else {
                f64::INFINITY
            };
            let to_splat = g.mean - cam_center;
            let norm = to_splat.norm();
            let view_dir = if norm > 1e-12 { to_splat / norm } else { Vector3::z() };
            let color = shade(g, active_sh_degree, &view_dir);
            Some(SplatGeom {
                mean_cam: proj.mean_cam,
                mean2d: proj.mean2d,
                conic,
                depth: proj.depth,
                color,
                view_dir,
                opacity: math::sigmoid(g.opacity_logit),
                radius,
            })
        })
        .collect();

    let ts = options.tile_size;
    let tiles_x = view.width.div_ceil(ts);
    let tiles_y = view.height.div_ceil(ts);
    let mut tile_lists: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (i, s) in splats.iter().enumerate() {
        let Some(s) = s else { continue };
        let Some((tx0, tx1, ty0, ty1)) = tile_range(s, view, ts, tiles_x, tiles_y) else {
            continue;
        };
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                tile_lists[ty * tiles_x + tx].push(i as u32);
            }
        }
    }
    tile_lists.par_iter_mut().for_each(|list| {
        list.sort_unstable_by(|&a, &b| {
            let da = splats[a as usize].as_ref().unwrap().depth;
            let db = splats[b as usize].as_ref().unwrap().depth;
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
    });

    PreparedScene { splats, tiles_x, tiles_y, tile_lists, active_sh_degree }
}

fn shade(g: &super::Gaussian, degree: usize, dir: &Vector3<f64>) -> [f64; 3] {
    if degree == g.sh.degree() {
        math::eval_sh(&g.sh, dir)
    } else {
        let truncated = crate::math::SHCoefficients {
            coeffs: g.sh.coeffs[..math::sh_coeff_count(degree)].to_vec(),
        };
        math::eval_sh(&truncated, dir)
    }
}

fn tile_range(
    s: &SplatGeom,
    view: &CameraView,
    tile_size: usize,
    tiles_x: usize,
    tiles_y: usize,
) -> Option<(usize, usize, usize, usize)> {
    if !s.radius.is_finite() {
        return Some((0, tiles_x - 1, 0, tiles_y - 1));
    }
    // Pixel sample points sit at integer coordinates.
    let x_lo = s.mean2d.x - s.radius;
    let x_hi = s.mean2d.x + s.radius;
    let y_lo = s.mean2d.y - s.radius;
    let y_hi = s.mean2d.y + s.radius;
    if x_hi < 0.0 || y_hi < 0.0 || x_lo > (view.width - 1) as f64 || y_lo > (view.height - 1) as f64 {
        return None;
    }
    let clamp_tile = |v: f64, tiles: usize| -> usize {
        (v.max(0.0) as usize / tile_size).min(tiles - 1)
    };
    Some((
        clamp_tile(x_lo.floor(), tiles_x),
        clamp_tile(x_hi.ceil(), tiles_x),
        clamp_tile(y_lo.floor(), tiles_y),
        clamp_tile(y_hi.ceil(), tiles_y),
    ))
}

/// Gaussian falloff exponent at a pixel; `None` when the (numerically)
/// impossible positive exponent shows up, matching the forward skip rule.
#[inline]
pub(crate) fn falloff(s: &SplatGeom, px: f64, py: f64) -> Option<(f64, Vector2<f64>)> {
    let d = Vector2::new(px - s.mean2d.x, py - s.mean2d.y);
    let power = -0.5 * (s.conic[(0, 0)] * d.x * d.x + s.conic[(1, 1)] * d.y * d.y)
        - s.conic[(0, 1)] * d.x * d.y;
    if power > 0.0 {
        return None;
    }
    Some((power, d))
}
