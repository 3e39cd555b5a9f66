//! Tiled forward rasterization (front-to-back alpha blending).

use rayon::prelude::*;

use super::prepare::{falloff, prepare, PreparedScene, ALPHA_CLAMP};
use super::{GaussianCloud, RenderError, RenderOptions, RenderedImage};
use crate::grid::{Grid, ImageRgb};
use crate::math::CameraView;

/// Renders the cloud into a linear-radiance image.
///
/// Per pixel, front-to-back over depth-sorted splats:
/// `C = sum_i c_i a_i prod_{j<i} (1 - a_j) + background * T_final` with
/// `a_i = sigmoid(opacity_logit_i) * G_i(pixel)`, clamped at 0.99. Splats
/// with `a_i` below `options.alpha_cutoff` are skipped and blending stops
/// once transmittance would fall below `options.transmittance_floor`.
pub fn render(
    cloud: &GaussianCloud,
    view: &CameraView,
    options: &RenderOptions,
) -> Result<RenderedImage, RenderError> {
    if cloud.is_empty() {
        return Err(RenderError::EmptyCloud);
    }
    let scene = prepare(cloud, view, options);
    Ok(rasterize(&scene, view, options))
}

struct TileOutput {
    rgb: Vec<f64>,
    alpha: Vec<f64>,
    contrib: Vec<u32>,
    depth: Vec<f64>,
}

fn rasterize(scene: &PreparedScene, view: &CameraView, options: &RenderOptions) -> RenderedImage {
    let ts = options.tile_size;
    let (w, h) = (view.width, view.height);
    let n_tiles = scene.tiles_x * scene.tiles_y;

    let tiles: Vec<TileOutput> = (0..n_tiles)
        .into_par_iter()
        .map(|tile| {
            let tx = tile % scene.tiles_x;
            let ty = tile / scene.tiles_x;
            let x0 = tx * ts;
            let y0 = ty * ts;
            let tw = ts.min(w - x0);
            let th = ts.min(h - y0);
            let list = &scene.tile_lists[tile];
            let mut out = TileOutput {
                rgb: vec![0.0; 3 * tw * th],
                alpha: vec![0.0; tw * th],
                contrib: vec![0; tw * th],
                depth: vec![0.0; tw * th],
            };
            for py in 0..th {
                for px in 0..tw {
                    let (fx, fy) = ((x0 + px) as f64, (y0 + py) as f64);
                    let mut transmittance = 1.0f64;
                    let mut rgb = [0.0f64; 3];
                    let mut depth_acc = 0.0f64;
                    let mut n = 0u32;
                    for &sid in list {
                        let s = scene.splats[sid as usize].as_ref().unwrap();
                        let Some((power, _)) = falloff(s, fx, fy) else { continue };
                        let alpha = (s.opacity * power.exp()).min(ALPHA_CLAMP);
                        if alpha < options.alpha_cutoff {
                            continue;
                        }
                        let next_t = transmittance * (1.0 - alpha);
                        if next_t < options.transmittance_floor {
                            break;
                        }
                        let weight = alpha * transmittance;
                        for c in 0..3 {
                            rgb[c] += s.color[c] * weight;
                        }
                        depth_acc += s.depth * weight;
                        transmittance = next_t;
                        n += 1;
                    }
                    for c in 0..3 {
                        rgb[c] += options.background[c] * transmittance;
                    }
                    let i = py * tw + px;
                    out.rgb[3 * i..3 * i + 3].copy_from_slice(&rgb);
                    let a = 1.0 - transmittance;
                    out.alpha[i] = a;
                    out.contrib[i] = n;
                    out.depth[i] = if a > 1e-12 { depth_acc / a } else { 0.0 };
                }
            }
            out
        })
        .collect();

    let mut rgb = ImageRgb::zeros(w, h);
    let mut alpha = Grid::zeros(w, h);
    let mut contrib = vec![0u32; w * h];
    let mut depth = options.compute_depth.then(|| Grid::zeros(w, h));
    for (tile, out) in tiles.iter().enumerate() {
        let tx = tile % scene.tiles_x;
        let ty = tile / scene.tiles_x;
        let x0 = tx * ts;
        let y0 = ty * ts;
        let tw = ts.min(w - x0);
        let th = ts.min(h - y0);
        for py in 0..th {
            for px in 0..tw {
                let i_local = py * tw + px;
                let (gx, gy) = (x0 + px, y0 + py);
                let i_global = gy * w + gx;
                rgb.data[3 * i_global..3 * i_global + 3]
                    .copy_from_slice(&out.rgb[3 * i_local..3 * i_local + 3]);
                alpha.data[i_global] = out.alpha[i_local];
                contrib[i_global] = out.contrib[i_local];
                if let Some(d) = depth.as_mut() {
                    d.data[i_global] = out.depth[i_local];
                }
            }
        }
    }

    RenderedImage { rgb, alpha, contrib_count: contrib, depth }
}
