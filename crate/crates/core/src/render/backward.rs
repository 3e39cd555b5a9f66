//! Analytic backward pass: back-to-front replay of the blending state,
//! accumulating screen-space gradients per tile, then a per-splat chain
//! back to every Gaussian parameter.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use super::prepare::{falloff, prepare, PreparedScene, SplatGeom, ALPHA_CLAMP};
use super::{GaussianCloud, GradientBundle, RenderError, RenderOptions, RenderedImage};
use crate::grid::ImageRgb;
use crate::math::{self, CameraView};

/// Gradients of `L = sum(upstream .* rgb)` with respect to every Gaussian
/// parameter, for the forward pass that produced `forward_image` under the
/// same `options`.
///
/// The blending state is replayed per pixel with identical arithmetic, so
/// culling, skip, and termination decisions match the forward pass exactly.
/// Per-tile partial gradients are reduced in fixed tile order, which keeps
/// the result bit-reproducible regardless of thread count.
pub fn render_backward(
    cloud: &GaussianCloud,
    view: &CameraView,
    forward_image: &RenderedImage,
    upstream: &ImageRgb,
    options: &RenderOptions,
) -> Result<GradientBundle, RenderError> {
    if cloud.is_empty() {
        return Err(RenderError::EmptyCloud);
    }
    if forward_image.rgb.width != view.width || forward_image.rgb.height != view.height {
        return Err(RenderError::MissingForwardState(format!(
            "forward image is {}x{}, view is {}x{}",
            forward_image.rgb.width, forward_image.rgb.height, view.width, view.height
        )));
    }
    if upstream.width != view.width || upstream.height != view.height {
        return Err(RenderError::MissingForwardState(format!(
            "upstream gradient is {}x{}, view is {}x{}",
            upstream.width, upstream.height, view.width, view.height
        )));
    }

    let scene = prepare(cloud, view, options);
    let screen = accumulate_screen_gradients(&scene, view, upstream, options);
    Ok(chain_to_parameters(cloud, view, &scene, &screen, options))
}

/// Gradients in the screen-space domain, per splat.
struct ScreenGrads {
    d_mean2d: Vec<Vector2<f64>>,
    d_conic: Vec<Matrix2<f64>>,
    d_color: Vec<Vector3<f64>>,
    d_opacity: Vec<f64>,
}

struct TileGrads {
    /// Aligned with the tile's splat list.
    entries: Vec<EntryGrad>,
}

#[derive(Clone, Copy, Default)]
struct EntryGrad {
    d_mean2d: Vector2<f64>,
    d_conic: Matrix2<f64>,
    d_color: Vector3<f64>,
    d_opacity: f64,
}

impl Default for TileGrads {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

struct Contribution {
    list_pos: usize,
    alpha: f64,
    falloff: f64,
    offset: Vector2<f64>,
}

fn accumulate_screen_gradients(
    scene: &PreparedScene,
    view: &CameraView,
    upstream: &ImageRgb,
    options: &RenderOptions,
) -> ScreenGrads {
    let ts = options.tile_size;
    let (w, h) = (view.width, view.height);
    let n_tiles = scene.tiles_x * scene.tiles_y;
    let background = Vector3::new(options.background[0], options.background[1], options.background[2]);

    let tiles: Vec<TileGrads> = (0..n_tiles)
        .into_par_iter()
        .map(|tile| {
            let list = &scene.tile_lists[tile];
            let mut grads = TileGrads { entries: vec![EntryGrad::default(); list.len()] };
            if list.is_empty() {
                return grads;
            }
            let tx = tile % scene.tiles_x;
            let ty = tile / scene.tiles_x;
            let x0 = tx * ts;
            let y0 = ty * ts;
            let tw = ts.min(w - x0);
            let th = ts.min(h - y0);
            let mut contribs: Vec<Contribution> = Vec::with_capacity(list.len());

            for py in 0..th {
                for px in 0..tw {
                    let (gx, gy) = (x0 + px, y0 + py);
                    let dpix = Vector3::from_column_slice(&upstream.pixel(gx, gy));
                    if dpix == Vector3::zeros() {
                        continue;
                    }
                    let (fx, fy) = (gx as f64, gy as f64);

                    // Replay the forward blend to recover contributing
                    // splats and the final transmittance.
                    contribs.clear();
                    let mut transmittance = 1.0f64;
                    for (pos, &sid) in list.iter().enumerate() {
                        let s = scene.splats[sid as usize].as_ref().unwrap();
                        let Some((power, d)) = falloff(s, fx, fy) else { continue };
                        let g = power.exp();
                        let alpha = (s.opacity * g).min(ALPHA_CLAMP);
                        if alpha < options.alpha_cutoff {
                            continue;
                        }
                        let next_t = transmittance * (1.0 - alpha);
                        if next_t < options.transmittance_floor {
                            break;
                        }
                        contribs.push(Contribution { list_pos: pos, alpha, falloff: g, offset: d });
                        transmittance = next_t;
                    }

                    // Walk back-to-front. `suffix` is the radiance behind the
                    // current splat, including the background term.
                    let mut suffix = background * transmittance;
                    let mut t_behind = transmittance;
                    for contrib in contribs.iter().rev() {
                        let s = scene.splats[list[contrib.list_pos] as usize].as_ref().unwrap();
                        let alpha = contrib.alpha;
                        let t_front = t_behind / (1.0 - alpha);
                        let color = Vector3::new(s.color[0], s.color[1], s.color[2]);

                        let entry = &mut grads.entries[contrib.list_pos];
                        entry.d_color += dpix * (alpha * t_front);
                        let d_alpha = dpix.dot(&(color * t_front - suffix / (1.0 - alpha)));

                        // The 0.99 clamp gate: saturated alpha passes no
                        // gradient to opacity or geometry.
                        if s.opacity * contrib.falloff < ALPHA_CLAMP {
                            entry.d_opacity += d_alpha * contrib.falloff;
                            let d_falloff = d_alpha * s.opacity;
                            let d_power = d_falloff * contrib.falloff;
                            entry.d_mean2d += (s.conic * contrib.offset) * d_power;
                            entry.d_conic += contrib.offset * contrib.offset.transpose() * (-0.5 * d_power);
                        }

                        suffix += color * (alpha * t_front);
                        t_behind = t_front;
                    }
                }
            }
            grads
        })
        .collect();

    // Deterministic reduction in fixed tile order.
    let n = scene.splats.len();
    let mut screen = ScreenGrads {
        d_mean2d: vec![Vector2::zeros(); n],
        d_conic: vec![Matrix2::zeros(); n],
        d_color: vec![Vector3::zeros(); n],
        d_opacity: vec![0.0; n],
    };
    for (tile, grads) in tiles.iter().enumerate() {
        let list = &scene.tile_lists[tile];
        for (pos, entry) in grads.entries.iter().enumerate() {
            let sid = list[pos] as usize;
            screen.d_mean2d[sid] += entry.d_mean2d;
            screen.d_conic[sid] += entry.d_conic;
            screen.d_color[sid] += entry.d_color;
            screen.d_opacity[sid] += entry.d_opacity;
        }
    }
    screen
}

fn chain_to_parameters(
    cloud: &GaussianCloud,
    view: &CameraView,
    scene: &PreparedScene,
    screen: &ScreenGrads,
    _options: &RenderOptions,
) -> GradientBundle {
    let cam_center = view.camera_center();
    let w_mat = view.world_to_camera();
    let active_coeffs = math::sh_coeff_count(scene.active_sh_degree);

    struct PerSplat {
        d_mean: Vector3<f64>,
        d_log_scale: Vector3<f64>,
        d_rotation: nalgebra::Vector4<f64>,
        d_opacity_logit: f64,
        d_sh: Vec<[f64; 3]>,
        d_mean2d_ndc: Vector2<f64>,
        visible: bool,
    }

    let per_splat: Vec<Option<PerSplat>> = cloud
        .gaussians
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let geom: &SplatGeom = scene.splats[i].as_ref()?;
            let k_total = math::sh_coeff_count(cloud.sh_degree);
            let mut out = PerSplat {
                d_mean: Vector3::zeros(),
                d_log_scale: Vector3::zeros(),
                d_rotation: nalgebra::Vector4::zeros(),
                d_opacity_logit: 0.0,
                d_sh: vec![[0.0; 3]; k_total],
                d_mean2d_ndc: Vector2::new(
                    screen.d_mean2d[i].x * view.width as f64 * 0.5,
                    screen.d_mean2d[i].y * view.height as f64 * 0.5,
                ),
                visible: true,
            };

            // Opacity activation.
            out.d_opacity_logit = screen.d_opacity[i] * geom.opacity * (1.0 - geom.opacity);

            // SH color: coefficients and the view-direction path to the mean.
            let d_color = screen.d_color[i];
            if d_color != Vector3::zeros() {
                let active_sh = crate::math::SHCoefficients {
                    coeffs: g.sh.coeffs[..active_coeffs].to_vec(),
                };
                let eval = math::eval_sh_with_grad(&active_sh, &geom.view_dir);
                let mut d_dir = Vector3::zeros();
                for c in 0..3 {
                    if !eval.active[c] {
                        continue;
                    }
                    for k in 0..active_coeffs {
                        out.d_sh[k][c] += d_color[c] * eval.basis[k];
                        d_dir += eval.basis_partials[k] * (d_color[c] * active_sh.coeffs[k][c]);
                    }
                }
                // dir = v / |v| with v = mean - camera center.
                let v = g.mean - cam_center;
                let norm = v.norm();
                if norm > 1e-12 {
                    out.d_mean += (d_dir - geom.view_dir * geom.view_dir.dot(&d_dir)) / norm;
                }
            }

            // Geometry: conic -> cov2d -> (J, Sigma) -> parameters.
            let d_conic = screen.d_conic[i];
            let d_mean2d = screen.d_mean2d[i];
            if d_conic != Matrix2::zeros() || d_mean2d != Vector2::zeros() {
                let d_cov2d = -(geom.conic * d_conic * geom.conic);
                let rotation = g.rotation.normalized_copy();
                let scale = g.log_scale.map(f64::exp);
                let cov3d = math::covariance_from_factors(scale, &rotation);
                let back = math::projection_backward(view, &geom.mean_cam, &cov3d, &d_mean2d, &d_cov2d);

                // Sigma = R D R^T with D = diag(scale^2).
                let r = rotation.rotation_matrix();
                let d_sigma: Matrix3<f64> = back.d_cov3d;
                let d_diag = r.transpose() * d_sigma * r;
                for a in 0..3 {
                    out.d_log_scale[a] += 2.0 * scale[a] * scale[a] * d_diag[(a, a)];
                }
                let d_mat = Matrix3::from_diagonal(&scale.component_mul(&scale));
                let d_r = d_sigma * r * d_mat + d_sigma.transpose() * r * d_mat;
                out.d_rotation += g.rotation.backprop_rotation_gradient(&d_r);

                out.d_mean += w_mat.transpose() * back.d_mean_cam;
            }

            Some(out)
        })
        .collect();

    let mut bundle = GradientBundle::zeros_like(cloud);
    for (i, s) in per_splat.into_iter().enumerate() {
        let Some(s) = s else { continue };
        bundle.d_mean[i] = s.d_mean;
        bundle.d_log_scale[i] = s.d_log_scale;
        bundle.d_rotation[i] = s.d_rotation;
        bundle.d_opacity_logit[i] = s.d_opacity_logit;
        bundle.d_sh[i] = s.d_sh;
        bundle.d_mean2d_ndc[i] = s.d_mean2d_ndc;
        bundle.visible[i] = s.visible;
    }
    bundle
}
