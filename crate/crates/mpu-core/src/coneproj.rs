//! Projection onto the second-order cone with axis `(1, ..., 1)` and
//! half-apex angle `alpha`, plus the grouped multivariate activation built
//! from it.
//!
//! A point is split into an axial coordinate `t = (1/sqrt(m)) 1^T x` and the
//! orthogonal remainder `h = x - (t/sqrt(m)) 1`. The projection has three
//! regions: inside the cone (point unchanged), the polar cone (projects to
//! the apex), and the mantle (projects onto the lateral boundary). Boundary
//! ties resolve to Inside and Polar respectively.

use crate::numerics::{dot, Vec64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radial magnitudes below this are treated as on-axis; the mantle branch
/// would otherwise divide by `||h||`.
const NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("cone dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("tan_alpha must be positive and finite, got {0}")]
    BadTanAlpha(f64),
    #[error("input length {got} does not match expected dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("box bounds violated at index {index}: lo {lo} > hi {hi}")]
    InvalidBox { index: usize, lo: f64, hi: f64 },
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn softplus_inv(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    y + (-(-y).exp()).ln_1p()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Cone geometry: dimension `m` and the width parameter `tan(alpha)`.
///
/// The width is trained through an unconstrained `raw_param` with
/// `tan_alpha = softplus(raw_param)`, so gradient updates can never push it
/// out of `(0, inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    m: usize,
    raw_param: f64,
    tan_alpha: f64,
}

impl ConeSpec {
    pub fn with_tan_alpha(m: usize, tan_alpha: f64) -> Result<Self, ConeError> {
        if m < 2 {
            return Err(ConeError::BadDimension(m));
        }
        if !(tan_alpha.is_finite() && tan_alpha > 0.0) {
            return Err(ConeError::BadTanAlpha(tan_alpha));
        }
        Ok(ConeSpec {
            m,
            raw_param: softplus_inv(tan_alpha),
            tan_alpha,
        })
    }

    pub fn from_raw_param(m: usize, raw_param: f64) -> Result<Self, ConeError> {
        if m < 2 {
            return Err(ConeError::BadDimension(m));
        }
        if !raw_param.is_finite() {
            return Err(ConeError::BadTanAlpha(f64::NAN));
        }
        Ok(ConeSpec {
            m,
            raw_param,
            tan_alpha: softplus(raw_param),
        })
    }

    /// The initialization used by trainable layers: `tan_alpha = 1`, which at
    /// `m = 2` makes the projection coincide with element-wise ReLU.
    pub fn relu_equivalent(m: usize) -> Result<Self, ConeError> {
        ConeSpec::with_tan_alpha(m, 1.0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tan_alpha(&self) -> f64 {
        self.tan_alpha
    }

    pub fn raw_param(&self) -> f64 {
        self.raw_param
    }

    pub fn set_raw_param(&mut self, raw_param: f64) {
        self.raw_param = raw_param;
        self.tan_alpha = softplus(raw_param);
    }

    /// Half-apex angle in radians.
    pub fn alpha(&self) -> f64 {
        self.tan_alpha.atan()
    }

    pub(crate) fn validate(&self) -> Result<(), ConeError> {
        if self.m < 2 {
            return Err(ConeError::BadDimension(self.m));
        }
        if !(self.tan_alpha.is_finite() && self.tan_alpha > 0.0) {
            return Err(ConeError::BadTanAlpha(self.tan_alpha));
        }
        Ok(())
    }
}

/// Which case of the projection formula applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Inside,
    Polar,
    Mantle,
}

/// Projection result with the intermediates of the three-case formula.
#[derive(Clone, Debug)]
pub struct ProjectionOutcome {
    pub point: Vec64,
    pub region: Region,
    /// Axial coordinate `(1/sqrt(m)) 1^T x`.
    pub t: f64,
    /// Magnitude of the component orthogonal to the axis.
    pub h_norm: f64,
    /// Scale of the mantle projection; `None` unless `region == Mantle`.
    pub mantle_scale: Option<f64>,
}

/// Splits `x` into its axial coordinate and the orthogonal remainder.
pub fn decompose(x: &Vec64) -> Result<(f64, Vec64), ConeError> {
    if x.len() < 2 {
        return Err(ConeError::BadDimension(x.len()));
    }
    let inv_sqrt_m = 1.0 / (x.len() as f64).sqrt();
    let t = x.iter().sum::<f64>() * inv_sqrt_m;
    let axial = t * inv_sqrt_m;
    let h = Vec64::new(x.iter().map(|v| v - axial).collect());
    Ok((t, h))
}

#[derive(Clone, Copy, Debug)]
struct GroupOutcome {
    region: Region,
    t: f64,
    h_norm: f64,
    s: f64,
}

fn classify(t: f64, h_norm: f64, tau: f64) -> Region {
    if h_norm <= tau * t {
        Region::Inside
    } else if tau * h_norm <= -t {
        Region::Polar
    } else if h_norm < NORM_GUARD {
        // Geometrically unreachable except within rounding of the axis.
        if t >= 0.0 {
            Region::Inside
        } else {
            Region::Polar
        }
    } else {
        Region::Mantle
    }
}

/// Core kernel: projects one group of length `m` into `out`.
fn project_group(x: &[f64], spec: &ConeSpec, out: &mut [f64]) -> GroupOutcome {
    let m = spec.m;
    debug_assert_eq!(x.len(), m);
    debug_assert_eq!(out.len(), m);
    let tau = spec.tan_alpha;
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();

    let t = x.iter().sum::<f64>() * inv_sqrt_m;
    let axial = t * inv_sqrt_m;
    let mut hsq = 0.0;
    for (o, v) in out.iter_mut().zip(x) {
        let hi = v - axial;
        *o = hi;
        hsq += hi * hi;
    }
    let h_norm = hsq.sqrt();

    let region = classify(t, h_norm, tau);
    match region {
        Region::Inside => {
            out.copy_from_slice(x);
            GroupOutcome {
                region,
                t,
                h_norm,
                s: 0.0,
            }
        }
        Region::Polar => {
            out.fill(0.0);
            GroupOutcome {
                region,
                t,
                h_norm,
                s: 0.0,
            }
        }
        Region::Mantle => {
            let s = (tau * h_norm + t) / (tau * tau + 1.0);
            let radial = s * tau / h_norm;
            let on_axis = s * inv_sqrt_m;
            for o in out.iter_mut() {
                *o = on_axis + radial * *o;
            }
            GroupOutcome {
                region,
                t,
                h_norm,
                s,
            }
        }
    }
}

/// Euclidean projection of `x` onto the cone described by `spec`.
pub fn project_cone(x: &Vec64, spec: &ConeSpec) -> Result<ProjectionOutcome, ConeError> {
    if x.len() != spec.m {
        return Err(ConeError::LengthMismatch {
            expected: spec.m,
            got: x.len(),
        });
    }
    if !x.is_finite() {
        return Err(ConeError::NonFiniteInput);
    }
    let mut out = vec![0.0; spec.m];
    let g = project_group(x.as_slice(), spec, &mut out);
    Ok(ProjectionOutcome {
        point: Vec64::new(out),
        region: g.region,
        t: g.t,
        h_norm: g.h_norm,
        mantle_scale: if g.region == Region::Mantle {
            Some(g.s)
        } else {
            None
        },
    })
}

/// Independent brute-force projection, used to verify `project_cone`.
///
/// The projection lies in the plane spanned by the axis and the input's
/// orthogonal component, so the search reduces to two dimensions. Candidate
/// points `rho (cos theta, sin theta)` are scanned over the feasible wedge
/// `theta in [0, alpha]`, `rho in [0, ||x||]`; the angle is then refined by
/// golden section with the per-angle optimal radius (the projection onto a
/// ray), which is exact and keeps the squared distance unimodal in the
/// angle.
pub fn oracle_project(x: &Vec64, spec: &ConeSpec, resolution: f64) -> Vec64 {
    assert!(resolution > 0.0, "resolution must be positive");
    assert_eq!(x.len(), spec.m, "input length must match cone dimension");
    let m = spec.m;
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();

    let t = x.iter().sum::<f64>() * inv_sqrt_m;
    let axial = t * inv_sqrt_m;
    let h: Vec<f64> = x.iter().map(|v| v - axial).collect();
    let r = dot(&h, &h).sqrt();

    // Unit radial direction; any direction orthogonal to the axis works when
    // the input sits on the axis itself.
    let h_dir: Vec<f64> = if r > NORM_GUARD {
        h.iter().map(|v| v / r).collect()
    } else {
        let mut e = vec![-inv_sqrt_m * inv_sqrt_m; m];
        e[0] += 1.0;
        let norm = dot(&e, &e).sqrt();
        e.iter().map(|v| v / norm).collect()
    };

    let alpha = spec.tan_alpha.atan();
    let radius = (t * t + r * r).sqrt().max(resolution);

    // Squared distance from the target (t, r) to the wedge point at angle
    // `th` with the best radius on that ray.
    let ray_dist = |th: f64| -> (f64, f64, f64) {
        let (sin_th, cos_th) = th.sin_cos();
        let rho = (t * cos_th + r * sin_th).max(0.0);
        let (a, b) = (rho * cos_th, rho * sin_th);
        ((a - t) * (a - t) + (b - r) * (b - r), a, b)
    };

    // Stage 1: coarse scan of the full wedge.
    const GRID: usize = 96;
    let th_step = alpha / GRID as f64;
    let rho_step = radius / GRID as f64;
    let mut best = (f64::INFINITY, 0.0_f64, 0.0_f64);
    for i in 0..=GRID {
        let th = th_step * i as f64;
        let (sin_th, cos_th) = th.sin_cos();
        for j in 0..=GRID {
            let rho = rho_step * j as f64;
            let (a, b) = (rho * cos_th, rho * sin_th);
            let d = (a - t) * (a - t) + (b - r) * (b - r);
            if d < best.0 {
                best = (d, a, b);
            }
        }
    }

    // Stage 2: locate the best angle on the exact per-angle distance (a
    // unimodal function of the angle), bracket it one cell wide, refine.
    let mut best_i = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..=GRID {
        let (d, a, b) = ray_dist(th_step * i as f64);
        if d < best_d {
            best_d = d;
            best_i = i;
        }
        if d < best.0 {
            best = (d, a, b);
        }
    }
    let mut lo = th_step * best_i.saturating_sub(1) as f64;
    let mut hi = (th_step * (best_i + 1) as f64).min(alpha);
    let th_tol = (resolution / radius.max(1.0)).min(th_step);
    while hi - lo > th_tol {
        let third = (hi - lo) / 3.0;
        let (d1, ..) = ray_dist(lo + third);
        let (d2, ..) = ray_dist(hi - third);
        if d1 <= d2 {
            hi -= third;
        } else {
            lo += third;
        }
    }
    let (d, a, b) = ray_dist(0.5 * (lo + hi));
    if d < best.0 {
        best = (d, a, b);
    }

    let (_, a, b) = best;
    Vec64::new(h_dir.iter().map(|dir| a * inv_sqrt_m + b * dir).collect())
}

/// Element-wise clamp onto the box `[lo, hi]`.
pub fn project_box(x: &Vec64, lo: &Vec64, hi: &Vec64) -> Result<Vec64, ConeError> {
    if x.len() != lo.len() || x.len() != hi.len() {
        return Err(ConeError::LengthMismatch {
            expected: x.len(),
            got: lo.len().min(hi.len()),
        });
    }
    for i in 0..x.len() {
        if lo[i] > hi[i] {
            return Err(ConeError::InvalidBox {
                index: i,
                lo: lo[i],
                hi: hi[i],
            });
        }
    }
    Ok(Vec64::new(
        x.iter()
            .enumerate()
            .map(|(i, &v)| v.clamp(lo[i], hi[i]))
            .collect(),
    ))
}

/// Element-wise `max(0, x)`, the projection onto the nonnegative orthant.
pub fn project_orthant(x: &Vec64) -> Vec64 {
    Vec64::new(x.iter().map(|&v| v.max(0.0)).collect())
}

/// Grouped cone-projection activation over a width-`n` vector.
///
/// Contiguous groups of `m` entries are each projected; a remainder of
/// `n mod m` entries is zero-padded to a full group, projected, and the
/// padded coordinates dropped, so the output width equals the input width.
/// With `leaky > 0` the output is `(1 - leaky) * proj(z) + leaky * z`.
pub fn mpu_forward(z: &Vec64, spec: &ConeSpec, leaky: f64) -> Vec64 {
    assert!((0.0..1.0).contains(&leaky), "leaky must lie in [0, 1)");
    let n = z.len();
    let m = spec.m;
    let mut out = vec![0.0; n];
    let full = n / m;
    for g in 0..full {
        let lo = g * m;
        project_group(&z.as_slice()[lo..lo + m], spec, &mut out[lo..lo + m]);
    }
    let rem = n - full * m;
    if rem > 0 {
        let mut padded = vec![0.0; m];
        padded[..rem].copy_from_slice(&z.as_slice()[full * m..]);
        let mut proj = vec![0.0; m];
        project_group(&padded, spec, &mut proj);
        out[full * m..].copy_from_slice(&proj[..rem]);
    }
    if leaky > 0.0 {
        for (o, zi) in out.iter_mut().zip(z.iter()) {
            *o = (1.0 - leaky) * *o + leaky * zi;
        }
    }
    Vec64::new(out)
}

/// Vector-Jacobian product of one projected group, written into `grad`.
/// Returns the group's contribution to `d(output) / d(tan_alpha)`.
fn group_vjp(x: &[f64], upstream: &[f64], spec: &ConeSpec, grad: &mut [f64]) -> f64 {
    let m = spec.m;
    let tau = spec.tan_alpha;
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();

    let t = x.iter().sum::<f64>() * inv_sqrt_m;
    let axial = t * inv_sqrt_m;
    let mut hsq = 0.0;
    for (g, v) in grad.iter_mut().zip(x) {
        let hi = v - axial;
        *g = hi; // scratch: h
        hsq += hi * hi;
    }
    let h_norm = hsq.sqrt();

    if t == 0.0 && h_norm == 0.0 {
        // Apex: zero subgradient by convention.
        grad.fill(0.0);
        return 0.0;
    }
    match classify(t, h_norm, tau) {
        Region::Inside => {
            grad.copy_from_slice(upstream);
            0.0
        }
        Region::Polar => {
            grad.fill(0.0);
            0.0
        }
        Region::Mantle => {
            let denom = tau * tau + 1.0;
            let s = (tau * h_norm + t) / denom;
            // grad currently holds h; fold in 1/||h|| as we take dot products.
            let g_sum: f64 = upstream.iter().sum();
            let u_dot_g = g_sum * inv_sqrt_m;
            let h_dot_g = dot(grad, upstream) / h_norm;
            let w_dot_g = u_dot_g + tau * h_dot_g;
            let c_w = w_dot_g / denom;
            let c_perp = s * tau / h_norm;
            let ds_dtau = (h_norm * denom - (tau * h_norm + t) * 2.0 * tau) / (denom * denom);
            let grad_tau = ds_dtau * u_dot_g + (ds_dtau * tau + s) * h_dot_g;
            for (g, &up) in grad.iter_mut().zip(upstream) {
                let h_hat = *g / h_norm;
                let w = inv_sqrt_m + tau * h_hat;
                let perp = up - u_dot_g * inv_sqrt_m - h_dot_g * h_hat;
                *g = c_w * w + c_perp * perp;
            }
            grad_tau
        }
    }
}

/// Reverse-mode derivative of [`mpu_forward`].
///
/// Returns the vector-Jacobian product with `upstream` and the scalar
/// gradient with respect to the unconstrained width parameter (chained
/// through `tan_alpha = softplus(raw_param)` and summed over groups). At
/// region boundaries the Inside/Polar branch derivative applies; the apex
/// contributes zero.
pub fn mpu_backward(z: &Vec64, spec: &ConeSpec, leaky: f64, upstream: &Vec64) -> (Vec64, f64) {
    assert!((0.0..1.0).contains(&leaky), "leaky must lie in [0, 1)");
    assert_eq!(z.len(), upstream.len(), "upstream length must match input");
    let n = z.len();
    let m = spec.m;
    let mut grad = vec![0.0; n];
    let mut grad_tau = 0.0;
    let full = n / m;
    for g in 0..full {
        let lo = g * m;
        grad_tau += group_vjp(
            &z.as_slice()[lo..lo + m],
            &upstream.as_slice()[lo..lo + m],
            spec,
            &mut grad[lo..lo + m],
        );
    }
    let rem = n - full * m;
    if rem > 0 {
        let mut padded = vec![0.0; m];
        padded[..rem].copy_from_slice(&z.as_slice()[full * m..]);
        let mut up_padded = vec![0.0; m];
        up_padded[..rem].copy_from_slice(&upstream.as_slice()[full * m..]);
        let mut g_padded = vec![0.0; m];
        grad_tau += group_vjp(&padded, &up_padded, spec, &mut g_padded);
        grad[full * m..].copy_from_slice(&g_padded[..rem]);
    }
    if leaky > 0.0 {
        for (g, up) in grad.iter_mut().zip(upstream.iter()) {
            *g = (1.0 - leaky) * *g + leaky * up;
        }
        grad_tau *= 1.0 - leaky;
    }
    let grad_raw = grad_tau * logistic(spec.raw_param);
    (Vec64::new(grad), grad_raw)
}

/// The antisymmetric part `proj(x) - proj(-x)` of the projection.
///
/// For a shallow zero-bias ReLU network this map is linear; for the cone
/// projection it is nonlinear except at the excluded width
/// `tan_alpha = sqrt(m - 1)`, which is the testable core of the
/// non-representability argument.
pub fn antisym_diff(x: &Vec64, spec: &ConeSpec) -> Result<Vec64, ConeError> {
    let plus = project_cone(x, spec)?;
    let minus = project_cone(&x.scale(-1.0), spec)?;
    Ok(plus.point.sub(&minus.point))
}

/// Worst-case elementary-operation counts for one projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MacsReport {
    pub add: u64,
    pub sub: u64,
    pub mul: u64,
    pub div: u64,
    pub sqrt: u64,
    pub compare: u64,
    pub total: u64,
}

impl MacsReport {
    fn new(add: u64, sub: u64, mul: u64, div: u64, sqrt: u64, compare: u64) -> Self {
        MacsReport {
            add,
            sub,
            mul,
            div,
            sqrt,
            compare,
            total: add + sub + mul + div + sqrt + compare,
        }
    }

    /// Counts for the simplified `m = 2` path, where the cone is a polyhedron
    /// and the projection needs no square root.
    pub fn specialized_m2() -> Self {
        MacsReport::new(4, 2, 4, 5, 0, 3)
    }
}

/// Worst-case operation counts of the mantle branch for dimension `m`.
///
/// The schedule: two length-`m` accumulations (axial coordinate and
/// `||h||^2`), the subtraction forming `h`, one square root, two branch
/// comparisons, the scale `s` (one add, one division by the precomputed
/// `tan^2 + 1`), the normalization `h / ||h||` (`m` divisions plus the
/// axial one and the one inside `s`), and the final combination
/// (`2m + 4` multiplications, `m` additions). Total `7m + 9`.
pub fn macs_count(m: usize) -> Result<MacsReport, ConeError> {
    if m < 2 {
        return Err(ConeError::BadDimension(m));
    }
    let m = m as u64;
    Ok(MacsReport::new(3 * m - 1, m, 2 * m + 4, m + 3, 1, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    const SQRT_2: f64 = std::f64::consts::SQRT_2;
    const SQRT_3: f64 = 1.732_050_807_568_877_2;

    fn spec(m: usize, tan_alpha: f64) -> ConeSpec {
        ConeSpec::with_tan_alpha(m, tan_alpha).unwrap()
    }

    #[test]
    fn softplus_roundtrip_and_relu_init() {
        for y in [0.1, 0.5, 1.0, SQRT_3, 10.0] {
            assert!((softplus(softplus_inv(y)) - y).abs() < 1e-12);
        }
        let c = ConeSpec::relu_equivalent(2).unwrap();
        assert_eq!(c.tan_alpha(), 1.0);
        assert!((softplus(c.raw_param()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cone_spec_rejects_bad_parameters() {
        assert!(matches!(
            ConeSpec::with_tan_alpha(1, 1.0),
            Err(ConeError::BadDimension(1))
        ));
        assert!(matches!(
            ConeSpec::with_tan_alpha(2, 0.0),
            Err(ConeError::BadTanAlpha(_))
        ));
        assert!(matches!(
            ConeSpec::with_tan_alpha(2, -1.0),
            Err(ConeError::BadTanAlpha(_))
        ));
        assert!(matches!(
            ConeSpec::with_tan_alpha(2, f64::NAN),
            Err(ConeError::BadTanAlpha(_))
        ));
    }

    #[test]
    fn decompose_known_points() {
        let (t, h) = decompose(&Vec64::from_slice(&[1.0, 1.0])).unwrap();
        assert!((t - SQRT_2).abs() < 1e-15);
        assert!(h.norm2() < 1e-15);

        let (t, h) = decompose(&Vec64::from_slice(&[1.0, 0.0])).unwrap();
        assert!((t - 1.0 / SQRT_2).abs() < 1e-15);
        assert!((h[0] - 0.5).abs() < 1e-15);
        assert!((h[1] + 0.5).abs() < 1e-15);

        let x = Vec64::from_slice(&[1.0, 1.0, -2.0]);
        let (t, h) = decompose(&x).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(h, x);

        assert!(matches!(
            decompose(&Vec64::from_slice(&[1.0])),
            Err(ConeError::BadDimension(1))
        ));
    }

    #[test]
    fn decompose_reconstructs_and_h_sums_to_zero() {
        let mut rng = Rng::new(4);
        for m in [2usize, 3, 5, 8] {
            for _ in 0..50 {
                let x = rng.uniform_vec(m, -10.0, 10.0);
                let (t, h) = decompose(&x).unwrap();
                let axial = t / (m as f64).sqrt();
                for i in 0..m {
                    assert!((h[i] + axial - x[i]).abs() < 1e-12);
                }
                assert!(h.iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn project_inside_polar_and_apex() {
        let out = project_cone(&Vec64::from_slice(&[2.0, 2.0]), &spec(2, SQRT_3)).unwrap();
        assert_eq!(out.region, Region::Inside);
        assert_eq!(out.point.as_slice(), &[2.0, 2.0]);
        assert_eq!(out.mantle_scale, None);

        for tau in [0.3, 1.0, SQRT_3] {
            let out = project_cone(&Vec64::from_slice(&[-1.0, -1.0]), &spec(2, tau)).unwrap();
            assert_eq!(out.region, Region::Polar);
            assert_eq!(out.point.as_slice(), &[0.0, 0.0]);
        }

        // Apex: both boundary inequalities tie; resolves to Inside.
        let out = project_cone(&Vec64::from_slice(&[0.0, 0.0]), &spec(2, 1.0)).unwrap();
        assert_eq!(out.region, Region::Inside);
        assert_eq!(out.point.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn project_matches_relu_on_orthant_cone() {
        // tan(alpha) = 1 at m = 2 turns the cone into the nonnegative orthant.
        let out = project_cone(&Vec64::from_slice(&[3.0, -1.0]), &spec(2, 1.0)).unwrap();
        assert_eq!(out.region, Region::Mantle);
        assert!((out.point[0] - 3.0).abs() < 1e-14);
        assert!(out.point[1].abs() < 1e-14);
    }

    #[test]
    fn project_mantle_hand_computed() {
        // x = (1, 1, -2), tan = 1: t = 0, ||h|| = sqrt(6), s = sqrt(6)/2,
        // projection = (1/2 + sqrt(2)/2, 1/2 + sqrt(2)/2, sqrt(2)/2 - 1).
        let out = project_cone(&Vec64::from_slice(&[1.0, 1.0, -2.0]), &spec(3, 1.0)).unwrap();
        assert_eq!(out.region, Region::Mantle);
        let s = out.mantle_scale.unwrap();
        assert!((s - 6.0_f64.sqrt() / 2.0).abs() < 1e-12, "s = {s}");
        let expected = [1.2071067811865475, 1.2071067811865475, -0.29289321881345254];
        for (got, want) in out.point.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((out.t - 0.0).abs() < 1e-15);
        assert!((out.h_norm - 6.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn project_rejects_bad_inputs() {
        let c = spec(2, 1.0);
        assert!(matches!(
            project_cone(&Vec64::from_slice(&[1.0, 2.0, 3.0]), &c),
            Err(ConeError::LengthMismatch {
                expected: 2,
                got: 3
            })
        ));
        assert!(matches!(
            project_cone(&Vec64::from_slice(&[f64::NAN, 0.0]), &c),
            Err(ConeError::NonFiniteInput)
        ));
    }

    #[test]
    fn oracle_agrees_on_easy_cases() {
        // On-axis point with positive height projects to itself.
        let c = spec(3, 0.75);
        let x = Vec64::from_slice(&[2.0, 2.0, 2.0]);
        let y = oracle_project(&x, &c, 1e-6);
        assert!(y.max_abs_diff(&x) < 1e-5);

        // Orthant identity.
        let y = oracle_project(&Vec64::from_slice(&[3.0, -1.0]), &spec(2, 1.0), 1e-6);
        assert!((y[0] - 3.0).abs() < 1e-5);
        assert!(y[1].abs() < 1e-5);

        // Deep polar point.
        let y = oracle_project(&Vec64::from_slice(&[-4.0, -5.0]), &spec(2, 1.0), 1e-6);
        assert!(y.norm2() < 1e-5);
    }

    #[test]
    fn oracle_agrees_with_projection_in_five_dimensions() {
        let c = spec(5, 1.3);
        let mut rng = Rng::new(99);
        for _ in 0..60 {
            let x = rng.uniform_vec(5, -10.0, 10.0);
            let exact = project_cone(&x, &c).unwrap().point;
            let approx = oracle_project(&x, &c, 1e-6);
            assert!(
                exact.max_abs_diff(&approx) < 1e-5,
                "oracle disagrees at {x}: exact {exact}, oracle {approx}"
            );
        }
    }

    #[test]
    fn box_and_orthant_projections() {
        let lo = Vec64::from_slice(&[-1.0, -1.0]);
        let hi = Vec64::from_slice(&[1.0, 1.0]);
        let y = project_box(&Vec64::from_slice(&[-3.0, 0.5]), &lo, &hi).unwrap();
        assert_eq!(y.as_slice(), &[-1.0, 0.5]);
        let y = project_box(&Vec64::from_slice(&[0.2, -0.7]), &lo, &hi).unwrap();
        assert_eq!(y.as_slice(), &[0.2, -0.7]);
        let y = project_box(&Vec64::from_slice(&[2.0, -2.0]), &lo, &hi).unwrap();
        assert_eq!(y.as_slice(), &[1.0, -1.0]);

        let bad = project_box(
            &Vec64::from_slice(&[0.0, 0.0]),
            &Vec64::from_slice(&[1.0, 0.0]),
            &Vec64::from_slice(&[-1.0, 0.0]),
        );
        assert!(matches!(bad, Err(ConeError::InvalidBox { index: 0, .. })));

        assert_eq!(
            project_orthant(&Vec64::from_slice(&[3.0, -1.0])).as_slice(),
            &[3.0, 0.0]
        );
        assert_eq!(
            project_orthant(&Vec64::from_slice(&[0.0, 0.0])).as_slice(),
            &[0.0, 0.0]
        );
        assert_eq!(
            project_orthant(&Vec64::from_slice(&[-5.0])).as_slice(),
            &[0.0]
        );
    }

    #[test]
    fn mpu_forward_groups_and_padding() {
        let c = spec(2, 1.0);
        // Two full groups, orthant identity per group.
        let y = mpu_forward(&Vec64::from_slice(&[3.0, -1.0, -2.0, -2.0]), &c, 0.0);
        for (got, want) in y.iter().zip(&[3.0, 0.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-14);
        }

        // Odd width: the tail entry is padded with a zero, projected, and the
        // padding dropped. (-4, 0) projects to (0, 0), so the tail becomes 0.
        let y = mpu_forward(&Vec64::from_slice(&[1.0, 1.0, -4.0]), &c, 0.0);
        for (got, want) in y.iter().zip(&[1.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-14);
        }

        // Leaky weight 0.01 on a negative scalar gives the Leaky ReLU value.
        let y = mpu_forward(&Vec64::from_slice(&[-1.0]), &c, 0.01);
        assert!((y[0] + 0.01).abs() < 1e-12);
    }

    #[test]
    fn mpu_forward_width_is_preserved() {
        let c = spec(3, 0.8);
        let mut rng = Rng::new(12);
        for n in 1..=10 {
            let z = rng.uniform_vec(n, -5.0, 5.0);
            assert_eq!(mpu_forward(&z, &c, 0.0).len(), n);
        }
    }

    #[test]
    fn mpu_backward_identity_and_zero_regions() {
        let c = spec(2, 1.0);
        // Strictly inside every group: identity Jacobian.
        let z = Vec64::from_slice(&[3.0, 2.9, 5.0, 4.8]);
        let up = Vec64::from_slice(&[0.3, -0.7, 1.1, 0.2]);
        let (gz, graw) = mpu_backward(&z, &c, 0.0, &up);
        assert_eq!(gz, up);
        assert_eq!(graw, 0.0);

        // Strictly polar: zero Jacobian.
        let z = Vec64::from_slice(&[-3.0, -2.9, -5.0, -4.8]);
        let (gz, graw) = mpu_backward(&z, &c, 0.0, &up);
        assert!(gz.iter().all(|&g| g == 0.0));
        assert_eq!(graw, 0.0);

        // Leaky mixes the upstream back in.
        let (gz, _) = mpu_backward(&z, &c, 0.25, &up);
        for (g, u) in gz.iter().zip(up.iter()) {
            assert!((g - 0.25 * u).abs() < 1e-15);
        }
    }

    #[test]
    fn apex_gradient_is_zero_by_convention() {
        let c = spec(2, 1.0);
        let z = Vec64::from_slice(&[0.0, 0.0]);
        let up = Vec64::from_slice(&[1.0, -2.0]);
        let (gz, graw) = mpu_backward(&z, &c, 0.0, &up);
        assert!(gz.iter().all(|&g| g == 0.0));
        assert_eq!(graw, 0.0);
        // Forward still classifies the apex as Inside.
        assert_eq!(project_cone(&z, &c).unwrap().region, Region::Inside);
    }

    #[test]
    fn mpu_backward_matches_finite_differences_on_mantle() {
        let c = ConeSpec::with_tan_alpha(3, 0.9).unwrap();
        let mut rng = Rng::new(21);
        let eps = 1e-6;
        let mut checked = 0;
        while checked < 25 {
            let z = rng.uniform_vec(7, -4.0, 4.0);
            // Keep a healthy margin from region boundaries in every group.
            let mut margin = f64::INFINITY;
            for g in 0..3 {
                let lo = g * 3;
                let group: Vec<f64> = if g < 2 {
                    z.as_slice()[lo..lo + 3].to_vec()
                } else {
                    vec![z[6], 0.0, 0.0]
                };
                let (t, h) = decompose(&Vec64::new(group)).unwrap();
                let r = h.norm2();
                margin = margin
                    .min((r - c.tan_alpha() * t).abs())
                    .min((c.tan_alpha() * r + t).abs());
            }
            if margin < 1e-3 {
                continue;
            }
            checked += 1;
            let leaky = 0.01;
            let up = rng.uniform_vec(7, -1.0, 1.0);
            let (gz, graw) = mpu_backward(&z, &c, leaky, &up);

            let loss = |zv: &Vec64, cs: &ConeSpec| mpu_forward(zv, cs, leaky).dot(&up);
            for i in 0..7 {
                let mut zp = z.clone();
                zp[i] += eps;
                let mut zm = z.clone();
                zm[i] -= eps;
                let fd = (loss(&zp, &c) - loss(&zm, &c)) / (2.0 * eps);
                let err = (gz[i] - fd).abs() / gz[i].abs().max(fd.abs()).max(1e-8);
                assert!(err < 1e-5, "dz[{i}]: analytic {} vs fd {fd}", gz[i]);
            }
            let mut cp = c.clone();
            cp.set_raw_param(c.raw_param() + eps);
            let mut cm = c.clone();
            cm.set_raw_param(c.raw_param() - eps);
            let fd = (loss(&z, &cp) - loss(&z, &cm)) / (2.0 * eps);
            let err = (graw - fd).abs() / graw.abs().max(fd.abs()).max(1e-8);
            assert!(err < 1e-5, "d(raw): analytic {graw} vs fd {fd}");
        }
    }

    #[test]
    fn antisym_diff_witness_values() {
        // At tan(alpha) = sqrt(3) the map x -> proj(x) - proj(-x) is not
        // additive; the witness pair (1,0), (0,1) exposes the defect.
        let c = spec(2, SQRT_3);
        let d10 = antisym_diff(&Vec64::from_slice(&[1.0, 0.0]), &c).unwrap();
        let d01 = antisym_diff(&Vec64::from_slice(&[0.0, 1.0]), &c).unwrap();
        let d11 = antisym_diff(&Vec64::from_slice(&[1.0, 1.0]), &c).unwrap();
        let sum = d10.add(&d01);
        assert!((sum[0] - 0.8169872981077807).abs() < 1e-10, "sum = {sum}");
        assert!((sum[1] - 0.8169872981077807).abs() < 1e-10);
        assert_eq!(d11.as_slice(), &[1.0, 1.0]);
        let defect = sum.sub(&d11).norm2();
        assert!(
            (defect - 0.25881904510252074).abs() < 1e-10,
            "defect = {defect}"
        );

        // At the excluded width tan(alpha) = 1 = sqrt(m - 1), the map is the
        // identity, hence additive.
        let c = spec(2, 1.0);
        let mut rng = Rng::new(8);
        for _ in 0..100 {
            let x = rng.uniform_vec(2, -10.0, 10.0);
            let d = antisym_diff(&x, &c).unwrap();
            assert!(d.max_abs_diff(&x) < 1e-10);
        }

        let zero = Vec64::from_slice(&[0.0, 0.0]);
        assert_eq!(
            antisym_diff(&zero, &spec(2, 0.4)).unwrap().as_slice(),
            &[0.0, 0.0]
        );
    }

    #[test]
    fn macs_totals_match_the_closed_forms() {
        assert!(macs_count(1).is_err());
        for m in 2..=10 {
            let r = macs_count(m).unwrap();
            assert_eq!(r.total, 7 * m as u64 + 9);
            assert_eq!(r.add + r.sub + r.mul + r.div + r.sqrt + r.compare, r.total);
        }
        assert_eq!(macs_count(3).unwrap().total, 30);
        assert_eq!(macs_count(5).unwrap().total, 44);

        let s = MacsReport::specialized_m2();
        assert_eq!(s.total, 18);
        assert_eq!(
            (s.add, s.sub, s.mul, s.div, s.sqrt, s.compare),
            (4, 2, 4, 5, 0, 3)
        );
    }
}
