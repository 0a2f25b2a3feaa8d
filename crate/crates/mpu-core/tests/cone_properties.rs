//! Property and oracle tests for the cone projection and the grouped
//! activation built on it.

use mpu_core::{
    antisym_diff, mpu_backward, mpu_forward, oracle_project, project_cone, ConeSpec, Rng, Vec64,
};
use proptest::prelude::*;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

fn spec(m: usize, tan_alpha: f64) -> ConeSpec {
    ConeSpec::with_tan_alpha(m, tan_alpha).unwrap()
}

#[test]
fn projection_agrees_with_plane_search_oracle() {
    let mut rng = Rng::new(2024);
    for m in [2usize, 3, 5] {
        for tau in [0.5, 1.0, SQRT_3] {
            let c = spec(m, tau);
            let mut worst: f64 = 0.0;
            for _ in 0..1000 {
                let x = rng.uniform_vec(m, -10.0, 10.0);
                let exact = project_cone(&x, &c).unwrap().point;
                let approx = oracle_project(&x, &c, 1e-6);
                worst = worst.max(exact.max_abs_diff(&approx));
            }
            assert!(
                worst < 1e-5,
                "m={m}, tan_alpha={tau}: worst oracle deviation {worst}"
            );
        }
    }
}

#[test]
fn orthant_identity_at_the_excluded_width() {
    // m = 2 with tan(alpha) = 1 = sqrt(m - 1): projection is element-wise ReLU.
    let c = spec(2, 1.0);
    let mut rng = Rng::new(7);
    for _ in 0..10_000 {
        let x = rng.uniform_vec(2, -10.0, 10.0);
        let p = project_cone(&x, &c).unwrap().point;
        for i in 0..2 {
            assert!(
                (p[i] - x[i].max(0.0)).abs() < 1e-12,
                "x={x}, projection {p} differs from ReLU"
            );
        }
    }
}

#[test]
fn relu_embedding_along_the_axis() {
    // proj(x * 1) = ReLU(x) * 1 for every width and cone angle.
    for m in [2usize, 3, 5] {
        for tau in [0.5, 1.0, SQRT_3] {
            let c = spec(m, tau);
            for k in 0..=1000 {
                let x = -10.0 + 0.02 * k as f64;
                let p = project_cone(&Vec64::filled(m, x), &c).unwrap().point;
                let want = x.max(0.0);
                for i in 0..m {
                    assert!(
                        (p[i] - want).abs() < 1e-12,
                        "m={m}, tau={tau}, x={x}: got {}",
                        p[i]
                    );
                }
            }
        }
    }
}

#[test]
fn nonlinearity_witness_and_excluded_width() {
    let c = spec(2, SQRT_3);
    let d10 = antisym_diff(&Vec64::from_slice(&[1.0, 0.0]), &c).unwrap();
    let d01 = antisym_diff(&Vec64::from_slice(&[0.0, 1.0]), &c).unwrap();
    let d11 = antisym_diff(&Vec64::from_slice(&[1.0, 1.0]), &c).unwrap();
    let defect = d10.add(&d01).sub(&d11).norm2();
    assert!(
        defect >= 0.1,
        "additivity defect {defect} below the witness bound"
    );

    let c = spec(2, 1.0);
    let mut rng = Rng::new(11);
    for _ in 0..500 {
        let x = rng.uniform_vec(2, -10.0, 10.0);
        let y = rng.uniform_vec(2, -10.0, 10.0);
        let defect = antisym_diff(&x, &c)
            .unwrap()
            .add(&antisym_diff(&y, &c).unwrap())
            .sub(&antisym_diff(&x.add(&y), &c).unwrap())
            .norm2();
        assert!(defect <= 1e-10, "defect {defect} at the excluded width");
    }
}

#[test]
fn grouped_forward_gradients_match_finite_differences() {
    // Random widths exercising both full groups and padding, all regions.
    let mut rng = Rng::new(55);
    let eps = 1e-6;
    for (m, n, tau, leaky) in [
        (2usize, 7usize, 0.7, 0.0),
        (3, 8, 1.4, 0.01),
        (5, 5, SQRT_3, 0.05),
    ] {
        let c = spec(m, tau);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 15 && attempts < 2000 {
            attempts += 1;
            let z = rng.uniform_vec(n, -5.0, 5.0);
            let act = mpu_core::ActivationSpec::Mpu {
                spec: c.clone(),
                leaky,
            };
            if act.kink_margin(&z) < 1e-3 {
                continue;
            }
            checked += 1;
            let up = rng.uniform_vec(n, -1.0, 1.0);
            let (gz, graw) = mpu_backward(&z, &c, leaky, &up);
            let loss = |zv: &Vec64, cs: &ConeSpec| mpu_forward(zv, cs, leaky).dot(&up);
            for i in 0..n {
                let mut zp = z.clone();
                zp[i] += eps;
                let mut zm = z.clone();
                zm[i] -= eps;
                let fd = (loss(&zp, &c) - loss(&zm, &c)) / (2.0 * eps);
                let err = (gz[i] - fd).abs() / gz[i].abs().max(fd.abs()).max(1.0);
                assert!(err <= 1e-5, "m={m} n={n} dz[{i}]: {} vs fd {fd}", gz[i]);
            }
            let mut cp = c.clone();
            cp.set_raw_param(c.raw_param() + eps);
            let mut cm = c.clone();
            cm.set_raw_param(c.raw_param() - eps);
            let fd = (loss(&z, &cp) - loss(&z, &cm)) / (2.0 * eps);
            let err = (graw - fd).abs() / graw.abs().max(fd.abs()).max(1.0);
            assert!(err <= 1e-5, "m={m} n={n} d(raw): {graw} vs fd {fd}");
        }
        assert_eq!(
            checked, 15,
            "could not sample enough points away from kinks"
        );
    }
}

fn vec_strategy(m: usize) -> impl Strategy<Value = Vec64> {
    prop::collection::vec(-10.0..10.0f64, m).prop_map(Vec64::new)
}

fn cone_inputs() -> impl Strategy<Value = (ConeSpec, Vec64, Vec64)> {
    (prop::sample::select(vec![2usize, 3, 5]), 0.2..2.5f64)
        .prop_flat_map(|(m, tau)| (Just(spec(m, tau)), vec_strategy(m), vec_strategy(m)))
}

proptest! {
    #[test]
    fn projection_is_idempotent((c, x, _) in cone_inputs()) {
        let once = project_cone(&x, &c).unwrap().point;
        let twice = project_cone(&once, &c).unwrap().point;
        prop_assert!(twice.max_abs_diff(&once) <= 1e-10);
    }

    #[test]
    fn projection_is_nonexpansive((c, x, y) in cone_inputs()) {
        let px = project_cone(&x, &c).unwrap().point;
        let py = project_cone(&y, &c).unwrap().point;
        prop_assert!(px.sub(&py).norm2() <= x.sub(&y).norm2() + 1e-10);
    }

    #[test]
    fn projection_is_positively_homogeneous((c, x, _) in cone_inputs()) {
        let base = project_cone(&x, &c).unwrap().point;
        for scale in [0.5, 2.0, 10.0] {
            let scaled = project_cone(&x.scale(scale), &c).unwrap().point;
            prop_assert!(scaled.max_abs_diff(&base.scale(scale)) <= 1e-9);
        }
    }

    #[test]
    fn grouped_activation_preserves_width(
        z in prop::collection::vec(-10.0..10.0f64, 1..=12).prop_map(Vec64::new),
        m in prop::sample::select(vec![2usize, 3, 5]),
        leaky in 0.0..0.5f64,
    ) {
        let c = spec(m, 1.0);
        prop_assert_eq!(mpu_forward(&z, &c, leaky).len(), z.len());
    }
}
