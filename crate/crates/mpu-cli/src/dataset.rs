//! Target functions and dataset generation for the function-fitting
//! experiment.
//!
//! Both targets compose the shared frozen weight matrix (unit spectral norm,
//! generated once from seed 0 and committed under `data/`) with a fixed
//! nonlinearity: the cone projection with half-apex angle pi/3, or an
//! element-wise Leaky ReLU.

use mpu_core::{project_cone, ConeSpec, Dataset, Mat64, Rng, SplitData, Vec64};

/// All fitting runs share one dataset per target, drawn with this seed.
pub const DATASET_SEED: u64 = 100;

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Default Leaky ReLU slope for the 2-d leaky target.
pub const LEAKY_SLOPE: f64 = 0.01;

const TARGET_W_JSON: &str = include_str!("../data/target_weights.json");

/// The frozen 2x2 weight matrix with spectral norm 1.
pub fn frozen_target_weights() -> Mat64 {
    serde_json::from_str(TARGET_W_JSON).expect("bundled target_weights.json must parse")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    Cone,
    Leaky2d,
}

impl TargetKind {
    pub fn parse(s: &str) -> Option<TargetKind> {
        match s {
            "cone" => Some(TargetKind::Cone),
            "leaky2d" => Some(TargetKind::Leaky2d),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Cone => "cone",
            TargetKind::Leaky2d => "leaky2d",
        }
    }
}

/// A fully specified target function from `R^2` to `R^2`.
#[derive(Clone, Debug)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub weights: Mat64,
    cone: ConeSpec,
    slope: f64,
}

impl TargetSpec {
    pub fn cone() -> TargetSpec {
        TargetSpec {
            kind: TargetKind::Cone,
            weights: frozen_target_weights(),
            cone: ConeSpec::with_tan_alpha(2, SQRT_3).expect("valid cone"),
            slope: 0.0,
        }
    }

    pub fn leaky2d() -> TargetSpec {
        TargetSpec {
            kind: TargetKind::Leaky2d,
            weights: frozen_target_weights(),
            cone: ConeSpec::with_tan_alpha(2, 1.0).expect("valid cone"),
            slope: LEAKY_SLOPE,
        }
    }

    pub fn for_kind(kind: TargetKind) -> TargetSpec {
        match kind {
            TargetKind::Cone => TargetSpec::cone(),
            TargetKind::Leaky2d => TargetSpec::leaky2d(),
        }
    }

    pub fn evaluate(&self, x: &Vec64) -> Vec64 {
        let z = self.weights.matvec(x);
        match self.kind {
            TargetKind::Cone => project_cone(&z, &self.cone).expect("finite input").point,
            TargetKind::Leaky2d => Vec64::new(
                z.iter()
                    .map(|&v| if v > 0.0 { v } else { self.slope * v })
                    .collect(),
            ),
        }
    }
}

/// Inputs uniform on `[-10, 10]^2`; targets evaluated through the spec.
pub fn gen_dataset(spec: &TargetSpec, n_train: usize, n_test: usize, seed: u64) -> Dataset {
    assert!(n_train >= 1 && n_test >= 1);
    let mut rng = Rng::new(seed);
    let mut draw = |n: usize| {
        let mut split = SplitData::default();
        for _ in 0..n {
            let x = rng.uniform_vec(2, -10.0, 10.0);
            let y = spec.evaluate(&x);
            split.push(x, y);
        }
        split
    };
    let train = draw(n_train);
    let test = draw(n_test);
    Dataset { train, test, seed }
}

/// Pooled per-component variance of the test targets, the scale reference
/// for "good enough" fits.
pub fn target_variance(data: &Dataset) -> f64 {
    let mut count = 0usize;
    let mut mean = 0.0;
    for y in &data.test.targets {
        for v in y.iter() {
            mean += v;
            count += 1;
        }
    }
    mean /= count as f64;
    let mut var = 0.0;
    for y in &data.test.targets {
        for v in y.iter() {
            var += (v - mean) * (v - mean);
        }
    }
    var / count as f64
}
