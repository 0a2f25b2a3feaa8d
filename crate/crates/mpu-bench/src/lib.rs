//! Shared instance builders for the benchmark suite.

use mpu_core::{
    default_step, random_spd, ActivationSpec, ConeSpec, Dataset, FeasibleSet, Layer, Network,
    QpProblem, Rng, SplitData, Vec64,
};

pub fn cone_inputs(m: usize, count: usize, seed: u64) -> Vec<Vec64> {
    let mut rng = Rng::new(seed);
    (0..count)
        .map(|_| rng.uniform_vec(m, -10.0, 10.0))
        .collect()
}

pub fn orthant_qp(n: usize, seed: u64) -> (QpProblem, f64) {
    let mut rng = Rng::new(seed);
    let p = random_spd(n, &mut rng);
    let q = rng.uniform_vec(n, -3.0, 3.0);
    let prob = QpProblem::new(p, q, FeasibleSet::Orthant).expect("valid problem");
    let gamma = default_step(prob.p()).expect("positive definite");
    (prob, gamma)
}

pub fn shallow_mpu_net(width: usize, seed: u64) -> Network {
    let mut rng = Rng::new(seed);
    let hidden = Layer::random(width, 2, ActivationSpec::mpu(2, 0.0).unwrap(), &mut rng).unwrap();
    let readout = Layer::random(2, width, ActivationSpec::Identity, &mut rng).unwrap();
    Network::new(vec![hidden, readout]).unwrap()
}

pub fn tiny_dataset(samples: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut train = SplitData::default();
    for _ in 0..samples {
        let x = rng.uniform_vec(2, -10.0, 10.0);
        let y = Vec64::new(x.iter().map(|v| v.max(0.0)).collect());
        train.push(x, y);
    }
    let mut test = SplitData::default();
    test.push(Vec64::zeros(2), Vec64::zeros(2));
    Dataset { train, test, seed }
}

pub fn cone(m: usize, tan_alpha: f64) -> ConeSpec {
    ConeSpec::with_tan_alpha(m, tan_alpha).expect("valid cone")
}
