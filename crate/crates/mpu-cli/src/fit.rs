//! The function-fitting experiment: shallow networks with each activation,
//! trained per (activation, width, seed, learning-rate) cell.

use crate::dataset::{gen_dataset, TargetKind, TargetSpec, DATASET_SEED};
use mpu_core::{train, ActivationSpec, Dataset, Layer, NetError, Network, Rng, TrainConfig};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Activations compared in the experiment, in report order.
pub const ACTIVATION_NAMES: &[&str] = &[
    "relu",
    "leaky_relu",
    "prelu",
    "wta",
    "maxout",
    "crelu",
    "mpu",
];

pub const DESK_WIDTHS: &[usize] = &[8, 16, 32];
pub const PAPER_WIDTHS: &[usize] = &[8, 16, 32, 64, 128];
pub const DEFAULT_SEEDS: &[u64] = &[1, 2, 3];
pub const DEFAULT_BATCH: usize = 128;
pub const MOMENTUM: f64 = 0.9;

/// Exact CSV header of the fit report.
pub const CSV_HEADER: &str = "activation,width,seed,lr,epochs,train_mse,test_mse,seconds";

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub target: TargetKind,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub learning_rates: Vec<f64>,
    pub batch: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub activations: Vec<String>,
}

impl FitOptions {
    /// Desk-scale defaults: minutes, not hours.
    pub fn desk(target: TargetKind) -> FitOptions {
        FitOptions {
            target,
            widths: DESK_WIDTHS.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            epochs: 20,
            learning_rates: vec![default_learning_rate(target)],
            batch: DEFAULT_BATCH,
            n_train: 8000,
            n_test: 2000,
            activations: ACTIVATION_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Full experiment sizes: 40000/10000 samples, 50 epochs.
    pub fn paper_scale(target: TargetKind) -> FitOptions {
        FitOptions {
            widths: PAPER_WIDTHS.to_vec(),
            epochs: 50,
            n_train: 40_000,
            n_test: 10_000,
            ..FitOptions::desk(target)
        }
    }
}

/// The learning rates the grid search settled on, per target.
pub fn default_learning_rate(target: TargetKind) -> f64 {
    match target {
        TargetKind::Cone => 5e-4,
        TargetKind::Leaky2d => 1e-3,
    }
}

/// One CSV row.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub activation: String,
    pub width: usize,
    pub seed: u64,
    pub lr: f64,
    pub epochs: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub seconds: f64,
}

fn activation_for(name: &str) -> Result<ActivationSpec, NetError> {
    match name {
        "relu" => Ok(ActivationSpec::Relu),
        "leaky_relu" => Ok(ActivationSpec::LeakyRelu { slope: 0.01 }),
        "prelu" => Ok(ActivationSpec::PRelu { slope: 0.25 }),
        "wta" => Ok(ActivationSpec::Wta { keep_fraction: 0.5 }),
        "maxout" => Ok(ActivationSpec::MaxOut { arity: 2 }),
        "crelu" => Ok(ActivationSpec::CRelu),
        "mpu" => ActivationSpec::mpu(2, 0.0),
        other => Err(NetError::BadActivation(format!(
            "unknown activation `{other}`"
        ))),
    }
}

/// Shallow net for the experiment: affine, activation, affine. The hidden
/// state has `width` units after the activation; MaxOut therefore gets a
/// twice-as-wide pre-activation, and CReLU feeds a twice-as-wide readout.
pub fn build_shallow(name: &str, width: usize, rng: &mut Rng) -> Result<Network, NetError> {
    let activation = activation_for(name)?;
    let pre_width = match activation {
        ActivationSpec::MaxOut { arity } => width * arity,
        _ => width,
    };
    let hidden = Layer::random(pre_width, 2, activation, rng)?;
    let readout = Layer::random(2, hidden.out_width(), ActivationSpec::Identity, rng)?;
    Network::new(vec![hidden, readout])
}

/// Trains one cell and reports its final epoch.
pub fn run_cell(
    name: &str,
    width: usize,
    seed: u64,
    lr: f64,
    epochs: usize,
    batch: usize,
    data: &Dataset,
) -> Result<RunRecord, NetError> {
    let started = Instant::now();
    let mut init_rng = Rng::new(seed);
    let mut net = build_shallow(name, width, &mut init_rng)?;
    let cfg = TrainConfig {
        learning_rate: lr,
        momentum: MOMENTUM,
        epochs,
        batch_size: batch,
        seed,
    };
    let history = train(&mut net, data, &cfg)?;
    let last = history.last().copied().unwrap_or(mpu_core::EpochRecord {
        epoch: 0,
        train_mse: f64::NAN,
        test_mse: f64::NAN,
    });
    Ok(RunRecord {
        activation: name.to_string(),
        width,
        seed,
        lr,
        epochs,
        train_mse: last.train_mse,
        test_mse: last.test_mse,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Cell parallelism cap: `MPU_LAB_THREADS`, else the machine's parallelism.
pub fn thread_cap() -> usize {
    std::env::var("MPU_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs every (activation, width, seed, lr) cell, in parallel up to the
/// thread cap, and returns the records in roster order.
pub fn run_fit(opts: &FitOptions) -> Result<Vec<RunRecord>, NetError> {
    let spec = TargetSpec::for_kind(opts.target);
    let data = gen_dataset(&spec, opts.n_train, opts.n_test, DATASET_SEED);

    let mut cells = Vec::new();
    for name in &opts.activations {
        activation_for(name)?;
        for &width in &opts.widths {
            for &seed in &opts.seeds {
                for &lr in &opts.learning_rates {
                    cells.push((name.clone(), width, seed, lr));
                }
            }
        }
    }

    let workers = thread_cap().min(cells.len().max(1));
    let mut results: Vec<Option<Result<RunRecord, NetError>>> = Vec::new();
    results.resize_with(cells.len(), || None);
    let results_ref = std::sync::Mutex::new(&mut results);
    let cells_ref = &cells;
    let data_ref = &data;
    let epochs = opts.epochs;
    let batch = opts.batch;

    std::thread::scope(|scope| {
        for worker in 0..workers {
            let results_ref = &results_ref;
            scope.spawn(move || {
                let mut idx = worker;
                while idx < cells_ref.len() {
                    let (name, width, seed, lr) = &cells_ref[idx];
                    let record = run_cell(name, *width, *seed, *lr, epochs, batch, data_ref);
                    results_ref.lock().unwrap()[idx] = Some(record);
                    idx += workers;
                }
            });
        }
    });

    results
        .into_iter()
        .map(|r| r.expect("every cell was scheduled"))
        .collect()
}

/// Writes the schema-stable CSV report.
pub fn write_csv(records: &[RunRecord], path: &Path) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(CSV_HEADER.split(','))?;
    for r in records {
        wtr.write_record(&[
            r.activation.clone(),
            r.width.to_string(),
            r.seed.to_string(),
            r.lr.to_string(),
            r.epochs.to_string(),
            r.train_mse.to_string(),
            r.test_mse.to_string(),
            format!("{:.3}", r.seconds),
        ])?;
    }
    wtr.flush()
}

/// Mean test MSE of one activation at one width, across seeds and rates.
pub fn mean_test_mse(records: &[RunRecord], activation: &str, width: usize) -> f64 {
    let cells: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.activation == activation && r.width == width)
        .collect();
    assert!(
        !cells.is_empty(),
        "no records for {activation} at width {width}"
    );
    cells.iter().map(|r| r.test_mse).sum::<f64>() / cells.len() as f64
}

/// Human-readable summary printed after a fit run.
pub fn print_summary(records: &[RunRecord], out: &mut impl Write) -> std::io::Result<()> {
    let mut widths: Vec<usize> = records.iter().map(|r| r.width).collect();
    widths.sort_unstable();
    widths.dedup();
    let mut names: Vec<&str> = records.iter().map(|r| r.activation.as_str()).collect();
    names.dedup();
    writeln!(
        out,
        "{:<12} {:>8} {:>14}",
        "activation", "width", "mean test mse"
    )?;
    for name in ACTIVATION_NAMES.iter().filter(|n| names.contains(n)) {
        for &w in &widths {
            writeln!(
                out,
                "{:<12} {:>8} {:>14.6e}",
                name,
                w,
                mean_test_mse(records, name, w)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpu_core::Vec64;

    #[test]
    fn shallow_shapes_respect_the_hidden_state_convention() {
        let mut rng = Rng::new(1);
        for name in ACTIVATION_NAMES {
            let net = build_shallow(name, 8, &mut rng).unwrap();
            let y = net.forward(&Vec64::from_slice(&[0.5, -0.5]));
            assert_eq!(y.len(), 2, "{name}");
            // Hidden state after the activation is the nominal width except
            // for CReLU, whose readout sees twice the width.
            let hidden_out = net.layers()[0].out_width();
            match *name {
                "crelu" => assert_eq!(hidden_out, 16),
                _ => assert_eq!(hidden_out, 8, "{name}"),
            }
        }
        assert!(build_shallow("swish", 8, &mut rng).is_err());
    }

    #[test]
    fn tiny_fit_produces_one_row_per_cell_in_order() {
        let opts = FitOptions {
            target: TargetKind::Leaky2d,
            widths: vec![4, 8],
            seeds: vec![1, 2],
            epochs: 1,
            learning_rates: vec![1e-3],
            batch: 32,
            n_train: 64,
            n_test: 16,
            activations: vec!["relu".into(), "mpu".into()],
        };
        let records = run_fit(&opts).unwrap();
        assert_eq!(records.len(), 2 * 2 * 2);
        assert_eq!(records[0].activation, "relu");
        assert!(records.iter().all(|r| r.test_mse.is_finite()));
    }

    #[test]
    fn reruns_reproduce_everything_but_wall_time() {
        let opts = FitOptions {
            target: TargetKind::Cone,
            widths: vec![4],
            seeds: vec![1, 2],
            epochs: 2,
            learning_rates: vec![5e-4],
            batch: 32,
            n_train: 128,
            n_test: 32,
            activations: vec!["mpu".into()],
        };
        let a = run_fit(&opts).unwrap();
        let b = run_fit(&opts).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.activation, y.activation);
            assert_eq!((x.width, x.seed), (y.width, y.seed));
            assert_eq!(x.train_mse.to_bits(), y.train_mse.to_bits());
            assert_eq!(x.test_mse.to_bits(), y.test_mse.to_bits());
        }
        // Distinct seeds come out different.
        assert_ne!(a[0].test_mse.to_bits(), a[1].test_mse.to_bits());
    }
}
