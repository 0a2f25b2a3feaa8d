//! Verification reports behind the `pgd-demo`, `prox-verify`, `cone-verify`
//! and `macs` subcommands.

use mpu_core::{
    antisym_diff, brute_force_qp, catalog, default_step, equivalence_report, macs_count,
    oracle_project, pgd_solve, project_cone, prox_oracle, random_spd, verify_leaky_theorem,
    ConeSpec, FeasibleSet, MacsReport, Mat64, PgdConfig, Potential, ProblemSpec, QpProblem, Rng,
    SolveError, Vec64,
};
use serde::Serialize;

use crate::dataset::SQRT_3;

pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const BRUTE_FORCE_TOL: f64 = 1e-6;
pub const PROX_ENTRY_TOL: f64 = 1e-4;
pub const LEAKY_TOL: f64 = 1e-3;
const PROX_TOL: f64 = 1e-7;

#[derive(Serialize, Debug)]
pub struct PgdInstanceReport {
    pub name: String,
    pub n: usize,
    pub set: String,
    pub gamma: f64,
    pub max_deviation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brute_force_gap: Option<f64>,
    pub pass: bool,
}

#[derive(Serialize, Debug)]
pub struct PgdReport {
    pub instances: Vec<PgdInstanceReport>,
    pub pass: bool,
}

fn set_name(set: &FeasibleSet) -> String {
    match set {
        FeasibleSet::Orthant => "orthant".into(),
        FeasibleSet::Box { .. } => "box".into(),
        FeasibleSet::Cone(spec) => format!("cone(m={}, tan_alpha={})", spec.m(), spec.tan_alpha()),
    }
}

fn demo_instance(
    name: &str,
    prob: &QpProblem,
    gamma: Option<f64>,
    rng: &mut Rng,
) -> Result<PgdInstanceReport, SolveError> {
    let gamma = match gamma {
        Some(g) => g,
        None => default_step(prob.p())?,
    };
    let max_deviation = equivalence_report(prob, gamma, 100, 10, rng)?;
    let solve = pgd_solve(prob, &Vec64::zeros(prob.n()), &PgdConfig::with_gamma(gamma))?;
    let brute_force_gap = match (prob.n() <= 2, prob.set()) {
        (true, FeasibleSet::Orthant | FeasibleSet::Box { .. }) => {
            Some(solve.final_point().max_abs_diff(&brute_force_qp(prob)?))
        }
        _ => None,
    };
    let pass = max_deviation <= EQUIVALENCE_TOL
        && solve.converged
        && brute_force_gap.is_none_or(|g| g <= BRUTE_FORCE_TOL);
    Ok(PgdInstanceReport {
        name: name.to_string(),
        n: prob.n(),
        set: set_name(prob.set()),
        gamma,
        max_deviation,
        iterations: solve.steps_taken,
        converged: solve.converged,
        final_residual: solve.final_residual,
        brute_force_gap,
        pass,
    })
}

/// Three built-in instances: a random orthant QP, the hand-checkable box
/// clamp, and a cone-constrained problem.
pub fn pgd_demo_builtin() -> Result<PgdReport, SolveError> {
    let mut instances = Vec::new();

    let mut rng = Rng::new(314);
    let p = random_spd(8, &mut rng);
    let q = rng.uniform_vec(8, -3.0, 3.0);
    let prob = QpProblem::new(p, q, FeasibleSet::Orthant)?;
    instances.push(demo_instance("orthant-n8", &prob, None, &mut rng)?);

    let prob = QpProblem::new(
        Mat64::identity(2),
        Vec64::from_slice(&[3.0, -0.5]),
        FeasibleSet::Box {
            lo: Vec64::filled(2, -1.0),
            hi: Vec64::filled(2, 1.0),
        },
    )?;
    let mut rng = Rng::new(315);
    instances.push(demo_instance("box-n2", &prob, None, &mut rng)?);

    let mut rng = Rng::new(316);
    let p = random_spd(4, &mut rng);
    let q = rng.uniform_vec(4, -3.0, 3.0);
    let prob = QpProblem::new(
        p,
        q,
        FeasibleSet::Cone(ConeSpec::with_tan_alpha(4, SQRT_3)?),
    )?;
    instances.push(demo_instance("cone-n4", &prob, None, &mut rng)?);

    let pass = instances.iter().all(|i| i.pass);
    Ok(PgdReport { instances, pass })
}

/// Demo for a user-supplied problem document.
pub fn pgd_demo_from_spec(spec: &ProblemSpec) -> Result<PgdReport, SolveError> {
    let (prob, gamma) = spec.to_problem()?;
    let mut rng = Rng::new(314);
    let instance = demo_instance("problem", &prob, gamma, &mut rng)?;
    let pass = instance.pass;
    Ok(PgdReport {
        instances: vec![instance],
        pass,
    })
}

#[derive(Serialize, Debug)]
pub struct ProxEntryReport {
    pub entry: String,
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize, Debug)]
pub struct LeakyReport {
    pub potential: String,
    pub lambda: f64,
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize, Debug)]
pub struct ProxReport {
    pub entries: Vec<ProxEntryReport>,
    pub leaky: Vec<LeakyReport>,
    pub pass: bool,
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Catalog-vs-oracle errors, plus the Leaky-prox identity on its three
/// documented potential/lambda pairs. `entry_filter` limits the catalog rows
/// (and skips the leaky section); `samples` sets evaluation points per entry.
pub fn prox_verify(entry_filter: Option<&str>, samples: usize) -> Result<ProxReport, String> {
    let cat = catalog();
    if let Some(name) = entry_filter {
        if !cat.iter().any(|e| e.name() == name) {
            return Err(format!(
                "unknown entry `{name}`; known entries: {}",
                cat.iter().map(|e| e.name()).collect::<Vec<_>>().join(", ")
            ));
        }
    }
    let mut entries = Vec::new();
    for entry in &cat {
        if entry_filter.is_some_and(|f| f != entry.name()) {
            continue;
        }
        let mut max_error: f64 = 0.0;
        for x in grid(-6.0, 6.0, samples.max(1)) {
            let oracle =
                prox_oracle(&entry.potential, x, PROX_TOL).expect("catalog potentials are proper");
            max_error = max_error.max((entry.closed_form(x) - oracle).abs());
        }
        entries.push(ProxEntryReport {
            entry: entry.name().to_string(),
            samples: samples.max(1),
            max_error,
            tolerance: PROX_ENTRY_TOL,
            pass: max_error <= PROX_ENTRY_TOL,
        });
    }

    let mut leaky = Vec::new();
    if entry_filter.is_none() {
        let sigmoid_potential = cat
            .iter()
            .find(|e| e.name() == "sigmoid")
            .unwrap()
            .potential
            .clone();
        let combos: Vec<(Potential, f64, Vec<f64>)> = vec![
            (
                Potential::indicator_nonneg(64.0),
                1.0 / 99.0,
                grid(-5.0, 5.0, 21),
            ),
            (Potential::abs(64.0), 1.0, grid(-3.0, 3.0, 13)),
            (sigmoid_potential, 0.5, grid(-4.0, 4.0, 17)),
        ];
        for (g, lambda, xs) in combos {
            let max_error = verify_leaky_theorem(&g, lambda, &xs, PROX_TOL)
                .expect("documented potentials are proper");
            leaky.push(LeakyReport {
                potential: g.name().to_string(),
                lambda,
                samples: xs.len(),
                max_error,
                tolerance: LEAKY_TOL,
                pass: max_error <= LEAKY_TOL,
            });
        }
    }

    let pass = entries.iter().all(|e| e.pass) && leaky.iter().all(|l| l.pass);
    Ok(ProxReport {
        entries,
        leaky,
        pass,
    })
}

#[derive(Serialize, Debug)]
pub struct ConeAgreementRow {
    pub m: usize,
    pub tan_alpha: f64,
    pub points: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize, Debug)]
pub struct ConeReport {
    pub agreement: Vec<ConeAgreementRow>,
    pub relu_embedding_max_error: f64,
    pub orthant_identity_max_error: f64,
    pub witness_defect: f64,
    pub excluded_width_max_defect: f64,
    pub pass: bool,
}

/// Oracle agreement across dimensions and widths, the ReLU embedding, the
/// orthant identity, and the nonlinearity witness.
pub fn cone_verify(points: usize, resolution: f64) -> ConeReport {
    let tolerance = 10.0 * resolution;
    let mut rng = Rng::new(2024);
    let mut agreement = Vec::new();
    for m in [2usize, 3, 5] {
        for tau in [0.5, 1.0, SQRT_3] {
            let spec = ConeSpec::with_tan_alpha(m, tau).expect("valid cone");
            let mut worst: f64 = 0.0;
            for _ in 0..points {
                let x = rng.uniform_vec(m, -10.0, 10.0);
                let exact = project_cone(&x, &spec).expect("finite input").point;
                worst = worst.max(exact.max_abs_diff(&oracle_project(&x, &spec, resolution)));
            }
            agreement.push(ConeAgreementRow {
                m,
                tan_alpha: tau,
                points,
                max_deviation: worst,
                tolerance,
                pass: worst <= tolerance,
            });
        }
    }

    let mut relu_embedding_max_error: f64 = 0.0;
    for m in [2usize, 3, 5] {
        for tau in [0.5, 1.0, SQRT_3] {
            let spec = ConeSpec::with_tan_alpha(m, tau).expect("valid cone");
            for k in 0..1000 {
                let x = -10.0 + 20.0 * k as f64 / 999.0;
                let p = project_cone(&Vec64::filled(m, x), &spec)
                    .expect("finite")
                    .point;
                for i in 0..m {
                    relu_embedding_max_error =
                        relu_embedding_max_error.max((p[i] - x.max(0.0)).abs());
                }
            }
        }
    }

    let orthant = ConeSpec::with_tan_alpha(2, 1.0).expect("valid cone");
    let mut orthant_identity_max_error: f64 = 0.0;
    for _ in 0..10_000 {
        let x = rng.uniform_vec(2, -10.0, 10.0);
        let p = project_cone(&x, &orthant).expect("finite").point;
        for i in 0..2 {
            orthant_identity_max_error =
                orthant_identity_max_error.max((p[i] - x[i].max(0.0)).abs());
        }
    }

    let witness_spec = ConeSpec::with_tan_alpha(2, SQRT_3).expect("valid cone");
    let d = |v: &[f64]| antisym_diff(&Vec64::from_slice(v), &witness_spec).expect("finite");
    let witness_defect = d(&[1.0, 0.0])
        .add(&d(&[0.0, 1.0]))
        .sub(&d(&[1.0, 1.0]))
        .norm2();

    let mut excluded_width_max_defect: f64 = 0.0;
    for _ in 0..500 {
        let x = rng.uniform_vec(2, -10.0, 10.0);
        let y = rng.uniform_vec(2, -10.0, 10.0);
        let da = antisym_diff(&x, &orthant).expect("finite");
        let db = antisym_diff(&y, &orthant).expect("finite");
        let dxy = antisym_diff(&x.add(&y), &orthant).expect("finite");
        excluded_width_max_defect = excluded_width_max_defect.max(da.add(&db).sub(&dxy).norm2());
    }

    let pass = agreement.iter().all(|r| r.pass)
        && relu_embedding_max_error <= 1e-12
        && orthant_identity_max_error <= 1e-12
        && witness_defect >= 0.1
        && excluded_width_max_defect <= 1e-10;
    ConeReport {
        agreement,
        relu_embedding_max_error,
        orthant_identity_max_error,
        witness_defect,
        excluded_width_max_defect,
        pass,
    }
}

/// Aligned operation-count table: one row per requested dimension plus the
/// simplified two-dimensional path.
pub fn macs_table(ms: &[usize]) -> Result<String, String> {
    if ms.is_empty() {
        return Err("at least one dimension is required".into());
    }
    let mut out = String::new();
    out.push_str(&format!(
        "{:>14} {:>6} {:>6} {:>6} {:>6} {:>6} {:>8} {:>7}\n",
        "m", "add", "sub", "mul", "div", "sqrt", "compare", "total"
    ));
    let mut row = |label: &str, r: &MacsReport| {
        out.push_str(&format!(
            "{:>14} {:>6} {:>6} {:>6} {:>6} {:>6} {:>8} {:>7}\n",
            label, r.add, r.sub, r.mul, r.div, r.sqrt, r.compare, r.total
        ));
    };
    for &m in ms {
        let report = macs_count(m).map_err(|e| e.to_string())?;
        row(&m.to_string(), &report);
    }
    row("2 (polyhedral)", &MacsReport::specialized_m2());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_demo_passes_its_own_thresholds() {
        let report = pgd_demo_builtin().unwrap();
        assert_eq!(report.instances.len(), 3);
        assert!(report.pass, "{report:?}");
        let box_row = &report.instances[1];
        assert_eq!(box_row.set, "box");
        assert!(box_row.brute_force_gap.unwrap() <= BRUTE_FORCE_TOL);
    }

    #[test]
    fn prox_report_filters_entries() {
        let report = prox_verify(Some("sigmoid"), 17).unwrap();
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.entries[0].entry, "sigmoid");
        assert_eq!(report.entries[0].samples, 17);
        assert!(report.leaky.is_empty());
        assert!(report.pass);

        assert!(prox_verify(Some("swish"), 10).is_err());
    }

    #[test]
    fn macs_table_contains_documented_totals() {
        let table = macs_table(&[2, 3, 5]).unwrap();
        assert!(table.contains("23"));
        assert!(table.contains("30"));
        assert!(table.contains("44"));
        assert!(table.contains("18"));
        assert!(macs_table(&[1]).is_err());
    }

    #[test]
    fn cone_verify_small_run_passes() {
        let report = cone_verify(50, 1e-6);
        assert!(report.pass, "{report:?}");
    }
}
