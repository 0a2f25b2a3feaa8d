//! Projected and proximal gradient descent for strongly convex quadratics,
//! plus the construction showing that one iteration is exactly one dense
//! layer: `x <- act(W x + b)` with `W = I - gamma P`, `b = -gamma q` and the
//! activation given by the feasible set's projection.

use crate::coneproj::{project_box, project_cone, project_orthant, ConeError, ConeSpec};
use crate::numerics::{spectral_norm, Mat64, Rng, Vec64, SPECTRAL_ITERS, SPECTRAL_TOL};
use crate::proxcat::{catalog, prox_oracle, Potential, ProxError, DEFAULT_PROX_TOL};
use crate::tinynet::{ActivationSpec, Layer, NetError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("P must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("P is not symmetric: max defect {0}")]
    NotSymmetric(f64),
    #[error("P is not positive definite (spectral estimate {0})")]
    NotPositiveDefinite(f64),
    #[error("gamma {gamma} fails the contraction certificate: ||I - gamma P||_2 = {norm}")]
    ContractionFailed { gamma: f64, norm: f64 },
    #[error("invalid step size {0}")]
    BadGamma(f64),
    #[error("problem contains non-finite data")]
    NonFinite,
    #[error("brute force supports only n <= 2 with orthant or box sets")]
    UnsupportedBruteForce,
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Prox(#[from] ProxError),
}

/// The constraint set of the quadratic program.
#[derive(Clone, Debug)]
pub enum FeasibleSet {
    Orthant,
    Box {
        lo: Vec64,
        hi: Vec64,
    },
    /// The whole iterate is treated as a single group of dimension `n`.
    Cone(ConeSpec),
}

impl FeasibleSet {
    fn validate(&self, n: usize) -> Result<(), SolveError> {
        match self {
            FeasibleSet::Orthant => Ok(()),
            FeasibleSet::Box { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(SolveError::Dimension(format!(
                        "box bounds have lengths {}/{}, problem dimension {n}",
                        lo.len(),
                        hi.len()
                    )));
                }
                for i in 0..n {
                    if lo[i] > hi[i] {
                        return Err(SolveError::Cone(ConeError::InvalidBox {
                            index: i,
                            lo: lo[i],
                            hi: hi[i],
                        }));
                    }
                }
                Ok(())
            }
            FeasibleSet::Cone(spec) => {
                if spec.m() != n {
                    return Err(SolveError::Dimension(format!(
                        "cone dimension {} must equal problem dimension {n}",
                        spec.m()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn project(&self, z: &Vec64) -> Vec64 {
        match self {
            FeasibleSet::Orthant => project_orthant(z),
            FeasibleSet::Box { lo, hi } => {
                project_box(z, lo, hi).expect("box validated at construction")
            }
            FeasibleSet::Cone(spec) => {
                project_cone(z, spec)
                    .expect("cone validated at construction")
                    .point
            }
        }
    }
}

/// Strongly convex quadratic `x^T P x / 2 + q^T x` over a feasible set.
#[derive(Clone, Debug)]
pub struct QpProblem {
    p: Mat64,
    q: Vec64,
    set: FeasibleSet,
}

impl QpProblem {
    pub fn new(p: Mat64, q: Vec64, set: FeasibleSet) -> Result<Self, SolveError> {
        if !p.is_square() {
            return Err(SolveError::NotSquare {
                rows: p.rows(),
                cols: p.cols(),
            });
        }
        if p.rows() != q.len() {
            return Err(SolveError::Dimension(format!(
                "q has length {}, P is {0}x{0}",
                q.len()
            )));
        }
        if !p.is_finite() || !q.is_finite() {
            return Err(SolveError::NonFinite);
        }
        let defect = p.max_symmetry_defect();
        if defect > 1e-10 {
            return Err(SolveError::NotSymmetric(defect));
        }
        set.validate(p.rows())?;
        Ok(QpProblem { p, q, set })
    }

    pub fn n(&self) -> usize {
        self.p.rows()
    }

    pub fn p(&self) -> &Mat64 {
        &self.p
    }

    pub fn q(&self) -> &Vec64 {
        &self.q
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn objective(&self, x: &Vec64) -> f64 {
        0.5 * x.dot(&self.p.matvec(x)) + self.q.dot(x)
    }
}

/// Iteration parameters. `tol < 0` disables the early stop so the solver runs
/// exactly `max_iters` steps.
#[derive(Clone, Copy, Debug)]
pub struct PgdConfig {
    pub gamma: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub record_trajectory: bool,
}

impl PgdConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        PgdConfig {
            gamma,
            max_iters: 10_000,
            tol: 1e-10,
            record_trajectory: false,
        }
    }

    /// Run exactly `iters` steps and keep every iterate.
    pub fn exact_iters(gamma: f64, iters: usize) -> Self {
        PgdConfig {
            gamma,
            max_iters: iters,
            tol: -1.0,
            record_trajectory: true,
        }
    }
}

/// Recorded iterates; the first entry is always the initial point. When
/// trajectory recording is off only the initial and final points are kept.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub iterates: Vec<Vec64>,
    pub converged: bool,
    pub final_residual: f64,
    /// Iterations actually performed, independent of recording.
    pub steps_taken: usize,
}

impl Trajectory {
    pub fn final_point(&self) -> &Vec64 {
        self.iterates.last().expect("trajectory is never empty")
    }
}

/// `W = I - gamma P` and `b = -gamma q`, shared by the solver and the layer
/// construction so both paths compute bit-identical linear steps.
fn linear_step(p: &Mat64, q: &Vec64, gamma: f64) -> (Mat64, Vec64) {
    let mut w = p.scale(-gamma);
    for i in 0..p.rows() {
        w[(i, i)] += 1.0;
    }
    (w, q.scale(-gamma))
}

/// Certifies `||I - gamma P||_2 < 1` and returns the estimated norm.
pub fn certify_contraction(p: &Mat64, gamma: f64) -> Result<f64, SolveError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(SolveError::BadGamma(gamma));
    }
    let (w, _) = linear_step(p, &Vec64::zeros(p.rows()), gamma);
    let norm = spectral_norm(&w, SPECTRAL_ITERS, SPECTRAL_TOL).value;
    if norm < 1.0 {
        Ok(norm)
    } else {
        Err(SolveError::ContractionFailed { gamma, norm })
    }
}

/// Step size `1 / lambda_max(P)`, certified before returning.
pub fn default_step(p: &Mat64) -> Result<f64, SolveError> {
    if !p.is_square() {
        return Err(SolveError::NotSquare {
            rows: p.rows(),
            cols: p.cols(),
        });
    }
    let lmax = spectral_norm(p, SPECTRAL_ITERS, SPECTRAL_TOL).value;
    if lmax <= 0.0 {
        return Err(SolveError::NotPositiveDefinite(lmax));
    }
    let gamma = 1.0 / lmax;
    certify_contraction(p, gamma)?;
    Ok(gamma)
}

fn run_iteration(
    p: &Mat64,
    q: &Vec64,
    x0: &Vec64,
    cfg: &PgdConfig,
    step: impl Fn(&Vec64) -> Vec64,
) -> Result<Trajectory, SolveError> {
    if x0.len() != p.rows() {
        return Err(SolveError::Dimension(format!(
            "x0 has length {}, problem dimension {}",
            x0.len(),
            p.rows()
        )));
    }
    certify_contraction(p, cfg.gamma)?;
    let (w, b) = linear_step(p, q, cfg.gamma);

    let mut iterates = vec![x0.clone()];
    let mut x = x0.clone();
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut steps_taken = 0;
    for _ in 0..cfg.max_iters {
        let z = w.matvec(&x).add(&b);
        let next = step(&z);
        residual = next.sub(&x).norm2();
        x = next;
        steps_taken += 1;
        if cfg.record_trajectory {
            iterates.push(x.clone());
        }
        if residual <= cfg.tol {
            converged = true;
            break;
        }
    }
    if !cfg.record_trajectory {
        iterates.push(x);
    }
    Ok(Trajectory {
        iterates,
        converged,
        final_residual: residual,
        steps_taken,
    })
}

/// Projected gradient descent: alternates `z = (I - gamma P) x - gamma q`
/// with the projection onto the feasible set. The fixed point satisfies
/// `x = proj(x - gamma (P x + q))`.
pub fn pgd_solve(prob: &QpProblem, x0: &Vec64, cfg: &PgdConfig) -> Result<Trajectory, SolveError> {
    run_iteration(&prob.p, &prob.q, x0, cfg, |z| prob.set.project(z))
}

/// Proximal gradient descent with an element-wise scalar potential: the
/// projection step becomes the prox of `g`, taken from the catalog's closed
/// form when the potential matches a shipped entry and from the brute-force
/// oracle otherwise.
pub fn prox_grad_solve(
    p: &Mat64,
    q: &Vec64,
    g: &Potential,
    x0: &Vec64,
    cfg: &PgdConfig,
) -> Result<Trajectory, SolveError> {
    let closed = catalog()
        .into_iter()
        .find(|e| e.potential.name() == g.name());
    run_iteration(p, q, x0, cfg, move |z| {
        Vec64::new(
            z.iter()
                .map(|&v| match &closed {
                    Some(entry) => entry.closed_form(v),
                    None => prox_oracle(g, v, DEFAULT_PROX_TOL)
                        .expect("potential must be proper on its bracket"),
                })
                .collect(),
        )
    })
}

/// The dense layer whose forward pass is exactly one PGD iteration:
/// orthant problems get ReLU, boxes get the clamp, cones get the projection
/// unit with `m = n`.
pub fn fnn_from_qp(prob: &QpProblem, gamma: f64) -> Result<Layer, SolveError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(SolveError::BadGamma(gamma));
    }
    let (w, b) = linear_step(&prob.p, &prob.q, gamma);
    let activation = match &prob.set {
        FeasibleSet::Orthant => ActivationSpec::Relu,
        FeasibleSet::Box { lo, hi } => ActivationSpec::Clamp {
            lo: lo.clone(),
            hi: hi.clone(),
        },
        FeasibleSet::Cone(spec) => ActivationSpec::Mpu {
            spec: spec.clone(),
            leaky: 0.0,
        },
    };
    Ok(Layer::new(w, b, activation)?)
}

/// Applies the same layer `iters` times, recording every hidden state.
pub fn rnn_unroll(layer: &Layer, x0: &Vec64, iters: usize) -> Trajectory {
    assert!(iters >= 1);
    let mut iterates = Vec::with_capacity(iters + 1);
    iterates.push(x0.clone());
    let mut x = x0.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..iters {
        let next = layer.forward(&x);
        residual = next.sub(&x).norm2();
        iterates.push(next.clone());
        x = next;
    }
    Trajectory {
        iterates,
        converged: false,
        final_residual: residual,
        steps_taken: iters,
    }
}

/// Runs the solver and the unrolled layer side by side from random starts and
/// returns the largest per-coordinate deviation across all iterates.
pub fn equivalence_report(
    prob: &QpProblem,
    gamma: f64,
    iters: usize,
    trials: usize,
    rng: &mut Rng,
) -> Result<f64, SolveError> {
    let layer = fnn_from_qp(prob, gamma)?;
    let cfg = PgdConfig::exact_iters(gamma, iters);
    let mut max_dev: f64 = 0.0;
    for _ in 0..trials {
        let x0 = rng.uniform_vec(prob.n(), -10.0, 10.0);
        let solver = pgd_solve(prob, &x0, &cfg)?;
        let unrolled = rnn_unroll(&layer, &x0, iters);
        assert_eq!(solver.iterates.len(), unrolled.iterates.len());
        for (a, b) in solver.iterates.iter().zip(&unrolled.iterates) {
            max_dev = max_dev.max(a.max_abs_diff(b));
        }
    }
    Ok(max_dev)
}

fn solve_free_subsystem(p: &Mat64, rhs: &[f64], free: &[usize]) -> Option<Vec<f64>> {
    match free.len() {
        0 => Some(vec![]),
        1 => {
            let a = p[(free[0], free[0])];
            if a == 0.0 {
                None
            } else {
                Some(vec![rhs[0] / a])
            }
        }
        2 => {
            let (i, j) = (free[0], free[1]);
            let (a, b, c, d) = (p[(i, i)], p[(i, j)], p[(j, i)], p[(j, j)]);
            let det = a * d - b * c;
            if det == 0.0 {
                None
            } else {
                Some(vec![
                    (rhs[0] * d - b * rhs[1]) / det,
                    (a * rhs[1] - rhs[0] * c) / det,
                ])
            }
        }
        _ => unreachable!("brute force is limited to n <= 2"),
    }
}

/// Independent optimum oracle for tiny problems: enumerates every active-set
/// combination, solves the free coordinates in closed form, filters for
/// feasibility, and returns the candidate with the lowest objective.
pub fn brute_force_qp(prob: &QpProblem) -> Result<Vec64, SolveError> {
    let n = prob.n();
    if n > 2 {
        return Err(SolveError::UnsupportedBruteForce);
    }
    let bounds: Vec<(f64, f64)> = match &prob.set {
        FeasibleSet::Orthant => (0..n).map(|_| (0.0, f64::INFINITY)).collect(),
        FeasibleSet::Box { lo, hi } => (0..n).map(|i| (lo[i], hi[i])).collect(),
        FeasibleSet::Cone(_) => return Err(SolveError::UnsupportedBruteForce),
    };
    const SLACK: f64 = 1e-12;

    // Per-coordinate status: 0 = free, 1 = at lower bound, 2 = at upper bound.
    let statuses_per_coord = 3usize;
    let mut best: Option<(f64, Vec64)> = None;
    for combo in 0..statuses_per_coord.pow(n as u32) {
        let mut status = Vec::with_capacity(n);
        let mut rem = combo;
        for _ in 0..n {
            status.push(rem % statuses_per_coord);
            rem /= statuses_per_coord;
        }
        if status
            .iter()
            .zip(&bounds)
            .any(|(&s, &(_, hi))| s == 2 && !hi.is_finite())
        {
            continue;
        }
        let free: Vec<usize> = (0..n).filter(|&i| status[i] == 0).collect();
        let mut x = vec![0.0; n];
        for i in 0..n {
            match status[i] {
                1 => x[i] = bounds[i].0,
                2 => x[i] = bounds[i].1,
                _ => {}
            }
        }
        // Stationarity on the free block: P_ff x_f = -(q_f + P_fk x_k).
        let rhs: Vec<f64> = free
            .iter()
            .map(|&i| {
                let mut v = -prob.q[i];
                for k in 0..n {
                    if status[k] != 0 {
                        v -= prob.p[(i, k)] * x[k];
                    }
                }
                v
            })
            .collect();
        let Some(xf) = solve_free_subsystem(&prob.p, &rhs, &free) else {
            continue;
        };
        for (&i, &v) in free.iter().zip(&xf) {
            x[i] = v;
        }
        if (0..n).any(|i| x[i] < bounds[i].0 - SLACK || x[i] > bounds[i].1 + SLACK) {
            continue;
        }
        let candidate = Vec64::new(x);
        let obj = prob.objective(&candidate);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, candidate));
        }
    }
    Ok(best
        .expect("at least one active-set candidate is feasible")
        .1)
}

/// JSON form of a problem instance, the format consumed by the CLI.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub set: SetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Orthant,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Cone { m: usize, tan_alpha: f64 },
}

impl ProblemSpec {
    pub fn to_problem(&self) -> Result<(QpProblem, Option<f64>), SolveError> {
        if self.p.len() != self.n * self.n {
            return Err(SolveError::Dimension(format!(
                "P has {} entries, expected n*n = {}",
                self.p.len(),
                self.n * self.n
            )));
        }
        if self.q.len() != self.n {
            return Err(SolveError::Dimension(format!(
                "q has {} entries, expected n = {}",
                self.q.len(),
                self.n
            )));
        }
        let set = match &self.set {
            SetSpec::Orthant => FeasibleSet::Orthant,
            SetSpec::Box { lo, hi } => FeasibleSet::Box {
                lo: Vec64::from_slice(lo),
                hi: Vec64::from_slice(hi),
            },
            SetSpec::Cone { m, tan_alpha } => {
                FeasibleSet::Cone(ConeSpec::with_tan_alpha(*m, *tan_alpha)?)
            }
        };
        let prob = QpProblem::new(
            Mat64::new(self.n, self.n, self.p.clone()),
            Vec64::from_slice(&self.q),
            set,
        )?;
        Ok((prob, self.gamma))
    }

    pub fn from_problem(prob: &QpProblem, gamma: Option<f64>) -> Self {
        let set = match prob.set() {
            FeasibleSet::Orthant => SetSpec::Orthant,
            FeasibleSet::Box { lo, hi } => SetSpec::Box {
                lo: lo.as_slice().to_vec(),
                hi: hi.as_slice().to_vec(),
            },
            FeasibleSet::Cone(spec) => SetSpec::Cone {
                m: spec.m(),
                tan_alpha: spec.tan_alpha(),
            },
        };
        ProblemSpec {
            n: prob.n(),
            p: prob.p().as_slice().to_vec(),
            q: prob.q().as_slice().to_vec(),
            set,
            gamma,
        }
    }
}
