//! Catalog of closed-form scalar proximal operators paired with their
//! potential functions, a brute-force one-dimensional prox oracle, and
//! numeric Moreau envelopes.
//!
//! Every catalog entry carries the potential `g` whose prox it claims to be,
//! so the closed forms can be checked against `prox_oracle` without trusting
//! any of the algebra. Multivariate projections (orthant, box, cone) live in
//! `coneproj`; the entries here are all scalar.

use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("potential {0} is +inf everywhere on its bracket")]
    EmptyDomain(String),
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
}

/// Number of coarse grid points scanned before golden-section refinement.
pub const COARSE_GRID: usize = 10_000;
/// Default golden-section interval target.
pub const DEFAULT_PROX_TOL: f64 = 1e-7;
/// Open-domain potentials are evaluated this far inside their edges.
const EDGE_MARGIN: f64 = 1e-9;

/// A proper scalar potential: finite on (part of) `[lo, hi]`, `+inf` outside.
#[derive(Clone)]
pub struct Potential {
    name: String,
    lo: f64,
    hi: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Potential {
    pub fn new(
        name: impl Into<String>,
        bracket: (f64, f64),
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let (lo, hi) = bracket;
        assert!(lo < hi, "bracket must be a nonempty interval");
        Potential {
            name: name.into(),
            lo,
            hi,
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bracket(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Extended-real value: `+inf` outside the bracket.
    pub fn value(&self, y: f64) -> f64 {
        if y < self.lo || y > self.hi {
            f64::INFINITY
        } else {
            (self.eval)(y)
        }
    }

    /// The potential scaled by `c > 0` (indicators are fixed points).
    pub fn scaled(&self, c: f64) -> Potential {
        assert!(c > 0.0);
        let inner = Arc::clone(&self.eval);
        Potential {
            name: format!("{}*{}", c, self.name),
            lo: self.lo,
            hi: self.hi,
            eval: Arc::new(move |y| c * inner(y)),
        }
    }

    /// Indicator of the nonnegative half-line, truncated at `hi` for search.
    pub fn indicator_nonneg(hi: f64) -> Potential {
        Potential::new("indicator_nonneg", (0.0, hi), |_| 0.0)
    }

    /// Indicator of the box `[lo, hi]`.
    pub fn indicator_box(lo: f64, hi: f64) -> Potential {
        Potential::new("indicator_box", (lo, hi), |_| 0.0)
    }

    /// Absolute value with a finite search window.
    pub fn abs(window: f64) -> Potential {
        Potential::new("abs", (-window, window), |y: f64| y.abs())
    }
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("bracket", &(self.lo, self.hi))
            .finish()
    }
}

/// A named closed-form prox paired with the potential it minimizes.
#[derive(Clone)]
pub struct ProxEntry {
    name: &'static str,
    closed: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub potential: Potential,
}

impl ProxEntry {
    fn new(
        name: &'static str,
        closed: impl Fn(f64) -> f64 + Send + Sync + 'static,
        potential: Potential,
    ) -> Self {
        ProxEntry {
            name,
            closed: Arc::new(closed),
            potential,
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn closed_form(&self, x: f64) -> f64 {
        (self.closed)(x)
    }
}

fn golden_min(mut lo: f64, mut hi: f64, arg_tol: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > arg_tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Grid scan over the bracket followed by golden-section refinement.
/// Returns the approximate minimizer; errors when `obj` is `+inf` everywhere.
fn grid_refine_min(
    lo: f64,
    hi: f64,
    arg_tol: f64,
    name: &str,
    obj: &dyn Fn(f64) -> f64,
) -> Result<f64, ProxError> {
    let step = (hi - lo) / COARSE_GRID as f64;
    let mut best_val = f64::INFINITY;
    let mut best_y = f64::NAN;
    for i in 0..=COARSE_GRID {
        let y = lo + step * i as f64;
        let v = obj(y);
        if v < best_val {
            best_val = v;
            best_y = y;
        }
    }
    if !best_val.is_finite() {
        return Err(ProxError::EmptyDomain(name.to_string()));
    }
    let a = (best_y - step).max(lo);
    let b = (best_y + step).min(hi);
    Ok(golden_min(a, b, arg_tol, obj))
}

/// Brute-force prox: minimizes `g(y) + (y - x)^2 / 2` over `g`'s bracket.
pub fn prox_oracle(g: &Potential, x: f64, tol: f64) -> Result<f64, ProxError> {
    assert!(tol > 0.0);
    let (lo, hi) = g.bracket();
    grid_refine_min(lo, hi, tol, g.name(), &|y| {
        g.value(y) + 0.5 * (y - x) * (y - x)
    })
}

/// Numeric Moreau envelope `inf_v g(v) + (v - x)^2 / (2 lambda)`, computed by
/// the same grid-and-refine scheme as the prox oracle.
pub fn moreau_envelope(g: &Potential, lambda: f64, x: f64, tol: f64) -> Result<f64, ProxError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(ProxError::BadLambda(lambda));
    }
    let (lo, hi) = g.bracket();
    let obj = |v: f64| g.value(v) + (v - x) * (v - x) / (2.0 * lambda);
    let v = grid_refine_min(lo, hi, tol, g.name(), &obj)?;
    Ok(obj(v))
}

/// The convex mix `(f(x) + lambda x) / (lambda + 1)`.
pub fn leaky_of(
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    lambda: f64,
) -> impl Fn(f64) -> f64 + Send + Sync {
    assert!(lambda >= 0.0);
    move |x| (f(x) + lambda * x) / (lambda + 1.0)
}

/// Checks numerically that the prox of the Moreau envelope `M_{lambda g}`
/// equals the leaky version of `Prox_{(lambda+1) g}`.
///
/// The left side nests two minimizations: the envelope keeps the usual
/// grid-and-refine budget, while the outer prox runs golden section alone
/// (the objective is strictly convex, so no coarse scan is needed and the
/// nested search stays cheap). Returns the largest `|lhs - rhs|` over the
/// samples.
pub fn verify_leaky_theorem(
    g: &Potential,
    lambda: f64,
    samples: &[f64],
    tol: f64,
) -> Result<f64, ProxError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(ProxError::BadLambda(lambda));
    }
    let scaled = g.scaled(lambda + 1.0);
    let mut max_err: f64 = 0.0;
    for &x in samples {
        let f_x = prox_oracle(&scaled, x, tol)?;
        let rhs = (f_x + lambda * x) / (lambda + 1.0);

        let (g_lo, g_hi) = g.bracket();
        let lo = x.min(g_lo) - 1.0;
        let hi = x.max(g_hi) + 1.0;
        let obj = |y: f64| match moreau_envelope(g, lambda, y, tol) {
            Ok(m) => m + 0.5 * (y - x) * (y - x),
            Err(_) => f64::INFINITY,
        };
        let lhs = golden_min(lo, hi, tol.max(1e-7), &obj);
        if !obj(lhs).is_finite() {
            return Err(ProxError::EmptyDomain(g.name().to_string()));
        }
        max_err = max_err.max((lhs - rhs).abs());
    }
    Ok(max_err)
}

/// Width of the search window used for potentials whose effective domain is
/// unbounded.
const WINDOW: f64 = 64.0;

/// The shipped catalog: ReLU, Leaky ReLU, sigmoid, tanh, the unit soft
/// threshold, and the hard sigmoid.
pub fn catalog() -> Vec<ProxEntry> {
    let sigmoid_potential = Potential::new("sigmoid_potential", (0.0, 1.0), |y: f64| {
        let yc = y.clamp(EDGE_MARGIN, 1.0 - EDGE_MARGIN);
        yc * yc.ln() + (1.0 - yc) * (1.0 - yc).ln() - 0.5 * yc * yc
    });
    let tanh_potential = Potential::new("tanh_potential", (-1.0, 1.0), |y: f64| {
        let yc = y.clamp(-1.0 + EDGE_MARGIN, 1.0 - EDGE_MARGIN);
        yc * yc.atanh() + 0.5 * ((1.0 - yc * yc).ln() - yc * yc)
    });
    // Envelope of the half-line indicator at lambda = 1/99; its prox is the
    // standard slope-0.01 Leaky ReLU.
    let leaky_relu_potential =
        Potential::new("leaky_relu_potential", (-WINDOW, WINDOW), |y: f64| {
            let neg = y.min(0.0);
            49.5 * neg * neg
        });

    vec![
        ProxEntry::new("relu", |x| x.max(0.0), Potential::indicator_nonneg(WINDOW)),
        ProxEntry::new(
            "leaky_relu",
            |x| 0.99 * x.max(0.0) + 0.01 * x,
            leaky_relu_potential,
        ),
        ProxEntry::new("sigmoid", |x| 1.0 / (1.0 + (-x).exp()), sigmoid_potential),
        ProxEntry::new("tanh", |x| x.tanh(), tanh_potential),
        ProxEntry::new(
            "soft_threshold",
            |x| x.signum() * (x.abs() - 1.0).max(0.0),
            Potential::abs(WINDOW),
        ),
        ProxEntry::new(
            "hard_sigmoid",
            |x| x.clamp(-1.0, 1.0),
            Potential::indicator_box(-1.0, 1.0),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_known_minimizers() {
        let relu = Potential::indicator_nonneg(WINDOW);
        assert!(prox_oracle(&relu, -2.0, DEFAULT_PROX_TOL).unwrap().abs() < 1e-6);

        let abs = Potential::abs(WINDOW);
        let y = prox_oracle(&abs, 2.5, DEFAULT_PROX_TOL).unwrap();
        assert!((y - 1.5).abs() < 1e-6, "soft threshold gave {y}");

        let sigmoid = catalog()
            .into_iter()
            .find(|e| e.name() == "sigmoid")
            .unwrap();
        let y = prox_oracle(&sigmoid.potential, 0.0, DEFAULT_PROX_TOL).unwrap();
        assert!(
            (y - 0.5).abs() < 1e-6,
            "sigma(0) should be 0.5, oracle gave {y}"
        );
    }

    #[test]
    fn oracle_rejects_empty_domain() {
        let empty = Potential::new("empty", (-1.0, 1.0), |_| f64::INFINITY);
        assert!(matches!(
            prox_oracle(&empty, 0.0, DEFAULT_PROX_TOL),
            Err(ProxError::EmptyDomain(_))
        ));
    }

    #[test]
    fn catalog_spot_checks() {
        let cat = catalog();
        assert_eq!(cat.len(), 6);

        let sigmoid = cat.iter().find(|e| e.name() == "sigmoid").unwrap();
        let y = sigmoid.closed_form(2.0);
        assert!((y - 0.8807970779778823).abs() < 1e-12);
        let oracle = prox_oracle(&sigmoid.potential, 2.0, DEFAULT_PROX_TOL).unwrap();
        assert!((y - oracle).abs() < 1e-4);

        let tanh = cat.iter().find(|e| e.name() == "tanh").unwrap();
        let y = tanh.closed_form(1.0);
        assert!((y - 0.7615941559557649).abs() < 1e-12);
        let oracle = prox_oracle(&tanh.potential, 1.0, DEFAULT_PROX_TOL).unwrap();
        assert!((y - oracle).abs() < 1e-4);

        let soft = cat.iter().find(|e| e.name() == "soft_threshold").unwrap();
        assert_eq!(soft.closed_form(0.3), 0.0);
        assert_eq!(soft.closed_form(-0.9), 0.0);

        // Exactness at zero for the logistic form.
        assert_eq!(sigmoid.closed_form(0.0), 0.5);
    }

    #[test]
    fn moreau_envelope_known_values() {
        let relu = Potential::indicator_nonneg(WINDOW);
        let m = moreau_envelope(&relu, 1.0, -2.0, DEFAULT_PROX_TOL).unwrap();
        assert!((m - 2.0).abs() < 1e-6, "half squared distance, got {m}");
        for lambda in [0.25, 1.0, 4.0] {
            let m = moreau_envelope(&relu, lambda, 3.0, DEFAULT_PROX_TOL).unwrap();
            assert!(m.abs() < 1e-9, "feasible point should cost 0, got {m}");
        }

        // Huber value of |.| at 0.5.
        let abs = Potential::abs(WINDOW);
        let m = moreau_envelope(&abs, 1.0, 0.5, DEFAULT_PROX_TOL).unwrap();
        assert!((m - 0.125).abs() < 1e-6, "got {m}");

        assert!(matches!(
            moreau_envelope(&abs, 0.0, 0.5, DEFAULT_PROX_TOL),
            Err(ProxError::BadLambda(_))
        ));
    }

    #[test]
    fn envelope_below_potential() {
        let abs = Potential::abs(WINDOW);
        // Slack covers the oracle's first-order value error at the kink.
        for x in [-3.0, -0.4, 0.0, 0.7, 5.0] {
            let m = moreau_envelope(&abs, 0.5, x, DEFAULT_PROX_TOL).unwrap();
            assert!(m.is_finite());
            assert!(m <= abs.value(x) + 1e-6);
        }
    }

    #[test]
    fn leaky_of_basics() {
        let lr = leaky_of(|x: f64| x.max(0.0), 1.0 / 99.0);
        assert!((lr(-1.0) + 0.01).abs() < 1e-15);
        assert!((lr(2.0) - 2.0).abs() < 1e-15);

        let f0 = leaky_of(|x: f64| x.max(0.0), 0.0);
        for x in [-2.0, 0.0, 3.5] {
            assert_eq!(f0(x), x.max(0.0));
        }

        let id = leaky_of(|x: f64| x, 0.7);
        for x in [-2.0, 0.0, 3.5] {
            assert!((id(x) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn leaky_theorem_for_the_half_line_indicator() {
        // lambda = 1/99 reproduces 0.99 ReLU + 0.01 x.
        let g = Potential::indicator_nonneg(WINDOW);
        let samples: Vec<f64> = (0..21).map(|i| -5.0 + i as f64 * 0.5).collect();
        let err = verify_leaky_theorem(&g, 1.0 / 99.0, &samples, DEFAULT_PROX_TOL).unwrap();
        assert!(err <= 1e-3, "max deviation {err}");

        // And directly against the closed Leaky ReLU.
        let scaled = g.scaled(1.0 + 1.0 / 99.0);
        for &x in &samples {
            let f_x = prox_oracle(&scaled, x, DEFAULT_PROX_TOL).unwrap();
            let rhs = (f_x + x / 99.0) / (1.0 + 1.0 / 99.0);
            assert!((rhs - (0.99 * x.max(0.0) + 0.01 * x)).abs() < 1e-5);
        }
    }
}
