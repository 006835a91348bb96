//! Chinchilla-form parametric loss and the derivation linking the quality
//! factor to the model scaling exponent, in executable form.
//!
//! ```text
//! L(N, D) = E + A / N^alpha + B / D^beta
//! a = beta / (alpha + beta),  b = alpha / (alpha + beta),  eta = alpha + beta
//! L(N, D) = E + A / N^((1 - a) eta) + B / D^(a eta)
//! ```
//!
//! For a meta-model pair with sizes `N_p < N_q` the quality factor implied by
//! the loss surface is `d = 2^(L(N_p) - L(N_q))`. On the region where
//! `1 + (a - 1) eta ln N < 0` for every `N` in `[N_p, N_q]`, `d` is strictly
//! increasing in `a`; [`verify_monotonic_d_in_a`] checks that on a grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_FLOPS_PER_TOKEN_PER_PARAM: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("numeric-range: {0}")]
    NumericRange(String),
    #[error("invalid-exponent: {0}")]
    InvalidExponent(String),
    #[error("invalid-secant: need 0 < N_p ({n_p}) < N_q ({n_q})")]
    InvalidSecant { n_p: f64, n_q: f64 },
    #[error("condition-region-violated at a = {a}, N = {n}: 1 + (a - 1) eta ln N = {bracket} >= 0")]
    ConditionRegionViolated { a: f64, n: f64, bracket: f64 },
    #[error("duplicate-size: N = {0}")]
    DuplicateSize(f64),
    #[error("need at least two measured points")]
    TooFewPoints,
    #[error("allocation-no-converge: {0}")]
    AllocationNoConverge(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl ScalingError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NumericRange(_) => "numeric-range",
            Self::InvalidExponent(_) => "invalid-exponent",
            Self::InvalidSecant { .. } => "invalid-secant",
            Self::ConditionRegionViolated { .. } => "condition-region-violated",
            Self::DuplicateSize(_) => "duplicate-size",
            Self::TooFewPoints => "too-few-points",
            Self::AllocationNoConverge(_) => "allocation-no-converge",
            Self::InvalidParams(_) => "invalid-params",
        }
    }
}

fn finite(x: f64, what: &str) -> Result<f64, ScalingError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ScalingError::NumericRange(format!("{what} = {x}")))
    }
}

fn positive(x: f64, what: &str) -> Result<(), ScalingError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ScalingError::InvalidParams(format!("{what} must be finite and > 0, got {x}")))
    }
}

fn nonnegative(x: f64, what: &str) -> Result<(), ScalingError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(ScalingError::InvalidParams(format!("{what} must be finite and >= 0, got {x}")))
    }
}

/// `(a, b) = (beta / (alpha + beta), alpha / (alpha + beta))`.
pub fn exponents(alpha: f64, beta: f64) -> Result<(f64, f64), ScalingError> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(ScalingError::InvalidExponent(format!("alpha = {alpha}, beta = {beta}")));
    }
    let eta = alpha + beta;
    Ok((beta / eta, alpha / eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLawParams {
    pub e: f64,
    pub a_coef: f64,
    pub b_coef: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ScalingLawParams {
    pub fn new(e: f64, a_coef: f64, b_coef: f64, alpha: f64, beta: f64) -> Result<Self, ScalingError> {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(ScalingError::InvalidParams(format!("E must be >= 0, got {e}")));
        }
        nonnegative(a_coef, "A")?;
        nonnegative(b_coef, "B")?;
        exponents(alpha, beta)?;
        Ok(Self { e, a_coef, b_coef, alpha, beta })
    }

    /// Builds parameters from the model exponent `a` and `eta = alpha + beta`.
    pub fn from_exponent(e: f64, a_coef: f64, b_coef: f64, a: f64, eta: f64) -> Result<Self, ScalingError> {
        check_a_eta(a, eta)?;
        Self::new(e, a_coef, b_coef, (1.0 - a) * eta, a * eta)
    }

    pub fn a(&self) -> f64 {
        self.beta / self.eta()
    }

    pub fn b(&self) -> f64 {
        self.alpha / self.eta()
    }

    pub fn eta(&self) -> f64 {
        self.alpha + self.beta
    }

    /// The `(E, A, B, a, eta)` view used by the reparameterized formulas.
    pub fn reparam(&self) -> Reparam {
        Reparam {
            e: self.e,
            a_coef: self.a_coef,
            b_coef: self.b_coef,
            a: self.a(),
            eta: self.eta(),
        }
    }
}

/// Loss parameters expressed through the model scaling exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reparam {
    pub e: f64,
    pub a_coef: f64,
    pub b_coef: f64,
    pub a: f64,
    pub eta: f64,
}

fn check_a_eta(a: f64, eta: f64) -> Result<(), ScalingError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(ScalingError::InvalidExponent(format!("a = {a} not in (0, 1)")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(ScalingError::InvalidExponent(format!("eta = {eta} must be > 0")));
    }
    Ok(())
}

/// `E + A / N^alpha + B / D^beta`.
pub fn expected_loss(p: &ScalingLawParams, n: f64, d: f64) -> Result<f64, ScalingError> {
    positive(n, "N")?;
    positive(d, "D")?;
    finite(p.e + p.a_coef * n.powf(-p.alpha) + p.b_coef * d.powf(-p.beta), "loss")
}

/// `E + A / N^((1 - a) eta) + B / D^(a eta)`.
pub fn reparam_loss(r: &Reparam, n: f64, d: f64) -> Result<f64, ScalingError> {
    check_a_eta(r.a, r.eta)?;
    positive(n, "N")?;
    positive(d, "D")?;
    let model_term = r.a_coef * n.powf((r.a - 1.0) * r.eta);
    let data_term = r.b_coef * d.powf(-r.a * r.eta);
    finite(r.e + model_term + data_term, "loss")
}

/// `dL/dN = A (a - 1) eta N^((a - 1) eta - 1)`, negative for valid parameters.
pub fn dl_dn(r: &Reparam, n: f64) -> Result<f64, ScalingError> {
    check_a_eta(r.a, r.eta)?;
    positive(n, "N")?;
    let x = (r.a - 1.0) * r.eta;
    finite(r.a_coef * x * n.powf(x - 1.0), "dL/dN")
}

/// `1 + (a - 1) eta ln N`; the mixed partial is negative exactly where this is.
pub fn bracket(a: f64, eta: f64, n: f64) -> f64 {
    1.0 + (a - 1.0) * eta * n.ln()
}

/// `d2L/(da dN) = A eta N^((a - 1) eta - 1) [1 + (a - 1) eta ln N]`.
pub fn d2l_dadn(a_coef: f64, a: f64, eta: f64, n: f64) -> Result<f64, ScalingError> {
    check_a_eta(a, eta)?;
    positive(n, "N")?;
    let x = (a - 1.0) * eta;
    finite(a_coef * eta * n.powf(x - 1.0) * bracket(a, eta, n), "d2L/dadN")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecantAnalysis {
    pub n_p: f64,
    pub n_q: f64,
    pub d: f64,
    pub loss_p: f64,
    pub loss_q: f64,
    /// `(L_q - L_p) / (N_q - N_p)`.
    pub slope: f64,
    /// `2^(L_p - L_q)`.
    pub d_model: f64,
}

/// `L(N_p) - L(N_q)` from the model term alone (the data term cancels),
/// via `expm1` so the difference keeps its precision as `N_q -> N_p`.
fn loss_drop(r: &Reparam, n_p: f64, n_q: f64) -> f64 {
    let x = (r.a - 1.0) * r.eta;
    let gap_ln = ((n_q - n_p) / n_p).ln_1p();
    -r.a_coef * n_p.powf(x) * (x * gap_ln).exp_m1()
}

pub fn secant_slope(r: &Reparam, n_p: f64, n_q: f64, d: f64) -> Result<SecantAnalysis, ScalingError> {
    check_a_eta(r.a, r.eta)?;
    if !(n_p > 0.0 && n_q > n_p && n_q.is_finite()) {
        return Err(ScalingError::InvalidSecant { n_p, n_q });
    }
    let loss_p = reparam_loss(r, n_p, d)?;
    let loss_q = reparam_loss(r, n_q, d)?;
    let drop = loss_drop(r, n_p, n_q);
    let slope = finite(-drop / (n_q - n_p), "secant slope")?;
    Ok(SecantAnalysis {
        n_p,
        n_q,
        d,
        loss_p,
        loss_q,
        slope,
        d_model: drop.exp2(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub e: f64,
    pub a_coef: f64,
    pub b_coef: f64,
    pub eta: f64,
    pub n_p: f64,
    pub n_q: f64,
    pub d: f64,
    pub a_grid: Vec<f64>,
    pub d_model: Vec<f64>,
    pub slopes: Vec<f64>,
    pub strictly_increasing: bool,
    pub pass: bool,
}

/// Evaluates `d_model(a)` along `a_grid` and checks strict monotonicity.
/// Every grid point must satisfy `1 + (a - 1) eta ln N_p < 0`; the bracket
/// only decreases with `N`, so that covers all of `[N_p, N_q]`.
#[allow(clippy::too_many_arguments)]
pub fn verify_monotonic_d_in_a(
    e: f64,
    a_coef: f64,
    b_coef: f64,
    eta: f64,
    n_p: f64,
    n_q: f64,
    d: f64,
    a_grid: &[f64],
) -> Result<MonotonicityReport, ScalingError> {
    if a_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScalingError::InvalidParams("a_grid must be strictly ascending".into()));
    }
    for &a in a_grid {
        check_a_eta(a, eta)?;
        let b = bracket(a, eta, n_p);
        if b >= 0.0 {
            return Err(ScalingError::ConditionRegionViolated { a, n: n_p, bracket: b });
        }
    }
    let mut d_model = Vec::with_capacity(a_grid.len());
    let mut slopes = Vec::with_capacity(a_grid.len());
    for &a in a_grid {
        let r = Reparam { e, a_coef, b_coef, a, eta };
        let s = secant_slope(&r, n_p, n_q, d)?;
        d_model.push(s.d_model);
        slopes.push(s.slope);
    }
    let strictly_increasing = d_model.windows(2).all(|w| w[1] > w[0]);
    Ok(MonotonicityReport {
        e,
        a_coef,
        b_coef,
        eta,
        n_p,
        n_q,
        d,
        a_grid: a_grid.to_vec(),
        d_model,
        slopes,
        strictly_increasing,
        pass: strictly_increasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredPoint {
    pub label: String,
    pub n: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecantRow {
    pub small: String,
    pub large: String,
    pub n_small: f64,
    pub n_large: f64,
    pub loss_small: f64,
    pub loss_large: f64,
    pub slope: f64,
    /// `2^(L_small - L_large)`.
    pub quality_factor: f64,
}

/// All pairwise secants between measured (size, mean loss) points, with the
/// smaller model first in each row. Rows are ordered by the input order of
/// the smaller, then the larger point.
pub fn loss_vs_size_report(points: &[MeasuredPoint]) -> Result<Vec<SecantRow>, ScalingError> {
    if points.len() < 2 {
        return Err(ScalingError::TooFewPoints);
    }
    for (i, p) in points.iter().enumerate() {
        positive(p.n, "N")?;
        if points[..i].iter().any(|q| q.n == p.n) {
            return Err(ScalingError::DuplicateSize(p.n));
        }
    }
    let mut rows = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (s, l) = if points[i].n < points[j].n {
                (&points[i], &points[j])
            } else {
                (&points[j], &points[i])
            };
            rows.push(SecantRow {
                small: s.label.clone(),
                large: l.label.clone(),
                n_small: s.n,
                n_large: l.n,
                loss_small: s.mean_loss,
                loss_large: l.mean_loss,
                slope: (l.mean_loss - s.mean_loss) / (l.n - s.n),
                quality_factor: (s.mean_loss - l.mean_loss).exp2(),
            });
        }
    }
    Ok(rows)
}

pub fn secant_table_text(rows: &[SecantRow]) -> String {
    let mut out = format!(
        "{:<16} {:<16} {:>14} {:>14} {:>12} {:>12} {:>14} {:>10}\n",
        "small", "large", "N_small", "N_large", "L_small", "L_large", "slope", "d"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:<16} {:>14.6e} {:>14.6e} {:>12.6} {:>12.6} {:>14.6e} {:>10.6}\n",
            r.small, r.large, r.n_small, r.n_large, r.loss_small, r.loss_large, r.slope, r.quality_factor
        ));
    }
    out
}

pub fn secant_table_csv(rows: &[SecantRow]) -> String {
    let mut out = String::from("small,large,n_small,n_large,loss_small,loss_large,slope,quality_factor\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.small, r.large, r.n_small, r.n_large, r.loss_small, r.loss_large, r.slope, r.quality_factor
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub compute: f64,
    pub n_opt: f64,
    pub d_opt: f64,
}

/// Minimizes `L(N, C / (k N))` over `N` for the compute constraint
/// `C = k N D`. In `x = ln N` the objective is convex with a derivative
/// that increases monotonically, so the minimizer is found by bracketing
/// the derivative's sign change and bisecting it to machine precision.
pub fn optimal_allocation(
    p: &ScalingLawParams,
    compute: f64,
    flops_per_token_per_param: f64,
) -> Result<Allocation, ScalingError> {
    positive(compute, "C")?;
    positive(flops_per_token_per_param, "flops per token per param")?;
    let tokens_times_params = compute / flops_per_token_per_param;
    let ln_c = tokens_times_params.ln();
    // d/dx [A e^{-alpha x} + B e^{-beta (ln_c - x)}]
    let slope_at = |x: f64| {
        -p.alpha * p.a_coef * (-p.alpha * x).exp() + p.beta * p.b_coef * (-p.beta * (ln_c - x)).exp()
    };
    let (mut lo, mut hi) = (ln_c / 2.0 - 1.0, ln_c / 2.0 + 1.0);
    let mut widened = 0;
    while slope_at(lo) >= 0.0 || slope_at(hi) <= 0.0 {
        lo -= 2.0 * (hi - lo);
        hi += 2.0 * (hi - lo);
        widened += 1;
        if widened > 60 || !lo.is_finite() || !hi.is_finite() {
            return Err(ScalingError::AllocationNoConverge(format!("no bracket for C = {compute}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = slope_at(mid);
        if !s.is_finite() {
            return Err(ScalingError::AllocationNoConverge(format!("non-finite slope at ln N = {mid}")));
        }
        if s < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let n_opt = x.exp();
    let d_opt = (ln_c - x).exp();
    if !(n_opt.is_finite() && d_opt.is_finite() && n_opt > 0.0 && d_opt > 0.0) {
        return Err(ScalingError::AllocationNoConverge(format!("degenerate optimum for C = {compute}")));
    }
    Ok(Allocation { compute, n_opt, d_opt })
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawRecovery {
    pub allocations: Vec<Allocation>,
    pub fitted_a: f64,
    pub fitted_b: f64,
    pub a: f64,
    pub b: f64,
}

/// Sweeps compute over `[c_min, c_max]` (log-spaced, `steps` points) and
/// fits the log-log slopes of `N_opt` and `D_opt`.
pub fn power_law_recovery(
    p: &ScalingLawParams,
    c_min: f64,
    c_max: f64,
    steps: usize,
    flops_per_token_per_param: f64,
) -> Result<PowerLawRecovery, ScalingError> {
    if steps < 2 || !(c_max > c_min) {
        return Err(ScalingError::InvalidParams("need steps >= 2 and c_max > c_min".into()));
    }
    let (l0, l1) = (c_min.ln(), c_max.ln());
    let allocations = (0..steps)
        .map(|i| {
            let c = (l0 + (l1 - l0) * i as f64 / (steps - 1) as f64).exp();
            optimal_allocation(p, c, flops_per_token_per_param)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let lc: Vec<f64> = allocations.iter().map(|a| a.compute.ln()).collect();
    let ln_n: Vec<f64> = allocations.iter().map(|a| a.n_opt.ln()).collect();
    let ln_d: Vec<f64> = allocations.iter().map(|a| a.d_opt.ln()).collect();
    Ok(PowerLawRecovery {
        fitted_a: fit_slope(&lc, &ln_n),
        fitted_b: fit_slope(&lc, &ln_d),
        a: p.a(),
        b: p.b(),
        allocations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chin() -> ScalingLawParams {
        ScalingLawParams::new(1.69, 406.4, 410.7, 0.34, 0.28).unwrap()
    }

    #[test]
    fn degenerate_terms() {
        let flat = ScalingLawParams::new(2.5, 0.0, 0.0, 0.34, 0.28).unwrap();
        for (n, d) in [(1.0, 1.0), (10.0, 1e3), (1e12, 1e15)] {
            assert_eq!(expected_loss(&flat, n, d).unwrap(), 2.5);
        }
        let p = ScalingLawParams::new(0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!((expected_loss(&p, 4.0, 9.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(ScalingLawParams::new(0.0, -1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(exponents(0.3, 0.3).unwrap(), (0.5, 0.5));
        let (a, b) = exponents(0.34, 0.28).unwrap();
        assert!((a - 0.28 / 0.62).abs() < 1e-15);
        assert!((a - 0.451_613).abs() < 1e-6);
        assert!((b - 0.548_387).abs() < 1e-6);
        assert!((a + b - 1.0).abs() < 1e-15);
        assert_eq!(exponents(0.0, 1.0).unwrap_err().code(), "invalid-exponent");
    }

    #[test]
    fn reparam_matches_original() {
        let p = chin();
        for (n, d) in [(1e6, 1e9), (1e9, 1e10), (3e11, 2e12)] {
            let l1 = expected_loss(&p, n, d).unwrap();
            let l2 = reparam_loss(&p.reparam(), n, d).unwrap();
            assert!((l1 - l2).abs() <= 1e-12 * l1);
        }
        let half = ScalingLawParams::from_exponent(1.0, 2.0, 3.0, 0.5, 2.0).unwrap();
        assert_eq!((half.alpha, half.beta), (1.0, 1.0));
    }

    #[test]
    fn derivative_sign_and_zero() {
        let r = chin().reparam();
        assert!(dl_dn(&r, 1e9).unwrap() < 0.0);
        let flat = Reparam { a_coef: 0.0, ..r };
        assert_eq!(dl_dn(&flat, 1e9).unwrap(), 0.0);
    }

    #[test]
    fn bracket_boundary() {
        // (a - 1) eta ln N < -1 gives a negative mixed partial.
        assert!(d2l_dadn(406.4, 0.5, 0.6, 1e9).unwrap() < 0.0);
        // For N = 2 the bracket is 1 - 0.3 ln 2 > 0.
        assert!(bracket(0.5, 0.6, 2.0) > 0.0);
        assert!(d2l_dadn(406.4, 0.5, 0.6, 2.0).unwrap() > 0.0);
    }

    #[test]
    fn secant_signs_and_identity() {
        let r = chin().reparam();
        let s = secant_slope(&r, 1.24e8, 7.74e8, 1e10).unwrap();
        assert!(s.slope < 0.0);
        assert!(s.d_model > 1.0);
        let implied = (-s.slope * (s.n_q - s.n_p)).exp2();
        assert!((implied - s.d_model).abs() <= 1e-12 * s.d_model);
        let direct = (s.loss_p - s.loss_q).exp2();
        assert!((direct - s.d_model).abs() <= 1e-12 * s.d_model);
        assert_eq!(secant_slope(&r, 5.0, 5.0, 1.0).unwrap_err().code(), "invalid-secant");
    }

    #[test]
    fn monotone_grid_guard() {
        let grid = [0.3, 0.5];
        let e = verify_monotonic_d_in_a(1.69, 406.4, 410.7, 0.6, 2.0, 10.0, 1e10, &grid).unwrap_err();
        assert_eq!(e.code(), "condition-region-violated");
        let one = verify_monotonic_d_in_a(1.69, 406.4, 410.7, 0.6, 1e8, 1e9, 1e10, &[0.4]).unwrap();
        assert!(one.pass);
    }

    #[test]
    fn size_report_rows() {
        let pts = |v: &[(f64, f64)]| -> Vec<MeasuredPoint> {
            v.iter()
                .enumerate()
                .map(|(i, &(n, l))| MeasuredPoint { label: format!("m{i}"), n, mean_loss: l })
                .collect()
        };
        let flat = loss_vs_size_report(&pts(&[(1.0, 3.0), (2.0, 3.0)])).unwrap();
        assert_eq!(flat[0].slope, 0.0);
        assert_eq!(flat[0].quality_factor, 1.0);
        assert_eq!(loss_vs_size_report(&pts(&[(1.0, 3.0), (2.0, 2.0), (4.0, 1.5)])).unwrap().len(), 3);
        assert_eq!(
            loss_vs_size_report(&pts(&[(1.0, 3.0), (1.0, 2.0)])).unwrap_err().code(),
            "duplicate-size"
        );
    }

    #[test]
    fn allocation_ignores_e_and_follows_half_for_symmetric() {
        let p = ScalingLawParams::new(0.0, 400.0, 400.0, 0.3, 0.3).unwrap();
        let q = ScalingLawParams { e: 5.0, ..p };
        let a1 = optimal_allocation(&p, 1e21, 6.0).unwrap();
        let a2 = optimal_allocation(&q, 1e21, 6.0).unwrap();
        assert_eq!(a1, a2);
        // Equal coefficients and exponents put the optimum at N = D.
        assert!((a1.n_opt / a1.d_opt - 1.0).abs() < 1e-9);
        let rec = power_law_recovery(&p, 1e18, 1e22, 9, 6.0).unwrap();
        assert!((rec.fitted_a - 0.5).abs() < 1e-9);
    }
}
