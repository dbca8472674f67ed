//! Scalar numerical kernels: bracketed root finding and central finite
//! differences.
//!
//! Every function here is pure. Function arguments signal evaluation failure
//! by returning a non-finite value, which surfaces as
//! [`NumericsError::EvalFailure`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {iterations} iterations (best x = {best}, |f| = {residual})")]
    MaxIterations { iterations: usize, best: f64, residual: f64 },
    #[error("function not evaluable at x = {x}")]
    EvalFailure { x: f64 },
    #[error("invalid tolerance `{name}` = {value}")]
    InvalidTolerance { name: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Stopping rules shared by the solvers and finite-difference helpers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Accept a root once `|f(x)|` drops to this level.
    pub residual_tol: f64,
    /// Accept a root once the bracket is this narrow (absolute, on top of a
    /// few ulps of relative slack).
    pub step_tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Apply one level of Richardson extrapolation to central differences.
    pub richardson: bool,
    /// Allowed relative mismatch in consistency checks such as
    /// `T0(x, x, q) / (1 - q) == T(x)`.
    pub consistency_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            step_tol: 1e-12,
            max_iter: 200,
            fd_step: 1e-6,
            richardson: true,
            consistency_tol: 1e-9,
        }
    }
}

impl Tolerances {
    /// Tolerances that drive a bracketed solve down to adjacent floating
    /// point numbers. Used for inner solves that are later differentiated
    /// numerically, where a loose root would swamp the difference quotient.
    pub fn machine() -> Self {
        Self { residual_tol: f64::MIN_POSITIVE, step_tol: f64::MIN_POSITIVE, max_iter: 400, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("residual_tol", self.residual_tol),
            ("step_tol", self.step_tol),
            ("fd_step", self.fd_step),
            ("consistency_tol", self.consistency_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(NumericsError::InvalidTolerance { name, value });
            }
        }
        if self.max_iter == 0 {
            return Err(NumericsError::InvalidTolerance { name: "max_iter", value: 0.0 });
        }
        Ok(())
    }
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(NumericsError::EvalFailure { x })
    }
}

/// Brent's method on `[lo, hi]` (inverse quadratic interpolation and secant
/// steps, safeguarded by bisection).
///
/// The returned point always lies inside the initial bracket. A degenerate
/// bracket `lo == hi` is accepted when `f(lo) == 0`.
pub fn find_root_bracketed<F>(f: F, lo: f64, hi: f64, tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    tol.validate()?;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = eval(&f, a)?;
    let mut fb = eval(&f, b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::NoBracket { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }

    // b is the best estimate, a the previous one, c the contrapoint.
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let slack = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.step_tol;
        let half = 0.5 * (c - b);
        if fb.abs() <= tol.residual_tol || half.abs() <= slack {
            return Ok(b);
        }
        if e.abs() >= slack && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * half * s, 1.0 - s)
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                (s * (2.0 * half * q0 * (q0 - r) - (b - a) * (r - 1.0)), (q0 - 1.0) * (r - 1.0) * (s - 1.0))
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * half * q - (slack * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > slack { d } else { slack.copysign(half) };
        fb = eval(&f, b)?;
    }
    Err(NumericsError::MaxIterations { iterations: tol.max_iter, best: b, residual: fb.abs() })
}

fn step_for(x: f64, h: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Plain two-point central difference with step `h * max(1, |x|)`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> Result<f64> {
    let dx = step_for(x, h);
    let up = eval(&f, x + dx)?;
    let down = eval(&f, x - dx)?;
    Ok((up - down) / (2.0 * dx))
}

/// Central difference with one Richardson level, combining steps `Δ` and
/// `Δ/2` to cancel the leading `O(Δ²)` error term.
pub fn central_diff_richardson<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> Result<f64> {
    let coarse = central_diff(&f, x, h)?;
    let fine = central_diff(&f, x, 0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Derivative using the scheme selected in `tol`.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, tol: &Tolerances) -> Result<f64> {
    if tol.richardson {
        central_diff_richardson(f, x, tol.fd_step)
    } else {
        central_diff(f, x, tol.fd_step)
    }
}

/// Both first partials of `f` at `(x, y)`, each by central differences with
/// the other argument held fixed. The same relative step is used for both.
pub fn cross_partial_fd<F>(f: F, x: f64, y: f64, h: f64) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64,
{
    let dx = central_diff(|t| f(t, y), x, h)?;
    let dy = central_diff(|t| f(x, t), y, h)?;
    Ok((dx, dy))
}

/// [`cross_partial_fd`] with the differencing scheme chosen by `tol`.
pub fn partials<F>(f: F, x: f64, y: f64, tol: &Tolerances) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64,
{
    let dx = derivative(|t| f(t, y), x, tol)?;
    let dy = derivative(|t| f(x, t), y, tol)?;
    Ok((dx, dy))
}
