//! Nominal boundary values used as linearization points.
//!
//! Assuming the density change along the pipe is negligible at steady state,
//! integrating the momentum balance gives
//!
//! `p_r = p_l^{T_l/T_r} · exp(−λ L R_s z_0 T_r q|q| / (2 d A² p_r²) − g h / (R_s z_0 T_r))`,
//!
//! an implicit relation in `p_r` (the right velocity depends on `p_r`). The
//! friction exponent carries a negative sign so that pressure drops along
//! the flow direction; the friction head loss in that exponent is the
//! Darcy-Weisbach term `H_L = λ L v|v| / (2 d g)`. The first-order variant
//! replaces `exp(x)` by `1 + x`.

use crate::error::{Error, Result};
use crate::gas::{GasProperties, OperatingPoint, PipeParams, GRAVITY};

/// Relative residual at which the implicit relation counts as solved.
pub const TOLERANCE: f64 = 1e-12;

/// Iteration budget shared by the fixed-point phase and the bisection fallback.
pub const MAX_ITERATIONS: usize = 200;

/// Smallest damping factor tried before switching to bisection.
const MIN_DAMPING: f64 = 1.0 / 64.0;

struct Relation {
    /// `p_l^{T_l/T_r}`.
    base: f64,
    /// Friction coefficient `a` in the exponent `−a/p_r²`.
    friction: f64,
    /// Elevation exponent `g h / (R_s z_0 T_r)`.
    elevation: f64,
}

impl Relation {
    fn new(
        p_l: f64,
        q: f64,
        t_l: f64,
        t_r: f64,
        params: &PipeParams,
        gas: &GasProperties,
    ) -> Result<Self> {
        for (name, v) in [("p_l,ss", p_l), ("T_l,ss", t_l), ("T_r,ss", t_r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !q.is_finite() {
            return Err(Error::domain(format!("q_ss must be finite, got {q}")));
        }
        let rz = gas.rz();
        let a = params.area();
        Ok(Self {
            base: p_l.powf(t_l / t_r),
            friction: params.lambda() * params.length() * rz * t_r * q * q.abs()
                / (2.0 * params.diameter() * a * a),
            elevation: GRAVITY * params.elevation() / (rz * t_r),
        })
    }

    fn exponent(&self, p_r: f64) -> f64 {
        -self.friction / (p_r * p_r) - self.elevation
    }
}

/// Solves `p = g(p)` by damped fixed-point iteration from `start`, falling
/// back to bisection on `[lo, hi]` when the iteration stops contracting.
fn solve(g: impl Fn(f64) -> f64, start: f64, lo: f64, hi: f64) -> Result<f64> {
    let residual = |p: f64| (p - g(p)) / p;
    let mut p = start;
    let mut r = residual(p);
    let mut damping = 1.0;
    let mut used = 0;
    while used < MAX_ITERATIONS && damping >= MIN_DAMPING {
        if r.abs() < TOLERANCE {
            return Ok(p);
        }
        used += 1;
        let next = (1.0 - damping) * p + damping * g(p);
        if !(next.is_finite() && next > 0.0) {
            damping /= 2.0;
            continue;
        }
        let rn = residual(next);
        if rn.abs() < r.abs() {
            p = next;
            r = rn;
        } else {
            damping /= 2.0;
        }
    }

    let f = |p: f64| p - g(p);
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::SteadyStateDiverged);
    }
    while used < MAX_ITERATIONS {
        used += 1;
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm / mid).abs() < TOLERANCE || (hi - lo) < TOLERANCE * mid {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::SteadyStateDiverged)
}

fn bracket(rel: &Relation) -> (f64, f64) {
    let rest = rel.base * (-rel.elevation).exp();
    (0.5 * rest, 2.0 * rest)
}

/// Right pressure from the exponential steady-state relation.
pub fn exact_nominal_pr(
    p_l: f64,
    q: f64,
    t_l: f64,
    t_r: f64,
    params: &PipeParams,
    gas: &GasProperties,
) -> Result<f64> {
    let rel = Relation::new(p_l, q, t_l, t_r, params, gas)?;
    let (lo, hi) = bracket(&rel);
    solve(|p| rel.base * rel.exponent(p).exp(), p_l, lo, hi)
}

/// Right pressure from the first-order expansion `p_l^{T_l/T_r}(1 + x)`.
pub fn approx_nominal_pr(
    p_l: f64,
    q: f64,
    t_l: f64,
    t_r: f64,
    params: &PipeParams,
    gas: &GasProperties,
) -> Result<f64> {
    let rel = Relation::new(p_l, q, t_l, t_r, params, gas)?;
    let (lo, hi) = bracket(&rel);
    let p = solve(|p| rel.base * (1.0 + rel.exponent(p)), p_l, lo, hi)?;
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::SteadyStateDiverged)
    }
}

/// Full nominal point with `T_l = T_r = t0` and equal flows at both ends.
pub fn isothermal_nominal(
    p_l: f64,
    q: f64,
    t0: f64,
    params: &PipeParams,
    gas: &GasProperties,
) -> Result<OperatingPoint> {
    let p_r = exact_nominal_pr(p_l, q, t0, t0, params, gas)?;
    OperatingPoint::new(p_l, p_r, q, t0, t0)
}
