//! Friction factor selection: an explicit λ or the Haaland correlation.

use crate::error::{Error, Result};
use crate::gas::PipeParams;

/// Haaland's explicit approximation of the Darcy friction factor,
/// `1/√λ = −1.8·log₁₀[(ε/(3.7 d))^1.11 + 6.9/Re]`.
pub fn haaland_lambda(eps: f64, d: f64, re: f64) -> Result<f64> {
    if !(d > 0.0 && re > 0.0 && eps >= 0.0) || !(d.is_finite() && re.is_finite() && eps.is_finite())
    {
        return Err(Error::InvalidFrictionRegime);
    }
    let arg = (eps / (3.7 * d)).powf(1.11) + 6.9 / re;
    let inv_sqrt = -1.8 * arg.log10();
    // arg ≥ 1 gives a non-positive 1/√λ.
    if !(arg > 0.0 && inv_sqrt > 0.0 && inv_sqrt.is_finite()) {
        return Err(Error::InvalidFrictionRegime);
    }
    Ok(1.0 / (inv_sqrt * inv_sqrt))
}

/// Pipe description before the friction factor is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeSpec {
    pub length: f64,
    pub diameter: f64,
    pub outer_diameter: Option<f64>,
    pub roughness: f64,
    pub elevation: f64,
    pub lambda: Option<f64>,
    pub reynolds: Option<f64>,
    pub k_rad: f64,
}

impl PipeSpec {
    pub fn new(length: f64, diameter: f64) -> Self {
        Self {
            length,
            diameter,
            outer_diameter: None,
            roughness: 0.0,
            elevation: 0.0,
            lambda: None,
            reynolds: None,
            k_rad: 0.0,
        }
    }
}

/// Builds [`PipeParams`], taking an explicit λ when given and Haaland otherwise.
pub fn resolve_lambda(spec: &PipeSpec) -> Result<PipeParams> {
    let lambda = match (spec.lambda, spec.reynolds) {
        (Some(l), _) => l,
        (None, Some(re)) => haaland_lambda(spec.roughness, spec.diameter, re)?,
        (None, None) => {
            return Err(Error::config(
                "pipe needs either an explicit friction factor or a Reynolds number",
            ))
        }
    };
    PipeParams::new(spec.length, spec.diameter, lambda)?
        .with_outer_diameter(spec.outer_diameter.unwrap_or(spec.diameter))?
        .with_roughness(spec.roughness)?
        .with_elevation(spec.elevation)?
        .with_k_rad(spec.k_rad)
}
