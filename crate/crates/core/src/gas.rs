//! Gas properties, pipe parameters, operating points and the gas-law helpers.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Standard gravity [m/s²].
pub const GRAVITY: f64 = 9.80665;

/// Margin used to operationalize "much smaller than" conditions.
pub const REGIME_MARGIN: f64 = 0.01;

fn require_positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn require_nonnegative(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be non-negative and finite, got {v}")))
    }
}

fn require_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}

/// Thermodynamic properties of the transported gas (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasProperties {
    rs: f64,
    z0: f64,
    cv: f64,
    t0: f64,
    tamb: f64,
}

impl GasProperties {
    /// `rs` specific gas constant [J/(kg·K)], `z0` compressibility [1],
    /// `cv` specific heat [J/(kg·K)], `t0` nominal and `tamb` ambient temperature [K].
    pub fn new(rs: f64, z0: f64, cv: f64, t0: f64, tamb: f64) -> Result<Self> {
        Ok(Self {
            rs: require_positive("R_s", rs)?,
            z0: require_positive("z_0", z0)?,
            cv: require_positive("c_v", cv)?,
            t0: require_positive("T_0", t0)?,
            tamb: require_positive("T_amb", tamb)?,
        })
    }

    pub fn rs(&self) -> f64 {
        self.rs
    }
    pub fn z0(&self) -> f64 {
        self.z0
    }
    pub fn cv(&self) -> f64 {
        self.cv
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn tamb(&self) -> f64 {
        self.tamb
    }

    /// `R_s·z_0`, the factor that multiplies temperature in the gas equation.
    pub fn rz(&self) -> f64 {
        self.rs * self.z0
    }

    pub fn with_t0(self, t0: f64) -> Result<Self> {
        Self::new(self.rs, self.z0, self.cv, t0, self.tamb)
    }

    pub fn with_tamb(self, tamb: f64) -> Result<Self> {
        Self::new(self.rs, self.z0, self.cv, self.t0, tamb)
    }
}

/// Geometry, friction and heat-transfer parameters of one pipe segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeParams {
    length: f64,
    diameter: f64,
    outer_diameter: f64,
    roughness: f64,
    elevation: f64,
    lambda: f64,
    k_rad: f64,
    area: f64,
}

impl PipeParams {
    /// Pipe with outside diameter equal to `diameter`, smooth wall, no
    /// elevation change and no heat exchange.
    pub fn new(length: f64, diameter: f64, lambda: f64) -> Result<Self> {
        let diameter = require_positive("d", diameter)?;
        Ok(Self {
            length: require_positive("L", length)?,
            diameter,
            outer_diameter: diameter,
            roughness: 0.0,
            elevation: 0.0,
            lambda: require_positive("lambda", lambda)?,
            k_rad: 0.0,
            area: PI * diameter * diameter / 4.0,
        })
    }

    pub fn with_outer_diameter(mut self, d_out: f64) -> Result<Self> {
        let d_out = require_positive("d_out", d_out)?;
        if d_out < self.diameter {
            return Err(Error::domain(format!(
                "outside diameter {d_out} smaller than inside diameter {}",
                self.diameter
            )));
        }
        self.outer_diameter = d_out;
        Ok(self)
    }

    pub fn with_roughness(mut self, eps: f64) -> Result<Self> {
        self.roughness = require_nonnegative("eps", eps)?;
        Ok(self)
    }

    /// Elevation change from the left to the right flange [m].
    pub fn with_elevation(mut self, h: f64) -> Result<Self> {
        self.elevation = require_finite("h", h)?;
        Ok(self)
    }

    pub fn with_k_rad(mut self, k_rad: f64) -> Result<Self> {
        self.k_rad = require_nonnegative("k_rad", k_rad)?;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = require_positive("lambda", lambda)?;
        Ok(self)
    }

    pub fn with_length(mut self, length: f64) -> Result<Self> {
        self.length = require_positive("L", length)?;
        Ok(self)
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
    pub fn outer_diameter(&self) -> f64 {
        self.outer_diameter
    }
    pub fn roughness(&self) -> f64 {
        self.roughness
    }
    pub fn elevation(&self) -> f64 {
        self.elevation
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn k_rad(&self) -> f64 {
        self.k_rad
    }
    /// Cross-sectional area `πd²/4`.
    pub fn area(&self) -> f64 {
        self.area
    }
}

/// Nominal boundary values of one pipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    p_l: f64,
    p_r: f64,
    q: f64,
    t_l: f64,
    t_r: f64,
}

impl OperatingPoint {
    pub fn new(p_l: f64, p_r: f64, q: f64, t_l: f64, t_r: f64) -> Result<Self> {
        Ok(Self {
            p_l: require_positive("p_l,ss", p_l)?,
            p_r: require_positive("p_r,ss", p_r)?,
            q: require_finite("q_ss", q)?,
            t_l: require_positive("T_l,ss", t_l)?,
            t_r: require_positive("T_r,ss", t_r)?,
        })
    }

    pub fn p_l(&self) -> f64 {
        self.p_l
    }
    pub fn p_r(&self) -> f64 {
        self.p_r
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn t_l(&self) -> f64 {
        self.t_l
    }
    pub fn t_r(&self) -> f64 {
        self.t_r
    }
}

/// Gas density `p / (R_s T z_0)`.
pub fn density(p: f64, t: f64, gas: &GasProperties) -> Result<f64> {
    if !(p > 0.0 && t > 0.0) {
        return Err(Error::domain(format!(
            "density needs positive pressure and temperature, got p={p}, T={t}"
        )));
    }
    Ok(p / (gas.rs * t * gas.z0))
}

/// Isothermal speed of sound `√(z_0 R_s T_0)`.
pub fn speed_of_sound(gas: &GasProperties) -> f64 {
    (gas.z0 * gas.rs * gas.t0).sqrt()
}

/// A violated modelling hypothesis, with the two sides of the inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeWarning {
    /// `|v| < 0.01·c` fails.
    VelocityNotSmall { velocity: f64, limit: f64 },
    /// `|h|·g < 0.01·c²` fails.
    ElevationNotSmall { head: f64, limit: f64 },
    /// `d ≥ λ/2` fails.
    DiameterBelowHalfLambda { diameter: f64, half_lambda: f64 },
    /// `L·|v| < 0.01·c²` fails.
    LengthVelocityNotSmall { value: f64, limit: f64 },
    /// `L·v² < 0.01·c²` fails.
    LengthVelocitySquaredNotSmall { value: f64, limit: f64 },
}

impl std::fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            RegimeWarning::VelocityNotSmall { velocity, limit } => {
                write!(f, "gas velocity |v| = {velocity:.4} m/s is not below {limit:.4} m/s")
            }
            RegimeWarning::ElevationNotSmall { head, limit } => {
                write!(f, "elevation head |h|g = {head:.4} is not below {limit:.4}")
            }
            RegimeWarning::DiameterBelowHalfLambda { diameter, half_lambda } => {
                write!(f, "diameter {diameter} m is below lambda/2 = {half_lambda}")
            }
            RegimeWarning::LengthVelocityNotSmall { value, limit } => {
                write!(f, "L|v| = {value:.4} is not below {limit:.4}")
            }
            RegimeWarning::LengthVelocitySquaredNotSmall { value, limit } => {
                write!(f, "L v^2 = {value:.4} is not below {limit:.4}")
            }
        }
    }
}

/// Checks the steady-state hypotheses and returns one warning per violation.
pub fn validate_regime(
    params: &PipeParams,
    op: &OperatingPoint,
    gas: &GasProperties,
) -> Result<Vec<RegimeWarning>> {
    let c = speed_of_sound(gas);
    let c2 = c * c;
    let rho = density(op.p_l, op.t_l, gas)?;
    let v = op.q / (rho * params.area);
    let mut out = Vec::new();

    if v.abs() >= REGIME_MARGIN * c {
        out.push(RegimeWarning::VelocityNotSmall {
            velocity: v,
            limit: REGIME_MARGIN * c,
        });
    }
    let head = params.elevation.abs() * GRAVITY;
    if head >= REGIME_MARGIN * c2 {
        out.push(RegimeWarning::ElevationNotSmall {
            head,
            limit: REGIME_MARGIN * c2,
        });
    }
    if params.diameter < params.lambda / 2.0 {
        out.push(RegimeWarning::DiameterBelowHalfLambda {
            diameter: params.diameter,
            half_lambda: params.lambda / 2.0,
        });
    }
    let lv = params.length * v.abs();
    if lv >= REGIME_MARGIN * c2 {
        out.push(RegimeWarning::LengthVelocityNotSmall {
            value: lv,
            limit: REGIME_MARGIN * c2,
        });
    }
    let lv2 = params.length * v * v;
    if lv2 >= REGIME_MARGIN * c2 {
        out.push(RegimeWarning::LengthVelocitySquaredNotSmall {
            value: lv2,
            limit: REGIME_MARGIN * c2,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn methane() -> GasProperties {
        GasProperties::new(518.28, 0.95, 1700.0, 300.0, 300.0).unwrap()
    }

    #[test]
    fn density_identity_case() {
        let gas = methane();
        let rho = density(gas.rs() * gas.z0() * 300.0, 300.0, &gas).unwrap();
        assert!((rho - 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_of_loop_gas() {
        // 25e5 / (518.28 * 300 * 0.95) = 16.92508...
        let rho = density(25e5, 300.0, &methane()).unwrap();
        assert!((rho - 16.925_08).abs() < 1e-4, "{rho}");
    }

    #[test]
    fn density_rejects_nonpositive() {
        assert!(matches!(density(0.0, 300.0, &methane()), Err(Error::Domain(_))));
        assert!(matches!(density(1e5, -1.0, &methane()), Err(Error::Domain(_))));
    }

    #[test]
    fn speed_of_sound_of_methane() {
        let c = speed_of_sound(&methane());
        // sqrt(147709.8) = 384.33
        assert!((c - 384.330).abs() < 1e-3, "{c}");
        let gas4 = GasProperties::new(518.28, 4.0 * 0.95, 1700.0, 300.0, 300.0).unwrap();
        assert!((speed_of_sound(&gas4) / c - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gas_rejects_nonpositive_fields() {
        assert!(GasProperties::new(0.0, 0.95, 1700.0, 300.0, 300.0).is_err());
        assert!(GasProperties::new(518.0, 0.95, 1700.0, 300.0, f64::NAN).is_err());
    }

    #[test]
    fn pipe_params_invariants() {
        assert!(PipeParams::new(0.0, 0.7, 0.01).is_err());
        assert!(PipeParams::new(10.0, 0.7, 0.0).is_err());
        let p = PipeParams::new(10.0, 0.7, 0.01).unwrap();
        assert!(p.with_outer_diameter(0.6).is_err());
        assert!(p.with_roughness(-1e-5).is_err());
        assert!(p.with_k_rad(-1.0).is_err());
        assert_eq!(p.outer_diameter(), 0.7);
    }

    fn loop_pipe() -> (PipeParams, OperatingPoint) {
        let p = PipeParams::new(10.0, 0.7, 0.0111).unwrap();
        let op = OperatingPoint::new(25e5, 25e5, 21.0, 300.0, 300.0).unwrap();
        (p, op)
    }

    #[test]
    fn loop_parameters_satisfy_regime() {
        let (p, op) = loop_pipe();
        assert!(validate_regime(&p, &op, &methane()).unwrap().is_empty());
    }

    #[test]
    fn zero_flow_satisfies_velocity_conditions() {
        let (p, _) = loop_pipe();
        let op = OperatingPoint::new(25e5, 25e5, 0.0, 300.0, 300.0).unwrap();
        let w = validate_regime(&p, &op, &methane()).unwrap();
        assert!(w.is_empty(), "{w:?}");
    }

    #[test]
    fn diameter_half_lambda_boundary() {
        let gas = methane();
        let still = OperatingPoint::new(25e5, 25e5, 0.0, 300.0, 300.0).unwrap();
        let has_warning = |lambda: f64| {
            let p = PipeParams::new(10.0, 0.004, lambda).unwrap();
            validate_regime(&p, &still, &gas)
                .unwrap()
                .iter()
                .any(|w| matches!(w, RegimeWarning::DiameterBelowHalfLambda { .. }))
        };
        // d = λ/2 exactly is admissible; only d < λ/2 warns.
        assert!(!has_warning(0.008));
        assert!(!has_warning(0.0079));
        assert!(has_warning(0.0081));
        assert!(has_warning(0.0111));
    }

    #[test]
    fn fast_flow_warns() {
        let (p, op) = loop_pipe();
        let fast = OperatingPoint::new(op.p_l(), op.p_r(), 21.0 * 5.0, 300.0, 300.0).unwrap();
        let w = validate_regime(&p, &fast, &methane()).unwrap();
        assert!(w.iter().any(|w| matches!(w, RegimeWarning::VelocityNotSmall { .. })));
    }

    #[test]
    fn area_matches_diameter() {
        let p = PipeParams::new(3.0, 0.37, 0.02).unwrap();
        let expected = PI * 0.37 * 0.37 / 4.0;
        assert!(((p.area() - expected) / expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn density_is_homogeneous(p in 1e3f64..1e8, t in 100.0f64..600.0, s in 0.1f64..10.0) {
            let gas = methane();
            let base = density(p, t, &gas).unwrap();
            let scaled_p = density(s * p, t, &gas).unwrap();
            let scaled_t = density(p, s * t, &gas).unwrap();
            prop_assert!((scaled_p / (s * base) - 1.0).abs() < 1e-12);
            prop_assert!((scaled_t * s / base - 1.0).abs() < 1e-12);
        }

        #[test]
        fn speed_of_sound_squared(rs in 100.0f64..5000.0, z0 in 0.5f64..1.2, t0 in 150.0f64..500.0) {
            let gas = GasProperties::new(rs, z0, 1000.0, t0, t0).unwrap();
            let c = speed_of_sound(&gas);
            prop_assert!((c * c / (z0 * rs * t0) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn area_invariant(d in 1e-3f64..5.0) {
            let p = PipeParams::new(1.0, d, 0.01).unwrap();
            prop_assert!((p.area() / (PI * d * d / 4.0) - 1.0).abs() < 1e-12);
        }
    }
}
