//! Single-pipe dynamics: the nonlinear nonisothermal 3-state and isothermal
//! 2-state ODEs obtained by one-cell spatial discretization, and their
//! linearizations around a nominal point.
//!
//! Inputs are the boundary values `(p_l, q_r[, T_l])`, states the opposite
//! boundary values `(p_r, q_l[, T_r])`. The elevation gradient is taken as
//! `h/L` in both models.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gas::{GasProperties, OperatingPoint, PipeParams, GRAVITY};
use crate::label::{SignalLabel, Side};
use crate::statespace::StateSpaceModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeState2D {
    pub p_r: f64,
    pub q_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeInput2D {
    pub p_l: f64,
    pub q_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeState3D {
    pub p_r: f64,
    pub q_l: f64,
    pub t_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeInput3D {
    pub p_l: f64,
    pub q_r: f64,
    pub t_l: f64,
}

/// Isothermal 2-state right-hand side `(ṗ_r, q̇_l)`.
pub fn rhs_2d(
    x: PipeState2D,
    u: PipeInput2D,
    params: &PipeParams,
    gas: &GasProperties,
) -> Result<[f64; 2]> {
    if !(u.p_l > 0.0) {
        return Err(Error::domain(format!("left pressure must be positive, got {}", u.p_l)));
    }
    let c2 = gas.rz() * gas.t0();
    let a = params.area();
    let l = params.length();
    let dp = -c2 / (a * l) * (u.q_r - x.q_l);
    let dq = -a / l * (x.p_r - u.p_l)
        - params.lambda() * c2 / (2.0 * params.diameter() * a) * x.q_l * x.q_l.abs() / u.p_l
        - a * GRAVITY / c2 * (params.elevation() / l) * u.p_l;
    Ok([dp, dq])
}

/// Right pressure at which the isothermal 2-state model is at rest for the
/// boundary values `p_l` and `q_l = q_r = q`.
pub fn isothermal_equilibrium(
    p_l: f64,
    q: f64,
    params: &PipeParams,
    gas: &GasProperties,
) -> Result<PipeState2D> {
    if !(p_l > 0.0) {
        return Err(Error::domain(format!("left pressure must be positive, got {p_l}")));
    }
    let c2 = gas.rz() * gas.t0();
    let a = params.area();
    let l = params.length();
    let friction = params.lambda() * c2 / (2.0 * params.diameter() * a) * q * q.abs() / p_l;
    let gravity = a * GRAVITY / c2 * (params.elevation() / l) * p_l;
    let p_r = p_l - (l / a) * (friction + gravity);
    if !(p_r > 0.0) {
        return Err(Error::domain("equilibrium right pressure is not positive"));
    }
    Ok(PipeState2D { p_r, q_l: q })
}

struct Shared3D {
    rz: f64,
    cv: f64,
    cvz: f64,
    heat: f64,
    area: f64,
    length: f64,
    fric: f64,
    dfric_dq: f64,
}

fn check_3d(x: &PipeState3D, u: &PipeInput3D) -> Result<()> {
    if x.p_r > 0.0 && u.p_l > 0.0 && x.t_r > 0.0 && u.t_l > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "3D pipe model needs positive pressures and temperatures, got p_r={}, p_l={}, T_r={}, T_l={}",
            x.p_r, u.p_l, x.t_r, u.t_l
        )))
    }
}

// The friction term of the energy rows is evaluated at the outflow q_r.
fn terms_3d(x: &PipeState3D, u: &PipeInput3D, params: &PipeParams, gas: &GasProperties) -> Shared3D {
    let rz = gas.rz();
    let a = params.area();
    let k = params.lambda() * rz * rz * x.t_r * x.t_r
        / (2.0 * params.diameter() * a * a * x.p_r * x.p_r);
    let q = u.q_r;
    Shared3D {
        rz,
        cv: gas.cv(),
        cvz: gas.cv() + rz,
        heat: params.k_rad() * PI * params.outer_diameter(),
        area: a,
        length: params.length(),
        fric: k * q * q * q.abs(),
        dfric_dq: 3.0 * k * q * q.abs(),
    }
}

/// Bracketed energy-balance expression shared by the pressure and
/// temperature equations; `flow_coeff` multiplies `(q_r − q_l)/L · T_r`.
fn bracket(x: &PipeState3D, u: &PipeInput3D, s: &Shared3D, tamb: f64, flow_coeff: f64) -> f64 {
    let l = s.length;
    s.heat * (tamb - x.t_r) - (u.q_r - x.q_l) / l * x.t_r * flow_coeff
        + (x.p_r - u.p_l) / l * s.rz * x.t_r * u.q_r / x.p_r
        - (x.t_r - u.t_l) / l * u.q_r * s.cvz
        + s.fric
}

/// Nonisothermal 3-state right-hand side `(ṗ_r, q̇_l, Ṫ_r)`.
pub fn rhs_3d(
    x: PipeState3D,
    u: PipeInput3D,
    params: &PipeParams,
    gas: &GasProperties,
) -> Result<[f64; 3]> {
    check_3d(&x, &u)?;
    let s = terms_3d(&x, &u, params, gas);
    let a = s.area;
    let l = s.length;
    let rz = s.rz;
    let f_p = rz / (a * s.cv) * bracket(&x, &u, &s, gas.tamb(), s.cvz);
    let f_q = -a * (x.p_r - u.p_l) / l
        - params.lambda() * rz * u.t_l / (2.0 * params.diameter() * a) * x.q_l * x.q_l.abs()
            / u.p_l
        - a * GRAVITY / (rz * u.t_l) * (params.elevation() / l) * u.p_l;
    let f_t = rz * x.t_r / (a * s.cv * x.p_r) * bracket(&x, &u, &s, gas.tamb(), rz);
    Ok([f_p, f_q, f_t])
}

/// Coefficients of the linearized isothermal pipe,
/// `ṗ_r = α(q_r − q_l)`, `q̇_l = β_r p_r + β_l p_l + γ q_l` (deviation variables).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoCoefficients {
    pub alpha: f64,
    pub beta_pr: f64,
    pub beta_pl: f64,
    pub gamma: f64,
}

impl IsoCoefficients {
    /// Evaluates the coefficients at `op`, using `p_l,ss` in the friction
    /// terms and the gas nominal temperature `T_0`.
    pub fn new(params: &PipeParams, op: &OperatingPoint, gas: &GasProperties) -> Result<Self> {
        let p = op.p_l();
        if !(p > 0.0) {
            return Err(Error::domain("nominal left pressure must be positive"));
        }
        let c2 = gas.rz() * gas.t0();
        let a = params.area();
        let l = params.length();
        let d = params.diameter();
        let q = op.q();
        let fr = params.lambda() * c2 / (d * a);
        Ok(Self {
            alpha: -c2 / (a * l),
            beta_pr: -a / l,
            beta_pl: a / l + fr / 2.0 * q * q.abs() / (p * p)
                - a * GRAVITY * params.elevation() / (c2 * l),
            gamma: -fr * q.abs() / p,
        })
    }

    /// `A = [[0, −α], [β_r, γ]]`.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, -self.alpha, self.beta_pr, self.gamma])
    }

    /// `B = [[0, α], [β_l, 0]]`.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, self.alpha, self.beta_pl, 0.0])
    }

    /// Labeled 2-state model with `C = I`, `D = 0`.
    pub fn state_space(&self, id: &str) -> Result<StateSpaceModel> {
        let states = vec![
            SignalLabel::pressure(id, Side::Right),
            SignalLabel::flow(id, Side::Left),
        ];
        StateSpaceModel::new(
            self.a_matrix(),
            self.b_matrix(),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            states.clone(),
            vec![
                SignalLabel::pressure(id, Side::Left),
                SignalLabel::flow(id, Side::Right),
            ],
            states,
        )
    }
}

/// Linearized isothermal pipe `id`: states `[p_r, q_l]`, inputs `[p_l, q_r]`.
pub fn linearize_2d(
    id: &str,
    params: &PipeParams,
    op: &OperatingPoint,
    gas: &GasProperties,
) -> Result<StateSpaceModel> {
    IsoCoefficients::new(params, op, gas)?.state_space(id)
}

/// Analytic Jacobians `(∂f/∂x, ∂f/∂u)` of [`rhs_3d`].
pub fn jacobian_3d(
    x: PipeState3D,
    u: PipeInput3D,
    params: &PipeParams,
    gas: &GasProperties,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_3d(&x, &u)?;
    let s = terms_3d(&x, &u, params, gas);
    let (a, l, rz, cv, cvz) = (s.area, s.length, s.rz, s.cv, s.cvz);
    let tamb = gas.tamb();
    let (pr, ql, tr) = (x.p_r, x.q_l, x.t_r);
    let (pl, qr, tl) = (u.p_l, u.q_r, u.t_l);

    // Partials of the bracket shared by both energy rows, without the
    // flow-difference term.
    let ds_dpr = rz * tr * qr * pl / (l * pr * pr) - 2.0 * s.fric / pr;
    let ds_dpl = -rz * tr * qr / (l * pr);
    let ds_dtr = -s.heat + (pr - pl) / l * rz * qr / pr - qr * cvz / l + 2.0 * s.fric / tr;
    let ds_dtl = qr * cvz / l;
    let ds_dqr = (pr - pl) / l * rz * tr / pr - (tr - tl) / l * cvz + s.dfric_dq;

    // Partials of a bracket whose flow-difference coefficient is `k`.
    let grad = |k: f64| {
        [
            ds_dpr,
            tr * k / l,
            ds_dtr - (qr - ql) * k / l,
            ds_dpl,
            ds_dqr - tr * k / l,
            ds_dtl,
        ]
    };
    let gp = grad(cvz);
    let gt = grad(rz);
    let bt = bracket(&x, &u, &s, tamb, rz);

    let sp = rz / (a * cv);
    let st = rz * tr / (a * cv * pr);

    let fr = params.lambda() * rz / (2.0 * params.diameter() * a);
    let grav = a * GRAVITY * params.elevation() / (rz * l);

    let mut ja = DMatrix::zeros(3, 3);
    let mut jb = DMatrix::zeros(3, 3);
    for j in 0..3 {
        ja[(0, j)] = sp * gp[j];
        jb[(0, j)] = sp * gp[3 + j];
        ja[(2, j)] = st * gt[j];
        jb[(2, j)] = st * gt[3 + j];
    }
    // Product rule on the T_r/p_r prefactor of the temperature row.
    ja[(2, 0)] += -st / pr * bt;
    ja[(2, 2)] += st / tr * bt;

    ja[(1, 0)] = -a / l;
    ja[(1, 1)] = -2.0 * fr * tl * ql.abs() / pl;
    jb[(1, 0)] = a / l + fr * tl * ql * ql.abs() / (pl * pl) - grav / tl;
    jb[(1, 2)] = -fr * ql * ql.abs() / pl + grav * pl / (tl * tl);
    Ok((ja, jb))
}

/// Linearized nonisothermal pipe `id` around `op`: states `[p_r, q_l, T_r]`,
/// inputs `[p_l, q_r, T_l]`, `C = I`, `D = 0`.
pub fn linearize_3d(
    id: &str,
    params: &PipeParams,
    op: &OperatingPoint,
    gas: &GasProperties,
) -> Result<StateSpaceModel> {
    let x = PipeState3D {
        p_r: op.p_r(),
        q_l: op.q(),
        t_r: op.t_r(),
    };
    let u = PipeInput3D {
        p_l: op.p_l(),
        q_r: op.q(),
        t_l: op.t_l(),
    };
    let (a, b) = jacobian_3d(x, u, params, gas)?;
    let states = vec![
        SignalLabel::pressure(id, Side::Right),
        SignalLabel::flow(id, Side::Left),
        SignalLabel::temperature(id, Side::Right),
    ];
    StateSpaceModel::new(
        a,
        b,
        DMatrix::identity(3, 3),
        DMatrix::zeros(3, 3),
        states.clone(),
        vec![
            SignalLabel::pressure(id, Side::Left),
            SignalLabel::flow(id, Side::Right),
            SignalLabel::temperature(id, Side::Left),
        ],
        states,
    )
}
