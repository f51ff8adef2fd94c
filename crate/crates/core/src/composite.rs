//! Composite LTI elements: single pipes, joints, branches, series cascades
//! and static gains.
//!
//! Joints, branches and series runs absorb the algebraic pressure-equality
//! and flow-balance constraints at their internal nodes, so the resulting
//! state-space models are unconstrained. Every composite exposes named
//! ports; each port carries one input signal (pressure on a left flange,
//! flow on a right flange) and the dual output signal.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gas::{GasProperties, OperatingPoint, PipeParams};
use crate::label::{Quantity, Side, SignalLabel};
use crate::pipe::IsoCoefficients;
use crate::statespace::StateSpaceModel;

/// Relative tolerance for nominal-point consistency checks.
pub const NOMINAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompositeKind {
    Pipe,
    Joint,
    Branch,
    Series,
    Gain,
    /// A closed subnetwork wrapped back into an element.
    Network,
}

impl CompositeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CompositeKind::Pipe => "pipe",
            CompositeKind::Joint => "joint",
            CompositeKind::Branch => "branch",
            CompositeKind::Series => "series",
            CompositeKind::Gain => "gain",
            CompositeKind::Network => "network",
        }
    }
}

/// One pipe taking part in a composite, with its linearization point.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeMember {
    pub id: String,
    pub params: PipeParams,
    pub op: OperatingPoint,
}

impl PipeMember {
    pub fn new(id: impl Into<String>, params: PipeParams, op: OperatingPoint) -> Self {
        Self {
            id: id.into(),
            params,
            op,
        }
    }
}

/// Whether joint and branch constructors verify that the members' nominal
/// points satisfy the node balances.
///
/// `Skip` exists for networks linearized around one shared nominal point,
/// which by construction cannot balance flows at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NominalCheck {
    #[default]
    Strict,
    Skip,
}

/// A flange of a composite element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    /// Port name local to the element, e.g. `l`, `r1`.
    pub name: String,
    pub side: Side,
    /// Signal the port expects from the outside.
    pub input: SignalLabel,
    /// Signal the port offers to the outside.
    pub output: SignalLabel,
}

impl Port {
    /// Port on flange `side` of member `member`.
    fn flange(name: &str, member: &str, side: Side) -> Self {
        let (inq, outq) = match side {
            Side::Left => (Quantity::Pressure, Quantity::Flow),
            Side::Right => (Quantity::Flow, Quantity::Pressure),
        };
        Self {
            name: name.to_string(),
            side,
            input: SignalLabel::new(member, side, inq),
            output: SignalLabel::new(member, side, outq),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeModel {
    id: String,
    kind: CompositeKind,
    model: StateSpaceModel,
    members: Vec<String>,
    delta: Option<f64>,
    ports: Vec<Port>,
}

impl CompositeModel {
    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn kind(&self) -> CompositeKind {
        self.kind
    }
    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }
    pub fn into_model(self) -> StateSpaceModel {
        self.model
    }
    /// Pipe ids in constructor order (empty for gains).
    pub fn members(&self) -> &[String] {
        &self.members
    }
    /// Flow-split parameter of a joint.
    pub fn delta(&self) -> Option<f64> {
        self.delta
    }
    pub fn ports(&self) -> &[Port] {
        &self.ports
    }
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }
}

fn close_rel(a: f64, b: f64) -> bool {
    (a - b).abs() <= NOMINAL_TOLERANCE * a.abs().max(b.abs())
}

fn require_positive_flow(members: &[&PipeMember]) -> Result<()> {
    match members.iter().find(|m| !(m.op.q() > 0.0)) {
        Some(m) => Err(Error::NonPositiveFlow(m.id.clone())),
        None => Ok(()),
    }
}

fn coefficients(m: &PipeMember, gas: &GasProperties) -> Result<IsoCoefficients> {
    IsoCoefficients::new(&m.params, &m.op, gas)
}

fn p_r(id: &str) -> SignalLabel {
    SignalLabel::pressure(id, Side::Right)
}
fn p_l(id: &str) -> SignalLabel {
    SignalLabel::pressure(id, Side::Left)
}
fn q_r(id: &str) -> SignalLabel {
    SignalLabel::flow(id, Side::Right)
}
fn q_l(id: &str) -> SignalLabel {
    SignalLabel::flow(id, Side::Left)
}

fn selection(rows: &[usize], n: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(rows.len(), n);
    for (i, &j) in rows.iter().enumerate() {
        c[(i, j)] = 1.0;
    }
    c
}

/// A single linearized isothermal pipe with ports `l` and `r`.
pub fn make_pipe(pipe: &PipeMember, gas: &GasProperties) -> Result<CompositeModel> {
    let model = coefficients(pipe, gas)?.state_space(&pipe.id)?;
    Ok(CompositeModel {
        id: pipe.id.clone(),
        kind: CompositeKind::Pipe,
        model,
        members: vec![pipe.id.clone()],
        delta: None,
        ports: vec![
            Port::flange("l", &pipe.id, Side::Left),
            Port::flange("r", &pipe.id, Side::Right),
        ],
    })
}

/// Two feeder pipes `pipe1`, `pipe2` merging into the outlet pipe `pipe0`.
///
/// States `[p0r, p1r, q0l, q1l, q2l]`, inputs `[p1l, p2l, q0r]`, outputs
/// `[p0r, q1l, q2l]`; ports `l1`, `l2` (feeders) and `r` (outlet). With
/// `δ = α₁/(α₁+α₂)` the merged-node pressure row is `α₁(1−δ)` times the flow
/// imbalance `q0l − q1l − q2l`, which equals `α₁α₂/(α₁+α₂)` times it.
pub fn make_joint(
    id: &str,
    pipe0: &PipeMember,
    pipe1: &PipeMember,
    pipe2: &PipeMember,
    gas: &GasProperties,
    check: NominalCheck,
) -> Result<CompositeModel> {
    require_positive_flow(&[pipe0, pipe1, pipe2])?;
    if check == NominalCheck::Strict {
        if !close_rel(pipe0.op.q(), pipe1.op.q() + pipe2.op.q()) {
            return Err(Error::config(format!(
                "joint {id}: outlet nominal flow {} differs from feeder sum {}",
                pipe0.op.q(),
                pipe1.op.q() + pipe2.op.q()
            )));
        }
        if !close_rel(pipe1.op.p_r(), pipe2.op.p_r()) {
            return Err(Error::config(format!(
                "joint {id}: feeder nominal outlet pressures {} and {} differ",
                pipe1.op.p_r(),
                pipe2.op.p_r()
            )));
        }
    }
    let k0 = coefficients(pipe0, gas)?;
    let k1 = coefficients(pipe1, gas)?;
    let k2 = coefficients(pipe2, gas)?;
    let delta = k1.alpha / (k1.alpha + k2.alpha);
    let s = k1.alpha * (1.0 - delta);

    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(5, 5, &[
        0.0,       0.0,        -k0.alpha, 0.0,      0.0,
        0.0,       0.0,        s,         -s,       -s,
        k0.beta_pr, k0.beta_pl, k0.gamma, 0.0,      0.0,
        0.0,       k1.beta_pr, 0.0,       k1.gamma, 0.0,
        0.0,       k2.beta_pr, 0.0,       0.0,      k2.gamma,
    ]);
    let mut b = DMatrix::zeros(5, 3);
    b[(0, 2)] = k0.alpha;
    b[(3, 0)] = k1.beta_pl;
    b[(4, 1)] = k2.beta_pl;

    let (i0, i1, i2) = (&pipe0.id, &pipe1.id, &pipe2.id);
    let model = StateSpaceModel::new(
        a,
        b,
        selection(&[0, 3, 4], 5),
        DMatrix::zeros(3, 3),
        vec![p_r(i0), p_r(i1), q_l(i0), q_l(i1), q_l(i2)],
        vec![p_l(i1), p_l(i2), q_r(i0)],
        vec![p_r(i0), q_l(i1), q_l(i2)],
    )?;
    Ok(CompositeModel {
        id: id.to_string(),
        kind: CompositeKind::Joint,
        model,
        members: vec![i0.clone(), i1.clone(), i2.clone()],
        delta: Some(delta),
        ports: vec![
            Port::flange("l1", i1, Side::Left),
            Port::flange("l2", i2, Side::Left),
            Port::flange("r", i0, Side::Right),
        ],
    })
}

/// Inlet pipe `pipe0` splitting into `pipe1` and `pipe2`.
///
/// States `[p0r, p1r, p2r, q0l, q1l, q2l]`, inputs `[p0l, q1r, q2r]`, outputs
/// `[p1r, p2r, q0l]`; ports `l` (inlet), `r1`, `r2`.
pub fn make_branch(
    id: &str,
    pipe0: &PipeMember,
    pipe1: &PipeMember,
    pipe2: &PipeMember,
    gas: &GasProperties,
    check: NominalCheck,
) -> Result<CompositeModel> {
    require_positive_flow(&[pipe0, pipe1, pipe2])?;
    if check == NominalCheck::Strict {
        if !close_rel(pipe0.op.q(), pipe1.op.q() + pipe2.op.q()) {
            return Err(Error::config(format!(
                "branch {id}: inlet nominal flow {} differs from outlet sum {}",
                pipe0.op.q(),
                pipe1.op.q() + pipe2.op.q()
            )));
        }
        if !close_rel(pipe1.op.p_l(), pipe2.op.p_l()) {
            return Err(Error::config(format!(
                "branch {id}: outlet nominal inlet pressures {} and {} differ",
                pipe1.op.p_l(),
                pipe2.op.p_l()
            )));
        }
    }
    let k0 = coefficients(pipe0, gas)?;
    let k1 = coefficients(pipe1, gas)?;
    let k2 = coefficients(pipe2, gas)?;

    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(6, 6, &[
        0.0,        0.0,        0.0,        -k0.alpha, k0.alpha,  k0.alpha,
        0.0,        0.0,        0.0,        0.0,       -k1.alpha, 0.0,
        0.0,        0.0,        0.0,        0.0,       0.0,       -k2.alpha,
        k0.beta_pr, 0.0,        0.0,        k0.gamma,  0.0,       0.0,
        k1.beta_pl, k1.beta_pr, 0.0,        0.0,       k1.gamma,  0.0,
        k2.beta_pl, 0.0,        k2.beta_pr, 0.0,       0.0,       k2.gamma,
    ]);
    let mut b = DMatrix::zeros(6, 3);
    b[(1, 1)] = k1.alpha;
    b[(2, 2)] = k2.alpha;
    b[(3, 0)] = k0.beta_pl;

    let (i0, i1, i2) = (&pipe0.id, &pipe1.id, &pipe2.id);
    let model = StateSpaceModel::new(
        a,
        b,
        selection(&[1, 2, 3], 6),
        DMatrix::zeros(3, 3),
        vec![p_r(i0), p_r(i1), p_r(i2), q_l(i0), q_l(i1), q_l(i2)],
        vec![p_l(i0), q_r(i1), q_r(i2)],
        vec![p_r(i1), p_r(i2), q_l(i0)],
    )?;
    Ok(CompositeModel {
        id: id.to_string(),
        kind: CompositeKind::Branch,
        model,
        members: vec![i0.clone(), i1.clone(), i2.clone()],
        delta: None,
        ports: vec![
            Port::flange("l", i0, Side::Left),
            Port::flange("r1", i1, Side::Right),
            Port::flange("r2", i2, Side::Right),
        ],
    })
}

/// Pipes connected end to end, left to right.
///
/// States `[p_{0,r} … p_{N−1,r}, q_{0,l} … q_{N−1,l}]`, inputs
/// `[p_{0,l}, q_{N−1,r}]`, outputs `[p_{N−1,r}, q_{0,l}]`; ports `l`, `r`.
pub fn make_series(id: &str, pipes: &[PipeMember], gas: &GasProperties) -> Result<CompositeModel> {
    if pipes.is_empty() {
        return Err(Error::config(format!("series {id} has no pipes")));
    }
    let refs: Vec<&PipeMember> = pipes.iter().collect();
    require_positive_flow(&refs)?;
    for w in pipes.windows(2) {
        if !close_rel(w[0].op.q(), w[1].op.q()) {
            return Err(Error::config(format!(
                "series {id}: nominal flows of {} and {} differ",
                w[0].id, w[1].id
            )));
        }
        if !close_rel(w[0].op.p_r(), w[1].op.p_l()) {
            return Err(Error::config(format!(
                "series {id}: nominal pressure of {} outlet and {} inlet differ",
                w[0].id, w[1].id
            )));
        }
    }
    let ks = pipes
        .iter()
        .map(|m| coefficients(m, gas))
        .collect::<Result<Vec<_>>>()?;
    let n = pipes.len();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for (i, k) in ks.iter().enumerate() {
        a[(i, n + i)] = -k.alpha;
        if i + 1 < n {
            a[(i, n + i + 1)] = k.alpha;
        }
        a[(n + i, i)] = k.beta_pr;
        if i > 0 {
            a[(n + i, i - 1)] = k.beta_pl;
        }
        a[(n + i, n + i)] = k.gamma;
    }
    let mut b = DMatrix::zeros(2 * n, 2);
    b[(n - 1, 1)] = ks[n - 1].alpha;
    b[(n, 0)] = ks[0].beta_pl;

    let first = &pipes[0].id;
    let last = &pipes[n - 1].id;
    let states = pipes
        .iter()
        .map(|m| p_r(&m.id))
        .chain(pipes.iter().map(|m| q_l(&m.id)))
        .collect();
    let model = StateSpaceModel::new(
        a,
        b,
        selection(&[n - 1, n], 2 * n),
        DMatrix::zeros(2, 2),
        states,
        vec![p_l(first), q_r(last)],
        vec![p_r(last), q_l(first)],
    )?;
    Ok(CompositeModel {
        id: id.to_string(),
        kind: CompositeKind::Series,
        model,
        members: pipes.iter().map(|m| m.id.clone()).collect(),
        delta: None,
        ports: vec![
            Port::flange("l", first, Side::Left),
            Port::flange("r", last, Side::Right),
        ],
    })
}

/// Static pressure gain `p_r = k p_l` that passes flow through unchanged,
/// as used for compressors and valves.
pub fn make_gain(id: &str, k: f64) -> Result<CompositeModel> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::config(format!("gain {id} needs a finite nonzero k, got {k}")));
    }
    let model = StateSpaceModel::static_gain(
        DMatrix::from_row_slice(2, 2, &[k, 0.0, 0.0, 1.0]),
        vec![p_l(id), q_r(id)],
        vec![p_r(id), q_l(id)],
    )?;
    Ok(CompositeModel {
        id: id.to_string(),
        kind: CompositeKind::Gain,
        model,
        members: Vec::new(),
        delta: None,
        ports: vec![
            Port::flange("l", id, Side::Left),
            Port::flange("r", id, Side::Right),
        ],
    })
}

/// Wraps an arbitrary model as an element with the given ports, e.g. a
/// closed subnetwork whose remaining open flanges become its ports.
pub fn from_parts(
    id: &str,
    kind: CompositeKind,
    model: StateSpaceModel,
    members: Vec<String>,
    ports: Vec<Port>,
) -> Result<CompositeModel> {
    for p in &ports {
        if model.input_index(&p.input).is_none() || model.output_index(&p.output).is_none() {
            return Err(Error::config(format!(
                "port {id}.{} refers to signals the model does not have",
                p.name
            )));
        }
    }
    Ok(CompositeModel {
        id: id.to_string(),
        kind,
        model,
        members,
        delta: None,
        ports,
    })
}
