//! Stacking element models and closing the network.
//!
//! The component models are stacked block-diagonally; the wiring is
//! expressed as `w = F y + G u` where `w` collects all component inputs,
//! `y` all component outputs and `u` the external inputs. Closing the loop
//! gives
//!
//! ```text
//! Ā = A + B F (I − D F)⁻¹ C      B̄ = B [I + F (I − D F)⁻¹ D] G
//! C̄ = (I − D F)⁻¹ C              D̄ = (I − D F)⁻¹ D G
//! ```
//!
//! Links are made between ports: a right flange `X.r` mated with a left
//! flange `Y.l` means the pressure offered by `X.r` drives `Y.l`, and the
//! flow offered by `Y.l` drives `X.r`.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::composite::{CompositeKind, CompositeModel, Port};
use crate::error::{Error, Result};
use crate::label::{is_identifier, Side, SignalLabel};
use crate::statespace::StateSpaceModel;

/// Largest tolerated condition number of `I − D F`.
pub const MAX_LOOP_CONDITION: f64 = 1e12;

/// Where one component sits inside the stacked system.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentInfo {
    pub id: String,
    pub kind: CompositeKind,
    pub states: Range<usize>,
    pub inputs: Range<usize>,
    pub outputs: Range<usize>,
    pub ports: Vec<Port>,
}

/// Block-diagonal stack of component models in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    model: StateSpaceModel,
    components: Vec<ComponentInfo>,
}

impl StackedSystem {
    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }
    pub fn components(&self) -> &[ComponentInfo] {
        &self.components
    }
    pub fn component(&self, id: &str) -> Option<&ComponentInfo> {
        self.components.iter().find(|c| c.id == id)
    }

    /// Looks up a port by element id and port name.
    pub fn port(&self, r: &PortRef) -> Result<&Port> {
        let comp = self
            .component(&r.element)
            .ok_or_else(|| Error::config(format!("unknown element '{}'", r.element)))?;
        comp.ports
            .iter()
            .find(|p| p.name == r.port)
            .ok_or_else(|| Error::config(format!("element '{}' has no port '{}'", r.element, r.port)))
    }
}

fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stacks component models block-diagonally.
pub fn stack(components: &[CompositeModel]) -> Result<StackedSystem> {
    if components.is_empty() {
        return Err(Error::config("network has no elements"));
    }
    let mut ids = HashSet::new();
    for c in components {
        if !ids.insert(c.id()) {
            return Err(Error::config(format!("duplicate element id '{}'", c.id())));
        }
    }
    let models: Vec<&StateSpaceModel> = components.iter().map(CompositeModel::model).collect();
    let a = block_diag(&models.iter().map(|m| m.a()).collect::<Vec<_>>());
    let b = block_diag(&models.iter().map(|m| m.b()).collect::<Vec<_>>());
    let c = block_diag(&models.iter().map(|m| m.c()).collect::<Vec<_>>());
    let d = block_diag(&models.iter().map(|m| m.d()).collect::<Vec<_>>());
    let concat = |f: fn(&StateSpaceModel) -> &[SignalLabel]| {
        models.iter().flat_map(|m| f(m).iter().cloned()).collect::<Vec<_>>()
    };
    let model = StateSpaceModel::new(
        a,
        b,
        c,
        d,
        concat(StateSpaceModel::state_labels),
        concat(StateSpaceModel::input_labels),
        concat(StateSpaceModel::output_labels),
    )?;

    let (mut ns, mut ni, mut no) = (0, 0, 0);
    let infos = components
        .iter()
        .map(|comp| {
            let m = comp.model();
            let info = ComponentInfo {
                id: comp.id().to_string(),
                kind: comp.kind(),
                states: ns..ns + m.n_states(),
                inputs: ni..ni + m.n_inputs(),
                outputs: no..no + m.n_outputs(),
                ports: comp.ports().to_vec(),
            };
            ns += m.n_states();
            ni += m.n_inputs();
            no += m.n_outputs();
            info
        })
        .collect();
    Ok(StackedSystem {
        model,
        components: infos,
    })
}

/// `<element>.<port>`, e.g. `J.l1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub element: String,
    pub port: String,
}

impl PortRef {
    pub fn new(element: impl Into<String>, port: impl Into<String>) -> Self {
        Self {
            element: element.into(),
            port: port.into(),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.element, self.port)
    }
}

impl FromStr for PortRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('.') {
            Some((e, p)) if is_identifier(e) && is_identifier(p) => Ok(PortRef::new(e, p)),
            _ => Err(Error::config(format!("malformed port reference '{s}'"))),
        }
    }
}

/// A right flange mated with a left flange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub right: PortRef,
    pub left: PortRef,
}

/// A named external input driving the input signal of an unlinked port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalInput {
    pub name: String,
    pub port: PortRef,
}

/// `w = F y + G u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionMatrices {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// External input names, one per column of `G`.
    pub external_names: Vec<String>,
}

/// Derives `F` and `G` from port links and external declarations.
pub fn build_fg(
    stacked: &StackedSystem,
    links: &[Link],
    externals: &[ExternalInput],
) -> Result<ConnectionMatrices> {
    let model = stacked.model();
    let (m, p) = (model.n_inputs(), model.n_outputs());
    let mut f = DMatrix::zeros(m, p);
    let mut g = DMatrix::zeros(m, externals.len());
    let mut drivers = vec![0usize; m];

    let input_idx = |l: &SignalLabel| {
        model
            .input_index(l)
            .ok_or_else(|| Error::config(format!("no component input {l}")))
    };
    let output_idx = |l: &SignalLabel| {
        model
            .output_index(l)
            .ok_or_else(|| Error::config(format!("no component output {l}")))
    };

    for link in links {
        let right = stacked.port(&link.right)?;
        let left = stacked.port(&link.left)?;
        if right.side != Side::Right || left.side != Side::Left {
            return Err(Error::config(format!(
                "incompatible flanges in link {} {}: a right flange must mate a left flange",
                link.right, link.left
            )));
        }
        let (wi, yj) = (input_idx(&left.input)?, output_idx(&right.output)?);
        f[(wi, yj)] = 1.0;
        drivers[wi] += 1;
        let (wi, yj) = (input_idx(&right.input)?, output_idx(&left.output)?);
        f[(wi, yj)] = 1.0;
        drivers[wi] += 1;
    }

    let mut names = HashSet::new();
    for (k, ext) in externals.iter().enumerate() {
        if !names.insert(ext.name.as_str()) {
            return Err(Error::config(format!("duplicate external input '{}'", ext.name)));
        }
        let port = stacked.port(&ext.port)?;
        let wi = input_idx(&port.input)?;
        g[(wi, k)] = 1.0;
        drivers[wi] += 1;
    }

    for (i, &n) in drivers.iter().enumerate() {
        let label = model.input_labels()[i].clone();
        match n {
            0 => return Err(Error::UnconnectedInput(label)),
            1 => {}
            _ => return Err(Error::ConflictingDrivers(label)),
        }
    }
    Ok(ConnectionMatrices {
        f,
        g,
        external_names: externals.iter().map(|e| e.name.clone()).collect(),
    })
}

/// 2-norm condition number via singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Closes the loop `w = F y + G u`.
///
/// The closed model keeps all component outputs; its inputs are labeled by
/// the component input each external drives.
pub fn close(stacked: &StackedSystem, conn: &ConnectionMatrices) -> Result<StateSpaceModel> {
    let model = stacked.model();
    let (a, b, c, d) = (model.a(), model.b(), model.c(), model.d());
    let (m, p) = (model.n_inputs(), model.n_outputs());
    if conn.f.shape() != (m, p) || conn.g.nrows() != m {
        return Err(Error::config("connection matrices do not match the stacked system"));
    }
    let i_df = DMatrix::identity(p, p) - d * &conn.f;
    let cond = condition_number(&i_df);
    if !(cond <= MAX_LOOP_CONDITION) {
        return Err(Error::IllPosedLoop(cond));
    }
    let lu = i_df.lu();
    let x_c = lu
        .solve(c)
        .ok_or_else(|| Error::Numerical("I − D F is singular".into()))?;
    let x_d = lu
        .solve(d)
        .ok_or_else(|| Error::Numerical("I − D F is singular".into()))?;

    let bf = b * &conn.f;
    let a_bar = a + &bf * &x_c;
    let b_bar = (b + &bf * &x_d) * &conn.g;
    let d_bar = &x_d * &conn.g;

    let inputs = (0..conn.g.ncols())
        .map(|k| {
            let row = (0..m).find(|&i| conn.g[(i, k)] != 0.0).ok_or_else(|| {
                Error::config(format!("external input {k} drives nothing"))
            })?;
            Ok(model.input_labels()[row].clone())
        })
        .collect::<Result<Vec<_>>>()?;
    StateSpaceModel::new(
        a_bar,
        b_bar,
        x_c,
        d_bar,
        model.state_labels().to_vec(),
        inputs,
        model.output_labels().to_vec(),
    )
}

/// Restricts and reorders the outputs of `model` to `labels`.
pub fn select_outputs(model: &StateSpaceModel, labels: &[SignalLabel]) -> Result<StateSpaceModel> {
    let rows = labels
        .iter()
        .map(|l| {
            model
                .output_index(l)
                .ok_or_else(|| Error::config(format!("unknown output {l}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let c = model.c().select_rows(&rows);
    let d = model.d().select_rows(&rows);
    StateSpaceModel::new(
        model.a().clone(),
        model.b().clone(),
        c,
        d,
        model.state_labels().to_vec(),
        model.input_labels().to_vec(),
        labels.to_vec(),
    )
}

/// A closed network together with the names of its external inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedNetwork {
    pub model: StateSpaceModel,
    pub input_names: Vec<String>,
}

/// Incremental builder for a network of composite elements.
#[derive(Debug, Clone, Default)]
pub struct Network {
    components: Vec<CompositeModel>,
    links: Vec<Link>,
    externals: Vec<ExternalInput>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, component: CompositeModel) -> &mut Self {
        self.components.push(component);
        self
    }

    /// Mates the right flange `right` with the left flange `left`.
    pub fn link(&mut self, right: PortRef, left: PortRef) -> &mut Self {
        self.links.push(Link { right, left });
        self
    }

    pub fn external(&mut self, name: impl Into<String>, port: PortRef) -> &mut Self {
        self.externals.push(ExternalInput {
            name: name.into(),
            port,
        });
        self
    }

    /// Swaps the element at `index` (declaration order), keeping the wiring.
    pub fn replace(&mut self, index: usize, component: CompositeModel) -> &mut Self {
        self.components[index] = component;
        self
    }

    pub fn components(&self) -> &[CompositeModel] {
        &self.components
    }
    pub fn links(&self) -> &[Link] {
        &self.links
    }
    pub fn externals(&self) -> &[ExternalInput] {
        &self.externals
    }

    pub fn stacked(&self) -> Result<StackedSystem> {
        stack(&self.components)
    }

    /// Stacks, wires and closes the network.
    pub fn build(&self) -> Result<(StackedSystem, ConnectionMatrices, ClosedNetwork)> {
        let stacked = self.stacked()?;
        let conn = build_fg(&stacked, &self.links, &self.externals)?;
        let model = close(&stacked, &conn)?;
        let closed = ClosedNetwork {
            model,
            input_names: conn.external_names.clone(),
        };
        Ok((stacked, conn, closed))
    }

    /// Closes the network and wraps it as a single element whose ports are
    /// the externally driven flanges, named `<element>_<port>`.
    pub fn into_element(&self, id: &str) -> Result<CompositeModel> {
        let (stacked, _, closed) = self.build()?;
        let ports = self
            .externals
            .iter()
            .map(|e| {
                let p = stacked.port(&e.port)?;
                Ok(Port {
                    name: format!("{}_{}", e.port.element, e.port.port),
                    ..p.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let members = stacked.components().iter().map(|c| c.id.clone()).collect();
        crate::composite::from_parts(id, CompositeKind::Network, closed.model, members, ports)
    }
}
