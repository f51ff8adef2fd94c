//! Labeled continuous-time LTI state-space model.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::label::SignalLabel;

/// `ẋ = A x + B u`, `y = C x + D u` with one label per state, input and output.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    states: Vec<SignalLabel>,
    inputs: Vec<SignalLabel>,
    outputs: Vec<SignalLabel>,
}

fn check_unique(labels: &[SignalLabel], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l) {
            return Err(Error::config(format!("duplicate {what} label {l}")));
        }
    }
    Ok(())
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        states: Vec<SignalLabel>,
        inputs: Vec<SignalLabel>,
        outputs: Vec<SignalLabel>,
    ) -> Result<Self> {
        let n = states.len();
        let m = inputs.len();
        let p = outputs.len();
        let dims_ok = a.shape() == (n, n)
            && b.shape() == (n, m)
            && c.shape() == (p, n)
            && d.shape() == (p, m);
        if !dims_ok {
            return Err(Error::config(format!(
                "inconsistent dimensions: A {:?}, B {:?}, C {:?}, D {:?} for n={n}, m={m}, p={p}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        check_unique(&states, "state")?;
        check_unique(&inputs, "input")?;
        check_unique(&outputs, "output")?;
        Ok(Self {
            a,
            b,
            c,
            d,
            states,
            inputs,
            outputs,
        })
    }

    /// A memoryless model `y = D u`.
    pub fn static_gain(
        d: DMatrix<f64>,
        inputs: Vec<SignalLabel>,
        outputs: Vec<SignalLabel>,
    ) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, m),
            DMatrix::zeros(p, 0),
            d,
            Vec::new(),
            inputs,
            outputs,
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn state_labels(&self) -> &[SignalLabel] {
        &self.states
    }
    pub fn input_labels(&self) -> &[SignalLabel] {
        &self.inputs
    }
    pub fn output_labels(&self) -> &[SignalLabel] {
        &self.outputs
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }
    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }
    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn input_index(&self, label: &SignalLabel) -> Option<usize> {
        self.inputs.iter().position(|l| l == label)
    }
    pub fn output_index(&self, label: &SignalLabel) -> Option<usize> {
        self.outputs.iter().position(|l| l == label)
    }
    pub fn state_index(&self, label: &SignalLabel) -> Option<usize> {
        self.states.iter().position(|l| l == label)
    }

    /// Same dynamics with every state exposed as an output (`C = I`, `D = 0`).
    pub fn with_state_outputs(&self) -> Self {
        let n = self.n_states();
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: DMatrix::identity(n, n),
            d: DMatrix::zeros(n, self.n_inputs()),
            states: self.states.clone(),
            inputs: self.inputs.clone(),
            outputs: self.states.clone(),
        }
    }

    #[allow(clippy::type_complexity)]
    pub fn into_parts(
        self,
    ) -> (
        DMatrix<f64>,
        DMatrix<f64>,
        DMatrix<f64>,
        DMatrix<f64>,
        Vec<SignalLabel>,
        Vec<SignalLabel>,
        Vec<SignalLabel>,
    ) {
        (
            self.a,
            self.b,
            self.c,
            self.d,
            self.states,
            self.inputs,
            self.outputs,
        )
    }

    pub fn is_finite(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }
}
