//! Time-domain simulation: exact zero-order-hold stepping of LTI models and
//! fixed-step RK4 integration of the nonlinear single-pipe and cascade ODEs.

use std::collections::HashSet;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::analysis::matrix_eigenvalues;
use crate::error::{Diagnostic, Error, Result};
use crate::gas::{GasProperties, PipeParams};
use crate::label::{Side, SignalLabel};
use crate::numfmt::format_sig;
use crate::pipe::{rhs_2d, rhs_3d, PipeInput2D, PipeInput3D, PipeState2D, PipeState3D};
use crate::statespace::StateSpaceModel;

/// Sampled signals on a shared, strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    labels: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, labels: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(Error::config("one column per label required"));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::config(format!(
                "times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("times must be finite"));
        }
        let mut seen = HashSet::new();
        for (l, c) in labels.iter().zip(&columns) {
            if l.is_empty() || l == "t" || !seen.insert(l.as_str()) {
                return Err(Error::config(format!("invalid or duplicate channel label '{l}'")));
            }
            if c.len() != times.len() {
                return Err(Error::config(format!("channel '{l}' has the wrong length")));
            }
        }
        Ok(Self {
            times,
            labels,
            columns,
        })
    }

    /// Constant channels held over `[0, t_end]`.
    pub fn constant(t_end: f64, channels: &[(String, f64)]) -> Result<Self> {
        Self::new(
            vec![0.0, t_end],
            channels.iter().map(|(l, _)| l.clone()).collect(),
            channels.iter().map(|&(_, v)| vec![v, v]).collect(),
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(&self.columns[i])
    }

    /// Renames a channel; unknown names are ignored.
    pub fn rename(&mut self, from: &str, to: &str) -> Result<()> {
        if self.labels.iter().any(|l| l == to) && from != to {
            return Err(Error::config(format!("channel '{to}' already exists")));
        }
        if let Some(l) = self.labels.iter_mut().find(|l| *l == from) {
            *l = to.to_string();
        }
        Ok(())
    }

    /// Index of the last sample at or before `t` (zero-order hold).
    fn hold_index(&self, t: f64) -> usize {
        let slack = 1e-9 * t.abs().max(1.0);
        self.times.partition_point(|&s| s <= t + slack).saturating_sub(1)
    }

    /// Writes `t,<labels…>` followed by one row per sample.
    pub fn write_csv<W: Write>(&self, w: W, precision: usize) -> Result<()> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let io = |e: csv::Error| Error::Numerical(format!("CSV write failed: {e}"));
        let header = std::iter::once("t").chain(self.labels.iter().map(String::as_str));
        wr.write_record(header).map_err(io)?;
        for (k, t) in self.times.iter().enumerate() {
            let row = std::iter::once(format_sig(*t, precision))
                .chain(self.columns.iter().map(|c| format_sig(c[k], precision)));
            wr.write_record(row).map_err(io)?;
        }
        wr.flush()
            .map_err(|e| Error::Numerical(format!("CSV write failed: {e}")))
    }

    /// Reads a CSV whose first column is `t`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let diag = |line: u64, column: usize, message: String| {
            Error::Parse(vec![Diagnostic {
                line: line as usize,
                column,
                message,
            }])
        };
        let header = rd
            .headers()
            .map_err(|e| diag(1, 1, format!("unreadable header: {e}")))?
            .clone();
        if header.get(0) != Some("t") {
            return Err(diag(1, 1, "first column must be 't'".into()));
        }
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut columns = vec![Vec::new(); labels.len()];
        for rec in rd.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                diag(line, 1, format!("malformed record: {e}"))
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != labels.len() + 1 {
                return Err(diag(line, 1, "wrong number of fields".into()));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| diag(line, j + 1, format!("not a finite number: '{field}'")))?;
                if j == 0 {
                    times.push(v);
                } else {
                    columns[j - 1].push(v);
                }
            }
        }
        Self::new(times, labels, columns)
    }
}

/// States and outputs of an LTI run on the stepping grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiRun {
    pub states: TimeSeries,
    pub outputs: TimeSeries,
}

fn step_grid(inputs: &TimeSeries, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("time step must be positive, got {dt}")));
    }
    let (Some(&t0), Some(&t1)) = (inputs.times.first(), inputs.times.last()) else {
        return Err(Error::config("input series is empty"));
    };
    let steps = ((t1 - t0) / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| t0 + k as f64 * dt).collect())
}

fn input_columns<'a>(inputs: &'a TimeSeries, labels: &[SignalLabel]) -> Result<Vec<&'a [f64]>> {
    labels
        .iter()
        .map(|l| {
            inputs
                .channel(&l.to_string())
                .ok_or_else(|| Error::config(format!("missing input channel {l}")))
        })
        .collect()
}

/// Zero-order-hold discretization `(Φ, Γ)` via the exponential of the
/// augmented matrix `[[A, B], [0, 0]]·dt`.
pub fn discretize_zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = b.shape();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = aug.exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

fn to_series(times: &[f64], labels: &[SignalLabel], rows: &[DVector<f64>]) -> Result<TimeSeries> {
    let columns = (0..labels.len())
        .map(|i| rows.iter().map(|r| r[i]).collect())
        .collect();
    TimeSeries::new(
        times.to_vec(),
        labels.iter().map(ToString::to_string).collect(),
        columns,
    )
}

/// Simulates `model` with step `dt` over the span of `inputs`, holding each
/// input sample until the next one. Input channels are matched by the
/// rendered input labels; `x0` defaults to zero.
pub fn simulate_lti(
    model: &StateSpaceModel,
    inputs: &TimeSeries,
    x0: Option<&DVector<f64>>,
    dt: f64,
) -> Result<LtiRun> {
    let grid = step_grid(inputs, dt)?;
    let cols = input_columns(inputs, model.input_labels())?;
    let n = model.n_states();
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.clone(),
        Some(x0) => {
            return Err(Error::config(format!(
                "initial state has {} entries, model has {n} states",
                x0.len()
            )))
        }
        None => DVector::zeros(n),
    };
    let (phi, gamma) = discretize_zoh(model.a(), model.b(), dt);
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for &t in &grid {
        let k = inputs.hold_index(t);
        let u = DVector::from_iterator(cols.len(), cols.iter().map(|c| c[k]));
        ys.push(model.c() * &x + model.d() * &u);
        xs.push(x.clone());
        x = &phi * &x + &gamma * &u;
    }
    Ok(LtiRun {
        states: to_series(&grid, model.state_labels(), &xs)?,
        outputs: to_series(&grid, model.output_labels(), &ys)?,
    })
}

/// A nonlinear ODE `ẋ = f(x, u)` in absolute (not deviation) variables.
pub trait NonlinearModel {
    fn state_labels(&self) -> Vec<SignalLabel>;
    fn input_labels(&self) -> Vec<SignalLabel>;
    fn rhs(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>>;
    /// Whether `x` lies where the model is defined.
    fn in_domain(&self, x: &[f64]) -> bool;
}

/// Isothermal single pipe; states `[p_r, q_l]`, inputs `[p_l, q_r]`.
#[derive(Debug, Clone)]
pub struct Pipe2D {
    pub id: String,
    pub params: PipeParams,
    pub gas: GasProperties,
}

impl NonlinearModel for Pipe2D {
    fn state_labels(&self) -> Vec<SignalLabel> {
        vec![
            SignalLabel::pressure(&self.id, Side::Right),
            SignalLabel::flow(&self.id, Side::Left),
        ]
    }
    fn input_labels(&self) -> Vec<SignalLabel> {
        vec![
            SignalLabel::pressure(&self.id, Side::Left),
            SignalLabel::flow(&self.id, Side::Right),
        ]
    }
    fn rhs(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let d = rhs_2d(
            PipeState2D { p_r: x[0], q_l: x[1] },
            PipeInput2D { p_l: u[0], q_r: u[1] },
            &self.params,
            &self.gas,
        )?;
        Ok(d.to_vec())
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        x[0] > 0.0 && x.iter().all(|v| v.is_finite())
    }
}

/// Nonisothermal single pipe; states `[p_r, q_l, T_r]`, inputs `[p_l, q_r, T_l]`.
#[derive(Debug, Clone)]
pub struct Pipe3D {
    pub id: String,
    pub params: PipeParams,
    pub gas: GasProperties,
}

impl NonlinearModel for Pipe3D {
    fn state_labels(&self) -> Vec<SignalLabel> {
        vec![
            SignalLabel::pressure(&self.id, Side::Right),
            SignalLabel::flow(&self.id, Side::Left),
            SignalLabel::temperature(&self.id, Side::Right),
        ]
    }
    fn input_labels(&self) -> Vec<SignalLabel> {
        vec![
            SignalLabel::pressure(&self.id, Side::Left),
            SignalLabel::flow(&self.id, Side::Right),
            SignalLabel::temperature(&self.id, Side::Left),
        ]
    }
    fn rhs(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let d = rhs_3d(
            PipeState3D { p_r: x[0], q_l: x[1], t_r: x[2] },
            PipeInput3D { p_l: u[0], q_r: u[1], t_l: u[2] },
            &self.params,
            &self.gas,
        )?;
        Ok(d.to_vec())
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        x[0] > 0.0 && x[2] > 0.0 && x.iter().all(|v| v.is_finite())
    }
}

/// Isothermal pipes joined end to end. States
/// `[p_{0,r} … p_{N−1,r}, q_{0,l} … q_{N−1,l}]`, inputs `[p_{0,l}, q_{N−1,r}]`.
#[derive(Debug, Clone)]
pub struct Cascade2D {
    pub pipes: Vec<(String, PipeParams)>,
    pub gas: GasProperties,
}

impl NonlinearModel for Cascade2D {
    fn state_labels(&self) -> Vec<SignalLabel> {
        let p = self.pipes.iter().map(|(id, _)| SignalLabel::pressure(id, Side::Right));
        let q = self.pipes.iter().map(|(id, _)| SignalLabel::flow(id, Side::Left));
        p.chain(q).collect()
    }
    fn input_labels(&self) -> Vec<SignalLabel> {
        let (first, last) = (&self.pipes[0].0, &self.pipes[self.pipes.len() - 1].0);
        vec![
            SignalLabel::pressure(first, Side::Left),
            SignalLabel::flow(last, Side::Right),
        ]
    }
    fn rhs(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let n = self.pipes.len();
        let mut out = vec![0.0; 2 * n];
        for (i, (_, params)) in self.pipes.iter().enumerate() {
            let p_l = if i == 0 { u[0] } else { x[i - 1] };
            let q_r = if i + 1 == n { u[1] } else { x[n + i + 1] };
            let d = rhs_2d(
                PipeState2D { p_r: x[i], q_l: x[n + i] },
                PipeInput2D { p_l, q_r },
                params,
                &self.gas,
            )?;
            out[i] = d[0];
            out[n + i] = d[1];
        }
        Ok(out)
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        let n = self.pipes.len();
        x[..n].iter().all(|p| *p > 0.0) && x.iter().all(|v| v.is_finite())
    }
}

/// Central-difference Jacobian `∂f/∂x`.
pub fn state_jacobian(model: &dyn NonlinearModel, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        let h = 1e-6 * x[k].abs().max(1.0);
        let (mut hi, mut lo) = (x.to_vec(), x.to_vec());
        hi[k] += h;
        lo[k] -= h;
        let (fh, fl) = (model.rhs(&hi, u)?, model.rhs(&lo, u)?);
        for i in 0..n {
            j[(i, k)] = (fh[i] - fl[i]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Largest step resolving the fastest oscillation of the linearization at
/// `(x, u)`: `0.1 / max|Im λ|`.
pub fn max_stable_dt(model: &dyn NonlinearModel, x: &[f64], u: &[f64]) -> Result<f64> {
    let eig = matrix_eigenvalues(&state_jacobian(model, x, u)?)?;
    let w = eig.iter().map(|e| e.im.abs()).fold(0.0, f64::max);
    Ok(if w > 0.0 { 0.1 / w } else { f64::INFINITY })
}

/// Classic RK4 with the inputs held over each step. Returns the states on
/// the stepping grid.
pub fn simulate_nonlinear(
    model: &dyn NonlinearModel,
    inputs: &TimeSeries,
    x0: &[f64],
    dt: f64,
) -> Result<TimeSeries> {
    let labels = model.state_labels();
    if x0.len() != labels.len() {
        return Err(Error::config(format!(
            "initial state has {} entries, model has {} states",
            x0.len(),
            labels.len()
        )));
    }
    let grid = step_grid(inputs, dt)?;
    let cols = input_columns(inputs, &model.input_labels())?;
    let u_at = |t: f64| {
        let k = inputs.hold_index(t);
        cols.iter().map(|c| c[k]).collect::<Vec<_>>()
    };
    if !model.in_domain(x0) {
        return Err(Error::LeftPhysicalDomain(grid[0]));
    }
    let limit = max_stable_dt(model, x0, &u_at(grid[0]))?;
    if dt > limit {
        return Err(Error::config(format!(
            "time step {dt} too large; the fastest mode needs dt <= {limit:.3e}"
        )));
    }

    let mut x = x0.to_vec();
    let mut rows = Vec::with_capacity(grid.len());
    rows.push(DVector::from_column_slice(&x));
    for w in grid.windows(2) {
        let (t, t_next) = (w[0], w[1]);
        let u = u_at(t);
        let left = |_| Error::LeftPhysicalDomain(t);
        let axpy = |a: f64, k: &[f64]| x.iter().zip(k).map(|(x, k)| x + a * k).collect::<Vec<_>>();
        let k1 = model.rhs(&x, &u).map_err(left)?;
        let k2 = model.rhs(&axpy(dt / 2.0, &k1), &u).map_err(left)?;
        let k3 = model.rhs(&axpy(dt / 2.0, &k2), &u).map_err(left)?;
        let k4 = model.rhs(&axpy(dt, &k3), &u).map_err(left)?;
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !model.in_domain(&x) {
            return Err(Error::LeftPhysicalDomain(t_next));
        }
        rows.push(DVector::from_column_slice(&x));
    }
    to_series(&grid, &labels, &rows)
}
