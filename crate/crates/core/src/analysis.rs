//! Eigenvalues, DC gains, frequency responses, the Mason's-gain-formula
//! cross-check of the closed-loop realization, and gain sweeps.

use nalgebra::{linalg::balancing, Complex, DMatrix, Schur};

use crate::composite::{make_gain, CompositeKind, CompositeModel};
use crate::error::{Error, Result};
use crate::interconnect::{close, condition_number, ConnectionMatrices, Network, StackedSystem};
use crate::label::SignalLabel;
use crate::statespace::StateSpaceModel;

pub type C64 = Complex<f64>;

/// Condition number above which a resolvent or loop matrix counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Default frequency grid density.
pub const POINTS_PER_DECADE: usize = 200;

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("matrix has non-finite entries".into()))
    }
}

/// Eigenvalues of a real square matrix (balancing followed by a real Schur
/// decomposition), sorted by real part and then imaginary part.
pub fn matrix_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    check_finite(a)?;
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mut m = a.clone();
    balancing::balance_parlett_reinsch(&mut m);
    let schur = Schur::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))?;
    let mut eig: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eig)
}

/// Eigenvalues of the system matrix `A`.
pub fn eigenvalues(model: &StateSpaceModel) -> Result<Vec<C64>> {
    matrix_eigenvalues(model.a())
}

/// Largest real part over the spectrum of `A` (`-inf` for static models).
pub fn max_real_eigenvalue(model: &StateSpaceModel) -> Result<f64> {
    Ok(eigenvalues(model)?
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// A real matrix with labeled rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub values: DMatrix<f64>,
    pub rows: Vec<SignalLabel>,
    pub cols: Vec<SignalLabel>,
}

impl GainMatrix {
    pub fn get(&self, row: &SignalLabel, col: &SignalLabel) -> Option<f64> {
        let i = self.rows.iter().position(|l| l == row)?;
        let j = self.cols.iter().position(|l| l == col)?;
        Some(self.values[(i, j)])
    }

    /// Keeps the rows whose label satisfies `keep`, in their current order.
    pub fn filter_rows(&self, keep: impl Fn(&SignalLabel) -> bool) -> GainMatrix {
        let idx: Vec<usize> = (0..self.rows.len()).filter(|&i| keep(&self.rows[i])).collect();
        GainMatrix {
            values: self.values.select_rows(&idx),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            cols: self.cols.clone(),
        }
    }

    /// Reorders rows by `key`.
    pub fn sort_rows_by_key<K: Ord>(&self, key: impl Fn(&SignalLabel) -> K) -> GainMatrix {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        idx.sort_by_key(|&i| key(&self.rows[i]));
        GainMatrix {
            values: self.values.select_rows(&idx),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            cols: self.cols.clone(),
        }
    }
}

/// `A⁻¹ B` for a system matrix, failing when `A` is (numerically) singular.
/// Balancing first keeps the conditioning test meaningful for the widely
/// spread magnitudes of pipe coefficients.
fn solve_static(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(a)?;
    let mut ab = a.clone();
    let scale = balancing::balance_parlett_reinsch(&mut ab);
    if condition_number(&ab) > SINGULAR_CONDITION {
        return Err(Error::PoleAtZero);
    }
    // A = S Ab S⁻¹, hence A⁻¹B = S Ab⁻¹ S⁻¹ B.
    let sb = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] / scale[i]);
    let x = ab.lu().solve(&sb).ok_or(Error::PoleAtZero)?;
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * scale[i]))
}

/// Steady-state gain `D − C A⁻¹ B` from inputs to outputs.
pub fn dc_gain(model: &StateSpaceModel) -> Result<GainMatrix> {
    let values = if model.n_states() == 0 {
        model.d().clone()
    } else {
        model.d() - model.c() * solve_static(model.a(), model.b())?
    };
    Ok(GainMatrix {
        values,
        rows: model.output_labels().to_vec(),
        cols: model.input_labels().to_vec(),
    })
}

/// Steady-state gain `−A⁻¹ B` from inputs to states.
pub fn state_dc_gain(model: &StateSpaceModel) -> Result<GainMatrix> {
    let values = if model.n_states() == 0 {
        DMatrix::zeros(0, model.n_inputs())
    } else {
        -solve_static(model.a(), model.b())?
    };
    Ok(GainMatrix {
        values,
        rows: model.state_labels().to_vec(),
        cols: model.input_labels().to_vec(),
    })
}

/// `n` log-spaced points per decade covering `[w_min, w_max]`, both ends included.
pub fn log_grid(w_min: f64, w_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(w_min > 0.0 && w_max >= w_min && w_max.is_finite() && per_decade > 0) {
        return Err(Error::config(format!(
            "invalid frequency range [{w_min}, {w_max}] with {per_decade} points per decade"
        )));
    }
    let decades = (w_max / w_min).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    Ok(log_points(w_min, w_max, n + 1))
}

/// Exactly `n` log-spaced points in `[w_min, w_max]`.
pub fn log_points(w_min: f64, w_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![w_min];
    }
    let (l0, l1) = (w_min.log10(), w_max.log10());
    (0..n)
        .map(|k| 10f64.powf(l0 + (l1 - l0) * k as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub omegas: Vec<f64>,
    /// One `p × m` matrix per frequency.
    pub h: Vec<DMatrix<C64>>,
    /// Samples at which `iωI − A` is nearly singular.
    pub flagged: Vec<bool>,
    pub outputs: Vec<SignalLabel>,
    pub inputs: Vec<SignalLabel>,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// `C (sI − A)⁻¹ B + D` at `s = iω`; the flag reports a nearly singular resolvent.
fn transfer_at(model: &StateSpaceModel, omega: f64) -> (DMatrix<C64>, bool) {
    let d = to_complex(model.d());
    let n = model.n_states();
    if n == 0 {
        return (d, false);
    }
    let mut r = to_complex(&-model.a());
    for i in 0..n {
        r[(i, i)] += C64::new(0.0, omega);
    }
    let cond = complex_condition(&r);
    let b = to_complex(model.b());
    match r.lu().solve(&b) {
        Some(x) => (to_complex(model.c()) * x + d, !(cond <= SINGULAR_CONDITION)),
        None => (
            DMatrix::from_element(model.n_outputs(), model.n_inputs(), C64::new(f64::NAN, f64::NAN)),
            true,
        ),
    }
}

fn complex_condition(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Evaluates the transfer matrix on the imaginary axis.
pub fn freq_response(model: &StateSpaceModel, omegas: &[f64]) -> Result<FrequencyResponse> {
    if let Some(w) = omegas.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::config(format!("frequency must be finite and non-negative, got {w}")));
    }
    check_finite(model.a())?;
    let (h, flagged) = omegas.iter().map(|&w| transfer_at(model, w)).unzip();
    Ok(FrequencyResponse {
        omegas: omegas.to_vec(),
        h,
        flagged,
        outputs: model.output_labels().to_vec(),
        inputs: model.input_labels().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasonReport {
    /// Largest `‖H_closed − H_mason‖ / (1 + ‖H_mason‖)` over unflagged samples
    /// (Frobenius norms).
    pub max_deviation: f64,
    /// Frequencies at which either side was nearly singular.
    pub flagged: Vec<f64>,
}

/// Compares the closed realization against `(I − Q)⁻¹ P` with
/// `Q = T(iω) F` and `P = T(iω) G`, `T` being the stacked open-loop transfer
/// matrix.
pub fn mason_check(
    stacked: &StackedSystem,
    conn: &ConnectionMatrices,
    omegas: &[f64],
) -> Result<MasonReport> {
    let closed = close(stacked, conn)?;
    let f = to_complex(&conn.f);
    let g = to_complex(&conn.g);
    let p_out = stacked.model().n_outputs();
    let mut report = MasonReport {
        max_deviation: 0.0,
        flagged: Vec::new(),
    };
    for &w in omegas {
        let (t, open_flag) = transfer_at(stacked.model(), w);
        let (h_closed, closed_flag) = transfer_at(&closed, w);
        let q = &t * &f;
        let p = &t * &g;
        let mut i_q = -q;
        for i in 0..p_out {
            i_q[(i, i)] += C64::new(1.0, 0.0);
        }
        let loop_flag = !(complex_condition(&i_q) <= SINGULAR_CONDITION);
        let h_mason = i_q.lu().solve(&p);
        match h_mason {
            Some(hm) if !(open_flag || closed_flag || loop_flag) => {
                let dev = (&h_closed - &hm).norm() / (1.0 + hm.norm());
                if !dev.is_finite() {
                    return Err(Error::Numerical(format!("non-finite deviation at ω={w}")));
                }
                report.max_deviation = report.max_deviation.max(dev);
            }
            _ => report.flagged.push(w),
        }
    }
    Ok(report)
}

/// Rebuilds `network` with the gain element `gain_id` set to each `k` and
/// returns `(k, max real eigenvalue)` per value.
pub fn stability_margin_sweep(network: &Network, gain_id: &str, ks: &[f64]) -> Result<Vec<(f64, f64)>> {
    let pos = network
        .components()
        .iter()
        .position(|c| c.id() == gain_id && c.kind() == CompositeKind::Gain)
        .ok_or_else(|| Error::config(format!("no gain element '{gain_id}'")))?;
    ks.iter()
        .map(|&k| {
            let mut net = network.clone();
            let gain: CompositeModel = make_gain(gain_id, k)?;
            net.replace(pos, gain);
            let (_, _, closed) = net.build()?;
            Ok((k, max_real_eigenvalue(&closed.model)?))
        })
        .collect()
}
