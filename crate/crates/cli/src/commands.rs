//! Command implementations.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use pipenet_core::analysis::{
    dc_gain, eigenvalues, freq_response, log_points, mason_check, stability_margin_sweep,
    state_dc_gain, GainMatrix,
};
use pipenet_core::interconnect::select_outputs;
use pipenet_core::label::{Quantity, Side};
use pipenet_core::netspec::{elaborate, parse, NetworkModel};
use pipenet_core::numfmt::{format_sig, DEFAULT_PRECISION};
use pipenet_core::simulate::{simulate_lti, TimeSeries};
use pipenet_core::{Error, SignalLabel, StateSpaceModel};

use crate::Common;

/// Largest Mason deviation accepted by `pipenet mason`.
pub const MASON_TOLERANCE: f64 = 1e-6;

fn precision() -> Result<usize> {
    match std::env::var("PIPENET_PRECISION") {
        Err(_) => Ok(DEFAULT_PRECISION),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(p @ 1..=17) => Ok(p),
            _ => bail!("PIPENET_PRECISION must be an integer in 1..=17, got '{v}'"),
        },
    }
}

fn load(path: &Path) -> Result<NetworkModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let located = |e: Error| match e {
        Error::Parse(diags) => anyhow!(diags
            .iter()
            .map(|d| format!("{}:{d}", path.display()))
            .collect::<Vec<_>>()
            .join("\n")),
        other => anyhow!("{}: {other}", path.display()),
    };
    let spec = parse(&text).map_err(located)?;
    let model = elaborate(&spec).map_err(located)?;
    for (pipe, w) in &model.warnings {
        eprintln!("warning: pipe {pipe}: {w}");
    }
    Ok(model)
}

/// The closed model with outputs restricted by `--select` or, failing
/// that, by the file's own output declarations.
fn selected(model: &NetworkModel, select: &[String]) -> Result<StateSpaceModel> {
    if select.is_empty() {
        return Ok(model.selected()?);
    }
    let labels = select
        .iter()
        .map(|s| model.output_label(s.trim()))
        .collect::<pipenet_core::Result<Vec<_>>>()?;
    Ok(select_outputs(&model.closed.model, &labels)?)
}

fn sink(common: &Common) -> Result<Box<dyn Write>> {
    Ok(match &common.output {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn write_rows<W: Write>(w: W, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(header)?;
    for r in rows {
        wr.write_record(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn labeled_matrix<W: Write>(
    w: W,
    corner: &str,
    rows: &[SignalLabel],
    cols: &[SignalLabel],
    m: &nalgebra::DMatrix<f64>,
    prec: usize,
) -> Result<()> {
    let header: Vec<String> = std::iter::once(corner.to_string())
        .chain(cols.iter().map(ToString::to_string))
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            std::iter::once(r.to_string())
                .chain((0..cols.len()).map(|j| format_sig(m[(i, j)], prec)))
                .collect()
        })
        .collect();
    write_rows(w, &header, &body)
}

fn join(labels: &[SignalLabel]) -> String {
    labels.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn build(common: &Common, dump: Option<&Path>) -> Result<ExitCode> {
    let prec = precision()?;
    let net = load(&common.file)?;
    let m = selected(&net, &common.select)?;
    let mut out = sink(common)?;
    writeln!(out, "states={} inputs={} outputs={}", m.n_states(), m.n_inputs(), m.n_outputs())?;
    writeln!(out, "states: {}", join(m.state_labels()))?;
    let inputs: Vec<String> = net
        .closed
        .input_names
        .iter()
        .zip(m.input_labels())
        .map(|(n, l)| format!("{n}={l}"))
        .collect();
    writeln!(out, "inputs: {}", inputs.join(" "))?;
    writeln!(out, "outputs: {}", join(m.output_labels()))?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let parts = [
            ("A", m.state_labels(), m.state_labels(), m.a()),
            ("B", m.state_labels(), m.input_labels(), m.b()),
            ("C", m.output_labels(), m.state_labels(), m.c()),
            ("D", m.output_labels(), m.input_labels(), m.d()),
        ];
        for (name, rows, cols, mat) in parts {
            let path = dir.join(format!("{name}.csv"));
            let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
            labeled_matrix(f, name, rows, cols, mat, prec)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Ordering key that compares digit runs numerically, so P2 sorts before P10.
pub fn natural_key(s: &str) -> Vec<(bool, usize, String)> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        let digit = c.is_ascii_digit();
        let mut run = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_ascii_digit() != digit {
                break;
            }
            run.push(c);
            chars.next();
        }
        if digit {
            let trimmed = run.trim_start_matches('0').to_string();
            out.push((true, trimmed.len(), trimmed));
        } else {
            out.push((false, 0, run));
        }
    }
    out
}

fn write_gains(common: &Common, g: &GainMatrix, prec: usize) -> Result<()> {
    labeled_matrix(sink(common)?, "output", &g.rows, &g.cols, &g.values, prec)
}

pub fn dcgain(common: &Common, flows_only: bool) -> Result<ExitCode> {
    let prec = precision()?;
    let net = load(&common.file)?;
    let g = if flows_only {
        if !common.select.is_empty() {
            bail!("--flows-only and --select cannot be combined");
        }
        state_dc_gain(&net.closed.model)?
            .filter_rows(|l| l.quantity == Quantity::Flow && l.side == Side::Left)
            .sort_rows_by_key(|l| natural_key(&l.element))
    } else {
        dc_gain(&selected(&net, &common.select)?)?
    };
    write_gains(common, &g, prec)?;
    Ok(ExitCode::SUCCESS)
}

pub fn eig(common: &Common) -> Result<ExitCode> {
    let prec = precision()?;
    let net = load(&common.file)?;
    let eig = eigenvalues(&net.closed.model)?;
    let rows: Vec<Vec<String>> = eig
        .iter()
        .map(|e| vec![format_sig(e.re, prec), format_sig(e.im, prec)])
        .collect();
    write_rows(sink(common)?, &["re".into(), "im".into()], &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn frequencies(wmin: f64, wmax: f64, points: usize) -> Result<Vec<f64>> {
    if !(wmin > 0.0 && wmax >= wmin && wmax.is_finite() && points > 0) {
        bail!("need 0 < wmin <= wmax and at least one point");
    }
    Ok(log_points(wmin, wmax, points))
}

pub fn bode(common: &Common, wmin: f64, wmax: f64, points: usize) -> Result<ExitCode> {
    let prec = precision()?;
    let net = load(&common.file)?;
    let m = selected(&net, &common.select)?;
    let r = freq_response(&m, &frequencies(wmin, wmax, points)?)?;
    let mut header = vec!["omega".to_string()];
    for o in &r.outputs {
        for i in &r.inputs {
            header.push(format!("{o}/{i}.mag"));
            header.push(format!("{o}/{i}.phase"));
        }
    }
    header.push("flagged".into());
    let rows: Vec<Vec<String>> = r
        .omegas
        .iter()
        .zip(&r.h)
        .zip(&r.flagged)
        .map(|((w, h), flagged)| {
            let mut row = vec![format_sig(*w, prec)];
            for a in 0..r.outputs.len() {
                for b in 0..r.inputs.len() {
                    let z = h[(a, b)];
                    row.push(format_sig(z.norm(), prec));
                    row.push(format_sig(z.arg().to_degrees(), prec));
                }
            }
            row.push(u8::from(*flagged).to_string());
            row
        })
        .collect();
    write_rows(sink(common)?, &header, &rows)?;
    Ok(ExitCode::SUCCESS)
}

/// Renames external-input columns to the labels they drive and holds the
/// last sample up to `t_end`.
fn prepare_inputs(net: &NetworkModel, raw: &TimeSeries, t_end: f64) -> Result<TimeSeries> {
    let mut ts = raw.clone();
    for (name, label) in net.closed.input_names.iter().zip(net.closed.model.input_labels()) {
        ts.rename(name, &label.to_string())?;
    }
    let t0 = ts.times()[0];
    if t_end.is_nan() || t_end <= t0 {
        bail!("--t-end must lie after the first input sample at t={t0}");
    }
    let keep: Vec<usize> = (0..ts.len()).filter(|&k| ts.times()[k] <= t_end).collect();
    let last = *keep.last().unwrap_or(&0);
    let mut times: Vec<f64> = keep.iter().map(|&k| ts.times()[k]).collect();
    let extend = times.last().is_some_and(|&t| t < t_end);
    if extend {
        times.push(t_end);
    }
    let columns = ts
        .labels()
        .iter()
        .map(|l| {
            let c = ts.channel(l).unwrap_or_default();
            let mut col: Vec<f64> = keep.iter().map(|&k| c[k]).collect();
            if extend {
                col.push(c[last]);
            }
            col
        })
        .collect();
    Ok(TimeSeries::new(times, ts.labels().to_vec(), columns)?)
}

pub fn sim(common: &Common, inputs: &Path, dt: f64, t_end: f64) -> Result<ExitCode> {
    let prec = precision()?;
    let net = load(&common.file)?;
    let m = selected(&net, &common.select)?;
    let f = File::open(inputs).with_context(|| format!("cannot read {}", inputs.display()))?;
    let raw = TimeSeries::read_csv(f).map_err(|e| match e {
        Error::Parse(d) => anyhow!(d
            .iter()
            .map(|d| format!("{}:{d}", inputs.display()))
            .collect::<Vec<_>>()
            .join("\n")),
        other => anyhow!(other),
    })?;
    if raw.is_empty() {
        bail!("{} has no samples", inputs.display());
    }
    let u = prepare_inputs(&net, &raw, t_end)?;
    let run = simulate_lti(&m, &u, None, dt)?;
    run.outputs.write_csv(sink(common)?, prec)?;
    Ok(ExitCode::SUCCESS)
}

pub fn mason(common: &Common, wmin: f64, wmax: f64, points: usize) -> Result<ExitCode> {
    let prec = precision()?;
    let net = load(&common.file)?;
    let report = mason_check(&net.stacked, &net.connections, &frequencies(wmin, wmax, points)?)?;
    let mut out = sink(common)?;
    writeln!(out, "max_deviation={}", format_sig(report.max_deviation, prec))?;
    writeln!(out, "flagged={}", report.flagged.len())?;
    if report.max_deviation > MASON_TOLERANCE {
        eprintln!(
            "error: closed model deviates from the loop formula by {:e} (limit {MASON_TOLERANCE:e})",
            report.max_deviation
        );
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn sweep(common: &Common, element: &str, kmin: f64, kmax: f64, points: usize) -> Result<ExitCode> {
    let prec = precision()?;
    let net = load(&common.file)?;
    if !(kmin.is_finite() && kmax.is_finite() && kmax >= kmin && points > 0) {
        bail!("need finite kmin <= kmax and at least one point");
    }
    let ks: Vec<f64> = if points == 1 {
        vec![kmin]
    } else {
        (0..points)
            .map(|i| kmin + (kmax - kmin) * i as f64 / (points - 1) as f64)
            .collect()
    };
    let res = stability_margin_sweep(&net.network, element, &ks)?;
    let rows: Vec<Vec<String>> = res
        .iter()
        .map(|(k, re)| vec![format_sig(*k, prec), format_sig(*re, prec)])
        .collect();
    write_rows(sink(common)?, &["k".into(), "max_re".into()], &rows)?;
    Ok(ExitCode::SUCCESS)
}
