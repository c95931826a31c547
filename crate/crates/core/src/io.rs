//! File formats: family and signal JSON, trace and sweep CSV, report JSON.
//!
//! Subsystem indices are one-based in every file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::TraceAnalysis;
use crate::dwell_time::SweepRow;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::simulate::SimulationTrace;
use crate::switching::{Switch, SwitchingSignal};
use crate::system_model::{stability_check, LinearAffineSubsystem, StabilityVerdict, SystemFamily, TimeDomain};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyFile {
    pub domain: TimeDomain,
    pub n: usize,
    pub m: usize,
    pub subsystems: Vec<SubsystemFile>,
}

/// Row-major `A` (`n×n`), `B` (`n×m`) and `C` (`n`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemFile {
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
}

fn load_err(context: &str, message: impl Into<String>) -> Error {
    Error::Load {
        context: context.to_string(),
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn matrix_field(context: &str, field: String, data: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(load_err(
            context,
            format!(
                "{field} has {} entries, expected {rows}x{cols} = {}",
                data.len(),
                rows * cols
            ),
        ));
    }
    Matrix::new(rows, cols, data.to_vec()).map_err(|e| load_err(context, format!("{field}: {e}")))
}

impl FamilyFile {
    /// Validates dimensions and stability of every subsystem.
    pub fn into_family(self, context: &str) -> Result<SystemFamily> {
        let (n, m) = (self.n, self.m);
        if n == 0 {
            return Err(load_err(context, "n must be positive"));
        }
        if self.subsystems.is_empty() {
            return Err(load_err(context, "subsystems is empty"));
        }
        let mut subs = Vec::with_capacity(self.subsystems.len());
        for (i, raw) in self.subsystems.iter().enumerate() {
            let at = |f: &str| format!("subsystems[{i}].{f}");
            let a = matrix_field(context, at("A"), &raw.a, n, n)?;
            let b = matrix_field(context, at("B"), &raw.b, n, m)?;
            if raw.c.len() != n {
                return Err(load_err(
                    context,
                    format!("{} has {} entries, expected {n}", at("C"), raw.c.len()),
                ));
            }
            let sub = LinearAffineSubsystem::new(a, b, raw.c.clone(), self.domain)?;
            if let StabilityVerdict::Unstable { reason } = stability_check(&sub) {
                return Err(load_err(
                    context,
                    format!("subsystem {} is not stable: {reason}", i + 1),
                ));
            }
            subs.push(sub);
        }
        SystemFamily::new(self.domain, subs)
    }

    pub fn from_family(family: &SystemFamily) -> Self {
        Self {
            domain: family.domain,
            n: family.n,
            m: family.m,
            subsystems: family
                .subsystems
                .iter()
                .map(|s| SubsystemFile {
                    a: s.a.as_slice().to_vec(),
                    b: s.b.as_slice().to_vec(),
                    c: s.c.clone(),
                })
                .collect(),
        }
    }
}

pub fn parse_family(text: &str, context: &str) -> Result<SystemFamily> {
    let raw: FamilyFile = serde_json::from_str(text).map_err(|e| load_err(context, e.to_string()))?;
    raw.into_family(context)
}

pub fn load_family_file(path: impl AsRef<Path>) -> Result<SystemFamily> {
    let path = path.as_ref();
    parse_family(&read_text(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalFile {
    pub initial_index: usize,
    pub switches: Vec<SwitchFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchFile {
    pub t: f64,
    pub p: usize,
}

impl SignalFile {
    pub fn into_signal(self, domain: TimeDomain, context: &str) -> Result<SwitchingSignal> {
        let zero_based = |p: usize, what: String| {
            p.checked_sub(1)
                .ok_or_else(|| load_err(context, format!("{what} must be at least 1")))
        };
        let initial = zero_based(self.initial_index, "initial_index".into())?;
        let switches = self
            .switches
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(Switch {
                    t: s.t,
                    p: zero_based(s.p, format!("switches[{i}].p"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SwitchingSignal::new(domain, initial, switches)
    }

    pub fn from_signal(sig: &SwitchingSignal) -> Self {
        Self {
            initial_index: sig.initial_index + 1,
            switches: sig.switches.iter().map(|s| SwitchFile { t: s.t, p: s.p + 1 }).collect(),
        }
    }
}

pub fn parse_signal(text: &str, domain: TimeDomain, context: &str) -> Result<SwitchingSignal> {
    let raw: SignalFile = serde_json::from_str(text).map_err(|e| load_err(context, e.to_string()))?;
    raw.into_signal(domain, context)
}

pub fn load_signal_file(path: impl AsRef<Path>, domain: TimeDomain) -> Result<SwitchingSignal> {
    let path = path.as_ref();
    parse_signal(&read_text(path)?, domain, &path.display().to_string())
}

pub fn signal_to_json(sig: &SwitchingSignal) -> String {
    serde_json::to_string_pretty(&SignalFile::from_signal(sig)).expect("signal serializes")
}

/// Round-trip exact: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["time".to_string(), "p".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=m).map(|i| format!("d{i}")));
    h.push("V_sigma".into());
    h
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Load {
        context: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `time,p,x1..xn,d1..dm,V_sigma`. For an empty trace, `n` and `m`
/// are taken from the arguments.
pub fn write_trace_csv(trace: &SimulationTrace, n: usize, m: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e| csv_err(path, e);
    w.write_record(trace_header(n, m)).map_err(fail)?;
    for i in 0..trace.len() {
        let mut row = vec![fmt_f64(trace.times[i]), (trace.active_index[i] + 1).to_string()];
        row.extend(trace.states[i].iter().map(|&v| fmt_f64(v)));
        row.extend(trace.disturbance[i].iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(trace.v_sigma[i]));
        w.write_record(&row).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| load_err(&path.display().to_string(), e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_trace_csv(path: impl AsRef<Path>, domain: TimeDomain) -> Result<SimulationTrace> {
    let path = path.as_ref();
    let ctx = path.display().to_string();
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let m = header.iter().filter(|h| h.starts_with('d')).count();
    if header.len() != n + m + 3 {
        return Err(load_err(&ctx, "unexpected trace header"));
    }
    let mut trace = SimulationTrace::empty(domain);
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|e| load_err(&ctx, format!("row {}, column {}: {e}", line + 2, &header[j])))
        };
        let p: usize = rec[1]
            .parse()
            .map_err(|e| load_err(&ctx, format!("row {}, column p: {e}", line + 2)))?;
        trace.times.push(num(0)?);
        trace.active_index.push(p.saturating_sub(1));
        trace.states.push((2..2 + n).map(num).collect::<Result<_>>()?);
        trace
            .disturbance
            .push((2 + n..2 + n + m).map(num).collect::<Result<_>>()?);
        trace.v_sigma.push(num(2 + n + m)?);
    }
    Ok(trace)
}

/// `kappa,delta,mu,omega,Na_bar,c,omega_bar`; skipped cells leave the last
/// three fields empty.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e| csv_err(path, e);
    w.write_record(["kappa", "delta", "mu", "omega", "Na_bar", "c", "omega_bar"])
        .map_err(fail)?;
    for row in rows {
        let mut rec = vec![fmt_f64(row.kappa), fmt_f64(row.delta)];
        let opt = |v: f64| if v.is_nan() { String::new() } else { fmt_f64(v) };
        rec.push(opt(row.mu));
        rec.push(opt(row.omega));
        match row.report() {
            Some(r) => rec.extend([fmt_f64(r.n_a_bar), fmt_f64(r.c), fmt_f64(r.omega_bar)]),
            None => rec.extend([String::new(), String::new(), String::new()]),
        }
        w.write_record(&rec).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| load_err(&path.display().to_string(), e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub entry_time: Option<f64>,
    pub trapped: bool,
    /// One-based ordinal of the first fallback switch.
    #[serde(rename = "k_N")]
    pub k_n: Option<usize>,
    /// Time of that switch.
    #[serde(rename = "t_N")]
    pub t_n: Option<f64>,
    pub decay_ok: bool,
    pub max_violation: f64,
    pub omega_bar: f64,
    pub c: f64,
    pub active_entry_time: Option<f64>,
    pub escaped: bool,
    pub proof_entry_bound: f64,
}

impl From<&TraceAnalysis> for AnalysisReport {
    fn from(a: &TraceAnalysis) -> Self {
        Self {
            entry_time: a.entry.entry_time,
            trapped: a.entry.trapped_after_entry,
            k_n: a.decay.first_fallback.map(|f| f.ordinal),
            t_n: a.decay.first_fallback.map(|f| f.time),
            decay_ok: a.decay.ok,
            max_violation: a.decay.max_violation,
            omega_bar: a.entry.omega_bar,
            c: a.c,
            active_entry_time: a.entry.active_entry_time,
            escaped: a.entry.escaped,
            proof_entry_bound: a.proof_entry_bound,
        }
    }
}
