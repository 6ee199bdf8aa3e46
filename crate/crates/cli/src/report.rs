//! Report and trace persistence. Floats are always written with 17
//! significant digits so that reruns produce byte-identical files.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use hkq_core::FlowTrace;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One failed assertion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub detail: String,
}

impl Failure {
    pub fn new(check: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            index: None,
            detail: detail.into(),
        }
    }

    pub fn at(check: impl Into<String>, index: usize, detail: impl Into<String>) -> Self {
        Self {
            index: Some(index),
            ..Self::new(check, detail)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub epsilon: f64,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub failures: Vec<Failure>,
    pub result: serde_json::Value,
}

/// Pretty printer with fixed-width scientific floats.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("reports always serialize");
    out.push(b'\n');
    out
}

pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    let path = dir.join("report.json");
    std::fs::write(&path, to_json(report)).map_err(|source| CliError::Write { path, source })
}

/// Columns `t, f, grad_norm, rho, lyap`, one row per trace sample.
pub fn write_trace(dir: &Path, k: usize, trace: &FlowTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(format!("trace_{k}.csv")))?;
    w.write_record(["t", "f", "grad_norm", "rho", "lyap"])?;
    for s in &trace.samples {
        w.write_record([s.t, s.f, s.grad_norm, s.rho, s.lyap].map(|v| format!("{v:.16e}")))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
