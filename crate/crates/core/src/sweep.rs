//! Parameter sweeps over `(T, κ, λ)` grids with CSV export.
//!
//! Rows are ordered with temperature outermost, then `κ`, then `λ`, whatever
//! order the worker pool finishes them in. Values are written with 17
//! significant digits so a re-read reproduces them bit for bit.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlations::{CorrelationError, CorrelationReport, XStateParams};
use crate::model::{thermal_functionals, ModelError, ModelParams, Temperature};
use crate::protocol::optimal_from_functionals;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error("{quantity} is not finite at kappa={kappa}, lambda={lambda}, T={temperature}")]
    NonFinite { quantity: Quantity, kappa: f64, lambda: f64, temperature: f64 },
    #[error("malformed CSV: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    EBMax,
    EA,
    Eta,
    Discord,
    Concurrence,
    Negativity,
    MutualInfo,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::EBMax,
        Quantity::EA,
        Quantity::Eta,
        Quantity::Discord,
        Quantity::Concurrence,
        Quantity::Negativity,
        Quantity::MutualInfo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::EBMax => "e_b_max",
            Quantity::EA => "e_a",
            Quantity::Eta => "eta",
            Quantity::Discord => "discord",
            Quantity::Concurrence => "concurrence",
            Quantity::Negativity => "negativity",
            Quantity::MutualInfo => "mutual_info",
        }
    }

    fn needs_correlations(self) -> bool {
        matches!(self, Quantity::Discord | Quantity::Concurrence | Quantity::Negativity | Quantity::MutualInfo)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s.trim())
            .ok_or_else(|| SweepError::Invalid(format!("unknown quantity `{s}`")))
    }
}

/// Evenly spaced samples `min, …, max` (both ends included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self, SweepError> {
        let range = Self { min, max, steps };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(SweepError::Invalid(format!("range bounds must be finite, got {}:{}", self.min, self.max)));
        }
        if self.steps < 2 {
            return Err(SweepError::Invalid(format!("a swept axis needs at least 2 steps, got {}", self.steps)));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let d = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + (self.max - self.min) * i as f64 / d })
            .collect()
    }
}

impl FromStr for AxisRange {
    type Err = SweepError;

    /// Parses `MIN:MAX:STEPS`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SweepError::Invalid(format!("expected MIN:MAX:STEPS, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let min = parts[0].trim().parse().map_err(|_| bad())?;
        let max = parts[1].trim().parse().map_err(|_| bad())?;
        let steps = parts[2].trim().parse().map_err(|_| bad())?;
        AxisRange::new(min, max, steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kappa_range: AxisRange,
    pub lambda_range: AxisRange,
    pub temperatures: Vec<f64>,
    pub quantities: Vec<Quantity>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        self.kappa_range.validate()?;
        self.lambda_range.validate()?;
        if self.temperatures.is_empty() {
            return Err(SweepError::Invalid("no temperatures given".into()));
        }
        for &t in &self.temperatures {
            Temperature::new(t)?;
        }
        if self.quantities.is_empty() {
            return Err(SweepError::Invalid("no quantities requested".into()));
        }
        Ok(())
    }

    /// Grid points in output order.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let kappas = self.kappa_range.values();
        let lambdas = self.lambda_range.values();
        let mut out = Vec::with_capacity(self.temperatures.len() * kappas.len() * lambdas.len());
        for &t in &self.temperatures {
            for &k in &kappas {
                for &l in &lambdas {
                    out.push((k, l, t));
                }
            }
        }
        out
    }
}

/// One grid point; `None` marks an undefined efficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kappa: f64,
    pub lambda: f64,
    pub temperature: f64,
    pub values: Vec<Option<f64>>,
}

impl SweepRecord {
    pub fn get(&self, quantities: &[Quantity], q: Quantity) -> Option<f64> {
        quantities.iter().position(|&x| x == q).and_then(|i| self.values[i])
    }
}

pub fn evaluate_point(kappa: f64, lambda: f64, temperature: f64, quantities: &[Quantity]) -> Result<SweepRecord, SweepError> {
    let params = ModelParams::new(kappa, lambda)?;
    let temp = Temperature::new(temperature)?;
    let tf = thermal_functionals(params, temp);
    let qet = optimal_from_functionals(&tf);
    let corr = if quantities.iter().any(|q| q.needs_correlations()) {
        Some(CorrelationReport::from_x_state(&XStateParams::from_functionals(&tf))?)
    } else {
        None
    };
    let mut values = Vec::with_capacity(quantities.len());
    for &q in quantities {
        let v = match q {
            Quantity::EBMax => Some(qet.e_b),
            Quantity::EA => Some(qet.e_a),
            Quantity::Eta => qet.eta,
            Quantity::Discord => corr.map(|c| c.discord),
            Quantity::Concurrence => corr.map(|c| c.concurrence),
            Quantity::Negativity => corr.map(|c| c.negativity),
            Quantity::MutualInfo => corr.map(|c| c.mutual_information),
        };
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(SweepError::NonFinite { quantity: q, kappa, lambda, temperature });
            }
        }
        values.push(v);
    }
    Ok(SweepRecord { kappa, lambda, temperature, values })
}

/// Evaluates every grid point in parallel; the result is in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>, SweepError> {
    spec.validate()?;
    spec.points()
        .into_par_iter()
        .map(|(k, l, t)| evaluate_point(k, l, t, &spec.quantities))
        .collect()
}

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(writer: W, quantities: &[Quantity], records: &[SweepRecord]) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["kappa", "lambda", "temperature"];
    header.extend(quantities.iter().map(|q| q.name()));
    w.write_record(&header)?;
    for rec in records {
        let mut row = vec![format_value(rec.kappa), format_value(rec.lambda), format_value(rec.temperature)];
        row.extend(rec.values.iter().map(|v| v.map(format_value).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<(Vec<Quantity>, Vec<SweepRecord>), SweepError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let fixed = ["kappa", "lambda", "temperature"];
    if header.len() < 3 || header.iter().take(3).ne(fixed.iter().copied()) {
        return Err(SweepError::Parse("header must start with kappa,lambda,temperature".into()));
    }
    let quantities: Vec<Quantity> = header.iter().skip(3).map(str::parse).collect::<Result<_, _>>()?;
    let number = |s: &str| s.parse::<f64>().map_err(|_| SweepError::Parse(format!("bad number `{s}`")));
    let mut records = Vec::new();
    for row in r.records() {
        let row = row?;
        let values = row
            .iter()
            .skip(3)
            .map(|s| if s.is_empty() { Ok(None) } else { number(s).map(Some) })
            .collect::<Result<Vec<_>, _>>()?;
        records.push(SweepRecord { kappa: number(&row[0])?, lambda: number(&row[1])?, temperature: number(&row[2])?, values });
    }
    Ok((quantities, records))
}

/// Largest defined value of `q`, with its record.
pub fn max_of<'a>(quantities: &[Quantity], records: &'a [SweepRecord], q: Quantity) -> Option<(f64, &'a SweepRecord)> {
    records
        .iter()
        .filter_map(|r| r.get(quantities, q).map(|v| (v, r)))
        .max_by(|a, b| a.0.total_cmp(&b.0))
}
