//! Machine-readable experiment output.

use serde::{Deserialize, Serialize};

use super::config::{Experiment, Format};
use crate::bounds::SweepSummary;
use crate::limits::{ConditionReport, Verdict};

/// Header of the convergence CSV.
pub const CONVERGENCE_HEADER: &str = "n,tv,tv_lo,tv_hi,target,bound,wallclock_ms";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub tv: f64,
    pub tv_lo: f64,
    pub tv_hi: f64,
    pub target: String,
    pub bound: Option<f64>,
    pub wallclock_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub experiment: Experiment,
    pub rows: Vec<ConvergenceRow>,
}

/// One atom of an exact law; `k = None` is the unlocated tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawRow {
    pub n: usize,
    pub k: Option<usize>,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub scenario: String,
    pub rows: Vec<LawRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct VerdictRow<'a> {
    hypothesis: &'a str,
    verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SweepRow<'a> {
    family: &'a str,
    checks: usize,
    worst_margin: f64,
    violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "kebab-case")]
pub enum Report {
    Convergence(ConvergenceReport),
    Law(LawReport),
    Conditions { scenario: String, conditions: ConditionReport },
    Bounds { sweeps: Vec<SweepSummary> },
}

impl Report {
    /// Whether every numerical certificate in the report holds.
    pub fn passed(&self) -> bool {
        match self {
            Report::Bounds { sweeps } => sweeps.iter().all(SweepSummary::passed),
            _ => true,
        }
    }

    pub fn render(&self, format: Format) -> Result<String, String> {
        match format {
            Format::Json => {
                let value = match self {
                    // The JSON form of a convergence report mirrors the CSV.
                    Report::Convergence(r) => serde_json::to_string_pretty(r),
                    other => serde_json::to_string_pretty(other),
                };
                value.map(|s| s + "\n").map_err(|e| e.to_string())
            }
            Format::Csv => self.to_csv().map_err(|e| e.to_string()),
        }
    }

    fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match self {
            Report::Convergence(r) => {
                if r.rows.is_empty() {
                    w.write_record(CONVERGENCE_HEADER.split(','))?;
                }
                for row in &r.rows {
                    w.serialize(row)?;
                }
            }
            Report::Law(r) => {
                for row in &r.rows {
                    w.serialize(row)?;
                }
            }
            Report::Conditions { conditions, .. } => {
                for h in &conditions.hypotheses {
                    w.serialize(VerdictRow { hypothesis: &h.hypothesis, verdict: h.verdict })?;
                }
            }
            Report::Bounds { sweeps } => {
                for s in sweeps {
                    w.serialize(SweepRow {
                        family: &s.family,
                        checks: s.checks,
                        worst_margin: s.worst_margin,
                        violations: s.violations.len(),
                    })?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

impl ConvergenceReport {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads the CSV rows back; the scenario and experiment are not part of
    /// the CSV and must be supplied.
    pub fn from_csv(scenario: &str, experiment: Experiment, text: &str) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<Result<Vec<ConvergenceRow>, _>>()?;
        Ok(ConvergenceReport { scenario: scenario.into(), experiment, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConvergenceReport {
        ConvergenceReport {
            scenario: "thm31".into(),
            experiment: Experiment::Convergence,
            rows: vec![
                ConvergenceRow {
                    n: 10,
                    tv: 0.012345678901234567,
                    tv_lo: 0.0123456,
                    tv_hi: 0.0123457,
                    target: "Po(1)".into(),
                    bound: Some(0.1),
                    wallclock_ms: 0.25,
                },
                ConvergenceRow {
                    n: 100,
                    tv: 1e-3 / 3.0,
                    tv_lo: 1e-4,
                    tv_hi: 1e-3,
                    target: "CP(mu on 1..=2)".into(),
                    bound: None,
                    wallclock_ms: 3.0,
                },
            ],
        }
    }

    #[test]
    fn csv_header_and_round_trip() {
        let report = sample();
        let text = Report::Convergence(report.clone()).render(Format::Csv).unwrap();
        assert_eq!(text.lines().next(), Some(CONVERGENCE_HEADER));
        let back = ConvergenceReport::from_csv("thm31", Experiment::Convergence, &text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn json_round_trip() {
        let report = sample();
        let text = Report::Convergence(report.clone()).render(Format::Json).unwrap();
        assert_eq!(ConvergenceReport::from_json(&text).unwrap(), report);
    }

    #[test]
    fn empty_report_keeps_header() {
        let report = ConvergenceReport { scenario: "x".into(), experiment: Experiment::Convergence, rows: vec![] };
        let text = Report::Convergence(report).render(Format::Csv).unwrap();
        assert_eq!(text.trim_end(), CONVERGENCE_HEADER);
    }
}
