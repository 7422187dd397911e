//! Flat metrics log with a stable CSV wire format.
//!
//! Two row shapes share one schema. Training rows fill `step` and `loss`;
//! evaluation rows fill `category`, `metric`, and `value`. Iteration 0 holds
//! the pre-training evaluation, iteration `t >= 1` holds round `t`'s
//! training steps and the evaluation taken after it.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const METRICS_HEADER: &str = "iteration,step,loss,category,metric,value";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub iteration: usize,
    pub step: Option<usize>,
    pub loss: Option<f64>,
    pub category: Option<String>,
    pub metric: Option<String>,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    rows: Vec<MetricRow>,
}

impl MetricsLog {
    pub fn new() -> Self {
        MetricsLog::default()
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_train(&mut self, iteration: usize, step: usize, loss: f64) {
        self.rows.push(MetricRow {
            iteration,
            step: Some(step),
            loss: Some(loss),
            category: None,
            metric: None,
            value: None,
        });
    }

    pub fn push_eval(&mut self, iteration: usize, category: &str, metric: &str, value: f64) {
        self.rows.push(MetricRow {
            iteration,
            step: None,
            loss: None,
            category: Some(category.to_owned()),
            metric: Some(metric.to_owned()),
            value: Some(value),
        });
    }

    /// Render as CSV. Floats use the shortest representation that parses
    /// back to the same bits, so a round trip is lossless.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.rows.len() + 1));
        out.push_str(METRICS_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},", row.iteration);
            if let Some(step) = row.step {
                let _ = write!(out, "{step}");
            }
            out.push(',');
            if let Some(loss) = row.loss {
                let _ = write!(out, "{loss}");
            }
            out.push(',');
            if let Some(category) = &row.category {
                out.push_str(category);
            }
            out.push(',');
            if let Some(metric) = &row.metric {
                out.push_str(metric);
            }
            out.push(',');
            if let Some(value) = row.value {
                let _ = write!(out, "{value}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == METRICS_HEADER => {}
            Some((_, header)) => {
                return Err(Error::CsvParse {
                    line: 1,
                    reason: format!("unexpected header {header:?}"),
                })
            }
            None => {
                return Err(Error::CsvParse {
                    line: 1,
                    reason: "missing header".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::CsvParse {
                    line: line_no,
                    reason: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let parse_err = |reason: String| Error::CsvParse {
                line: line_no,
                reason,
            };
            let iteration = fields[0]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("iteration: {e}")))?;
            let opt_usize = |s: &str, name: &str| -> Result<Option<usize>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse()
                        .map(Some)
                        .map_err(|e| parse_err(format!("{name}: {e}")))
                }
            };
            let opt_f64 = |s: &str, name: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse()
                        .map(Some)
                        .map_err(|e| parse_err(format!("{name}: {e}")))
                }
            };
            let opt_string = |s: &str| {
                if s.is_empty() {
                    None
                } else {
                    Some(s.to_owned())
                }
            };
            rows.push(MetricRow {
                iteration,
                step: opt_usize(fields[1], "step")?,
                loss: opt_f64(fields[2], "loss")?,
                category: opt_string(fields[3]),
                metric: opt_string(fields[4]),
                value: opt_f64(fields[5], "value")?,
            });
        }
        Ok(MetricsLog { rows })
    }
}
