//! Iterate traces recorded by solvers and consumed by the diagnostics.
//!
//! The on-disk form is CSV with the fixed header `k,f,gap,step_dist,slope,envelope`
//! and `.` as the decimal separator. Floats are written in shortest
//! round-trip form, so write -> read -> write is byte-identical. Iterate
//! coordinates and metadata are not part of the CSV; a reloaded trace carries
//! the numeric series only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Vector;

/// Which estimator produced the `slopes` series of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeSource {
    /// Exact gradient norms from the objective's oracle.
    GradientNorm,
    /// Descent-ratio sampling of the objective.
    Sampled,
    /// Descent-ratio sampling of the envelope (constrained runs).
    EnvelopeSampled,
    /// Loaded from CSV; provenance unknown.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    /// Tolerance the subproblem solver was run at; forwarded into margin checks.
    pub subproblem_tol: f64,
    /// Set when the run stopped on its iteration budget rather than the step rule.
    pub budget_exhausted: bool,
    pub slope_source: SlopeSource,
}

impl Default for TraceMeta {
    fn default() -> Self {
        TraceMeta { subproblem_tol: 0.0, budget_exhausted: false, slope_source: SlopeSource::Unknown }
    }
}

/// Record of a descent run: one entry per iterate, `step_dists[k]` being the
/// distance from iterate k to iterate k+1 (so one entry fewer).
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub iterates: Vec<Vector>,
    pub values: Vec<f64>,
    pub gaps: Option<Vec<f64>>,
    pub step_dists: Vec<f64>,
    pub slopes: Option<Vec<f64>>,
    pub envelope_values: Option<Vec<f64>>,
    /// Sampled slopes of the envelope, when the run recorded them. Not part
    /// of the CSV schema.
    pub envelope_slopes: Option<Vec<f64>>,
    pub meta: TraceMeta,
}

pub const TRACE_CSV_HEADER: &str = "k,f,gap,step_dist,slope,envelope";

impl Trace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Check the length invariants: every per-iterate series matches `values`,
    /// `step_dists` is one shorter, and gaps are nonnegative.
    pub fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if n == 0 {
            return Err(Error::invalid("empty trace"));
        }
        if !self.iterates.is_empty() && self.iterates.len() != n {
            return Err(Error::invalid("iterates length differs from values"));
        }
        if self.step_dists.len() + 1 != n {
            return Err(Error::invalid("step_dists must have one entry fewer than values"));
        }
        for (name, series) in [
            ("gaps", &self.gaps),
            ("slopes", &self.slopes),
            ("envelope_values", &self.envelope_values),
            ("envelope_slopes", &self.envelope_slopes),
        ] {
            if let Some(s) = series {
                if s.len() != n {
                    return Err(Error::invalid(format!("{name} length differs from values")));
                }
            }
        }
        if let Some(gaps) = &self.gaps {
            if gaps.iter().any(|&g| g < 0.0 || !g.is_finite()) {
                return Err(Error::invalid("gaps must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    /// Equality of everything the CSV schema carries.
    pub fn same_series(&self, other: &Trace) -> bool {
        self.values == other.values
            && self.gaps == other.gaps
            && self.step_dists == other.step_dists
            && self.slopes == other.slopes
            && self.envelope_values == other.envelope_values
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for k in 0..self.len() {
            let gap = self.gaps.as_ref().map(|g| g[k]);
            let step = if k == 0 { None } else { Some(self.step_dists[k - 1]) };
            let slope = self.slopes.as_ref().map(|s| s[k]);
            let env = self.envelope_values.as_ref().map(|e| e[k]);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                k,
                self.values[k],
                cell(gap),
                cell(step),
                cell(slope),
                cell(env)
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Trace> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == TRACE_CSV_HEADER => {}
            other => {
                return Err(Error::invalid(format!(
                    "bad trace header {:?}, expected {:?}",
                    other.unwrap_or(""),
                    TRACE_CSV_HEADER
                )))
            }
        }
        let mut values = Vec::new();
        let mut gaps: Vec<Option<f64>> = Vec::new();
        let mut steps: Vec<Option<f64>> = Vec::new();
        let mut slopes: Vec<Option<f64>> = Vec::new();
        let mut envs: Vec<Option<f64>> = Vec::new();
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::invalid(format!("row {row}: expected 6 columns, got {}", fields.len())));
            }
            let k: usize = fields[0]
                .parse()
                .map_err(|_| Error::invalid(format!("row {row}: bad iteration index {:?}", fields[0])))?;
            if k != row {
                return Err(Error::invalid(format!("row {row}: out-of-order index {k}")));
            }
            let parse = |s: &str, what: &str| -> Result<Option<f64>> {
                let s = s.trim();
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::invalid(format!("row {row}: bad {what} {s:?}")))
            };
            values.push(
                parse(fields[1], "value")?.ok_or_else(|| Error::invalid(format!("row {row}: missing value")))?,
            );
            gaps.push(parse(fields[2], "gap")?);
            steps.push(parse(fields[3], "step_dist")?);
            slopes.push(parse(fields[4], "slope")?);
            envs.push(parse(fields[5], "envelope")?);
        }
        if values.is_empty() {
            return Err(Error::invalid("trace CSV has no data rows"));
        }
        if steps.first() != Some(&None) {
            return Err(Error::invalid("row 0 must have an empty step_dist"));
        }
        let step_dists: Vec<f64> = steps
            .iter()
            .skip(1)
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::invalid(format!("row {}: missing step_dist", i + 1))))
            .collect::<Result<_>>()?;
        let collect_opt = |col: Vec<Option<f64>>, name: &str| -> Result<Option<Vec<f64>>> {
            if col.iter().all(|c| c.is_none()) {
                Ok(None)
            } else if col.iter().all(|c| c.is_some()) {
                Ok(Some(col.into_iter().map(|c| c.unwrap()).collect()))
            } else {
                Err(Error::invalid(format!("column {name} is only partially filled")))
            }
        };
        let trace = Trace {
            iterates: Vec::new(),
            values,
            gaps: collect_opt(gaps, "gap")?,
            step_dists,
            slopes: collect_opt(slopes, "slope")?,
            envelope_values: collect_opt(envs, "envelope")?,
            envelope_slopes: None,
            meta: TraceMeta::default(),
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Trace> {
        Trace::from_csv(&std::fs::read_to_string(path)?)
    }
}
