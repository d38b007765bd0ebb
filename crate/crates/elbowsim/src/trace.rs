//! Uniformly sampled time series of joint motion.
//!
//! A [`Trace`] is the currency passed between the simulator and the
//! identification code: joint angle sampled at a fixed step, with optional
//! parallel velocity / external-torque / activation channels. Traces
//! round-trip through CSV losslessly (values are printed with shortest
//! round-trip formatting), which is what lets the `identify` subcommand
//! reproduce in-process estimates bit-exactly from exported files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Number of muscle activation channels carried by plant traces.
pub const ACT_CHANNELS: usize = 6;

/// CSV header written for full plant traces.
pub const CSV_HEADER: &str = "t,theta,theta_dot,tau_ext,a1,a2,a3,a4,a5,a6";

/// Uniformly sampled joint-angle series with optional extra channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Sample spacing in seconds.
    pub dt: f64,
    /// Time of the first sample.
    pub origin_time: f64,
    /// Joint angle (or displacement) per sample, radians.
    pub theta: Vec<f64>,
    /// Joint velocity per sample, rad/s.
    pub theta_dot: Option<Vec<f64>>,
    /// External torque applied during the step starting at each sample, N·m.
    pub tau_ext: Option<Vec<f64>>,
    /// Muscle activations per sample.
    pub activations: Option<Vec<[f64; ACT_CHANNELS]>>,
}

impl Trace {
    /// Angle-only trace starting at t = 0.
    pub fn from_theta(dt: f64, theta: Vec<f64>) -> Result<Self> {
        let trace = Trace {
            dt,
            origin_time: 0.0,
            theta,
            theta_dot: None,
            tau_ext: None,
            activations: None,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Time of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        self.origin_time + self.dt * i as f64
    }

    /// Total sampled duration.
    pub fn duration(&self) -> f64 {
        self.dt * self.len().saturating_sub(1) as f64
    }

    /// Index of the sample closest to time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        (((t - self.origin_time) / self.dt).round().max(0.0) as usize).min(self.len() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::validation("trace dt must be positive and finite"));
        }
        if self.theta.len() < 2 {
            return Err(Error::validation("trace needs at least 2 samples"));
        }
        if !self.theta.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("trace contains non-finite angles"));
        }
        for (name, ch) in [("theta_dot", &self.theta_dot), ("tau_ext", &self.tau_ext)] {
            if let Some(v) = ch {
                if v.len() != self.theta.len() {
                    return Err(Error::domain(format!(
                        "trace channel {name} has length {} but theta has {}",
                        v.len(),
                        self.theta.len()
                    )));
                }
                if !v.iter().all(|x| x.is_finite()) {
                    return Err(Error::domain(format!("trace channel {name} is non-finite")));
                }
            }
        }
        if let Some(acts) = &self.activations {
            if acts.len() != self.theta.len() {
                return Err(Error::domain("activation channel length mismatch"));
            }
        }
        Ok(())
    }

    /// Sub-trace covering sample indices `[start, end)`; keeps all channels.
    pub fn slice(&self, start: usize, end: usize) -> Trace {
        Trace {
            dt: self.dt,
            origin_time: self.time_at(start),
            theta: self.theta[start..end].to_vec(),
            theta_dot: self.theta_dot.as_ref().map(|v| v[start..end].to_vec()),
            tau_ext: self.tau_ext.as_ref().map(|v| v[start..end].to_vec()),
            activations: self.activations.as_ref().map(|v| v[start..end].to_vec()),
        }
    }

    /// Displacement trace relative to the sample at `onset_index`: time is
    /// re-origined to 0 there and the onset angle subtracted.
    pub fn displacement_from(&self, onset_index: usize, len: usize) -> Trace {
        let end = (onset_index + len).min(self.len());
        let theta0 = self.theta[onset_index];
        Trace {
            dt: self.dt,
            origin_time: 0.0,
            theta: self.theta[onset_index..end].iter().map(|v| v - theta0).collect(),
            theta_dot: self
                .theta_dot
                .as_ref()
                .map(|v| v[onset_index..end].to_vec()),
            tau_ext: None,
            activations: None,
        }
    }

    /// Serialize to CSV. Full plant traces use the fixed header
    /// `t,theta,theta_dot,tau_ext,a1..a6`; traces without those channels only
    /// write the columns they carry.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut cols = vec!["t", "theta"];
        if self.theta_dot.is_some() {
            cols.push("theta_dot");
        }
        if self.tau_ext.is_some() {
            cols.push("tau_ext");
        }
        if self.activations.is_some() {
            cols.extend(["a1", "a2", "a3", "a4", "a5", "a6"]);
        }
        out.push_str(&cols.join(","));
        out.push('\n');
        for i in 0..self.len() {
            // `{}` on f64 prints the shortest string that parses back to the
            // same bits, so CSV export/import is lossless.
            let _ = write!(out, "{},{}", self.time_at(i), self.theta[i]);
            if let Some(v) = &self.theta_dot {
                let _ = write!(out, ",{}", v[i]);
            }
            if let Some(v) = &self.tau_ext {
                let _ = write!(out, ",{}", v[i]);
            }
            if let Some(a) = &self.activations {
                for x in &a[i] {
                    let _ = write!(out, ",{}", x);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parse a trace from CSV text produced by [`Trace::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::domain("empty trace CSV"))?;
        let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let t_col = find("t").ok_or_else(|| Error::domain("trace CSV missing column t"))?;
        let th_col =
            find("theta").ok_or_else(|| Error::domain("trace CSV missing column theta"))?;
        let thd_col = find("theta_dot");
        let tau_col = find("tau_ext");
        let a_cols: Option<Vec<usize>> = (1..=ACT_CHANNELS)
            .map(|i| find(&format!("a{i}")))
            .collect();

        let mut times = Vec::new();
        let mut theta = Vec::new();
        let mut theta_dot = thd_col.map(|_| Vec::new());
        let mut tau_ext = tau_col.map(|_| Vec::new());
        let mut activations = a_cols.as_ref().map(|_| Vec::new());
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let get = |col: usize| -> Result<f64> {
                fields
                    .get(col)
                    .ok_or_else(|| Error::domain(format!("row {} too short", lineno + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::domain(format!("row {}: {}", lineno + 2, e)))
            };
            times.push(get(t_col)?);
            theta.push(get(th_col)?);
            if let (Some(col), Some(v)) = (thd_col, theta_dot.as_mut()) {
                v.push(get(col)?);
            }
            if let (Some(col), Some(v)) = (tau_col, tau_ext.as_mut()) {
                v.push(get(col)?);
            }
            if let (Some(cols), Some(v)) = (a_cols.as_ref(), activations.as_mut()) {
                let mut row = [0.0; ACT_CHANNELS];
                for (k, &col) in cols.iter().enumerate() {
                    row[k] = get(col)?;
                }
                v.push(row);
            }
        }
        if times.len() < 2 {
            return Err(Error::domain("trace CSV needs at least 2 rows"));
        }
        let dt = times[1] - times[0];
        let trace = Trace {
            dt,
            origin_time: times[0],
            theta,
            theta_dot,
            tau_ext,
            activations,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let trace = Trace {
            dt: 1e-3,
            origin_time: 0.5,
            theta: vec![0.1, 0.2 + 1e-16, std::f64::consts::PI, -4.25e-7],
            theta_dot: Some(vec![0.0, 1.5, -2.25, 0.125]),
            tau_ext: Some(vec![20.0, -20.0, 0.0, 1.0 / 3.0]),
            activations: Some(vec![[0.0; 6], [0.5; 6], [1.0; 6], [0.25; 6]]),
        };
        let parsed = Trace::from_csv(&trace.to_csv()).unwrap();
        assert_eq!(trace.theta, parsed.theta);
        assert_eq!(trace.theta_dot, parsed.theta_dot);
        assert_eq!(trace.tau_ext, parsed.tau_ext);
        assert_eq!(trace.activations, parsed.activations);
        assert_eq!(trace.origin_time, parsed.origin_time);
    }

    #[test]
    fn angle_only_csv() {
        let trace = Trace::from_theta(0.01, vec![0.0, 0.1, 0.2]).unwrap();
        let text = trace.to_csv();
        assert!(text.starts_with("t,theta\n"));
        let parsed = Trace::from_csv(&text).unwrap();
        assert_eq!(parsed.theta, trace.theta);
        assert!(parsed.theta_dot.is_none());
    }

    #[test]
    fn rejects_short_and_nonfinite() {
        assert!(Trace::from_theta(1e-3, vec![0.0]).is_err());
        assert!(Trace::from_theta(1e-3, vec![0.0, f64::NAN]).is_err());
        assert!(Trace::from_theta(0.0, vec![0.0, 1.0]).is_err());
    }
}
