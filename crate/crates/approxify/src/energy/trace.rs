//! Harvested-voltage traces: CSV loading and linear interpolation.

use std::path::Path;

use super::EnergyError;

/// Voltage-over-time samples, linearly interpolated between points.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    samples: Vec<(f64, f64)>,
    /// Loop the trace past its last sample.
    pub repeat: bool,
}

impl EnergyTrace {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, EnergyError> {
        if samples.is_empty() {
            return Err(EnergyError::EmptyTrace);
        }
        // sample ordinals stand in for line numbers on programmatic construction
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(EnergyError::NonMonotoneTime { line: i as u64 + 2 });
            }
        }
        for (i, (_, v)) in samples.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(EnergyError::TraceParse {
                    line: i as u64 + 1,
                    message: format!("voltage must be finite and >= 0, got {v}"),
                });
            }
        }
        Ok(EnergyTrace {
            samples,
            repeat: false,
        })
    }

    pub fn constant(volts: f64, duration_ms: f64) -> Self {
        EnergyTrace {
            samples: vec![(0.0, volts), (duration_ms, volts)],
            repeat: false,
        }
    }

    pub fn with_repeat(mut self, repeat: bool) -> Self {
        self.repeat = repeat;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span_ms(&self) -> f64 {
        self.samples.last().unwrap().0
    }

    pub fn max_volts(&self) -> f64 {
        self.samples.iter().map(|&(_, v)| v).fold(0.0, f64::max)
    }

    /// Source voltage at time `t_ms`, or `None` once a non-repeating trace
    /// is exhausted. Times before the first sample hold its value.
    pub fn voltage_at(&self, t_ms: f64) -> Option<f64> {
        let last_t = self.samples.last().unwrap().0;
        let t = if t_ms > last_t {
            if !self.repeat {
                return None;
            }
            if last_t <= 0.0 {
                return Some(self.samples[0].1);
            }
            t_ms % last_t
        } else {
            t_ms
        };
        let first = self.samples[0];
        if t <= first.0 {
            return Some(first.1);
        }
        // find the surrounding segment
        let idx = match self
            .samples
            .binary_search_by(|&(st, _)| st.partial_cmp(&t).unwrap())
        {
            Ok(i) => return Some(self.samples[i].1),
            Err(i) => i,
        };
        let (t0, v0) = self.samples[idx - 1];
        let (t1, v1) = self.samples[idx];
        let frac = (t - t0) / (t1 - t0);
        Some(v0 + (v1 - v0) * frac)
    }
}

/// Load a trace CSV with header `time_ms,volts`.
pub fn load_trace(path: impl AsRef<Path>) -> Result<EnergyTrace, EnergyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EnergyError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_trace_csv(&text)
}

pub fn parse_trace_csv(text: &str) -> Result<EnergyTrace, EnergyError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "time_ms,volts" => {}
        Some((_, header)) => {
            return Err(EnergyError::TraceParse {
                line: 1,
                message: format!("expected header `time_ms,volts`, found `{}`", header.trim()),
            })
        }
        None => return Err(EnergyError::EmptyTrace),
    }
    let mut samples = Vec::new();
    let mut prev_t: Option<f64> = None;
    for (i, line) in lines {
        let line_no = i as u64 + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (t, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(v), None) => (t.trim(), v.trim()),
            _ => {
                return Err(EnergyError::TraceParse {
                    line: line_no,
                    message: "expected two comma-separated fields".to_string(),
                })
            }
        };
        let t: f64 = t.parse().map_err(|_| EnergyError::TraceParse {
            line: line_no,
            message: format!("invalid time `{t}`"),
        })?;
        let v: f64 = v.parse().map_err(|_| EnergyError::TraceParse {
            line: line_no,
            message: format!("invalid voltage `{v}`"),
        })?;
        if !v.is_finite() || v < 0.0 {
            return Err(EnergyError::TraceParse {
                line: line_no,
                message: format!("voltage must be finite and >= 0, got {v}"),
            });
        }
        if let Some(p) = prev_t {
            if t <= p {
                return Err(EnergyError::NonMonotoneTime { line: line_no });
            }
        }
        prev_t = Some(t);
        samples.push((t, v));
    }
    if samples.is_empty() {
        return Err(EnergyError::EmptyTrace);
    }
    EnergyTrace::new(samples)
}
