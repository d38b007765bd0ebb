//! Perturbation torque profiles.
//!
//! Two generator families cover every protocol: bi-polar symmetric pulses
//! (mechanical / static / dynamic identification) and constant-amplitude
//! sinusoids (inertia estimation). Profiles are immutable once built and are
//! evaluated pointwise; the simulation loop samples them once per physics
//! step and holds the value, so edges that land on step boundaries are
//! delivered exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bi-polar symmetric torque pulse: `amplitude` in one direction for
/// `half_duration`, then the same magnitude reversed for another
/// `half_duration`. Net impulse is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Magnitude of each polarity, N·m.
    pub amplitude: f64,
    /// Duration of each polarity, s.
    pub half_duration: f64,
    /// Time the pulse starts, s.
    pub onset: f64,
    /// +1.0 starts with positive torque, -1.0 with negative.
    pub first_polarity: f64,
}

impl PulseSpec {
    pub fn new(amplitude: f64, half_duration: f64, onset: f64, first_polarity: f64) -> Self {
        PulseSpec {
            amplitude,
            half_duration,
            onset,
            first_polarity,
        }
    }

    /// Check spec invariants. `control_dt` is the controller refresh period;
    /// pulses only act reliably when each polarity lasts at least twice that
    /// long, so shorter settings are rejected rather than rounded.
    pub fn validate(&self, control_dt: f64) -> Result<()> {
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::validation("pulse amplitude must be positive"));
        }
        if self.first_polarity != 1.0 && self.first_polarity != -1.0 {
            return Err(Error::validation("pulse first_polarity must be +1 or -1"));
        }
        if !self.half_duration.is_finite() || self.half_duration < 2.0 * control_dt - 1e-12 {
            return Err(Error::validation(format!(
                "pulse half-duration {} s violates the refresh-rate rule: each polarity must \
                 last at least twice the {} s control period (>= {} s)",
                self.half_duration,
                control_dt,
                2.0 * control_dt
            )));
        }
        if self.onset < 0.0 || !self.onset.is_finite() {
            return Err(Error::validation("pulse onset must be non-negative"));
        }
        Ok(())
    }
}

/// Constant-amplitude sinusoidal torque starting at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineSpec {
    /// Hz.
    pub frequency: f64,
    /// N·m.
    pub amplitude: f64,
    /// s; must cover at least 10 cycles.
    pub duration: f64,
}

impl SineSpec {
    pub fn new(frequency: f64, amplitude: f64, duration: f64) -> Self {
        SineSpec {
            frequency,
            amplitude,
            duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(Error::validation("sine frequency must be positive"));
        }
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::validation("sine amplitude must be positive"));
        }
        if !self.duration.is_finite() || self.duration * self.frequency < 10.0 - 1e-9 {
            return Err(Error::validation(format!(
                "sine duration {} s covers fewer than 10 cycles at {} Hz",
                self.duration, self.frequency
            )));
        }
        Ok(())
    }
}

/// A torque profile: a map t -> N·m with a declared support interval, zero
/// outside it. Serializes to `{kind, parameters}` for experiment reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum TorqueProfile {
    Zero,
    Pulse(PulseSpec),
    Sine(SineSpec),
}

impl TorqueProfile {
    /// Torque at time `t`.
    pub fn torque_at(&self, t: f64) -> f64 {
        match self {
            TorqueProfile::Zero => 0.0,
            TorqueProfile::Pulse(p) => {
                if t >= p.onset && t < p.onset + p.half_duration {
                    p.first_polarity * p.amplitude
                } else if t >= p.onset + p.half_duration && t < p.onset + 2.0 * p.half_duration {
                    -p.first_polarity * p.amplitude
                } else {
                    0.0
                }
            }
            TorqueProfile::Sine(s) => {
                if t >= 0.0 && t <= s.duration {
                    s.amplitude * (2.0 * std::f64::consts::PI * s.frequency * t).sin()
                } else {
                    0.0
                }
            }
        }
    }

    /// Support interval `[start, end]`; `None` for the zero profile.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            TorqueProfile::Zero => None,
            TorqueProfile::Pulse(p) => Some((p.onset, p.onset + 2.0 * p.half_duration)),
            TorqueProfile::Sine(s) => Some((0.0, s.duration)),
        }
    }

    /// Same profile shifted so its onset lands at t = 0 (used when fitting
    /// onset-aligned displacement traces).
    pub fn at_origin(&self) -> TorqueProfile {
        match self {
            TorqueProfile::Pulse(p) => TorqueProfile::Pulse(PulseSpec { onset: 0.0, ..*p }),
            other => other.clone(),
        }
    }
}

/// Build a validated bi-polar pulse profile.
pub fn make_pulse(spec: PulseSpec, control_dt: f64) -> Result<TorqueProfile> {
    spec.validate(control_dt)?;
    Ok(TorqueProfile::Pulse(spec))
}

/// Build a validated sinusoid profile.
pub fn make_sine(spec: SineSpec) -> Result<TorqueProfile> {
    spec.validate()?;
    Ok(TorqueProfile::Sine(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CONTROL_DT: f64 = 0.02;

    #[test]
    fn pulse_values_match_polarity_windows() {
        let p = make_pulse(PulseSpec::new(20.0, 0.05, 0.5, 1.0), CONTROL_DT).unwrap();
        assert_eq!(p.torque_at(0.52), 20.0);
        assert_eq!(p.torque_at(0.57), -20.0);
        assert_eq!(p.torque_at(0.7), 0.0);
        assert_eq!(p.torque_at(0.0), 0.0);
        // boundary conventions: [onset, onset+h) positive, [onset+h, onset+2h) negative
        assert_eq!(p.torque_at(0.5), 20.0);
        assert_eq!(p.torque_at(0.55), -20.0);
        assert_eq!(p.torque_at(0.6), 0.0);
    }

    #[test]
    fn dii_pulse_peak() {
        let p = make_pulse(PulseSpec::new(40.0, 0.05, 1.0, 1.0), CONTROL_DT).unwrap();
        let peak = (0..2000)
            .map(|i| p.torque_at(i as f64 * 1e-3).abs())
            .fold(0.0, f64::max);
        assert_eq!(peak, 40.0);
    }

    #[test]
    fn short_pulse_rejected_with_refresh_rule() {
        let err = make_pulse(PulseSpec::new(20.0, 0.01, 0.0, 1.0), CONTROL_DT).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0.02"), "message should cite the refresh period: {msg}");
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn sine_values() {
        let s = make_sine(SineSpec::new(2.0, 10.0, 20.0)).unwrap();
        assert!((s.torque_at(0.125) - 10.0).abs() < 1e-12); // quarter period
        assert_eq!(s.torque_at(0.0), 0.0);
    }

    #[test]
    fn sine_mean_over_integer_cycles_is_zero() {
        let s = make_sine(SineSpec::new(5.0, 3.0, 4.0)).unwrap();
        let dt = 1e-3;
        let n = (4.0 / dt) as usize; // 20 cycles exactly
        let mean = (0..n).map(|i| s.torque_at(i as f64 * dt)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn sine_too_short_rejected() {
        assert!(make_sine(SineSpec::new(2.0, 10.0, 4.0)).is_err());
    }

    proptest! {
        // Net impulse of any valid pulse is zero when integrated on a grid the
        // edges fall on.
        #[test]
        fn pulse_integral_is_zero(
            amp in 0.5f64..60.0,
            half_steps in 40usize..200,
            onset_steps in 0usize..300,
            pol in prop::sample::select(vec![1.0f64, -1.0]),
        ) {
            let dt = 1e-3;
            let spec = PulseSpec::new(amp, half_steps as f64 * dt, onset_steps as f64 * dt, pol);
            let p = make_pulse(spec, CONTROL_DT).unwrap();
            let total_steps = onset_steps + 2 * half_steps + 10;
            let integral: f64 = (0..total_steps).map(|i| p.torque_at(i as f64 * dt) * dt).sum();
            prop_assert!(integral.abs() < 1e-9);
        }

        #[test]
        fn profiles_zero_outside_support(t in -5.0f64..50.0) {
            let p = make_pulse(PulseSpec::new(20.0, 0.05, 0.5, 1.0), CONTROL_DT).unwrap();
            let (lo, hi) = p.support().unwrap();
            if t < lo || t >= hi {
                prop_assert_eq!(p.torque_at(t), 0.0);
            } else {
                prop_assert_eq!(p.torque_at(t).abs(), 20.0);
            }
        }
    }

    #[test]
    fn profile_json_roundtrip() {
        let p = make_pulse(PulseSpec::new(20.0, 0.05, 0.5, 1.0), CONTROL_DT).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"kind\":\"pulse\""));
        let back: TorqueProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
    }
}
