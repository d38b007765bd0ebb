//! Controllers mapping observations to actuator commands.
//!
//! Three controller families: passive (all muscles off), a latency-delayed
//! PD reflex surrogate that emulates human stretch-reflex behaviour, and
//! stochastic policy inference for trained agents. Sweeping the PD latency
//! from 0 (agent-like) to 0.05-0.1 s (human-like) reproduces the
//! reaction-time comparison in-silico.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{PlantConfig, PlantState, MUSCLE_COUNT};
use crate::policy::{PolicyParams, ACTION_DIM, OBS_DIM};

/// Ten-variable agent state: time, exoskeleton joint angle and velocity, six
/// muscle activations, and the pose error against the current target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub exo_angle: f64,
    pub exo_velocity: f64,
    pub activations: [f64; MUSCLE_COUNT],
    /// current joint angle minus target angle, rad
    pub pose_error: f64,
}

impl Observation {
    /// Flat vector in the fixed order consumed by networks.
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        let mut v = [0.0; OBS_DIM];
        v[0] = self.time;
        v[1] = self.exo_angle;
        v[2] = self.exo_velocity;
        v[3..9].copy_from_slice(&self.activations);
        v[9] = self.pose_error;
        v
    }

    pub fn zeros() -> Self {
        Observation {
            time: 0.0,
            exo_angle: 0.0,
            exo_velocity: 0.0,
            activations: [0.0; MUSCLE_COUNT],
            pose_error: 0.0,
        }
    }
}

/// Build the observation for the current plant state and target angle.
pub fn observe(state: &PlantState, target: f64) -> Observation {
    Observation {
        time: state.t,
        exo_angle: state.theta,
        exo_velocity: state.theta_dot,
        activations: state.activations,
        pose_error: state.theta - target,
    }
}

/// Seven-component action in [-1, 1]: component 0 drives the exoskeleton
/// channel, components 1-6 map to muscle excitations via `u = (c + 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub components: [f64; ACTION_DIM],
}

impl Action {
    pub fn zeros() -> Self {
        Action {
            components: [0.0; ACTION_DIM],
        }
    }

    /// Action whose muscle components decode to the given excitations.
    pub fn from_excitations(excitations: &[f64; MUSCLE_COUNT], exo: f64) -> Self {
        let mut components = [0.0; ACTION_DIM];
        components[0] = exo;
        for i in 0..MUSCLE_COUNT {
            components[i + 1] = 2.0 * excitations[i] - 1.0;
        }
        Action { components }
    }

    pub fn muscle_excitations(&self) -> [f64; MUSCLE_COUNT] {
        let mut u = [0.0; MUSCLE_COUNT];
        for i in 0..MUSCLE_COUNT {
            u[i] = (self.components[i + 1] + 1.0) / 2.0;
        }
        u
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            if !c.is_finite() || !(-1.0..=1.0).contains(c) {
                return Err(Error::domain(format!(
                    "action component {i} out of [-1, 1]: {c}"
                )));
            }
        }
        Ok(())
    }
}

/// A controller queried once per control tick.
pub trait Controller {
    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Action;
    /// Clear internal state (delay lines) between episodes.
    fn reset(&mut self) {}
}

/// All muscles off, exoskeleton idle.
pub struct PassiveController;

impl Controller for PassiveController {
    fn act(&mut self, _obs: &Observation, _rng: &mut ChaCha8Rng) -> Action {
        Action::from_excitations(&[0.0; MUSCLE_COUNT], 0.0)
    }
}

/// Fixed excitations; used for co-contraction experiments and tests.
pub struct ConstantController {
    pub excitations: [f64; MUSCLE_COUNT],
    pub exo: f64,
}

impl Controller for ConstantController {
    fn act(&mut self, _obs: &Observation, _rng: &mut ChaCha8Rng) -> Action {
        Action::from_excitations(&self.excitations, self.exo)
    }
}

/// Delayed-PD reflex emulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdConfig {
    /// Proportional gain on pose error, N·m/rad.
    pub kp: f64,
    /// Derivative gain on joint velocity, N·m·s/rad.
    pub kd: f64,
    /// Feedback latency, s; must be a multiple of control_dt.
    pub latency: f64,
    /// Excitation added to every muscle regardless of the drive, [0, 1].
    pub cocontraction_baseline: f64,
}

impl Default for PdConfig {
    fn default() -> Self {
        PdConfig {
            kp: 60.0,
            kd: 0.6,
            latency: 0.0,
            cocontraction_baseline: 0.0,
        }
    }
}

impl PdConfig {
    pub fn validate(&self, control_dt: f64) -> Result<()> {
        if self.kp < 0.0 || self.kd < 0.0 {
            return Err(Error::validation("PD gains must be non-negative"));
        }
        if self.latency < 0.0 {
            return Err(Error::validation("PD latency must be non-negative"));
        }
        let ticks = self.latency / control_dt;
        if (ticks - ticks.round()).abs() > 1e-9 {
            return Err(Error::validation(
                "PD latency must be a multiple of control_dt",
            ));
        }
        if !(0.0..=1.0).contains(&self.cocontraction_baseline) {
            return Err(Error::validation(
                "cocontraction_baseline must be in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Delayed-PD reflex controller.
///
/// The desired torque from the latency-old observation is routed to the
/// flexor group when positive, the extensor group otherwise; the selected
/// muscles share one excitation level sized so their combined maximal torque
/// reproduces the demand. Antagonists idle at the co-contraction baseline.
pub struct PdController {
    config: PdConfig,
    delay_ticks: usize,
    flexor_idx: Vec<usize>,
    extensor_idx: Vec<usize>,
    flexor_strength: f64,
    extensor_strength: f64,
    history: VecDeque<Observation>,
}

impl PdController {
    pub fn new(config: PdConfig, plant: &PlantConfig) -> Result<Self> {
        config.validate(plant.control_dt)?;
        let flexor_idx: Vec<usize> = plant
            .muscles
            .iter()
            .enumerate()
            .filter(|(_, m)| m.sign > 0.0)
            .map(|(i, _)| i)
            .collect();
        let extensor_idx: Vec<usize> = plant
            .muscles
            .iter()
            .enumerate()
            .filter(|(_, m)| m.sign < 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(PdController {
            delay_ticks: (config.latency / plant.control_dt).round() as usize,
            flexor_strength: plant.flexor_strength(),
            extensor_strength: plant.extensor_strength(),
            config,
            flexor_idx,
            extensor_idx,
            history: VecDeque::new(),
        })
    }

    /// The observation `latency` seconds old, zero-padded at episode start.
    fn delayed(&self) -> Observation {
        if self.history.len() > self.delay_ticks {
            self.history[self.history.len() - 1 - self.delay_ticks]
        } else {
            Observation::zeros()
        }
    }
}

impl Controller for PdController {
    fn act(&mut self, obs: &Observation, _rng: &mut ChaCha8Rng) -> Action {
        self.history.push_back(*obs);
        if self.history.len() > self.delay_ticks + 1 {
            self.history.pop_front();
        }
        let seen = self.delayed();
        act_pd(
            &self.config,
            &seen,
            &self.flexor_idx,
            &self.extensor_idx,
            self.flexor_strength,
            self.extensor_strength,
        )
    }

    fn reset(&mut self) {
        self.history.clear();
    }
}

/// Pure PD routing rule on a (possibly delayed) observation.
fn act_pd(
    config: &PdConfig,
    obs: &Observation,
    flexor_idx: &[usize],
    extensor_idx: &[usize],
    flexor_strength: f64,
    extensor_strength: f64,
) -> Action {
    let tau_d = -config.kp * obs.pose_error - config.kd * obs.exo_velocity;
    let mut excitations = [config.cocontraction_baseline; MUSCLE_COUNT];
    let (selected, strength) = if tau_d > 0.0 {
        (flexor_idx, flexor_strength)
    } else {
        (extensor_idx, extensor_strength)
    };
    if tau_d != 0.0 {
        let drive = (tau_d.abs() / strength).min(1.0);
        for &i in selected {
            excitations[i] = (drive + config.cocontraction_baseline).clamp(0.0, 1.0);
        }
    }
    Action::from_excitations(&excitations, 0.0)
}

/// Stochastic policy inference.
///
/// The action mean is the tanh-squashed network output; unless
/// `deterministic`, diagonal Gaussian noise `exp(log_std)` is added and the
/// result clamped back into [-1, 1].
pub fn act_policy(
    params: &PolicyParams,
    obs: &Observation,
    rng: &mut ChaCha8Rng,
    deterministic: bool,
) -> Result<Action> {
    let mean = params.mean(&obs.to_array());
    let mut components = [0.0; ACTION_DIM];
    for j in 0..ACTION_DIM {
        if !mean[j].is_finite() {
            return Err(Error::domain("policy produced a non-finite action mean"));
        }
        components[j] = if deterministic {
            mean[j]
        } else {
            let eps: f64 = rng.sample(StandardNormal);
            (mean[j] + params.log_std[j].exp() * eps).clamp(-1.0, 1.0)
        };
    }
    Ok(Action { components })
}

/// Policy wrapped as a [`Controller`].
pub struct PolicyController {
    pub params: PolicyParams,
    pub deterministic: bool,
}

impl PolicyController {
    pub fn new(params: PolicyParams, deterministic: bool) -> Result<Self> {
        params.validate()?;
        Ok(PolicyController {
            params,
            deterministic,
        })
    }
}

impl Controller for PolicyController {
    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Action {
        // params validated at construction; mean of a validated net is finite
        act_policy(&self.params, obs, rng, self.deterministic)
            .expect("validated policy produced non-finite action")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn obs_with(pose_error: f64, velocity: f64) -> Observation {
        Observation {
            pose_error,
            exo_velocity: velocity,
            ..Observation::zeros()
        }
    }

    #[test]
    fn observation_has_ten_scalars() {
        let config = PlantConfig::default();
        let state = PlantState::at_rest(&config);
        let obs = observe(&state, 0.5);
        let v = obs.to_array();
        assert_eq!(v.len(), 10);
        assert!((obs.pose_error - (config.equilibrium_angle - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn pose_error_is_theta_minus_target() {
        let config = PlantConfig::default();
        let mut state = PlantState::at_rest(&config);
        state.theta = 1.0;
        assert_eq!(observe(&state, 0.5).pose_error, 0.5);
        assert_eq!(observe(&state, 1.0).pose_error, 0.0);
    }

    #[test]
    fn action_excitation_mapping() {
        let a = Action {
            components: [0.0, -1.0, 1.0, 0.0, 0.5, -0.5, 0.2],
        };
        let u = a.muscle_excitations();
        assert_eq!(u[0], 0.0);
        assert_eq!(u[1], 1.0);
        assert_eq!(u[2], 0.5);
        assert!((u[3] - 0.75).abs() < 1e-15);
        let back = Action::from_excitations(&u, 0.0);
        for i in 1..ACTION_DIM {
            assert!((back.components[i] - a.components[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn pd_zero_error_zero_baseline_gives_zero_action() {
        let plant = PlantConfig::default();
        let config = PdConfig {
            cocontraction_baseline: 0.0,
            ..PdConfig::default()
        };
        let mut pd = PdController::new(config, &plant).unwrap();
        let action = pd.act(&obs_with(0.0, 0.0), &mut rng());
        let u = action.muscle_excitations();
        assert!(u.iter().all(|&x| x == 0.0));
        assert_eq!(action.components[0], 0.0);
    }

    #[test]
    fn pd_routes_to_one_side_antagonists_get_baseline() {
        let plant = PlantConfig::default();
        let config = PdConfig {
            kp: 60.0,
            kd: 0.0,
            latency: 0.0,
            cocontraction_baseline: 0.1,
        };
        let mut pd = PdController::new(config, &plant).unwrap();
        // positive pose error -> negative desired torque -> extensors drive
        let action = pd.act(&obs_with(0.3, 0.0), &mut rng());
        let u = action.muscle_excitations();
        for i in 0..3 {
            assert_eq!(u[i], 0.1, "flexor {i} should sit at baseline");
        }
        let drive = 60.0 * 0.3 / plant.extensor_strength();
        for i in 3..6 {
            assert!((u[i] - (drive + 0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn pd_latency_delays_response_exactly() {
        let plant = PlantConfig::default();
        let config = PdConfig {
            kp: 60.0,
            kd: 0.0,
            latency: 0.04,
            cocontraction_baseline: 0.0,
        };
        let mut pd = PdController::new(config, &plant).unwrap();
        let mut outputs = Vec::new();
        for tick in 0..6 {
            let err = if tick >= 2 { 0.5 } else { 0.0 }; // step disturbance at tick 2
            outputs.push(pd.act(&obs_with(err, 0.0), &mut rng()));
        }
        // latency 0.04 s = 2 ticks: response to tick-2 input appears at tick 4
        for (tick, action) in outputs.iter().enumerate() {
            let active = action.muscle_excitations().iter().any(|&u| u > 0.0);
            assert_eq!(active, tick >= 4, "tick {tick}");
        }
    }

    #[test]
    fn pd_saturates_at_full_excitation() {
        let plant = PlantConfig::default();
        let mut pd = PdController::new(PdConfig::default(), &plant).unwrap();
        let action = pd.act(&obs_with(-10.0, 0.0), &mut rng());
        let u = action.muscle_excitations();
        for i in 0..3 {
            assert_eq!(u[i], 1.0);
        }
    }

    #[test]
    fn policy_zero_weights_deterministic_zero_action() {
        let params = PolicyParams::zeros();
        let action = act_policy(&params, &Observation::zeros(), &mut rng(), true).unwrap();
        assert!(action.components.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn policy_sampling_reproducible_and_bounded() {
        let mut r1 = rng();
        let mut r2 = rng();
        let mut init_rng = ChaCha8Rng::seed_from_u64(5);
        let params = PolicyParams::init(&mut init_rng);
        let obs = obs_with(0.4, -1.0);
        let a = act_policy(&params, &obs, &mut r1, false).unwrap();
        let b = act_policy(&params, &obs, &mut r2, false).unwrap();
        assert_eq!(a.components, b.components);
        a.validate().unwrap();
    }

    #[test]
    fn pd_latency_must_align_with_control_dt() {
        let plant = PlantConfig::default();
        let bad = PdConfig {
            latency: 0.03,
            ..PdConfig::default()
        };
        assert!(PdController::new(bad, &plant).is_err());
    }
}
