//! Deterministic single-DOF elbow dynamics.
//!
//! The joint is a lumped second-order system: a passive spring-damper about
//! an equilibrium angle, driven by six torque-level muscle actuators (three
//! flexors, three extensors) and an external torque channel used by the
//! perturbation protocols. Muscles respond to excitation through first-order
//! activation dynamics with separate rise/decay time constants, and
//! co-contraction raises joint impedance through intrinsic stiffness and
//! viscosity gains that scale with activation. The intrinsic spring acts
//! about a slowly tracked operating point rather than the fixed equilibrium,
//! so sustained postures re-anchor it while fast perturbations feel the full
//! short-range stiffness.
//!
//! Integration is semi-implicit (symplectic) Euler at `physics_dt`; episodes
//! are pure functions of their inputs, so identical inputs produce
//! bit-identical traces.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{observe, Action, Controller};
use crate::error::{Error, Result};
use crate::signals::TorqueProfile;
use crate::trace::Trace;

/// One torque-level muscle actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleParams {
    pub name: String,
    /// +1 flexor, -1 extensor.
    pub sign: f64,
    /// Torque at full activation with the moment arm folded in, N·m.
    pub max_torque: f64,
    /// Activation rise time constant, s.
    pub act_tau: f64,
    /// Deactivation time constant, s.
    pub deact_tau: f64,
    /// Intrinsic short-range stiffness per unit activation, N·m/rad.
    pub kappa: f64,
    /// Intrinsic viscosity per unit activation, N·m·s/rad.
    pub beta: f64,
}

impl MuscleParams {
    fn validate(&self) -> Result<()> {
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::validation(format!(
                "muscle {}: sign must be +1 or -1",
                self.name
            )));
        }
        if !(self.max_torque > 0.0) || !(self.act_tau > 0.0) || !(self.deact_tau > 0.0) {
            return Err(Error::validation(format!(
                "muscle {}: max_torque, act_tau, deact_tau must be positive",
                self.name
            )));
        }
        if self.kappa < 0.0 || self.beta < 0.0 {
            return Err(Error::validation(format!(
                "muscle {}: kappa and beta must be non-negative",
                self.name
            )));
        }
        Ok(())
    }
}

/// Number of muscles acting on the joint.
pub const MUSCLE_COUNT: usize = 6;

/// Full plant parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Moment of inertia about the joint, kg·m²/rad.
    pub inertia: f64,
    /// Passive joint stiffness, N·m/rad.
    pub passive_k: f64,
    /// Passive joint viscosity, N·m·s/rad.
    pub passive_b: f64,
    /// Angle where passive torques balance with relaxed muscles, rad.
    pub equilibrium_angle: f64,
    pub joint_min: f64,
    pub joint_max: f64,
    /// Integration step, s.
    pub physics_dt: f64,
    /// Controller refresh period, s; must be an integer multiple of physics_dt.
    pub control_dt: f64,
    /// Time constant of the operating-point tracker for intrinsic muscle
    /// impedance, s.
    pub op_point_tau: f64,
    pub muscles: Vec<MuscleParams>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        // Flexor/extensor max torques are symmetric so equal co-contraction
        // produces zero net torque at any angle. Intrinsic gains scale with
        // muscle strength and sum to 180 N·m/rad and 4 N·m·s/rad at full
        // bilateral activation.
        let muscle = |name: &str, sign: f64, max_torque: f64| MuscleParams {
            name: name.to_string(),
            sign,
            max_torque,
            act_tau: 0.015,
            deact_tau: 0.05,
            kappa: max_torque,
            beta: max_torque / 45.0,
        };
        PlantConfig {
            inertia: 0.081,
            passive_k: 11.65,
            passive_b: 0.50,
            equilibrium_angle: 0.773,
            joint_min: 0.0,
            joint_max: 2.618,
            physics_dt: 1e-3,
            control_dt: 0.02,
            op_point_tau: 0.2,
            muscles: vec![
                muscle("biceps_long", 1.0, 40.0),
                muscle("biceps_short", 1.0, 30.0),
                muscle("brachioradialis", 1.0, 20.0),
                muscle("triceps_long", -1.0, 40.0),
                muscle("triceps_lateral", -1.0, 30.0),
                muscle("triceps_medial", -1.0, 20.0),
            ],
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > 0.0) {
            return Err(Error::validation("inertia must be positive"));
        }
        if self.passive_k < 0.0 || self.passive_b < 0.0 {
            return Err(Error::validation("passive_k and passive_b must be non-negative"));
        }
        if !(self.joint_min < self.equilibrium_angle && self.equilibrium_angle < self.joint_max) {
            return Err(Error::validation(
                "equilibrium_angle must lie strictly inside [joint_min, joint_max]",
            ));
        }
        if !(self.physics_dt > 0.0) || !(self.control_dt > 0.0) {
            return Err(Error::validation("physics_dt and control_dt must be positive"));
        }
        let ratio = self.control_dt / self.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::validation(
                "physics_dt must divide control_dt exactly",
            ));
        }
        if !(self.op_point_tau > 0.0) {
            return Err(Error::validation("op_point_tau must be positive"));
        }
        if self.muscles.len() != MUSCLE_COUNT {
            return Err(Error::validation(format!(
                "exactly {MUSCLE_COUNT} muscles required, got {}",
                self.muscles.len()
            )));
        }
        let flexors = self.muscles.iter().filter(|m| m.sign > 0.0).count();
        if flexors != 3 {
            return Err(Error::validation(
                "exactly three flexors and three extensors required",
            ));
        }
        for m in &self.muscles {
            m.validate()?;
        }
        Ok(())
    }

    /// Physics steps per controller tick.
    pub fn steps_per_control_tick(&self) -> usize {
        (self.control_dt / self.physics_dt).round() as usize
    }

    /// Sum of flexor max torques.
    pub fn flexor_strength(&self) -> f64 {
        self.muscles
            .iter()
            .filter(|m| m.sign > 0.0)
            .map(|m| m.max_torque)
            .sum()
    }

    /// Sum of extensor max torques.
    pub fn extensor_strength(&self) -> f64 {
        self.muscles
            .iter()
            .filter(|m| m.sign < 0.0)
            .map(|m| m.max_torque)
            .sum()
    }

    /// Total intrinsic stiffness gain at full bilateral activation.
    pub fn kappa_total(&self) -> f64 {
        self.muscles.iter().map(|m| m.kappa).sum()
    }
}

/// Instantaneous dynamical state of the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub t: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub activations: [f64; MUSCLE_COUNT],
    /// Low-pass tracked operating angle for intrinsic muscle impedance.
    pub op_point: f64,
}

impl PlantState {
    /// Rest state at the equilibrium angle with relaxed muscles.
    pub fn at_rest(config: &PlantConfig) -> Self {
        Self::at_angle(config, config.equilibrium_angle)
    }

    /// Rest state at an arbitrary angle; the operating point starts there.
    pub fn at_angle(_config: &PlantConfig, theta: f64) -> Self {
        PlantState {
            t: 0.0,
            theta,
            theta_dot: 0.0,
            activations: [0.0; MUSCLE_COUNT],
            op_point: theta,
        }
    }
}

/// Advance the plant by exactly one `physics_dt`.
///
/// Update order: activations (implicit Euler, exact sign-dependent time
/// constant), operating point, then a symplectic Euler velocity/position
/// update using the fresh activations. Joint limits clamp the angle and zero
/// any velocity still pushing into the stop.
pub fn step(
    config: &PlantConfig,
    state: &PlantState,
    excitations: &[f64; MUSCLE_COUNT],
    tau_ext: f64,
) -> Result<PlantState> {
    if !tau_ext.is_finite() {
        return Err(Error::domain("non-finite external torque"));
    }
    for (i, &u) in excitations.iter().enumerate() {
        if !u.is_finite() || !(0.0..=1.0).contains(&u) {
            return Err(Error::domain(format!(
                "excitation {i} out of range [0,1]: {u}"
            )));
        }
    }
    let dt = config.physics_dt;

    let mut next = *state;
    for (i, m) in config.muscles.iter().enumerate() {
        let u = excitations[i];
        let a = state.activations[i];
        let tau = if u > a { m.act_tau } else { m.deact_tau };
        // implicit Euler keeps a in [0,1] for any u in [0,1]
        next.activations[i] = (tau * a + dt * u) / (tau + dt);
    }
    next.op_point = (config.op_point_tau * state.op_point + dt * state.theta)
        / (config.op_point_tau + dt);

    let mut muscle_torque = 0.0;
    let mut kappa_act = 0.0;
    let mut beta_act = 0.0;
    for (m, &a) in config.muscles.iter().zip(next.activations.iter()) {
        muscle_torque += m.sign * a * m.max_torque;
        kappa_act += m.kappa * a;
        beta_act += m.beta * a;
    }

    let torque = tau_ext + muscle_torque
        - config.passive_k * (state.theta - config.equilibrium_angle)
        - config.passive_b * state.theta_dot
        - kappa_act * (state.theta - next.op_point)
        - beta_act * state.theta_dot;

    next.theta_dot = state.theta_dot + dt * torque / config.inertia;
    next.theta = state.theta + dt * next.theta_dot;

    if next.theta < config.joint_min {
        next.theta = config.joint_min;
        if next.theta_dot < 0.0 {
            next.theta_dot = 0.0;
        }
    } else if next.theta > config.joint_max {
        next.theta = config.joint_max;
        if next.theta_dot > 0.0 {
            next.theta_dot = 0.0;
        }
    }
    next.t = state.t + dt;
    Ok(next)
}

/// Everything a scripted episode needs besides the plant itself.
pub struct Episode<'a> {
    /// Scripted external torque, sampled once per physics step and held.
    pub profile: &'a TorqueProfile,
    /// Target angle over time, fed to the controller as pose error.
    pub target: &'a dyn Fn(f64) -> f64,
    /// Episode length, s.
    pub duration: f64,
    /// Torque per unit of the controller's exoskeleton action component.
    /// Identification protocols pass 0 so perturbations come only from the
    /// scripted profile.
    pub exo_torque_scale: f64,
}

/// Run a closed-loop episode and record a full trace at physics rate.
///
/// The controller is invoked at every `control_dt` boundary with the current
/// observation; its action is held (zero-order) until the next tick. Muscle
/// action components are mapped to excitations via `u = (c + 1) / 2`.
pub fn run_episode(
    config: &PlantConfig,
    initial: PlantState,
    controller: &mut dyn Controller,
    episode: &Episode,
    rng: &mut ChaCha8Rng,
) -> Result<Trace> {
    config.validate()?;
    if !(episode.duration > 0.0) {
        return Err(Error::validation("episode duration must be positive"));
    }
    let n_steps = (episode.duration / config.physics_dt).round() as usize;
    let per_tick = config.steps_per_control_tick();

    let mut state = initial;
    let mut theta = Vec::with_capacity(n_steps + 1);
    let mut theta_dot = Vec::with_capacity(n_steps + 1);
    let mut tau_ext = Vec::with_capacity(n_steps + 1);
    let mut activations = Vec::with_capacity(n_steps + 1);

    let mut excitations = [0.0; MUSCLE_COUNT];
    let mut exo_action = 0.0;
    for i in 0..=n_steps {
        if i % per_tick == 0 {
            let obs = observe(&state, (episode.target)(state.t));
            let action = controller.act(&obs, rng);
            action.validate()?;
            excitations = action.muscle_excitations();
            exo_action = action.components[0];
        }
        let tau = episode.profile.torque_at(state.t) + exo_action * episode.exo_torque_scale;

        theta.push(state.theta);
        theta_dot.push(state.theta_dot);
        tau_ext.push(tau);
        activations.push(state.activations);

        if i < n_steps {
            state = step(config, &state, &excitations, tau)?;
        }
    }

    Ok(Trace {
        dt: config.physics_dt,
        origin_time: initial.t,
        theta,
        theta_dot: Some(theta_dot),
        tau_ext: Some(tau_ext),
        activations: Some(activations),
    })
}

/// Convenience: fixed target for hold-style episodes.
pub fn hold_target(angle: f64) -> impl Fn(f64) -> f64 {
    move |_t| angle
}
