//! Reduced-order surrogate of the EMT environment.
//!
//! The sub-synchronous interaction is modelled as a single second-order
//! mode in the dq envelope,
//!
//! ```text
//! x'' + 2 zeta(kp) omega x' + omega^2 x = w(t)
//! ```
//!
//! with state `(x, x'/omega)` so both components carry per-unit power.
//! Each gain segment is linear, so the state is advanced with the exact
//! zero-order-hold discretization of that segment.

mod scenario;

pub use scenario::PlantScenario;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::sigproc::{SignalError, SignalTrace};

/// Mode-state norm beyond which a run counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("plant state diverged after t = {t} s")]
    Diverged { t: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Jointly applied outer-loop proportional gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainAction {
    pub kp: f64,
}

impl GainAction {
    pub fn new(kp: f64) -> Self {
        Self { kp }
    }

    pub fn clamped(kp: f64, kp_min: f64, kp_max: f64) -> Self {
        Self {
            kp: kp.max(kp_min).min(kp_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub t: f64,
    /// `(x, x'/omega)` of the resonant mode.
    pub mode_state: [f64; 2],
    pub active_kp: f64,
}

impl PlantState {
    /// State at `t = 0`: mode displaced by `disturbance_amp`, nominal gain.
    pub fn initial(scenario: &PlantScenario) -> Self {
        Self {
            t: 0.0,
            mode_state: [scenario.disturbance_amp, 0.0],
            active_kp: scenario.kp_stable,
        }
    }

    pub fn norm(&self) -> f64 {
        self.mode_state[0].hypot(self.mode_state[1])
    }
}

/// Damping ratio of the mode at gain `kp`.
pub fn damping_of_gain(scenario: &PlantScenario, kp: f64) -> f64 {
    scenario.zeta_stable * (scenario.kp_crit - kp) / (scenario.kp_crit - scenario.kp_stable)
}

/// Continuous-time eigenvalues of the mode at gain `kp`.
pub fn mode_eigenvalues(scenario: &PlantScenario, kp: f64) -> [Complex64; 2] {
    let zeta = damping_of_gain(scenario, kp);
    let omega = scenario.omega();
    let disc = Complex64::new(zeta * zeta - 1.0, 0.0).sqrt() * omega;
    let centre = Complex64::new(-zeta * omega, 0.0);
    [centre + disc, centre - disc]
}

type Mat2 = [[f64; 2]; 2];

/// One-step transition of the mode at a fixed gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDynamics {
    kp: f64,
    transition: Mat2,
    input: [f64; 2],
}

impl ModeDynamics {
    pub fn new(scenario: &PlantScenario, kp: f64, dt: f64) -> Self {
        let omega = scenario.omega();
        let zeta = damping_of_gain(scenario, kp);
        let a: Mat2 = [[0.0, omega], [-omega, -2.0 * zeta * omega]];
        let phi = expm2(&a, dt);
        // Gamma = A^-1 (Phi - I) B with B = (0, 1/omega); det A = omega^2.
        let det = omega * omega;
        let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
        let pm = [[phi[0][0] - 1.0, phi[0][1]], [phi[1][0], phi[1][1] - 1.0]];
        let b1 = 1.0 / omega;
        let col = [pm[0][1] * b1, pm[1][1] * b1];
        let input = [
            inv[0][0] * col[0] + inv[0][1] * col[1],
            inv[1][0] * col[0] + inv[1][1] * col[1],
        ];
        Self {
            kp,
            transition: phi,
            input,
        }
    }

    pub fn kp(&self) -> f64 {
        self.kp
    }

    pub fn transition(&self) -> Mat2 {
        self.transition
    }

    /// Eigenvalues of the one-step transition matrix.
    pub fn transition_eigenvalues(&self) -> [Complex64; 2] {
        let p = &self.transition;
        let tr = p[0][0] + p[1][1];
        let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
        let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
        [tr / 2.0 + disc, tr / 2.0 - disc]
    }

    /// Advances `(x, x'/omega)` by one step with process input `w` held constant.
    pub fn advance(&self, s: [f64; 2], w: f64) -> [f64; 2] {
        let p = &self.transition;
        [
            p[0][0] * s[0] + p[0][1] * s[1] + self.input[0] * w,
            p[1][0] * s[0] + p[1][1] * s[1] + self.input[1] * w,
        ]
    }
}

/// `exp(A t)` for a 2x2 matrix via the Cayley-Hamilton closed form.
fn expm2(a: &Mat2, t: f64) -> Mat2 {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let delta2 = m * m - det;
    let (c, s) = if delta2 < 0.0 {
        let beta = (-delta2).sqrt();
        ((beta * t).cos(), (beta * t).sin() / beta)
    } else if delta2 > 0.0 {
        let d = delta2.sqrt();
        ((d * t).cosh(), (d * t).sinh() / d)
    } else {
        (1.0, t)
    };
    let e = (m * t).exp();
    [
        [e * (c + s * (a[0][0] - m)), e * s * a[0][1]],
        [e * s * a[1][0], e * (c + s * (a[1][1] - m))],
    ]
}

fn checked(state: PlantState, prev_t: f64) -> Result<PlantState, PlantError> {
    let finite = state.mode_state.iter().all(|v| v.is_finite());
    if !finite || state.norm() > DIVERGENCE_LIMIT {
        return Err(PlantError::Diverged { t: prev_t });
    }
    Ok(state)
}

fn process_noise<R: Rng + ?Sized>(scenario: &PlantScenario, dt: f64, rng: &mut R) -> f64 {
    if scenario.noise_std == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    z * scenario.noise_std / dt.sqrt()
}

/// Advances the plant by `dt` at its active gain with process noise.
pub fn step<R: Rng + ?Sized>(
    state: &PlantState,
    scenario: &PlantScenario,
    dt: f64,
    rng: &mut R,
) -> Result<PlantState, PlantError> {
    let dynamics = ModeDynamics::new(scenario, state.active_kp, dt);
    step_with(&dynamics, state, scenario, dt, rng)
}

/// [`step`] with a precomputed transition for the active gain.
pub fn step_with<R: Rng + ?Sized>(
    dynamics: &ModeDynamics,
    state: &PlantState,
    scenario: &PlantScenario,
    dt: f64,
    rng: &mut R,
) -> Result<PlantState, PlantError> {
    let w = process_noise(scenario, dt, rng);
    let next = PlantState {
        t: state.t + dt,
        mode_state: dynamics.advance(state.mode_state, w),
        active_kp: state.active_kp,
    };
    checked(next, state.t)
}

/// Switches the active gain; the mode state is continuous across the switch.
pub fn apply_gain(state: &PlantState, action: GainAction) -> PlantState {
    PlantState {
        active_kp: action.kp,
        ..*state
    }
}

/// Measured active power: operating point + mode displacement + sensor noise.
pub fn measure<R: Rng + ?Sized>(state: &PlantState, scenario: &PlantScenario, rng: &mut R) -> f64 {
    let noise = if scenario.noise_std == 0.0 {
        0.0
    } else {
        let z: f64 = rng.sample(StandardNormal);
        z * scenario.noise_std
    };
    scenario.p_nom + state.mode_state[0] + noise
}

/// Result of a full open-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    /// Measured active power at the simulation rate, truncated on divergence.
    pub trace: SignalTrace,
    /// Last finite time when the run diverged.
    pub diverged_at: Option<f64>,
}

/// Simulates the event timeline: `kp_stable` until `mistune_time`,
/// `kp_unstable` until `act_time`, then `action.kp` until `horizon`.
///
/// The trace holds `round(horizon / sim_dt)` samples at `t = k * sim_dt`.
///
/// `horizon` may end before `act_time` (or `mistune_time`) to produce the
/// pre-activation segment alone.
pub fn run_episode(
    scenario: &PlantScenario,
    action: GainAction,
    seed: u64,
) -> Result<EpisodeOutcome, PlantError> {
    scenario.validate_timeline()?;
    let dt = scenario.sim_dt;
    let n = scenario.steps_for(scenario.horizon);
    let mistune_idx = scenario.steps_for(scenario.mistune_time);
    let act_idx = scenario.steps_for(scenario.act_time);
    let segments = [
        ModeDynamics::new(scenario, scenario.kp_stable, dt),
        ModeDynamics::new(scenario, scenario.kp_unstable, dt),
        ModeDynamics::new(scenario, action.kp, dt),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = PlantState::initial(scenario);
    let mut samples = Vec::with_capacity(n);
    let mut diverged_at = None;
    for k in 0..n {
        samples.push(measure(&state, scenario, &mut rng));
        if k + 1 == n {
            break;
        }
        let segment = if k < mistune_idx {
            &segments[0]
        } else if k < act_idx {
            &segments[1]
        } else {
            &segments[2]
        };
        if state.active_kp != segment.kp() {
            state = apply_gain(&state, GainAction::new(segment.kp()));
        }
        // Fixed time grid keeps every run on identical sample instants.
        match step_with(segment, &state, scenario, dt, &mut rng) {
            Ok(mut next) => {
                next.t = (k + 1) as f64 * dt;
                state = next;
            }
            Err(PlantError::Diverged { t }) => {
                diverged_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let trace = SignalTrace::new(samples, scenario.sample_rate(), 0.0)?;
    Ok(EpisodeOutcome { trace, diverged_at })
}
