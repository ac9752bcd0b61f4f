//! Stochastic recurrent policy `P_θ(a|o)` and state-value network `V̂_ζ(s)`.

mod dense;
mod gaussian;
mod recurrent;
mod value;

pub use dense::TensorSpec;
pub use gaussian::{kl_diag_gauss, log_prob, log_prob_grad_mu, sample_action, Action, SigmaSchedule};
pub use recurrent::{PolicyParams, PolicyShape, RecurrentState, SequenceTrace};
pub use value::ValueParams;

use crate::geom::VelocityLimits;
use crate::world::WorldState;

/// Maps state/observation vectors into network inputs: distances over their
/// sensing range, angles over π, velocities over their bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputScaling {
    pub goal_range: f64,
    pub ped_range: f64,
    pub companion_range: f64,
    pub obstacle_range: f64,
    pub limits: VelocityLimits,
}

impl InputScaling {
    pub fn apply(&self, s: &WorldState) -> Vec<f64> {
        let mut out = Vec::with_capacity(s.dim());
        self.apply_into(s, &mut out);
        out
    }

    pub fn apply_into(&self, s: &WorldState, out: &mut Vec<f64>) {
        use std::f64::consts::PI;
        out.push(s.goal.d / self.goal_range);
        out.push(s.goal.phi / PI);
        out.push(s.action.v_t / self.limits.max_translational);
        out.push(s.action.v_r / self.limits.max_rotational);
        for p in &s.peds {
            out.push(p.d / self.ped_range);
            out.push(p.phi / PI);
        }
        out.push(s.companion.d / self.companion_range);
        out.push(s.companion.phi / PI);
        let ob = &s.obstacles;
        out.push(ob.front / self.obstacle_range);
        for p in [ob.left_near, ob.right_near, ob.left_far, ob.right_far] {
            out.push(p.d / self.obstacle_range);
            out.push(p.phi / PI);
        }
    }
}
