//! Classic RK4 for the spatially homogeneous equation `u' = −F(u)`.

use crate::system::ReactionSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Step at which the state overflowed or left the finite range.
    pub blow_up_step: Option<usize>,
}

impl OdeTrajectory {
    pub fn first_negative_time(&self, k: usize) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.states)
            .find(|(_, s)| s[k] < 0.0)
            .map(|(t, _)| *t)
    }
}

fn rhs(reaction: &ReactionSpec, u: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; u.len()];
    reaction.eval(u, &mut f);
    f.iter_mut().for_each(|v| *v = -*v);
    f
}

/// Integrates `steps` RK4 steps of size `dt`, recording every state.
pub fn solve(reaction: &ReactionSpec, u0: &[f64], dt: f64, steps: usize, blow_up: f64) -> OdeTrajectory {
    let mut times = vec![0.0];
    let mut states = vec![u0.to_vec()];
    let mut u = u0.to_vec();
    let axpy = |u: &[f64], a: f64, k: &[f64]| -> Vec<f64> { u.iter().zip(k).map(|(x, y)| x + a * y).collect() };
    for step in 1..=steps {
        let k1 = rhs(reaction, &u);
        let k2 = rhs(reaction, &axpy(&u, 0.5 * dt, &k1));
        let k3 = rhs(reaction, &axpy(&u, 0.5 * dt, &k2));
        let k4 = rhs(reaction, &axpy(&u, dt, &k3));
        let next: Vec<f64> = (0..u.len())
            .map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|v| !v.is_finite() || v.abs() > blow_up) {
            return OdeTrajectory {
                times,
                states,
                blow_up_step: Some(step),
            };
        }
        u = next;
        times.push(step as f64 * dt);
        states.push(u.clone());
    }
    OdeTrajectory {
        times,
        states,
        blow_up_step: None,
    }
}
