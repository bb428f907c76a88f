use nalgebra::{DMatrix, DVector};

use super::{expected_utility, transition_probs, EnvParams, Policy, StateSpace, ValueFunction};

/// Exact discounted value of following `p` forever, by solving
/// `(I - beta * P_p) V = u_p` directly.
///
/// Panics if `p` takes an unavailable action.
pub fn evaluate_policy_exact(p: &Policy, env: &EnvParams, space: &StateSpace) -> ValueFunction {
    let n = space.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut u = DVector::<f64>::zeros(n);
    for (i, s) in space.states().enumerate() {
        let act = p.get(s);
        u[i] = expected_utility(s, act, env);
        for (t, prob) in transition_probs(s, act, env, space).expect("feasible policy") {
            a[(i, space.index(t))] -= env.beta * prob;
        }
    }
    let v = a
        .lu()
        .solve(&u)
        .expect("I - beta P is nonsingular for beta < 1");
    ValueFunction {
        space: *space,
        values: v.iter().copied().collect(),
    }
}
