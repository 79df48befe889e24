//! Independent re-execution of attack vectors: no solver, no search, just
//! the concrete semantics.

use thiserror::Error;

use super::{exec, initial_state, AttackVector, ExecEnv, Outcome};
use crate::context::Context;
use crate::frontend::BlockSnapshot;
use crate::optimization::InstrumentedContract;

/// Replay hit an invocation whose outcome differs structurally from what a
/// valid vector requires (an aborting step). This signals an engine bug,
/// never user error.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("replay diverged at step {0}: invocation aborted")]
    Divergence(usize),
}

/// Re-execute the vector's invocations from the initial state. Returns true
/// iff every intermediate state matches the recorded one and the
/// postcondition fails exactly at `violating_index` and nowhere earlier.
pub fn replay(
    vector: &AttackVector,
    instrumented: &InstrumentedContract,
    snapshot: &BlockSnapshot,
    context: &Context,
) -> Result<bool, ReplayError> {
    if vector.states.len() != vector.invocations.len() + 1 {
        return Ok(false);
    }
    if vector.violating_index >= vector.states.len() {
        return Ok(false);
    }
    let env = ExecEnv {
        instrumented,
        attacker: snapshot.attacker.clone(),
        actors: snapshot.actors.clone(),
        reentry_depth: u32::MAX,
    };

    let s0 = initial_state(context, &instrumented.base, snapshot);
    if !s0.same_contents(&vector.states[0]) {
        return Ok(false);
    }
    // A vector with no invocations claims the initial state itself violates.
    if vector.invocations.is_empty() {
        if context.property.has_old() {
            return Ok(false);
        }
        let holds =
            exec::eval_post_concrete(&instrumented.postcondition, &[], &s0, &snapshot.attacker);
        return Ok(vector.violating_index == 0 && holds != Some(true));
    }

    let mut current = s0;
    for (step, inv) in vector.invocations.iter().enumerate() {
        let result = exec::step_concolic(&current, inv, &env);
        match result.outcome {
            Outcome::RequireFailed | Outcome::Trap => {
                return Err(ReplayError::Divergence(step + 1))
            }
            Outcome::Ok => {
                if step + 1 == vector.violating_index {
                    // Claimed violation point did not violate.
                    return Ok(false);
                }
            }
            Outcome::PostconditionViolated => {
                if step + 1 != vector.violating_index {
                    // Violated earlier (or later) than claimed.
                    return Ok(false);
                }
            }
        }
        if !result.post.same_contents(&vector.states[step + 1]) {
            return Ok(false);
        }
        current = result.post;
    }
    Ok(true)
}
