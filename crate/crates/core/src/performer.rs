//! Scripted performer: follows parsed steps on the graph and decides when to ask for help.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse_step::StepInstruction;
use crate::world::{LabelSet, NavState, NodeIdx, WorldGraph};

#[derive(Debug, Error, PartialEq)]
pub enum PerformerError {
    #[error("noise must lie in [0, 1], got {0}")]
    Noise(f64),
    #[error("every_k inquiry period must be at least 1")]
    ZeroPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InquirePolicy {
    OnExhaustedSteps,
    EveryK(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerformerConfig {
    pub noise: f64,
    pub inquire_policy: InquirePolicy,
    pub seed: u64,
}

impl Default for PerformerConfig {
    fn default() -> Self {
        Self { noise: 0.0, inquire_policy: InquirePolicy::OnExhaustedSteps, seed: 0 }
    }
}

impl PerformerConfig {
    pub fn validate(&self) -> Result<(), PerformerError> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(PerformerError::Noise(self.noise));
        }
        if self.inquire_policy == InquirePolicy::EveryK(0) {
            return Err(PerformerError::ZeroPeriod);
        }
        Ok(())
    }
}

/// What a single step asks for at the current node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepResolution {
    Move(NodeIdx),
    MoveThenStop(NodeIdx),
    Stop,
    Unmatchable,
}

/// First word of the step that names a room or object.
pub fn step_label<'a>(text: &str, labels: &'a LabelSet) -> Option<&'a str> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .find_map(|w| labels.rooms.iter().chain(&labels.objects).find(|l| l.as_str() == w))
        .map(String::as_str)
}

fn is_stop_step(text: &str) -> bool {
    text.to_lowercase().split(|c: char| !c.is_alphanumeric()).any(|w| w == "stop")
}

/// Noiseless interpretation of one step.
///
/// Matching neighbors are ranked by edge length plus remaining distance to
/// the goal (ties toward the lower index).
pub fn resolve_step(
    g: &WorldGraph,
    current: NodeIdx,
    to_goal: &[f64],
    step: &str,
    labels: &LabelSet,
) -> StepResolution {
    let label = step_label(step, labels);
    let matching = |l: &str| {
        g.best_next_hop(
            current,
            to_goal,
            g.neighbors(current).iter().map(|(m, _)| *m).filter(|&m| g.node(m).has_label(l)),
        )
    };
    if is_stop_step(step) {
        return match label {
            None => StepResolution::Stop,
            Some(l) if g.node(current).has_label(l) => StepResolution::Stop,
            Some(l) => matching(l).map_or(StepResolution::Unmatchable, StepResolution::MoveThenStop),
        };
    }
    match label {
        Some(l) => matching(l).map_or(StepResolution::Unmatchable, StepResolution::Move),
        None => StepResolution::Unmatchable,
    }
}

/// One primitive decision of the performer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerformerAction {
    Move(NodeIdx),
    Stop,
}

/// Result of following a step list.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowOutcome {
    pub actions: Vec<PerformerAction>,
    /// Number of steps fully consumed.
    pub consumed: usize,
    pub unmatched: bool,
    pub state: NavState,
}

/// Stateful performer; owns the noise stream.
#[derive(Debug, Clone)]
pub struct Performer {
    pub config: PerformerConfig,
    pub labels: LabelSet,
    rng: ChaCha8Rng,
}

impl Performer {
    pub fn new(config: PerformerConfig, labels: LabelSet) -> Result<Self, PerformerError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self { config, labels, rng })
    }

    /// Restarts the noise stream from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Applies noise to an intended move. Both draws happen on every move so
    /// runs at different noise levels consume the stream identically.
    pub fn perturb(&mut self, g: &WorldGraph, current: NodeIdx, intended: NodeIdx) -> NodeIdx {
        let u: f64 = self.rng.gen();
        let nbrs = g.neighbors(current);
        let pick = self.rng.gen_range(0..nbrs.len().max(1));
        if u < self.config.noise && nbrs.len() >= 2 {
            let others: Vec<NodeIdx> = nbrs.iter().map(|(m, _)| *m).filter(|&m| m != intended).collect();
            others[pick % others.len()]
        } else {
            intended
        }
    }

    /// Turns a step into at most two primitive actions, or `None` when the
    /// step cannot be grounded here.
    pub fn step_actions(
        &mut self,
        g: &WorldGraph,
        current: NodeIdx,
        to_goal: &[f64],
        step: &str,
    ) -> Option<Vec<PerformerAction>> {
        match resolve_step(g, current, to_goal, step, &self.labels) {
            StepResolution::Stop => Some(vec![PerformerAction::Stop]),
            StepResolution::Move(n) => Some(vec![PerformerAction::Move(self.perturb(g, current, n))]),
            StepResolution::MoveThenStop(n) => {
                Some(vec![PerformerAction::Move(self.perturb(g, current, n)), PerformerAction::Stop])
            }
            StepResolution::Unmatchable => None,
        }
    }

    /// Executes steps in order until a stop, an unmatchable step, or `max_moves` moves.
    pub fn follow_steps(
        &mut self,
        g: &WorldGraph,
        state: &NavState,
        goal: NodeIdx,
        steps: &[StepInstruction],
        max_moves: usize,
    ) -> FollowOutcome {
        let to_goal = g.distances_to(goal);
        let mut state = state.clone();
        let mut actions = Vec::new();
        let mut consumed = 0;
        let mut moves = 0;
        for step in steps {
            let Some(acts) = self.step_actions(g, state.current_node, &to_goal, &step.text) else {
                return FollowOutcome { actions, consumed, unmatched: true, state };
            };
            for a in acts {
                match a {
                    PerformerAction::Move(n) => {
                        if moves == max_moves {
                            return FollowOutcome { actions, consumed, unmatched: false, state };
                        }
                        state.current_node = n;
                        state.distance_traveled +=
                            g.edge_length(state.path_taken[state.path_taken.len() - 1], n).unwrap();
                        state.path_taken.push(n);
                        moves += 1;
                        actions.push(a);
                    }
                    PerformerAction::Stop => {
                        actions.push(a);
                        return FollowOutcome { actions, consumed: consumed + 1, unmatched: false, state };
                    }
                }
            }
            consumed += 1;
        }
        FollowOutcome { actions, consumed, unmatched: false, state }
    }
}

/// Inquiry trigger for live interaction.
///
/// `actions` counts moves so far; `last_inquiry_at` is the move count at the
/// previous inquiry, which prevents asking twice without acting.
pub fn should_inquire(
    policy: InquirePolicy,
    steps_remaining: usize,
    unmatchable: bool,
    actions: usize,
    last_inquiry_at: Option<usize>,
) -> bool {
    if last_inquiry_at == Some(actions) {
        return false;
    }
    let exhausted = steps_remaining == 0 || unmatchable;
    match policy {
        InquirePolicy::OnExhaustedSteps => exhausted,
        InquirePolicy::EveryK(k) => exhausted || (actions > 0 && actions % k.max(1) == 0),
    }
}

/// Template question about the target, optionally naming the current room.
pub fn inquiry_text(target: &str, room: Option<&str>) -> String {
    match room {
        Some(r) => format!("where should I go to find the {target}? i am in the {r}."),
        None => format!("where should I go to find the {target}?"),
    }
}

pub fn make_inquiry(g: &WorldGraph, state: &NavState, target: &str) -> String {
    inquiry_text(target, Some(&g.node(state.current_node).room))
}
