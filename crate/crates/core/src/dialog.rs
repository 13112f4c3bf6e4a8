//! Dialog histories and the two evaluation protocols.
//!
//! RDH ("response from dialog history") swaps a single recorded response for
//! a helper-generated one and lets the performer act on it. RdI ("response
//! during interaction") runs a live loop where the performer asks whenever
//! its inquiry policy fires.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, GoalProgressMode, MetricError, PathOutcome};
use crate::parse_step::{rule_parse, StepInstruction};
use crate::performer::{make_inquiry, should_inquire, Performer, PerformerAction};
use crate::tasks::TaskInstance;
use crate::world::{
    LabelSet, NavState, NodeIdx, ObservationSequence, WorldError, WorldGraph, DEFAULT_T_FRAMES, DEFAULT_WINDOW,
};

#[derive(Debug, Error)]
pub enum DialogError {
    #[error("inquiry must not be empty")]
    EmptyInquiry,
    #[error("turn index {index} out of range for a dialog of {len} turn(s)")]
    TurnOutOfRange { index: usize, len: usize },
    #[error("turn {0} has no recorded performer node")]
    MissingPerformerNode(usize),
    #[error("step budget must be finite")]
    NonTerminating,
    #[error("max_turns must be at least 1")]
    ZeroMaxTurns,
    #[error("task {task} belongs to world {task_world}, not {world}")]
    WorldMismatch { task: String, task_world: String, world: String },
    #[error("helper failed: {0}")]
    Helper(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    Helper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub inquiry: String,
    pub response: String,
    pub provenance: Provenance,
    /// Viewpoint id where the inquiry was made.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performer_node: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogHistory {
    pub turns: Vec<Turn>,
}

impl DialogHistory {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Prefix of the first `n` turns.
    pub fn prefix(&self, n: usize) -> DialogHistory {
        DialogHistory { turns: self.turns[..n.min(self.turns.len())].to_vec() }
    }
}

/// Returns a new history with `(q, r)` appended; `h` is left untouched.
pub fn append_turn(h: &DialogHistory, q: &str, r: &str, provenance: Provenance) -> Result<DialogHistory, DialogError> {
    append_turn_at(h, q, r, provenance, None)
}

pub fn append_turn_at(
    h: &DialogHistory,
    q: &str,
    r: &str,
    provenance: Provenance,
    performer_node: Option<String>,
) -> Result<DialogHistory, DialogError> {
    if q.trim().is_empty() {
        return Err(DialogError::EmptyInquiry);
    }
    let mut out = h.clone();
    out.turns.push(Turn { inquiry: q.to_string(), response: r.to_string(), provenance, performer_node });
    Ok(out)
}

/// Everything a helper may look at when answering.
pub struct HelpRequest<'a> {
    pub world: &'a WorldGraph,
    pub task: &'a TaskInstance,
    pub goal: NodeIdx,
    pub current: NodeIdx,
    pub inquiry: &'a str,
    /// Turns preceding this inquiry.
    pub history: &'a DialogHistory,
    /// Sampled at `current` at inquiry time.
    pub observations: &'a ObservationSequence,
    /// The recorded answer when replaying a dialog (RDH only).
    pub recorded_response: Option<&'a str>,
    pub window: usize,
}

/// A helper agent. Implementations must be usable from several threads.
pub trait Responder: Send + Sync {
    fn name(&self) -> String;
    fn respond(&self, req: &HelpRequest<'_>) -> Result<String, DialogError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBudget {
    /// `max(1, ceil(factor * shortest_hops))` moves.
    ShortestMultiple(f64),
    Fixed(usize),
    Unbounded,
}

impl Default for StepBudget {
    fn default() -> Self {
        StepBudget::ShortestMultiple(3.0)
    }
}

impl StepBudget {
    pub fn moves(&self, shortest_hops: usize) -> Result<usize, DialogError> {
        match *self {
            StepBudget::ShortestMultiple(f) if f.is_finite() && f >= 0.0 => {
                Ok(((f * shortest_hops as f64).ceil() as usize).max(1))
            }
            StepBudget::Fixed(n) => Ok(n),
            _ => Err(DialogError::NonTerminating),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeOptions {
    pub window: usize,
    pub t_frames: usize,
    pub success_radius: f64,
    pub gp_mode: GoalProgressMode,
    pub max_turns: usize,
    pub step_budget: StepBudget,
    #[serde(skip)]
    pub labels: LabelSet,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            t_frames: DEFAULT_T_FRAMES,
            success_radius: metrics::DEFAULT_SUCCESS_RADIUS,
            gp_mode: GoalProgressMode::default(),
            max_turns: 8,
            step_budget: StepBudget::default(),
            labels: LabelSet::standard(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Rdh,
    Rdi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stopped,
    GoalReached,
    StepBudget,
    MaxTurns,
    /// Steps ran out or could not be grounded and no further help was available.
    NoGuidance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub world_id: String,
    pub protocol: Protocol,
    pub helper: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_index: Option<usize>,
    pub goal: NodeIdx,
    pub final_state: NavState,
    pub dialog: DialogHistory,
    pub termination: Termination,
    pub success: bool,
    pub gp: f64,
    /// Shortest start-to-goal distance for this episode's start.
    pub shortest: f64,
    pub spl: f64,
    pub pwsr: f64,
    pub turn_count: usize,
    /// Language scores of the generated response against the recorded one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
}

impl EpisodeResult {
    pub fn outcome(&self) -> PathOutcome {
        PathOutcome { success: self.success, shortest: self.shortest, taken: self.final_state.distance_traveled }
    }

    /// Recomputes the navigation metrics from the final state.
    pub fn verify(&self, g: &WorldGraph, opts: &EpisodeOptions) -> Result<(), MetricError> {
        let fs = &self.final_state;
        let mut traveled = 0.0;
        for w in fs.path_taken.windows(2) {
            traveled += g
                .edge_length(w[0], w[1])
                .ok_or_else(|| MetricError::InvalidEpisode(format!("{} -> {} is not an edge", w[0], w[1])))?;
        }
        let end = *fs.path_taken.last().unwrap();
        let start = fs.start_node();
        let success = metrics::success(g, end, self.goal, opts.success_radius)?;
        let gp = metrics::goal_progress_with(g, opts.gp_mode, start, end, self.goal, traveled)?;
        let outcome = PathOutcome { success, shortest: g.distance(start, self.goal)?, taken: traveled };
        let checks = [
            (end == fs.current_node, "current node"),
            ((traveled - fs.distance_traveled).abs() < 1e-9, "distance traveled"),
            (success == self.success, "success"),
            ((gp - self.gp).abs() < 1e-9, "goal progress"),
            (outcome.shortest == self.shortest, "shortest distance"),
            ((outcome.weighted() - self.spl).abs() < 1e-12, "spl"),
            ((outcome.weighted() - self.pwsr).abs() < 1e-12, "pwsr"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, what)) => {
                Err(MetricError::InvalidEpisode(format!("{}: stored {what} does not match", self.task_id)))
            }
            None => Ok(()),
        }
    }
}

/// Computes the navigation metrics for a finished trajectory.
#[allow(clippy::too_many_arguments)]
pub fn finish_episode(
    g: &WorldGraph,
    task: &TaskInstance,
    goal: NodeIdx,
    protocol: Protocol,
    helper: String,
    turn_index: Option<usize>,
    final_state: NavState,
    dialog: DialogHistory,
    termination: Termination,
    opts: &EpisodeOptions,
) -> Result<EpisodeResult, DialogError> {
    let start = final_state.start_node();
    let end = final_state.current_node;
    let success = metrics::success(g, end, goal, opts.success_radius)?;
    let gp = metrics::goal_progress_with(g, opts.gp_mode, start, end, goal, final_state.distance_traveled)?;
    let shortest = g.distance(start, goal)?;
    let w = PathOutcome { success, shortest, taken: final_state.distance_traveled }.weighted();
    let turn_count = match protocol {
        Protocol::Rdh => 1,
        Protocol::Rdi => dialog.len(),
    };
    Ok(EpisodeResult {
        task_id: task.task_id.clone(),
        world_id: task.world_id.clone(),
        protocol,
        helper,
        turn_index,
        goal,
        final_state,
        dialog,
        termination,
        success,
        gp,
        shortest,
        spl: w,
        pwsr: w,
        turn_count,
        bleu2: None,
        rouge_l: None,
    })
}

fn check_world(task: &TaskInstance, g: &WorldGraph) -> Result<(), DialogError> {
    if task.world_id != g.world_id {
        return Err(DialogError::WorldMismatch {
            task: task.task_id.clone(),
            task_world: task.world_id.clone(),
            world: g.world_id.clone(),
        });
    }
    Ok(())
}

fn apply_actions(g: &WorldGraph, state: &mut NavState, actions: &[PerformerAction]) -> Result<bool, DialogError> {
    for a in actions {
        match *a {
            PerformerAction::Move(n) => {
                *state = g.apply_action(state, crate::world::Action::MoveTo(n))?.state;
            }
            PerformerAction::Stop => return Ok(true),
        }
    }
    Ok(false)
}

/// Replays the recorded dialog up to turn `turn_index`, substitutes the
/// helper's response for it, and lets the performer act from the turn's node.
///
/// The performer executes the steps of the final (generated) response; the
/// earlier turns describe the route that led to the turn's node.
pub fn run_rdh_episode(
    task: &TaskInstance,
    turn_index: usize,
    helper: &dyn Responder,
    performer: &mut Performer,
    g: &WorldGraph,
    opts: &EpisodeOptions,
) -> Result<EpisodeResult, DialogError> {
    check_world(task, g)?;
    let recorded = &task.oracle_dialog;
    let turn =
        recorded.turns.get(turn_index).ok_or(DialogError::TurnOutOfRange { index: turn_index, len: recorded.len() })?;
    let node_id = turn.performer_node.as_deref().ok_or(DialogError::MissingPerformerNode(turn_index))?;
    let start = g.node_index(node_id)?;
    let goal = task.goal_idx(g)?;
    let budget = opts.step_budget.moves(g.shortest_path(start, goal)?.hops())?;

    let history = recorded.prefix(turn_index);
    let observations = g.sample_observations(start, goal, opts.window, opts.t_frames, &opts.labels)?;
    let response = helper.respond(&HelpRequest {
        world: g,
        task,
        goal,
        current: start,
        inquiry: &turn.inquiry,
        history: &history,
        observations: &observations,
        recorded_response: Some(&turn.response),
        window: opts.window,
    })?;
    let dialog = append_turn_at(&history, &turn.inquiry, &response, Provenance::Helper, turn.performer_node.clone())?;

    let steps = rule_parse(&response);
    let state = NavState::start(&g.world_id, start);
    let out = performer.follow_steps(g, &state, goal, &steps, budget);
    let termination = if out.actions.last() == Some(&PerformerAction::Stop) {
        Termination::Stopped
    } else if out.state.moves() >= budget && (out.unmatched || out.consumed < steps.len()) {
        Termination::StepBudget
    } else {
        Termination::NoGuidance
    };
    let mut result = finish_episode(
        g,
        task,
        goal,
        Protocol::Rdh,
        helper.name(),
        Some(turn_index),
        out.state,
        dialog,
        termination,
        opts,
    )?;
    let (cand, reference) = (metrics::metric_tokens(&response), metrics::metric_tokens(&turn.response));
    result.bleu2 = Some(metrics::bleu2(&cand, std::slice::from_ref(&reference)));
    result.rouge_l = Some(metrics::rouge_l(&cand, &reference));
    Ok(result)
}

/// Live interaction from the task start with no prior history.
pub fn run_rdi_episode(
    task: &TaskInstance,
    helper: &dyn Responder,
    performer: &mut Performer,
    g: &WorldGraph,
    opts: &EpisodeOptions,
) -> Result<EpisodeResult, DialogError> {
    check_world(task, g)?;
    if opts.max_turns == 0 {
        return Err(DialogError::ZeroMaxTurns);
    }
    let start = task.start_idx(g)?;
    let goal = task.goal_idx(g)?;
    let to_goal = g.distances_to(goal);
    let budget = opts.step_budget.moves(g.shortest_path(start, goal)?.hops())?;
    let policy = performer.config.inquire_policy;

    let mut state = NavState::start(&g.world_id, start);
    let mut dialog = DialogHistory::default();
    let mut steps: VecDeque<StepInstruction> = VecDeque::new();
    let mut unmatched = false;
    let mut last_inquiry: Option<usize> = None;

    let termination = loop {
        if state.current_node == goal {
            break Termination::GoalReached;
        }
        let moves = state.moves();
        if should_inquire(policy, steps.len(), unmatched, moves, last_inquiry) {
            if dialog.len() < opts.max_turns {
                let inquiry = make_inquiry(g, &state, &task.target_label);
                let observations =
                    g.sample_observations(state.current_node, goal, opts.window, opts.t_frames, &opts.labels)?;
                let response = helper.respond(&HelpRequest {
                    world: g,
                    task,
                    goal,
                    current: state.current_node,
                    inquiry: &inquiry,
                    history: &dialog,
                    observations: &observations,
                    recorded_response: None,
                    window: opts.window,
                })?;
                let node_id = g.node(state.current_node).id.clone();
                dialog = append_turn_at(&dialog, &inquiry, &response, Provenance::Helper, Some(node_id))?;
                steps = rule_parse(&response).into();
                unmatched = false;
                last_inquiry = Some(moves);
            } else if steps.is_empty() || unmatched {
                break Termination::MaxTurns;
            }
        }
        if steps.is_empty() || unmatched {
            break Termination::NoGuidance;
        }
        let step = steps.front().unwrap().text.clone();
        let Some(actions) = performer.step_actions(g, state.current_node, &to_goal, &step) else {
            unmatched = true;
            continue;
        };
        steps.pop_front();
        if actions.iter().any(|a| matches!(a, PerformerAction::Move(_))) && state.moves() >= budget {
            break Termination::StepBudget;
        }
        if apply_actions(g, &mut state, &actions)? {
            break Termination::Stopped;
        }
    };
    finish_episode(g, task, goal, Protocol::Rdi, helper.name(), None, state, dialog, termination, opts)
}
