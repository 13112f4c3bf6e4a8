use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{NodeIdx, WorldError, WorldGraph};

pub const DEFAULT_SUCCESS_RADIUS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("metric needs at least one episode")]
    NoEpisodes,
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
}

/// How goal progress is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalProgressMode {
    /// `d(start, goal) - d(end, goal)`.
    #[default]
    DistanceProgress,
    /// `traveled - d(end, goal)`.
    TrajectoryProgress,
}

/// Reduction in shortest-path distance to the goal, in meters.
pub fn goal_progress(g: &WorldGraph, start: NodeIdx, end: NodeIdx, goal: NodeIdx) -> Result<f64, MetricError> {
    Ok(g.distance(start, goal)? - g.distance(end, goal)?)
}

pub fn goal_progress_with(
    g: &WorldGraph,
    mode: GoalProgressMode,
    start: NodeIdx,
    end: NodeIdx,
    goal: NodeIdx,
    traveled: f64,
) -> Result<f64, MetricError> {
    match mode {
        GoalProgressMode::DistanceProgress => goal_progress(g, start, end, goal),
        GoalProgressMode::TrajectoryProgress => Ok(traveled - g.distance(end, goal)?),
    }
}

/// Closed-ball success test: `d(end, goal) <= radius`.
pub fn success(g: &WorldGraph, end: NodeIdx, goal: NodeIdx, radius: f64) -> Result<bool, MetricError> {
    Ok(g.distance(end, goal)? <= radius)
}

/// Per-episode inputs shared by SPL and PWSR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub success: bool,
    /// Shortest start-to-goal length; must be positive.
    pub shortest: f64,
    /// Length actually traveled.
    pub taken: f64,
}

impl PathOutcome {
    pub fn weighted(&self) -> f64 {
        if self.success {
            self.shortest / self.taken.max(self.shortest)
        } else {
            0.0
        }
    }
}

/// Success weighted by (normalized inverse) path length.
pub fn spl(episodes: &[PathOutcome]) -> Result<f64, MetricError> {
    if episodes.is_empty() {
        return Err(MetricError::NoEpisodes);
    }
    for e in episodes {
        if !(e.shortest > 0.0) || !(e.taken >= 0.0) {
            return Err(MetricError::InvalidEpisode(format!("{e:?}")));
        }
    }
    Ok(episodes.iter().map(PathOutcome::weighted).sum::<f64>() / episodes.len() as f64)
}

/// Path-weighted success rate; same formula as [`spl`].
pub fn pwsr(episodes: &[PathOutcome]) -> Result<f64, MetricError> {
    spl(episodes)
}
