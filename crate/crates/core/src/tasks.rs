//! Task instances, oracle dialog synthesis, JSONL datasets and world splits.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{DialogHistory, Provenance, Turn};
use crate::performer::inquiry_text;
use crate::world::{NodeIdx, WorldError, WorldGraph, DEFAULT_WINDOW};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task count must be positive")]
    NoTasks,
    #[error("world {0} has no start/goal pair satisfying the task constraints")]
    NoValidPair(String),
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("split needs at least 3 worlds, got {0}")]
    TooFewWorlds(usize),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A navigation episode with its recorded (oracle) dialog.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub task_id: String,
    pub world_id: String,
    pub start: String,
    pub goal: String,
    pub target_label: String,
    pub oracle_dialog: DialogHistory,
}

impl TaskInstance {
    pub fn start_idx(&self, g: &WorldGraph) -> Result<NodeIdx, WorldError> {
        g.node_index(&self.start)
    }

    pub fn goal_idx(&self, g: &WorldGraph) -> Result<NodeIdx, WorldError> {
        g.node_index(&self.goal)
    }

    /// Checks the instance invariants against its world.
    pub fn validate(&self, g: &WorldGraph) -> Result<(), String> {
        let start = g.node_index(&self.start).map_err(|e| e.to_string())?;
        let goal = g.node_index(&self.goal).map_err(|e| e.to_string())?;
        if start == goal {
            return Err("start equals goal".into());
        }
        if !g.node(goal).objects.iter().any(|o| *o == self.target_label) {
            return Err(format!("goal {} does not carry target label {:?}", self.goal, self.target_label));
        }
        for (i, t) in self.oracle_dialog.turns.iter().enumerate() {
            if t.inquiry.trim().is_empty() {
                return Err(format!("turn {i} has an empty inquiry"));
            }
            if let Some(p) = &t.performer_node {
                g.node_index(p).map_err(|e| format!("turn {i}: {e}"))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TurnRecord {
    performer_node: Option<String>,
    inquiry: String,
    response: String,
}

/// JSONL line: `{"task_id","world_id","start","goal","target","turns":[...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct TaskRecord {
    task_id: String,
    world_id: String,
    start: String,
    goal: String,
    target: String,
    #[serde(default)]
    turns: Vec<TurnRecord>,
}

impl From<&TaskInstance> for TaskRecord {
    fn from(t: &TaskInstance) -> Self {
        Self {
            task_id: t.task_id.clone(),
            world_id: t.world_id.clone(),
            start: t.start.clone(),
            goal: t.goal.clone(),
            target: t.target_label.clone(),
            turns: t
                .oracle_dialog
                .turns
                .iter()
                .map(|turn| TurnRecord {
                    performer_node: turn.performer_node.clone(),
                    inquiry: turn.inquiry.clone(),
                    response: turn.response.clone(),
                })
                .collect(),
        }
    }
}

impl From<TaskRecord> for TaskInstance {
    fn from(r: TaskRecord) -> Self {
        Self {
            task_id: r.task_id,
            world_id: r.world_id,
            start: r.start,
            goal: r.goal,
            target_label: r.target,
            oracle_dialog: DialogHistory {
                turns: r
                    .turns
                    .into_iter()
                    .map(|t| Turn {
                        inquiry: t.inquiry,
                        response: t.response,
                        provenance: Provenance::Oracle,
                        performer_node: t.performer_node,
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub min_hops: usize,
    pub max_hops: usize,
    /// Every turn's performer node must be farther than this from the goal.
    pub min_goal_distance: f64,
    pub window: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            min_hops: 1,
            max_hops: 12,
            min_goal_distance: crate::metrics::DEFAULT_SUCCESS_RADIUS,
            window: DEFAULT_WINDOW,
        }
    }
}

/// Surface variation of oracle responses, chosen per turn.
#[derive(Debug, Clone, Copy)]
pub struct ResponseStyle {
    pub connectives: [usize; 16],
    pub prefix: usize,
    pub apology: bool,
}

const CONNECTIVES: [&str; 3] = [", then ", " and then ", ", and "];
const PREFIXES: [&str; 3] = ["", "i would ", "okay, "];
const APOLOGY: &str = " sorry about the mixup.";

impl ResponseStyle {
    pub fn plain() -> Self {
        Self { connectives: [0; 16], prefix: 0, apology: false }
    }

    pub fn sample(rng: &mut impl Rng) -> Self {
        let mut connectives = [0; 16];
        for c in &mut connectives {
            *c = rng.gen_range(0..CONNECTIVES.len());
        }
        let prefix = if rng.gen_bool(0.3) { rng.gen_range(1..PREFIXES.len()) } else { 0 };
        Self { connectives, prefix, apology: rng.gen_bool(0.2) }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Oracle guidance: one "go to the <room>" per route node, optionally closed
/// by "stop at the <target>".
pub fn oracle_response_text(rooms: &[&str], stop_target: Option<&str>, style: &ResponseStyle) -> String {
    let mut clauses: Vec<String> = rooms.iter().map(|r| format!("go to the {r}")).collect();
    if let Some(t) = stop_target {
        clauses.push(format!("stop at the {t}"));
    }
    let mut text = PREFIXES[style.prefix].to_string();
    for (i, c) in clauses.iter().enumerate() {
        if i > 0 {
            text.push_str(CONNECTIVES[style.connectives[i % 16]]);
        }
        text.push_str(c);
    }
    text.push('.');
    if style.apology && clauses.len() <= 3 {
        text.push_str(APOLOGY);
    }
    text
}

/// Oracle guidance for a performer at `current`: the route nodes visible in an
/// observation window, plus the stop instruction once the goal is among them.
pub fn oracle_lookahead_response(
    g: &WorldGraph,
    current: NodeIdx,
    goal: NodeIdx,
    target: &str,
    window: usize,
    style: &ResponseStyle,
) -> Result<String, WorldError> {
    let path = g.shortest_path(current, goal)?;
    let visible = window.max(1).min(path.nodes.len());
    let rooms: Vec<&str> = path.nodes[1..visible].iter().map(|&n| g.node(n).room.as_str()).collect();
    let stop = (visible == path.nodes.len()).then_some(target);
    Ok(oracle_response_text(&rooms, stop, style))
}

/// Indices into the route where dialog turns begin: every `max(1, ceil(hops/3))` nodes.
pub fn turn_boundaries(hops: usize) -> Vec<usize> {
    let seg = hops.div_ceil(3).max(1);
    (0..hops).step_by(seg).collect()
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// Deterministic seed derived from a string key.
pub fn seed_from_key(key: &str) -> u64 {
    fnv1a(key)
}

/// Builds the recorded dialog for a route: turn `i` starts at boundary `b_i`
/// and describes the route up to the next boundary; the last turn ends with stop.
pub fn oracle_dialog(g: &WorldGraph, route: &[NodeIdx], target: &str, rng: &mut impl Rng) -> DialogHistory {
    let hops = route.len() - 1;
    let bounds = turn_boundaries(hops);
    let mut turns = Vec::with_capacity(bounds.len());
    for (i, &b) in bounds.iter().enumerate() {
        let end = bounds.get(i + 1).copied().unwrap_or(hops);
        let rooms: Vec<&str> = route[b + 1..=end].iter().map(|&n| g.node(n).room.as_str()).collect();
        let last = i + 1 == bounds.len();
        let style = ResponseStyle::sample(rng);
        let node = route[b];
        turns.push(Turn {
            inquiry: inquiry_text(target, Some(g.node(node).room.as_str())),
            response: oracle_response_text(&rooms, last.then_some(target), &style),
            provenance: Provenance::Oracle,
            performer_node: Some(g.node(node).id.clone()),
        });
    }
    DialogHistory { turns }
}

/// Samples `n` tasks with oracle dialogs on `g`.
pub fn synthesize_tasks(
    g: &WorldGraph,
    seed: u64,
    n: usize,
    opts: &SynthOptions,
) -> Result<Vec<TaskInstance>, TaskError> {
    if n == 0 {
        return Err(TaskError::NoTasks);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&g.world_id));
    let goals: Vec<NodeIdx> = (0..g.node_count()).filter(|&i| !g.node(i).objects.is_empty()).collect();
    if goals.is_empty() {
        return Err(TaskError::NoValidPair(g.world_id.clone()));
    }
    let mut tasks = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while tasks.len() < n {
        attempts += 1;
        if attempts > 1000 * n {
            return Err(TaskError::NoValidPair(g.world_id.clone()));
        }
        let goal = *goals.choose(&mut rng).unwrap();
        let start = rng.gen_range(0..g.node_count());
        if start == goal {
            continue;
        }
        let to_goal = g.distances_to(goal);
        let path = g.path_with_table(start, goal, &to_goal);
        let hops = path.hops();
        if hops < opts.min_hops || hops > opts.max_hops {
            continue;
        }
        let bounds = turn_boundaries(hops);
        if bounds.iter().any(|&b| to_goal[path.nodes[b]] <= opts.min_goal_distance) {
            continue;
        }
        let target = g.node(goal).objects.choose(&mut rng).unwrap().clone();
        let dialog = oracle_dialog(g, &path.nodes, &target, &mut rng);
        tasks.push(TaskInstance {
            task_id: format!("{}-t{:03}", g.world_id, tasks.len()),
            world_id: g.world_id.clone(),
            start: g.node(start).id.clone(),
            goal: g.node(goal).id.clone(),
            target_label: target,
            oracle_dialog: dialog,
        });
    }
    Ok(tasks)
}

pub fn serialize_tasks(tasks: &[TaskInstance]) -> String {
    let mut out = String::new();
    for t in tasks {
        out.push_str(&serde_json::to_string(&TaskRecord::from(t)).expect("task serializes"));
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: &Path, tasks: &[TaskInstance]) -> Result<(), TaskError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(serialize_tasks(tasks).as_bytes())?;
    Ok(())
}

/// Parses JSONL task records, validating each against its world.
pub fn parse_dataset(
    reader: impl BufRead,
    worlds: &HashMap<String, WorldGraph>,
) -> Result<Vec<TaskInstance>, TaskError> {
    let mut tasks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| TaskError::Record { line: line_no, message };
        let rec: TaskRecord = serde_json::from_str(&line).map_err(|e| err(format!("malformed JSON: {e}")))?;
        let world = worlds.get(&rec.world_id).ok_or_else(|| err(format!("unknown world_id {:?}", rec.world_id)))?;
        let task = TaskInstance::from(rec);
        task.validate(world).map_err(err)?;
        tasks.push(task);
    }
    Ok(tasks)
}

pub fn load_dataset(path: &Path, worlds: &HashMap<String, WorldGraph>) -> Result<Vec<TaskInstance>, TaskError> {
    parse_dataset(BufReader::new(std::fs::File::open(path)?), worlds)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    /// Training worlds that also host held-out (seen) validation tasks.
    pub val_seen: Vec<String>,
    pub val_unseen: Vec<String>,
}

/// Reserves `round(ratio * n)` worlds (at least one) as unseen; the seen
/// validation worlds are an equally sized sample of the training worlds.
pub fn split_seen_unseen(worlds: &[String], ratio: f64, seed: u64) -> Result<SplitAssignment, TaskError> {
    let n = worlds.len();
    if n < 3 {
        return Err(TaskError::TooFewWorlds(n));
    }
    let unseen_n = ((ratio * n as f64).round() as usize).clamp(1, n - 2);
    let mut shuffled = worlds.to_vec();
    shuffled.sort();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val_unseen = shuffled[..unseen_n].to_vec();
    let mut train = shuffled[unseen_n..].to_vec();
    let mut val_seen = train[..unseen_n.min(train.len())].to_vec();
    val_unseen.sort();
    train.sort();
    val_seen.sort();
    Ok(SplitAssignment { train, val_seen, val_unseen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, Edge, SplitTag, Viewpoint, WorldParams};

    fn worlds(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn boundaries() {
        assert_eq!(turn_boundaries(1), [0]);
        assert_eq!(turn_boundaries(3), [0, 1, 2]);
        assert_eq!(turn_boundaries(6), [0, 2, 4]);
        assert_eq!(turn_boundaries(7), [0, 3, 6]);
        assert_eq!(turn_boundaries(12), [0, 4, 8]);
    }

    #[test]
    fn adjacent_pair_has_move_and_stop() {
        let nodes = vec![
            Viewpoint { id: "a".into(), x: 0.0, y: 0.0, room: "lobby".into(), objects: vec![] },
            Viewpoint { id: "b".into(), x: 5.0, y: 0.0, room: "kitchen".into(), objects: vec!["plant".into()] },
        ];
        let g = WorldGraph::new("pair".into(), SplitTag::Train, nodes, vec![Edge { a: 0, b: 1, length: 5.0 }]).unwrap();
        let tasks = synthesize_tasks(&g, 1, 1, &SynthOptions::default()).unwrap();
        let turns = &tasks[0].oracle_dialog.turns;
        assert_eq!(turns.len(), 1);
        let steps = crate::parse_step::rule_parse(&turns[0].response);
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].text, "Go to the kitchen.");
        assert_eq!(steps[1].text, "Stop at the plant.");
    }

    #[test]
    fn synthesis_is_deterministic_and_valid() {
        let g = generate_world(4, &WorldParams::default()).unwrap();
        let a = synthesize_tasks(&g, 9, 20, &SynthOptions::default()).unwrap();
        let b = synthesize_tasks(&g, 9, 20, &SynthOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        for t in &a {
            t.validate(&g).unwrap();
        }
        assert!(matches!(synthesize_tasks(&g, 9, 0, &SynthOptions::default()), Err(TaskError::NoTasks)));
    }

    #[test]
    fn dataset_round_trip_and_errors() {
        let g = generate_world(4, &WorldParams::default()).unwrap();
        let tasks = synthesize_tasks(&g, 2, 5, &SynthOptions::default()).unwrap();
        let registry = HashMap::from([(g.world_id.clone(), g.clone())]);
        let text = serialize_tasks(&tasks);
        assert_eq!(parse_dataset(text.as_bytes(), &registry).unwrap(), tasks);
        assert!(parse_dataset("".as_bytes(), &registry).unwrap().is_empty());
        assert_eq!(parse_dataset(text.lines().next().unwrap().as_bytes(), &registry).unwrap().len(), 1);

        let bad_target = text
            .lines()
            .next()
            .unwrap()
            .replace(&format!("\"target\":\"{}\"", tasks[0].target_label), "\"target\":\"unicorn\"");
        let input = format!("{}\n{}", text.lines().nth(1).unwrap(), bad_target);
        match parse_dataset(input.as_bytes(), &registry) {
            Err(TaskError::Record { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("unicorn"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_dataset("{not json".as_bytes(), &registry), Err(TaskError::Record { line: 1, .. })));
        let unknown = text.lines().next().unwrap().replace(&g.world_id, "nowhere");
        assert!(matches!(parse_dataset(unknown.as_bytes(), &registry), Err(TaskError::Record { line: 1, .. })));
        let same = format!(
            r#"{{"task_id":"x","world_id":"{}","start":"n1","goal":"n1","target":"plant","turns":[]}}"#,
            g.world_id
        );
        assert!(parse_dataset(same.as_bytes(), &registry).is_err());
    }

    #[test]
    fn split_properties() {
        let s = split_seen_unseen(&worlds(10), 0.2, 3).unwrap();
        assert_eq!(s.val_unseen.len(), 2);
        assert_eq!(s.train.len(), 8);
        assert!(s.val_unseen.iter().all(|w| !s.train.contains(w)));
        assert!(s.val_seen.iter().all(|w| s.train.contains(w)));
        assert_eq!(s, split_seen_unseen(&worlds(10), 0.2, 3).unwrap());
        assert!(matches!(split_seen_unseen(&worlds(2), 0.2, 3), Err(TaskError::TooFewWorlds(2))));
    }

    #[test]
    fn lookahead_response_within_window() {
        let g = generate_world(6, &WorldParams::default()).unwrap();
        let path = g.shortest_path(0, 5).unwrap();
        let text = oracle_lookahead_response(&g, 0, 5, "plant", 64, &ResponseStyle::plain()).unwrap();
        let steps = crate::parse_step::rule_parse(&text);
        assert_eq!(steps.len(), path.hops() + 1);
        assert!(steps.last().unwrap().text.starts_with("Stop"));
    }
}
