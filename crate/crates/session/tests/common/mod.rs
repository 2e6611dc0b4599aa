#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use prefq_core::belief::{Choice, QSource, TaskId};
use prefq_core::gridworld::{maps, Pos};
use prefq_core::harness::{Episode, EpisodeConfig, GridEnv, Phase};
use prefq_session::{EventBody, WireEvent};

/// The empty map, solved once per test binary.
pub fn empty() -> Arc<GridEnv> {
    static WORLD: OnceLock<Arc<GridEnv>> = OnceLock::new();
    Arc::clone(WORLD.get_or_init(|| Arc::new(GridEnv::shipped("empty").unwrap())))
}

/// Cells marked `.` in a map's text; the start cell carries a heading
/// marker instead, so it is excluded.
pub fn open_cells(text: &str) -> Vec<Pos> {
    text.lines()
        .enumerate()
        .flat_map(|(r, line)| {
            line.chars()
                .enumerate()
                .filter(|&(_, ch)| ch == '.')
                .map(move |(c, _)| Pos::new(r, c))
        })
        .collect()
}

pub fn empty_goals() -> Vec<Pos> {
    open_cells(maps::EMPTY)
}

/// Belief masses reported by the state updates of a transcript, in order.
pub fn reported_beliefs(transcript: &[WireEvent]) -> Vec<Vec<f64>> {
    transcript
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::StateUpdate(u) => Some(u.belief.mass.clone()),
            _ => None,
        })
        .collect()
}

/// Plays an episode offline with recorded answers and returns the belief
/// after the start, after every answer, and after every action, matching
/// the order of a session's state updates.
pub fn offline_beliefs(world: &GridEnv, cfg: &EpisodeConfig, answers: &[Choice]) -> Vec<Vec<f64>> {
    let mut ep = Episode::new(world, cfg).unwrap();
    let mut out = vec![ep.belief().weights()];
    let mut next = answers.iter().copied();
    while ep.phase() != Phase::Finished {
        if ep.decide().unwrap().is_some() {
            ep.answer(next.next().expect("enough answers")).unwrap();
            out.push(ep.belief().weights());
        }
        ep.act().unwrap();
        out.push(ep.belief().weights());
    }
    out
}

pub fn assert_beliefs_close(a: &[Vec<f64>], b: &[Vec<f64>]) {
    assert_eq!(a.len(), b.len(), "belief sequence lengths differ");
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.len(), y.len());
        for (p, q) in x.iter().zip(y) {
            assert!((p - q).abs() <= 1e-12, "{p} vs {q}");
        }
    }
}

pub fn task_of(world: &GridEnv, goal: Pos) -> TaskId {
    (0..world.q().num_tasks())
        .map(TaskId)
        .find(|&t| world.goal(t) == goal)
        .unwrap()
}
