//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use std::collections::VecDeque;

use prefq_core::gridworld::{Cell, Direction, GridMap, Pos};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Probability of choosing `a` over `b`, written out directly.
pub fn naive_h(q_a: f64, q_b: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (beta * (q_b - q_a)).exp())
}

/// One answered comparison: per-task values of the chosen and rejected action.
#[derive(Clone, Debug)]
pub struct Answer {
    pub chosen: Vec<f64>,
    pub rejected: Vec<f64>,
}

/// Prior times the product of likelihoods, normalized at the end.
pub fn naive_posterior(prior: &[f64], answers: &[Answer], beta: f64) -> Vec<f64> {
    let mut w: Vec<f64> = prior.to_vec();
    for (i, wi) in w.iter_mut().enumerate() {
        for a in answers {
            *wi *= naive_h(a.chosen[i], a.rejected[i], beta);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// `values[action][task]`.
pub fn belief_value(weights: &[f64], values: &[Vec<f64>]) -> f64 {
    values
        .iter()
        .map(|row| row.iter().zip(weights).map(|(q, p)| q * p).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Expected belief-value gain from asking `(a1, a2)`, by enumerating both
/// answers.
pub fn enumerated_evoi(weights: &[f64], values: &[Vec<f64>], a1: usize, a2: usize, beta: f64) -> f64 {
    let before = belief_value(weights, values);
    let mut total = 0.0;
    for (c, r) in [(a1, a2), (a2, a1)] {
        let answer = Answer {
            chosen: values[c].clone(),
            rejected: values[r].clone(),
        };
        let p: f64 = weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * naive_h(values[c][i], values[r][i], beta))
            .sum();
        if p == 0.0 {
            continue;
        }
        let post = naive_posterior(weights, &[answer], beta);
        total += p * (belief_value(&post, values) - before);
    }
    total
}

/// The value-of-information expression with the maximum taken inside the
/// expectation over tasks. It telescopes to zero for every belief.
pub fn max_inside_witness(weights: &[f64], values: &[Vec<f64>], a1: usize, a2: usize, beta: f64) -> f64 {
    let n = weights.len();
    let task_max: Vec<f64> = (0..n)
        .map(|i| values.iter().map(|row| row[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let post = |c: usize, r: usize| {
        naive_posterior(
            weights,
            &[Answer {
                chosen: values[c].clone(),
                rejected: values[r].clone(),
            }],
            beta,
        )
    };
    let e_max = |w: &[f64]| w.iter().zip(&task_max).map(|(p, m)| p * m).sum::<f64>();
    let after_1 = e_max(&post(a1, a2));
    let after_2 = e_max(&post(a2, a1));
    (0..n)
        .map(|i| {
            let h1 = naive_h(values[a1][i], values[a2][i], beta);
            let h2 = naive_h(values[a2][i], values[a1][i], beta);
            weights[i] * (h1 * after_1 + h2 * after_2 - task_max[i])
        })
        .sum()
}

pub fn left(d: Direction) -> Direction {
    match d {
        Direction::North => Direction::West,
        Direction::West => Direction::South,
        Direction::South => Direction::East,
        Direction::East => Direction::North,
    }
}

pub fn right(d: Direction) -> Direction {
    left(left(left(d)))
}

/// Cell ahead of `p`, if inside the border.
pub fn ahead(map: &GridMap, p: Pos, d: Direction) -> Option<Pos> {
    let (r, c) = (p.row as i64, p.col as i64);
    let (r, c) = match d {
        Direction::North => (r - 1, c),
        Direction::South => (r + 1, c),
        Direction::East => (r, c + 1),
        Direction::West => (r, c - 1),
    };
    if r < 0 || c < 0 || r >= map.height() as i64 || c >= map.width() as i64 {
        None
    } else {
        Some(Pos::new(r as usize, c as usize))
    }
}

/// Successor pose; `None` marks an episode-ending move into lava.
pub fn next_pose(map: &GridMap, p: Pos, d: Direction, action: usize) -> Option<(Pos, Direction)> {
    match action {
        0 => Some((p, left(d))),
        1 => Some((p, right(d))),
        _ => match ahead(map, p, d) {
            None => Some((p, d)),
            Some(n) => match map.cell(n) {
                Cell::Wall => Some((p, d)),
                Cell::Lava => None,
                Cell::Empty => Some((n, d)),
            },
        },
    }
}

#[allow(clippy::needless_range_loop)]
/// Fewest actions from each pose to enter `goal`, by breadth-first search
/// over (cell, heading). Indexed `[row][col][dir]`.
pub fn bfs_steps(map: &GridMap, goal: Pos) -> Vec<Vec<[Option<usize>; 4]>> {
    let (h, w) = (map.height(), map.width());
    let id = |p: Pos, d: Direction| (p.row * w + p.col) * 4 + d.index();
    let mut preds: Vec<Vec<(Pos, Direction)>> = vec![Vec::new(); h * w * 4];
    let mut dist = vec![vec![[None; 4]; w]; h];
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            let q = Pos::new(r, c);
            if q == goal || map.cell(q) != Cell::Empty {
                continue;
            }
            for d in Direction::ALL {
                for a in 0..3 {
                    match next_pose(map, q, d, a) {
                        Some((p, _)) if p == goal => {
                            if dist[r][c][d.index()].is_none() {
                                dist[r][c][d.index()] = Some(1);
                                queue.push_back((q, d));
                            }
                        }
                        Some((p, e)) => preds[id(p, e)].push((q, d)),
                        None => {}
                    }
                }
            }
        }
    }
    while let Some((p, d)) = queue.pop_front() {
        let k = dist[p.row][p.col][d.index()].unwrap();
        for &(q, e) in &preds[id(p, d)] {
            let slot = &mut dist[q.row][q.col][e.index()];
            if slot.is_none() {
                *slot = Some(k + 1);
                queue.push_back((q, e));
            }
        }
    }
    dist
}
