//! The shipped map layouts.

use super::{GridMap, MapError};

pub const EMPTY: &str = include_str!("../../maps/empty.txt");
pub const MAZE: &str = include_str!("../../maps/maze.txt");
pub const ROOMS: &str = include_str!("../../maps/rooms.txt");

pub const NAMES: [&str; 3] = ["empty", "maze", "rooms"];

pub fn text(name: &str) -> Option<&'static str> {
    match name {
        "empty" => Some(EMPTY),
        "maze" => Some(MAZE),
        "rooms" => Some(ROOMS),
        _ => None,
    }
}

/// Parses a shipped map by name; `None` for unknown names.
pub fn load(name: &str) -> Option<GridMap> {
    text(name).map(|t| GridMap::parse(t).expect("shipped maps are well formed"))
}

pub fn parse_or_load(name_or_text: &str) -> Result<GridMap, MapError> {
    match load(name_or_text) {
        Some(m) => Ok(m),
        None => GridMap::parse(name_or_text),
    }
}
