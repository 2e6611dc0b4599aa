use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown character {ch:?} at row {row}, column {col}")]
    UnknownChar { ch: char, row: usize, col: usize },
    #[error("map has no start marker")]
    NoStart,
    #[error("map has more than one start marker")]
    DuplicateStart,
    #[error("map has no empty cell besides the start")]
    NoGoal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Empty,
    Wall,
    Lava,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn left(self) -> Self {
        Self::ALL[(self.index() + 3) % 4]
    }

    pub fn right(self) -> Self {
        Self::ALL[(self.index() + 1) % 4]
    }

    /// `(row, col)` offset of one forward move.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
            Direction::West => (0, -1),
        }
    }

    fn marker(self) -> char {
        match self {
            Direction::North => '^',
            Direction::East => '>',
            Direction::South => 'v',
            Direction::West => '<',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Rectangular grid with a start pose.
///
/// Text form: one LF-terminated line per row; `.` empty, `#` wall, `L` lava,
/// and exactly one of `> < ^ v` marking the (empty) start cell and heading.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: Pos,
    start_dir: Direction,
}

impl GridMap {
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        if body.is_empty() {
            return Err(MapError::Empty);
        }
        let mut width = None;
        let mut cells = Vec::new();
        let mut start = None;
        let mut height = 0;
        for (row, line) in body.split('\n').enumerate() {
            height += 1;
            let chars: Vec<char> = line.chars().collect();
            let expected = *width.get_or_insert(chars.len());
            if chars.len() != expected || expected == 0 {
                return Err(MapError::Ragged {
                    row,
                    expected,
                    found: chars.len(),
                });
            }
            for (col, ch) in chars.into_iter().enumerate() {
                let cell = match ch {
                    '.' => Cell::Empty,
                    '#' => Cell::Wall,
                    'L' => Cell::Lava,
                    '>' | '<' | '^' | 'v' => {
                        let dir = match ch {
                            '>' => Direction::East,
                            '<' => Direction::West,
                            '^' => Direction::North,
                            _ => Direction::South,
                        };
                        if start.replace((Pos::new(row, col), dir)).is_some() {
                            return Err(MapError::DuplicateStart);
                        }
                        Cell::Empty
                    }
                    _ => return Err(MapError::UnknownChar { ch, row, col }),
                };
                cells.push(cell);
            }
        }
        let (start, start_dir) = start.ok_or(MapError::NoStart)?;
        let map = Self {
            width: width.unwrap_or(0),
            height,
            cells,
            start,
            start_dir,
        };
        if map.valid_goals().is_empty() {
            return Err(MapError::NoGoal);
        }
        Ok(map)
    }

    /// Canonical text form; `parse(&m.to_text()) == m`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                let p = Pos::new(row, col);
                let ch = if p == self.start {
                    self.start_dir.marker()
                } else {
                    match self.cell(p) {
                        Cell::Empty => '.',
                        Cell::Wall => '#',
                        Cell::Lava => 'L',
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Pos {
        self.start
    }

    pub fn start_dir(&self) -> Direction {
        self.start_dir
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_index(&self, p: Pos) -> usize {
        p.row * self.width + p.col
    }

    pub fn pos_of(&self, index: usize) -> Pos {
        Pos::new(index / self.width, index % self.width)
    }

    pub fn cell(&self, p: Pos) -> Cell {
        self.cells[self.cell_index(p)]
    }

    /// Neighbor one step in `dir`, or `None` past the border.
    pub fn neighbor(&self, p: Pos, dir: Direction) -> Option<Pos> {
        let (dr, dc) = dir.delta();
        let row = p.row.checked_add_signed(dr)?;
        let col = p.col.checked_add_signed(dc)?;
        (row < self.height && col < self.width).then_some(Pos::new(row, col))
    }

    /// Every empty cell other than the start, row-major.
    pub fn valid_goals(&self) -> Vec<Pos> {
        (0..self.cells.len())
            .map(|i| self.pos_of(i))
            .filter(|&p| p != self.start && self.cell(p) == Cell::Empty)
            .collect()
    }
}

impl FromStr for GridMap {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GridMap::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tiny_maps() {
        let m = GridMap::parse(">..").unwrap();
        assert_eq!((m.height(), m.width()), (1, 3));
        assert_eq!(m.start(), Pos::new(0, 0));
        assert_eq!(m.start_dir(), Direction::East);
        assert_eq!(m.valid_goals(), vec![Pos::new(0, 1), Pos::new(0, 2)]);

        let m = GridMap::parse(">#.").unwrap();
        assert_eq!(m.cell(Pos::new(0, 1)), Cell::Wall);
    }

    #[test]
    fn malformed_maps() {
        assert_eq!(GridMap::parse("><"), Err(MapError::DuplicateStart));
        assert_eq!(GridMap::parse("..."), Err(MapError::NoStart));
        assert_eq!(GridMap::parse(">##\n###\n"), Err(MapError::NoGoal));
        assert_eq!(GridMap::parse(">L"), Err(MapError::NoGoal));
        assert!(matches!(
            GridMap::parse(">..\n..\n"),
            Err(MapError::Ragged { row: 1, .. })
        ));
        assert!(matches!(
            GridMap::parse(">.x"),
            Err(MapError::UnknownChar { ch: 'x', .. })
        ));
        assert_eq!(GridMap::parse(""), Err(MapError::Empty));
        assert!(GridMap::parse(">.\r\n..\r\n").is_err());
    }

    #[test]
    fn turning() {
        assert_eq!(Direction::North.left(), Direction::West);
        assert_eq!(Direction::West.left(), Direction::South);
        assert_eq!(Direction::North.right(), Direction::East);
        assert_eq!(Direction::West.right(), Direction::North);
    }

    fn map_text() -> impl Strategy<Value = String> {
        (1usize..6, 2usize..7, any::<u64>()).prop_map(|(h, w, bits)| {
            let mut s = String::new();
            for r in 0..h {
                for c in 0..w {
                    let i = r * w + c;
                    let ch = if i == 0 {
                        'v'
                    } else if i == 1 {
                        '.'
                    } else {
                        ['.', '#', 'L', '.'][((bits >> (2 * (i % 32))) & 3) as usize]
                    };
                    s.push(ch);
                }
                s.push('\n');
            }
            s
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(text in map_text()) {
            let m = GridMap::parse(&text).unwrap();
            prop_assert_eq!(m.to_text(), text.clone());
            prop_assert_eq!(GridMap::parse(&m.to_text()).unwrap(), m);
        }
    }
}
