//! Grid workspace, map parsing and shortest-distance queries.
//!
//! Robots move on a 4-connected grid: one move (or one wait) per time step.
//! Intermediate cells are ordinary free cells that additionally allow an
//! object to be parked for another robot to collect.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A grid cell, `x` is the column and `y` the row (row 0 is the first line
/// of a map file).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// True when `other` is this cell or one of its four neighbours.
    pub fn is_adjacent_or_equal(self, other: Cell) -> bool {
        self.manhattan(other) <= 1
    }
}

impl From<[i32; 2]> for Cell {
    fn from([x, y]: [i32; 2]) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

// Row-major: this is the canonical tie-breaking order used throughout.
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The four unit moves, in the fixed order used for successor generation.
pub const MOVES: [(i32, i32); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: unknown glyph {glyph:?}")]
    UnknownGlyph { line: usize, column: usize, glyph: char },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkspaceError {
    #[error("cell {0} is outside the workspace")]
    OutOfBounds(Cell),
    #[error("cell {0} is an obstacle")]
    Obstacle(Cell),
    #[error("cell {0} is both an obstacle and an intermediate location")]
    ObstacleIntermediate(Cell),
    #[error("workspace must have a positive area")]
    ZeroArea,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    intermediates: Vec<Cell>,
}

impl Workspace {
    pub fn new(
        width: usize,
        height: usize,
        obstacles: impl IntoIterator<Item = Cell>,
        intermediates: impl IntoIterator<Item = Cell>,
    ) -> Result<Self, WorkspaceError> {
        if width == 0 || height == 0 {
            return Err(WorkspaceError::ZeroArea);
        }
        let mut ws = Workspace {
            width,
            height,
            blocked: vec![false; width * height],
            intermediates: Vec::new(),
        };
        for c in obstacles {
            if !ws.in_bounds(c) {
                return Err(WorkspaceError::OutOfBounds(c));
            }
            let i = ws.index(c);
            ws.blocked[i] = true;
        }
        let mut inter: Vec<Cell> = intermediates.into_iter().collect();
        inter.sort();
        inter.dedup();
        for &c in &inter {
            if !ws.in_bounds(c) {
                return Err(WorkspaceError::OutOfBounds(c));
            }
            if ws.blocked[ws.index(c)] {
                return Err(WorkspaceError::ObstacleIntermediate(c));
            }
        }
        ws.intermediates = inter;
        Ok(ws)
    }

    /// An obstacle-free `width` x `height` grid.
    pub fn open(width: usize, height: usize) -> Self {
        Self::new(width, height, [], []).expect("open grid with positive area")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[self.index(c)]
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.blocked[self.index(c)]
    }

    /// Intermediate transfer cells in row-major order.
    pub fn intermediates(&self) -> &[Cell] {
        &self.intermediates
    }

    pub fn is_intermediate(&self, c: Cell) -> bool {
        self.intermediates.binary_search(&c).is_ok()
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells())
            .filter(|&i| self.blocked[i])
            .map(|i| self.cell_at(i))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells())
            .filter(|&i| !self.blocked[i])
            .map(|i| self.cell_at(i))
    }

    /// Same grid with every intermediate cell turned into a plain free cell.
    pub fn without_intermediates(&self) -> Workspace {
        Workspace {
            intermediates: Vec::new(),
            ..self.clone()
        }
    }

    /// Free 4-neighbours of `c` in [`MOVES`] order.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        MOVES
            .iter()
            .map(move |&(dx, dy)| Cell::new(c.x + dx, c.y + dy))
            .filter(move |&n| self.is_free(n))
    }

    pub fn check_free(&self, c: Cell) -> Result<(), WorkspaceError> {
        if !self.in_bounds(c) {
            Err(WorkspaceError::OutOfBounds(c))
        } else if self.blocked[self.index(c)] {
            Err(WorkspaceError::Obstacle(c))
        } else {
            Ok(())
        }
    }

    /// Length of a shortest obstacle-avoiding path, or `None` when `to`
    /// cannot be reached. A* with the Manhattan heuristic.
    pub fn shortest_dist(&self, from: Cell, to: Cell) -> Result<Option<u32>, WorkspaceError> {
        self.check_free(from)?;
        self.check_free(to)?;
        if from == to {
            return Ok(Some(0));
        }
        let mut best = vec![u32::MAX; self.num_cells()];
        let mut open = BinaryHeap::new();
        best[self.index(from)] = 0;
        open.push(Reverse((from.manhattan(to), 0u32, from)));
        while let Some(Reverse((_, g, c))) = open.pop() {
            if c == to {
                return Ok(Some(g));
            }
            if g > best[self.index(c)] {
                continue;
            }
            for n in self.neighbors(c) {
                let ni = self.index(n);
                if g + 1 < best[ni] {
                    best[ni] = g + 1;
                    open.push(Reverse((g + 1 + n.manhattan(to), g + 1, n)));
                }
            }
        }
        Ok(None)
    }

    /// Distances from `source` to every cell (`None` for obstacles and
    /// unreachable cells), indexed by [`Workspace::index`].
    pub fn distance_field(&self, source: Cell) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.num_cells()];
        if !self.is_free(source) {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index(source)] = Some(0);
        queue.push_back(source);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)].unwrap();
            for n in self.neighbors(c) {
                let ni = self.index(n);
                if dist[ni].is_none() {
                    dist[ni] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Serialises the grid in the text map format.
    pub fn to_map_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x as i32, y as i32);
                out.push(if self.is_obstacle(c) {
                    '#'
                } else if self.is_intermediate(c) {
                    'I'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the text map format: one row per line, `.` free, `#` obstacle,
/// `I` intermediate. A single trailing newline is optional.
pub fn parse_map(text: &str) -> Result<Workspace, MapError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(MapError::Empty);
    }
    let mut width = None;
    let mut obstacles = Vec::new();
    let mut intermediates = Vec::new();
    let mut height = 0;
    for (y, line) in body.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let mut count = 0;
        for (x, glyph) in line.chars().enumerate() {
            let c = Cell::new(x as i32, y as i32);
            match glyph {
                '.' => {}
                '#' => obstacles.push(c),
                'I' => intermediates.push(c),
                _ => {
                    return Err(MapError::UnknownGlyph {
                        line: y + 1,
                        column: x + 1,
                        glyph,
                    })
                }
            }
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(MapError::Ragged {
                    line: y + 1,
                    expected: w,
                    found: count,
                })
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.unwrap_or(0);
    if width == 0 {
        return Err(MapError::Empty);
    }
    Ok(Workspace::new(width, height, obstacles, intermediates).expect("parsed cells are in bounds and disjoint"))
}

/// Precomputed pairwise distances over a set of points of interest.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    pois: Vec<Cell>,
    slot: HashMap<Cell, usize>,
    table: Vec<Option<u32>>,
}

impl DistanceOracle {
    pub fn build(ws: &Workspace, pois: impl IntoIterator<Item = Cell>) -> Result<Self, WorkspaceError> {
        let mut cells: Vec<Cell> = pois.into_iter().collect();
        cells.sort();
        cells.dedup();
        for &c in &cells {
            ws.check_free(c)?;
        }
        let n = cells.len();
        let mut table = vec![None; n * n];
        for a in 0..n {
            table[a * n + a] = Some(0);
            for b in a + 1..n {
                let d = ws.shortest_dist(cells[a], cells[b])?;
                table[a * n + b] = d;
                table[b * n + a] = d;
            }
        }
        let slot = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(DistanceOracle {
            pois: cells,
            slot,
            table,
        })
    }

    pub fn pois(&self) -> &[Cell] {
        &self.pois
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.slot.contains_key(&c)
    }

    /// `None` when the pair is disconnected.
    ///
    /// Panics if either cell was not declared as a point of interest.
    pub fn dist(&self, a: Cell, b: Cell) -> Option<u32> {
        let n = self.pois.len();
        let (i, j) = (self.slot[&a], self.slot[&b]);
        self.table[i * n + j]
    }

    /// Largest finite distance in the table.
    pub fn max_finite(&self) -> u32 {
        self.table.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Number of stored ordered pairs.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain BFS, kept separate from the A* implementation under test.
    fn bfs(ws: &Workspace, from: Cell, to: Cell) -> Option<u32> {
        let mut seen = std::collections::HashSet::new();
        let mut frontier = vec![from];
        seen.insert(from);
        let mut d = 0;
        while !frontier.is_empty() {
            if frontier.contains(&to) {
                return Some(d);
            }
            let mut next = Vec::new();
            for c in frontier {
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let n = Cell::new(c.x + dx, c.y + dy);
                    if ws.is_free(n) && seen.insert(n) {
                        next.push(n);
                    }
                }
            }
            frontier = next;
            d += 1;
        }
        None
    }

    #[test]
    fn parses_small_map() {
        let ws = parse_map(".#.\n...\n.I.").unwrap();
        assert_eq!((ws.width(), ws.height()), (3, 3));
        assert_eq!(ws.obstacles().collect::<Vec<_>>(), vec![Cell::new(1, 0)]);
        assert_eq!(ws.intermediates(), &[Cell::new(1, 2)]);
    }

    #[test]
    fn parses_single_cell() {
        let ws = parse_map(".").unwrap();
        assert_eq!((ws.width(), ws.height()), (1, 1));
        assert_eq!(ws.obstacles().count(), 0);
    }

    #[test]
    fn trailing_newline_is_optional() {
        assert_eq!(parse_map("..\n.#\n..").unwrap(), parse_map("..\n.#\n..\n").unwrap());
    }

    #[test]
    fn rejects_bad_maps() {
        assert_eq!(
            parse_map(".#.\n.."),
            Err(MapError::Ragged {
                line: 2,
                expected: 3,
                found: 2
            })
        );
        assert_eq!(
            parse_map("..\n.x"),
            Err(MapError::UnknownGlyph {
                line: 2,
                column: 2,
                glyph: 'x'
            })
        );
        assert_eq!(parse_map(""), Err(MapError::Empty));
        assert_eq!(parse_map("\n"), Err(MapError::Empty));
    }

    #[test]
    fn manhattan_on_open_grid() {
        let ws = Workspace::open(5, 5);
        assert_eq!(ws.shortest_dist(Cell::new(0, 0), Cell::new(3, 2)), Ok(Some(5)));
        assert_eq!(ws.shortest_dist(Cell::new(2, 2), Cell::new(2, 2)), Ok(Some(0)));
    }

    #[test]
    fn wall_forces_detour() {
        let ws = parse_map(
            ".....\n\
             ####.\n\
             .....\n\
             .####\n\
             .....",
        )
        .unwrap();
        let (a, b) = (Cell::new(0, 0), Cell::new(4, 4));
        assert_eq!(ws.shortest_dist(a, b).unwrap(), bfs(&ws, a, b));
        assert_eq!(ws.shortest_dist(a, b).unwrap(), Some(16));
    }

    #[test]
    fn unreachable_and_endpoint_errors() {
        let ws = parse_map(".#.\n.#.").unwrap();
        assert_eq!(ws.shortest_dist(Cell::new(0, 0), Cell::new(2, 1)), Ok(None));
        assert_eq!(
            ws.shortest_dist(Cell::new(1, 0), Cell::new(0, 0)),
            Err(WorkspaceError::Obstacle(Cell::new(1, 0)))
        );
        assert_eq!(
            ws.shortest_dist(Cell::new(0, 0), Cell::new(5, 0)),
            Err(WorkspaceError::OutOfBounds(Cell::new(5, 0)))
        );
    }

    #[test]
    fn oracle_entries() {
        let ws = Workspace::open(4, 4);
        let single = DistanceOracle::build(&ws, [Cell::new(1, 1)]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.dist(Cell::new(1, 1), Cell::new(1, 1)), Some(0));

        let pois = [Cell::new(0, 0), Cell::new(3, 1), Cell::new(2, 3)];
        let o = DistanceOracle::build(&ws, pois).unwrap();
        assert_eq!(o.len(), 9);
        for a in pois {
            for b in pois {
                assert_eq!(o.dist(a, b), Some(a.manhattan(b)));
            }
        }
    }

    #[test]
    fn obstacle_and_intermediate_may_not_overlap() {
        let c = Cell::new(0, 0);
        assert_eq!(
            Workspace::new(2, 2, [c], [c]),
            Err(WorkspaceError::ObstacleIntermediate(c))
        );
    }

    #[test]
    fn map_text_round_trip() {
        let text = "..#.\n.I..\n#...\n";
        assert_eq!(parse_map(text).unwrap().to_map_text(), text);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_ws() -> impl Strategy<Value = Workspace> {
            (2usize..=10, 2usize..=10)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(0u8..5, w * h)))
                .prop_map(|(w, h, cells)| {
                    let obstacles = cells
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| v == 0)
                        .map(|(i, _)| Cell::new((i % w) as i32, (i / w) as i32));
                    Workspace::new(w, h, obstacles, []).unwrap()
                })
        }

        proptest! {
            #[test]
            fn astar_matches_bfs(ws in random_ws(), seed in any::<u64>()) {
                let free: Vec<Cell> = ws.free_cells().collect();
                prop_assume!(free.len() >= 2);
                let a = free[(seed % free.len() as u64) as usize];
                let b = free[((seed / 7) % free.len() as u64) as usize];
                prop_assert_eq!(ws.shortest_dist(a, b).unwrap(), bfs(&ws, a, b));
                let field = ws.distance_field(a);
                prop_assert_eq!(field[ws.index(b)], bfs(&ws, a, b));
            }

            #[test]
            fn oracle_is_a_metric(ws in random_ws(), picks in proptest::collection::vec(any::<u16>(), 1..7)) {
                let free: Vec<Cell> = ws.free_cells().collect();
                prop_assume!(!free.is_empty());
                let pois: Vec<Cell> = picks.iter().map(|&p| free[p as usize % free.len()]).collect();
                let o = DistanceOracle::build(&ws, pois.iter().copied()).unwrap();
                for &a in &pois {
                    prop_assert_eq!(o.dist(a, a), Some(0));
                    for &b in &pois {
                        prop_assert_eq!(o.dist(a, b), o.dist(b, a));
                        prop_assert_eq!(o.dist(a, b), bfs(&ws, a, b));
                        for &c in &pois {
                            if let (Some(ab), Some(bc), Some(ac)) = (o.dist(a, b), o.dist(b, c), o.dist(a, c)) {
                                prop_assert!(ac <= ab + bc);
                            }
                        }
                    }
                }
            }
        }
    }
}
