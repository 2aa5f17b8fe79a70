use crate::env::testfns::TestFunction;
use crate::env::{BackwardPolicy, Environment};
use crate::error::{invalid, Error, Result};
use crate::pareto::{ObjectiveVector, Payload};

pub const GRID_INC_0: usize = 0;
pub const GRID_INC_1: usize = 1;
pub const GRID_STOP: usize = 2;

/// A cell of the grid; `done` marks that the stop action was taken there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridState {
    pub cell: [usize; 2],
    pub done: bool,
}

/// Two-dimensional `side x side` grid walked from `(0, 0)` by incrementing
/// one coordinate at a time, ending with an explicit stop.
#[derive(Clone, Debug)]
pub struct HyperGrid {
    side: usize,
    functions: Vec<TestFunction>,
    /// `table[cell_index][objective]`, min-max normalized per objective.
    table: Vec<Vec<f64>>,
}

impl HyperGrid {
    pub fn new(side: usize, functions: Vec<TestFunction>) -> Result<Self> {
        if side < 2 {
            return Err(invalid(format!("grid side must be at least 2, got {side}")));
        }
        if functions.len() < 2 {
            return Err(invalid("a hypergrid needs at least two objectives"));
        }
        let scale = (side - 1) as f64;
        let mut raw = vec![vec![0.0; functions.len()]; side * side];
        for i in 0..side {
            for j in 0..side {
                for (k, f) in functions.iter().enumerate() {
                    raw[i * side + j][k] = f.reward(i as f64 / scale, j as f64 / scale);
                }
            }
        }
        for k in 0..functions.len() {
            let lo = raw.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
            let hi = raw.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
            for r in raw.iter_mut() {
                r[k] = if hi > lo { (r[k] - lo) / (hi - lo) } else { 1.0 };
            }
        }
        Ok(Self { side, functions, table: raw })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    /// Normalized objectives of a cell.
    pub fn cell_objectives(&self, cell: [usize; 2]) -> Result<ObjectiveVector> {
        if cell.iter().any(|&c| c >= self.side) {
            return Err(invalid(format!("cell {cell:?} lies outside a {0}x{0} grid", self.side)));
        }
        ObjectiveVector::new(self.table[cell[0] * self.side + cell[1]].clone())
    }
}

impl Environment for HyperGrid {
    type State = GridState;

    fn num_actions(&self) -> usize {
        3
    }

    fn num_objectives(&self) -> usize {
        self.functions.len()
    }

    fn initial_state(&self) -> GridState {
        GridState { cell: [0, 0], done: false }
    }

    fn action_mask(&self, s: &GridState) -> Vec<bool> {
        if s.done {
            return vec![false; 3];
        }
        vec![s.cell[0] + 1 < self.side, s.cell[1] + 1 < self.side, true]
    }

    fn step(&self, s: &GridState, action: usize) -> Result<GridState> {
        let bad = |reason: &str| Error::InvalidAction { action, reason: reason.into() };
        if s.done {
            return Err(bad("state is terminal"));
        }
        let mut next = *s;
        match action {
            GRID_STOP => next.done = true,
            GRID_INC_0 | GRID_INC_1 => {
                if s.cell[action] + 1 >= self.side {
                    return Err(bad("increment past the grid boundary"));
                }
                next.cell[action] += 1;
            }
            _ => return Err(bad("unknown action")),
        }
        Ok(next)
    }

    fn is_terminal(&self, s: &GridState) -> bool {
        s.done
    }

    fn parents(&self, s: &GridState) -> Vec<(GridState, usize)> {
        if s.done {
            return vec![(GridState { cell: s.cell, done: false }, GRID_STOP)];
        }
        let mut out = Vec::with_capacity(2);
        for dim in 0..2 {
            if s.cell[dim] > 0 {
                let mut p = *s;
                p.cell[dim] -= 1;
                out.push((p, dim));
            }
        }
        out
    }

    fn objectives(&self, s: &GridState) -> Result<ObjectiveVector> {
        self.cell_objectives(s.cell)
    }

    fn payload(&self, s: &GridState) -> Payload {
        Payload::Cell(s.cell.to_vec())
    }

    fn encoding_len(&self) -> usize {
        2 * self.side
    }

    fn encode_state(&self, s: &GridState, out: &mut [f64]) {
        out.fill(0.0);
        out[s.cell[0]] = 1.0;
        out[self.side + s.cell[1]] = 1.0;
    }

    fn backward_policy(&self) -> BackwardPolicy {
        BackwardPolicy::UniformParents
    }

    fn max_trajectory_len(&self) -> usize {
        2 * (self.side - 1) + 1
    }
}
