use serde::{Deserialize, Serialize};

use crate::room_sim::GridIndex;

/// Mean accuracy per grid cell plus aggregate statistics. Cells without
/// results are `None` and left out of every aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionMap {
    pub cells: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
    pub center: Option<f64>,
    pub corners: Option<f64>,
    /// Border cells that are not corners.
    pub edges: Option<f64>,
    /// Non-border cells other than the centre.
    pub inner: Option<f64>,
    pub rows: Vec<Option<f64>>,
    pub columns: Vec<Option<f64>>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Aggregates per-query correctness by the grid cell the query came from.
pub fn position_accuracy_map(
    results: &[(GridIndex, bool)],
    rows: usize,
    cols: usize,
) -> PositionMap {
    let mut hits = vec![vec![0usize; cols]; rows];
    let mut counts = vec![vec![0usize; cols]; rows];
    for &((r, c), ok) in results {
        if r < rows && c < cols {
            counts[r][c] += 1;
            hits[r][c] += ok as usize;
        }
    }
    let cells: Vec<Vec<Option<f64>>> = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| (counts[r][c] > 0).then(|| hits[r][c] as f64 / counts[r][c] as f64))
                .collect()
        })
        .collect();
    let all = || (0..rows).flat_map(move |r| (0..cols).map(move |c| (r, c)));
    let is_border = |r: usize, c: usize| r == 0 || c == 0 || r + 1 == rows || c + 1 == cols;
    let is_corner = |r: usize, c: usize| (r == 0 || r + 1 == rows) && (c == 0 || c + 1 == cols);
    let centre = (rows / 2, cols / 2);
    let has_centre = rows % 2 == 1 && cols % 2 == 1;
    let pick = |keep: &dyn Fn(usize, usize) -> bool| {
        mean(
            all()
                .filter(|&(r, c)| keep(r, c))
                .filter_map(|(r, c)| cells[r][c]),
        )
    };
    PositionMap {
        center: if has_centre {
            cells[centre.0][centre.1]
        } else {
            None
        },
        corners: pick(&|r, c| is_corner(r, c)),
        edges: pick(&|r, c| is_border(r, c) && !is_corner(r, c)),
        inner: pick(&|r, c| !is_border(r, c) && !(has_centre && (r, c) == centre)),
        rows: (0..rows)
            .map(|r| mean(cells[r].iter().flatten().copied()))
            .collect(),
        columns: (0..cols)
            .map(|c| mean((0..rows).filter_map(|r| cells[r][c])))
            .collect(),
        cells,
        counts,
    }
}
