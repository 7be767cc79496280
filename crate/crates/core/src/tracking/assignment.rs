//! Rectangular linear assignment with gating.
//!
//! Gated cells are never matched. Among the matchings that use the largest
//! possible number of ungated cells, the solver returns one of minimum total
//! cost; among equal-cost optima it returns the lexicographically smallest
//! row-to-column assignment, so results are reproducible when costs tie.

/// Dense cost matrix with a per-cell gate.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
    allowed: Vec<bool>,
}

impl CostMatrix {
    /// Zero-cost matrix with every cell allowed.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            costs: vec![0.0; rows * cols],
            allowed: vec![true; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged cost matrix");
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, r: usize, c: usize, cost: f64) {
        self.costs[r * self.cols + c] = cost;
    }

    pub fn cost(&self, r: usize, c: usize) -> f64 {
        self.costs[r * self.cols + c]
    }

    pub fn gate(&mut self, r: usize, c: usize) {
        self.allowed[r * self.cols + c] = false;
    }

    pub fn is_allowed(&self, r: usize, c: usize) -> bool {
        self.allowed[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, m: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(r, c)| m.cost(r, c)).sum()
    }
}

pub fn assign(m: &CostMatrix) -> Assignment {
    let n = m.rows.max(m.cols);
    if m.rows == 0 || m.cols == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_rows: (0..m.rows).collect(),
            unmatched_cols: (0..m.cols).collect(),
        };
    }

    let mut budget = 1.0;
    for r in 0..m.rows {
        for c in 0..m.cols {
            if m.is_allowed(r, c) {
                let v = m.cost(r, c);
                assert!(v.is_finite(), "non-finite cost on an ungated cell ({r}, {c})");
                budget += 2.0 * v.abs();
            }
        }
    }
    // Any gated cell outweighs every ungated cell combined, so cardinality on
    // ungated cells is maximised first. Padding cells cost nothing.
    let gated_cost = budget;
    let mut square = vec![0.0; n * n];
    for r in 0..m.rows {
        for c in 0..m.cols {
            square[r * n + c] = if m.is_allowed(r, c) {
                m.cost(r, c)
            } else {
                gated_cost
            };
        }
    }

    let (mut row_to_col, u, v) = hungarian(&square, n);
    lexicographic_refine(&square, n, &mut row_to_col, &u, &v);

    let mut out = Assignment::default();
    let mut col_used = vec![false; m.cols];
    for (r, &c) in row_to_col.iter().enumerate().take(m.rows) {
        if c < m.cols && m.is_allowed(r, c) {
            out.matches.push((r, c));
            col_used[c] = true;
        } else {
            out.unmatched_rows.push(r);
        }
    }
    out.unmatched_cols = (0..m.cols).filter(|&c| !col_used[c]).collect();
    out
}

/// Shortest-augmenting-path Hungarian method on an `n x n` matrix.
/// Returns the row-to-column assignment and the row/column potentials.
fn hungarian(a: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = none)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Moves each row, in order, to the lowest column it can take without
/// raising the total cost. Candidate re-routings follow alternating cycles in
/// the equality subgraph of the optimal potentials; each is accepted only if
/// the recomputed total does not increase.
fn lexicographic_refine(a: &[f64], n: usize, row_to_col: &mut [usize], u: &[f64], v: &[f64]) {
    let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * scale;
    let tight = |r: usize, c: usize| (a[r * n + c] - u[r] - v[c]).abs() <= tol;
    let total = |assign: &[usize]| -> f64 { assign.iter().enumerate().map(|(r, &c)| a[r * n + c]).sum() };

    let mut col_to_row = vec![0usize; n];
    for (r, &c) in row_to_col.iter().enumerate() {
        col_to_row[c] = r;
    }
    let mut fixed_col = vec![false; n];

    for i in 0..n {
        for j in 0..row_to_col[i] {
            if fixed_col[j] || !tight(i, j) {
                continue;
            }
            let target = row_to_col[i];
            let start = col_to_row[j];
            let Some(path) = reroute(start, target, j, n, &fixed_col, &col_to_row, &tight) else {
                continue;
            };
            let mut candidate = row_to_col.to_vec();
            candidate[i] = j;
            for &(r, c) in &path {
                candidate[r] = c;
            }
            if total(&candidate) <= total(row_to_col) {
                row_to_col.copy_from_slice(&candidate);
                for (r, &c) in row_to_col.iter().enumerate() {
                    col_to_row[c] = r;
                }
                break;
            }
        }
        fixed_col[row_to_col[i]] = true;
    }
}

/// Breadth-first search for an alternating path that frees `start`'s column
/// and ends by giving some row the column `target`. Returns the new
/// `(row, col)` assignments along the path.
fn reroute(
    start: usize,
    target: usize,
    taken: usize,
    n: usize,
    fixed_col: &[bool],
    col_to_row: &[usize],
    tight: &dyn Fn(usize, usize) -> bool,
) -> Option<Vec<(usize, usize)>> {
    // parent[c] = (row that reached column c)
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut visited_row = vec![false; n];
    let mut queue = std::collections::VecDeque::from([start]);
    visited_row[start] = true;
    while let Some(r) = queue.pop_front() {
        for c in 0..n {
            if c == taken || fixed_col[c] || parent[c].is_some() || !tight(r, c) {
                continue;
            }
            parent[c] = Some(r);
            if c == target {
                let mut path = Vec::new();
                let mut col = c;
                loop {
                    let row = parent[col].expect("visited column has a parent");
                    path.push((row, col));
                    if row == start {
                        return Some(path);
                    }
                    col = col_of_row(row, col_to_row);
                }
            }
            let next = col_to_row[c];
            if !visited_row[next] {
                visited_row[next] = true;
                queue.push_back(next);
            }
        }
    }
    None
}

fn col_of_row(row: usize, col_to_row: &[usize]) -> usize {
    col_to_row
        .iter()
        .position(|&r| r == row)
        .expect("every row is matched")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive oracle: maximum number of ungated matches, then minimum cost.
    fn brute_force(m: &CostMatrix) -> (usize, f64) {
        fn rec(m: &CostMatrix, r: usize, used: &mut Vec<bool>, k: usize, cost: f64, best: &mut (usize, f64)) {
            if r == m.rows() {
                if k > best.0 || (k == best.0 && cost < best.1) {
                    *best = (k, cost);
                }
                return;
            }
            rec(m, r + 1, used, k, cost, best);
            for c in 0..m.cols() {
                if !used[c] && m.is_allowed(r, c) {
                    used[c] = true;
                    rec(m, r + 1, used, k + 1, cost + m.cost(r, c), best);
                    used[c] = false;
                }
            }
        }
        let mut best = (0, f64::INFINITY);
        rec(m, 0, &mut vec![false; m.cols()], 0, 0.0, &mut best);
        if best.0 == 0 {
            best.1 = 0.0;
        }
        best
    }

    #[test]
    fn small_examples() {
        let m = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let a = assign(&m);
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost(&m), 0.0);

        let m = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let a = assign(&m);
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost(&m), 2.0);
    }

    #[test]
    fn empty_matrices() {
        let a = assign(&CostMatrix::new(0, 3));
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_cols, vec![0, 1, 2]);
        let a = assign(&CostMatrix::new(2, 0));
        assert_eq!(a.unmatched_rows, vec![0, 1]);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let a = assign(&CostMatrix::new(3, 3));
        assert_eq!(a.matches, vec![(0, 0), (1, 1), (2, 2)]);
        let m = CostMatrix::from_rows(&[vec![0.5, 0.5, 0.5], vec![0.5, 0.5, 0.5]]);
        assert_eq!(assign(&m).matches, vec![(0, 0), (1, 1)]);
        assert_eq!(assign(&m).unmatched_cols, vec![2]);
    }

    #[test]
    fn gates_are_respected() {
        let mut m = CostMatrix::from_rows(&[vec![0.1, 0.9], vec![0.2, 5.0]]);
        m.gate(1, 1);
        let a = assign(&m);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);

        let mut m = CostMatrix::from_rows(&[vec![0.3], vec![0.1]]);
        m.gate(0, 0);
        m.gate(1, 0);
        let a = assign(&m);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_rows, vec![0, 1]);
        assert_eq!(a.unmatched_cols, vec![0]);
    }

    #[test]
    fn gated_cells_may_hold_non_finite_values() {
        let mut m = CostMatrix::from_rows(&[vec![f64::INFINITY, 0.4]]);
        m.gate(0, 0);
        assert_eq!(assign(&m).matches, vec![(0, 1)]);
    }

    fn arb_matrix() -> impl Strategy<Value = CostMatrix> {
        (1..=7usize, 1..=7usize).prop_flat_map(|(r, c)| {
            (
                proptest::collection::vec(0.0..10.0f64, r * c),
                proptest::collection::vec(proptest::bool::weighted(0.8), r * c),
            )
                .prop_map(move |(costs, allowed)| {
                    let mut m = CostMatrix::new(r, c);
                    for i in 0..r {
                        for j in 0..c {
                            m.set(i, j, costs[i * c + j]);
                            if !allowed[i * c + j] {
                                m.gate(i, j);
                            }
                        }
                    }
                    m
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn matches_brute_force(m in arb_matrix()) {
            let a = assign(&m);
            let (k, cost) = brute_force(&m);
            prop_assert_eq!(a.matches.len(), k);
            prop_assert!((a.total_cost(&m) - cost).abs() <= 1e-9);
            prop_assert_eq!(a.matches.len() + a.unmatched_rows.len(), m.rows());
            prop_assert_eq!(a.matches.len() + a.unmatched_cols.len(), m.cols());
        }

        #[test]
        fn integer_ties_give_lexicographic_minimum(
            (r, c, costs) in (1..=5usize, 1..=5usize).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), proptest::collection::vec(0..3u8, r * c))
            })
        ) {
            let rows: Vec<Vec<f64>> = (0..r)
                .map(|i| (0..c).map(|j| f64::from(costs[i * c + j])).collect())
                .collect();
            let m = CostMatrix::from_rows(&rows);
            let a = assign(&m);
            // brute force the lexicographically smallest optimal assignment
            let k = r.min(c);
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut perm: Vec<usize> = Vec::new();
            fn rec(
                m: &CostMatrix, k: usize, perm: &mut Vec<usize>,
                best: &mut Option<(f64, Vec<usize>)>,
            ) {
                // assign rows in order; when rows > cols some rows stay unmatched (usize::MAX)
                if perm.len() == m.rows() {
                    let used = perm.iter().filter(|&&c| c != usize::MAX).count();
                    if used != k { return; }
                    let cost: f64 = perm.iter().enumerate()
                        .filter(|(_, &c)| c != usize::MAX)
                        .map(|(r, &c)| m.cost(r, c)).sum();
                    let better = match best {
                        None => true,
                        Some((bc, bp)) => cost < *bc || (cost == *bc && perm < bp),
                    };
                    if better { *best = Some((cost, perm.clone())); }
                    return;
                }
                for c in 0..m.cols() {
                    if !perm.contains(&c) {
                        perm.push(c);
                        rec(m, k, perm, best);
                        perm.pop();
                    }
                }
                perm.push(usize::MAX);
                rec(m, k, perm, best);
                perm.pop();
            }
            rec(&m, k, &mut perm, &mut best);
            let (cost, want) = best.unwrap();
            prop_assert_eq!(a.total_cost(&m), cost);
            let mut got = vec![usize::MAX; r];
            for &(i, j) in &a.matches { got[i] = j; }
            // lexicographic order only defined for square problems without padding choices
            if r <= c {
                prop_assert_eq!(got, want);
            }
        }
    }
}
