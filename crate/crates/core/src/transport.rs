//! Exact optimal transport between cluster signatures.
//!
//! The balanced transportation problem is solved with the transportation
//! simplex (MODI / u-v method) started from a north-west-corner basis. The
//! basis is kept as a spanning tree over row and column nodes, so degenerate
//! (zero-flow) basic cells are carried explicitly and the returned potentials
//! certify optimality by complementary slackness.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::ClusterSignature;
use crate::matrix::{squared_distance, SquareMatrix};

/// Pairwise OT distances between the clusters of one level.
pub type DistanceMatrix = SquareMatrix;

/// Mass sums further apart than this are rejected.
pub const MASS_TOLERANCE: f64 = 1e-6;
/// Atoms lighter than this are dropped before solving.
pub const PRUNE_MASS: f64 = 1e-12;

const MAX_PIVOTS: usize = 100_000;
/// Switch from Dantzig pricing to Bland's rule after this many pivots.
const BLAND_AFTER: usize = 1_000;

/// Dense rectangular matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values: rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values
            .chunks_exact(self.cols.max(1))
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks_exact(self.cols.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Ground cost `C[p1][p2] = ||f*_p1 - f*_p2||^2`.
pub type CostMatrix = Grid;
/// Coupling between two signatures; row sums match the source masses.
pub type TransportPlan = Grid;

pub fn cost_matrix(a: &ClusterSignature, b: &ClusterSignature) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidArgument(format!(
            "signature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut c = Grid::zeros(a.len(), b.len());
    for (i, ca) in a.centroids().iter().enumerate() {
        for (j, cb) in b.centroids().iter().enumerate() {
            c.set(i, j, squared_distance(ca, cb));
        }
    }
    Ok(c)
}

/// An optimal plan together with the dual potentials that certify it.
#[derive(Debug, Clone)]
pub struct OtSolution {
    pub cost: f64,
    pub plan: TransportPlan,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub pivots: usize,
}

impl OtSolution {
    /// Checks dual feasibility and complementary slackness against `cost`.
    pub fn is_certified(&self, cost: &CostMatrix, tol: f64) -> bool {
        for i in 0..cost.rows() {
            for j in 0..cost.cols() {
                let reduced = cost.get(i, j) - self.row_potentials[i] - self.col_potentials[j];
                if reduced < -tol {
                    return false;
                }
                if self.plan.get(i, j) > tol && reduced.abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// OT distance with squared-Euclidean ground cost.
pub fn ot_distance(a: &ClusterSignature, b: &ClusterSignature) -> Result<f64> {
    ot_solve(a, b).map(|s| s.cost)
}

pub fn ot_solve(a: &ClusterSignature, b: &ClusterSignature) -> Result<OtSolution> {
    let cost = cost_matrix(a, b)?;
    solve_transport(a.masses(), b.masses(), &cost)
}

/// Solves `min <P, C>` subject to `P 1 = supply`, `P^T 1 = demand`, `P >= 0`.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<OtSolution> {
    if supply.len() != cost.rows() || demand.len() != cost.cols() {
        return Err(Error::InvalidArgument(format!(
            "cost is {}x{} but measures have {} and {} atoms",
            cost.rows(),
            cost.cols(),
            supply.len(),
            demand.len()
        )));
    }
    if supply.is_empty() || demand.is_empty() {
        return Err(Error::InvalidArgument("empty measure".into()));
    }
    if cost.values.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidData("non-finite transport cost".into()));
    }
    if supply.iter().chain(demand).any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::InvalidData("masses must be finite and non-negative".into()));
    }
    let supply_total: f64 = supply.iter().sum();
    let demand_total: f64 = demand.iter().sum();
    if (supply_total - demand_total).abs() > MASS_TOLERANCE || supply_total <= 0.0 {
        return Err(Error::InfeasibleMeasures {
            source_mass: supply_total,
            target_mass: demand_total,
        });
    }

    let rows = kept_atoms(supply);
    let cols = kept_atoms(demand);
    let s = renormalized(supply, &rows, supply_total);
    let d = renormalized(demand, &cols, supply_total);
    let sub_cost = Grid {
        rows: rows.len(),
        cols: cols.len(),
        values: rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| cost.get(i, j)))
            .collect(),
    };

    let tree = TransportSimplex::new(&s, &d, &sub_cost).run()?;

    let mut plan = Grid::zeros(cost.rows(), cost.cols());
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            plan.set(i, j, tree.flow.get(ri, cj));
        }
    }
    let mut col_potentials = vec![f64::NAN; cost.cols()];
    for (cj, &j) in cols.iter().enumerate() {
        col_potentials[j] = tree.v[cj];
    }
    let mut row_potentials = vec![f64::NAN; cost.rows()];
    for (ri, &i) in rows.iter().enumerate() {
        row_potentials[i] = tree.u[ri];
    }
    // Pruned atoms carry no flow; pick potentials that keep dual feasibility.
    for j in 0..cost.cols() {
        if col_potentials[j].is_nan() {
            col_potentials[j] = rows
                .iter()
                .map(|&i| cost.get(i, j) - row_potentials[i])
                .fold(f64::INFINITY, f64::min);
        }
    }
    for i in 0..cost.rows() {
        if row_potentials[i].is_nan() {
            row_potentials[i] = (0..cost.cols())
                .map(|j| cost.get(i, j) - col_potentials[j])
                .fold(f64::INFINITY, f64::min);
        }
    }

    let total = plan
        .values
        .iter()
        .zip(&cost.values)
        .map(|(p, c)| p * c)
        .sum::<f64>();
    Ok(OtSolution {
        cost: total,
        plan,
        row_potentials,
        col_potentials,
        pivots: tree.pivots,
    })
}

fn kept_atoms(masses: &[f64]) -> Vec<usize> {
    let kept: Vec<usize> = (0..masses.len()).filter(|&i| masses[i] >= PRUNE_MASS).collect();
    if kept.is_empty() {
        // all atoms negligible but total positive: keep the heaviest
        let heaviest = (0..masses.len())
            .max_by(|&a, &b| masses[a].total_cmp(&masses[b]))
            .unwrap_or(0);
        return vec![heaviest];
    }
    kept
}

fn renormalized(masses: &[f64], kept: &[usize], target_total: f64) -> Vec<f64> {
    let kept_total: f64 = kept.iter().map(|&i| masses[i]).sum();
    if kept_total == target_total {
        return kept.iter().map(|&i| masses[i]).collect();
    }
    let scale = target_total / kept_total;
    kept.iter().map(|&i| masses[i] * scale).collect()
}

struct Solved {
    flow: Grid,
    u: Vec<f64>,
    v: Vec<f64>,
    pivots: usize,
}

struct TransportSimplex<'a> {
    cost: &'a Grid,
    flow: Grid,
    basic: Vec<bool>,
    m: usize,
    n: usize,
}

impl<'a> TransportSimplex<'a> {
    /// North-west-corner start: a staircase of exactly `m + n - 1` basic cells.
    fn new(supply: &[f64], demand: &[f64], cost: &'a Grid) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut flow = Grid::zeros(m, n);
        let mut basic = vec![false; m * n];
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]);
            flow.set(i, j, x);
            basic[i * n + j] = true;
            let row_exhausted = s[i] <= d[j];
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && row_exhausted) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self {
            cost,
            flow,
            basic,
            m,
            n,
        }
    }

    fn potentials(&self) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut u = vec![f64::NAN; m];
        let mut v = vec![f64::NAN; n];
        u[0] = 0.0;
        let mut stack = vec![Node::Row(0)];
        while let Some(node) = stack.pop() {
            match node {
                Node::Row(i) => {
                    for j in 0..n {
                        if self.basic[i * n + j] && v[j].is_nan() {
                            v[j] = self.cost.get(i, j) - u[i];
                            stack.push(Node::Col(j));
                        }
                    }
                }
                Node::Col(j) => {
                    for i in 0..m {
                        if self.basic[i * n + j] && u[i].is_nan() {
                            u[i] = self.cost.get(i, j) - v[j];
                            stack.push(Node::Row(i));
                        }
                    }
                }
            }
        }
        (u, v)
    }

    /// Basic cells on the tree path from column `j` back to row `i`, in order.
    fn cycle_path(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let (m, n) = (self.m, self.n);
        // BFS from Col(j); parents index into a flat node space (rows then cols).
        let mut parent: Vec<Option<usize>> = vec![None; m + n];
        let mut seen = vec![false; m + n];
        let start = m + j;
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            let neighbors: Vec<usize> = if node < m {
                (0..n).filter(|&c| self.basic[node * n + c]).map(|c| m + c).collect()
            } else {
                let c = node - m;
                (0..m).filter(|&r| self.basic[r * n + c]).collect()
            };
            for next in neighbors {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some(node);
                    queue.push_back(next);
                }
            }
        }
        let mut nodes = vec![i];
        let mut cur = i;
        while let Some(p) = parent[cur] {
            nodes.push(p);
            cur = p;
        }
        nodes.reverse();
        // nodes: Col(j), Row(..), Col(..), ..., Row(i)
        nodes
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                if a < m {
                    (a, b - m)
                } else {
                    (b, a - m)
                }
            })
            .collect()
    }

    fn run(mut self) -> Result<Solved> {
        let scale = self.cost.values.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let eps = 1e-12 * scale;
        let mut pivots = 0;
        loop {
            let (u, v) = self.potentials();
            let bland = pivots >= BLAND_AFTER;
            let mut entering = None;
            let mut best = -eps;
            'scan: for i in 0..self.m {
                for j in 0..self.n {
                    if self.basic[i * self.n + j] {
                        continue;
                    }
                    let r = self.cost.get(i, j) - u[i] - v[j];
                    if r < best {
                        entering = Some((i, j));
                        if bland {
                            break 'scan;
                        }
                        best = r;
                    }
                }
            }
            let Some((ei, ej)) = entering else {
                return Ok(Solved {
                    flow: self.flow,
                    u,
                    v,
                    pivots,
                });
            };
            if pivots >= MAX_PIVOTS {
                return Err(Error::NumericalFailure(format!(
                    "transportation simplex did not converge in {MAX_PIVOTS} pivots"
                )));
            }

            let path = self.cycle_path(ei, ej);
            // Along the cycle the entering cell gains; path cells alternate lose/gain.
            let mut theta = f64::INFINITY;
            let mut leaving = None;
            for &(r, c) in path.iter().step_by(2) {
                let x = self.flow.get(r, c);
                let better = x < theta
                    || (x == theta
                        && leaving.is_some_and(|(lr, lc): (usize, usize)| {
                            r * self.n + c < lr * self.n + lc
                        }));
                if better {
                    theta = x;
                    leaving = Some((r, c));
                }
            }
            let (lr, lc) = leaving.expect("cycle has at least one losing cell");
            for (k, &(r, c)) in path.iter().enumerate() {
                let x = self.flow.get(r, c);
                let next = if k % 2 == 0 { x - theta } else { x + theta };
                self.flow.set(r, c, next);
            }
            self.flow.set(ei, ej, theta);
            self.flow.set(lr, lc, 0.0);
            self.basic[lr * self.n + lc] = false;
            self.basic[ei * self.n + ej] = true;
            pivots += 1;
        }
    }
}

#[derive(Clone, Copy)]
enum Node {
    Row(usize),
    Col(usize),
}

/// OT distance between every pair of signatures.
///
/// The upper triangle is solved (in parallel) and mirrored; the diagonal is 0.
pub fn pairwise_distances(signatures: &[ClusterSignature]) -> Result<DistanceMatrix> {
    let n = signatures.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 signatures, got {n}"
        )));
    }
    let dim = signatures[0].dim();
    if let Some(bad) = signatures.iter().position(|s| s.dim() != dim) {
        return Err(Error::InvalidArgument(format!(
            "signature {bad} has dimension {}, expected {dim}",
            signatures[bad].dim()
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| ot_distance(&signatures[i], &signatures[j]))
        .collect::<Result<Vec<f64>>>()?;
    let mut z = SquareMatrix::zeros(n);
    for (&(i, j), &d) in pairs.iter().zip(&values) {
        z.set(i, j, d);
        z.set(j, i, d);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig1d(points: &[f64], masses: &[f64]) -> ClusterSignature {
        ClusterSignature::new(points.iter().map(|&p| vec![p]).collect(), masses.to_vec()).unwrap()
    }

    #[test]
    fn cost_matrix_examples() {
        let a = sig1d(&[0.0], &[1.0]);
        assert_eq!(cost_matrix(&a, &a).unwrap().to_rows(), vec![vec![0.0]]);
        let b = sig1d(&[3.0], &[1.0]);
        assert_eq!(cost_matrix(&a, &b).unwrap().to_rows(), vec![vec![9.0]]);
        let c = sig1d(&[0.0, 1.0], &[0.5, 0.5]);
        let d = sig1d(&[0.0, 2.0], &[0.5, 0.5]);
        assert_eq!(
            cost_matrix(&c, &d).unwrap().to_rows(),
            vec![vec![0.0, 4.0], vec![1.0, 1.0]]
        );
    }

    #[test]
    fn dimension_mismatch() {
        let a = sig1d(&[0.0], &[1.0]);
        let b = ClusterSignature::point(vec![0.0, 1.0]).unwrap();
        assert!(matches!(cost_matrix(&a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_atoms() {
        let a = sig1d(&[0.0], &[1.0]);
        let b = sig1d(&[3.0], &[1.0]);
        assert_eq!(ot_distance(&a, &b).unwrap(), 9.0);
        assert_eq!(ot_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn two_by_two_matches_one_parameter_oracle() {
        let a = sig1d(&[0.0, 1.0], &[0.5, 0.5]);
        let b = sig1d(&[0.0, 2.0], &[0.5, 0.5]);
        let c = cost_matrix(&a, &b).unwrap();
        // Feasible plans: [[t, .5-t], [.5-t, t]], t in [0, .5].
        let oracle = (0..=10_000)
            .map(|k| {
                let t = 0.5 * k as f64 / 10_000.0;
                t * c.get(0, 0) + (0.5 - t) * (c.get(0, 1) + c.get(1, 0)) + t * c.get(1, 1)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((oracle - 0.5).abs() < 1e-15);
        let sol = ot_solve(&a, &b).unwrap();
        assert!((sol.cost - oracle).abs() < 1e-12);
        assert!(sol.is_certified(&c, 1e-12));
    }

    #[test]
    fn infeasible_and_invalid() {
        let a = sig1d(&[0.0], &[1.0]);
        let b = sig1d(&[1.0], &[0.5]);
        assert!(matches!(
            ot_distance(&a, &b),
            Err(Error::InfeasibleMeasures { .. })
        ));
        let cost = Grid::from_rows(&[[f64::INFINITY]]).unwrap();
        assert!(matches!(
            solve_transport(&[1.0], &[1.0], &cost),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn pruned_atoms_carry_no_flow() {
        let cost = Grid::from_rows(&[[0.0, 5.0], [1.0, 2.0]]).unwrap();
        let sol = solve_transport(&[1.0, 1e-15], &[0.5, 0.5], &cost).unwrap();
        assert_eq!(sol.plan.get(1, 0), 0.0);
        assert_eq!(sol.plan.get(1, 1), 0.0);
        assert!((sol.cost - 2.5).abs() < 1e-12);
        assert!(sol.is_certified(&cost, 1e-9));
    }

    #[test]
    fn degenerate_square_problem() {
        // Identity-like optimum with many ties; exercises zero-flow basic cells.
        let pts: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let a = ClusterSignature::uniform(pts.iter().map(|&p| vec![p]).collect()).unwrap();
        let sol = ot_solve(&a, &a).unwrap();
        assert!(sol.cost.abs() < 1e-12);
        let c = cost_matrix(&a, &a).unwrap();
        assert!(sol.is_certified(&c, 1e-9));
    }

    #[test]
    fn pairwise_examples() {
        let s = |p: f64| ClusterSignature::point(vec![p]).unwrap();
        let z = pairwise_distances(&[s(0.0), s(3.0), s(4.0)]).unwrap();
        assert_eq!(
            z.to_rows(),
            vec![
                vec![0.0, 9.0, 16.0],
                vec![9.0, 0.0, 1.0],
                vec![16.0, 1.0, 0.0]
            ]
        );
        assert_eq!(z, z.transpose());
        let same = pairwise_distances(&[s(2.0), s(2.0)]).unwrap();
        assert_eq!(same.to_rows(), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(pairwise_distances(&[s(1.0)]).is_err());
    }
}
