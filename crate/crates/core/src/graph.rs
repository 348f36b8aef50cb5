//! Interaction topologies: weighted graphs, Laplacians, algebraic
//! connectivity, and detail balance for directed graphs.

use std::collections::VecDeque;

use thiserror::Error;

use crate::linalg::{symmetric_eigenvalues, SquareMatrix};

/// Relative tolerance for `p_i a_ij = p_j a_ji`.
pub const DETAIL_BALANCE_TOLERANCE: f64 = 1e-9;

/// An eigenvalue below `ZERO_EIGENVALUE_FACTOR * max(l_ii)` counts as zero.
pub const ZERO_EIGENVALUE_FACTOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a network needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("weight matrix row {row} has {len} entries, expected {expected}")]
    Ragged {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("weight a[{i}][{j}] is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("self-loop at agent {0}: a[{0}][{0}] must be 0")]
    SelfLoop(usize),
    #[error(
        "negative weight a[{i}][{j}] = {value}; only signed graphs may carry negative weights"
    )]
    NegativeWeight { i: usize, j: usize, value: f64 },
    #[error("undirected graph is not symmetric at ({i}, {j}): {a_ij} vs {a_ji}")]
    Asymmetric {
        i: usize,
        j: usize,
        a_ij: f64,
        a_ji: f64,
    },
    #[error("matrix is not symmetric (max |l_ij - l_ji| = {0:e}); directed graphs need the mirror Laplacian")]
    NotSymmetric(f64),
    #[error("graph is not connected")]
    NotConnected,
    #[error("graph does not satisfy detail balance")]
    NotDetailBalanced,
}

/// Adjacency weights `a_ij >= 0` of an `n`-agent network.
///
/// Signed graphs (cooperative/antagonistic interactions) may carry negative
/// weights but must be structurally undirected: `|a_ij| = |a_ji|` and
/// matching signs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: SquareMatrix,
    directed: bool,
    signed: bool,
}

impl WeightedGraph {
    pub fn undirected(rows: &[Vec<f64>]) -> Result<Self, GraphError> {
        Self::build(rows, false, false)
    }

    pub fn directed(rows: &[Vec<f64>]) -> Result<Self, GraphError> {
        Self::build(rows, true, false)
    }

    pub fn signed(rows: &[Vec<f64>]) -> Result<Self, GraphError> {
        Self::build(rows, false, true)
    }

    pub fn from_matrix(weights: SquareMatrix, directed: bool) -> Result<Self, GraphError> {
        Self::build(&weights.to_rows(), directed, false)
    }

    fn build(rows: &[Vec<f64>], directed: bool, signed: bool) -> Result<Self, GraphError> {
        let n = rows.len();
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(GraphError::Ragged {
                    row,
                    len: r.len(),
                    expected: n,
                });
            }
        }
        let weights = SquareMatrix::from_fn(n, |i, j| rows[i][j]);
        for i in 0..n {
            for j in 0..n {
                let a = weights[(i, j)];
                if !a.is_finite() {
                    return Err(GraphError::NonFinite { i, j });
                }
                if i == j && a != 0.0 {
                    return Err(GraphError::SelfLoop(i));
                }
                if a < 0.0 && !signed {
                    return Err(GraphError::NegativeWeight { i, j, value: a });
                }
                if !directed && j > i && a != weights[(j, i)] {
                    return Err(GraphError::Asymmetric {
                        i,
                        j,
                        a_ij: a,
                        a_ji: weights[(j, i)],
                    });
                }
            }
        }
        Ok(Self {
            weights,
            directed,
            signed,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.weights.dim()
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &SquareMatrix {
        &self.weights
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    #[allow(clippy::needless_range_loop)]
    fn reachable(&self, start: usize, forward: bool) -> Vec<bool> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let a = if forward {
                    self.weight(i, j)
                } else {
                    self.weight(j, i)
                };
                if a != 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }
}

/// Graph Laplacian `L = D - A` with `l_ij = -a_ij` off the diagonal.
///
/// The diagonal is the negated sum of the row's off-diagonal entries, so
/// `L * 1 = 0` holds exactly. Signed graphs use `|a_ij|`.
pub fn laplacian(g: &WeightedGraph) -> SquareMatrix {
    laplacian_of(g.weights(), g.is_signed())
}

fn laplacian_of(weights: &SquareMatrix, absolute: bool) -> SquareMatrix {
    let n = weights.dim();
    let mut l = SquareMatrix::zeros(n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let a = weights[(i, j)];
                let off = -(if absolute { a.abs() } else { a });
                l[(i, j)] = off;
                diag -= off;
            }
        }
        l[(i, i)] = diag;
    }
    l
}

/// Spectrum summary of a symmetric Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianAnalysis {
    pub laplacian: SquareMatrix,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda2: f64,
    pub connected: bool,
}

impl LaplacianAnalysis {
    pub fn new(laplacian: SquareMatrix) -> Result<Self, GraphError> {
        check_symmetric(&laplacian)?;
        let eigenvalues = symmetric_eigenvalues(&laplacian);
        let lambda2 = eigenvalues[1];
        let max_diag = (0..laplacian.dim())
            .map(|i| laplacian[(i, i)])
            .fold(0.0_f64, f64::max);
        let connected = lambda2 > ZERO_EIGENVALUE_FACTOR * max_diag;
        Ok(Self {
            laplacian,
            eigenvalues,
            lambda2,
            connected,
        })
    }

    /// Eigenvalues counted as zero under the connectivity threshold.
    pub fn zero_eigenvalue_count(&self) -> usize {
        let max_diag = (0..self.laplacian.dim())
            .map(|i| self.laplacian[(i, i)])
            .fold(0.0_f64, f64::max);
        self.eigenvalues
            .iter()
            .filter(|v| v.abs() <= ZERO_EIGENVALUE_FACTOR * max_diag)
            .count()
    }
}

fn check_symmetric(m: &SquareMatrix) -> Result<(), GraphError> {
    let asym = m.asymmetry();
    if asym > 1e-12 * m.max_abs().max(1.0) {
        return Err(GraphError::NotSymmetric(asym));
    }
    Ok(())
}

/// Second-smallest eigenvalue of a symmetric Laplacian.
pub fn algebraic_connectivity(l: &SquareMatrix) -> Result<f64, GraphError> {
    check_symmetric(l)?;
    Ok(symmetric_eigenvalues(l)[1])
}

/// Undirected: every node reachable from node 0. Directed: strong
/// connectivity (every node reachable from node 0 forwards and backwards).
pub fn is_connected(g: &WeightedGraph) -> bool {
    let forward = g.reachable(0, true);
    if !forward.iter().all(|&s| s) {
        return false;
    }
    !g.is_directed() || g.reachable(0, false).iter().all(|&s| s)
}

/// Detail-balance parameters `p` with `p_i a_ij = p_j a_ji`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBalance {
    /// Canonical form has `p[0] = 1`.
    pub p: Vec<f64>,
    pub valid: bool,
}

impl DetailBalance {
    fn invalid(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            valid: false,
        }
    }

    /// Caller-supplied parameters, validated against the graph.
    pub fn with_params(g: &WeightedGraph, p: Vec<f64>) -> Self {
        let valid = p.len() == g.n()
            && p.iter().all(|v| v.is_finite() && *v > 0.0)
            && max_balance_residual(g, &p) <= DETAIL_BALANCE_TOLERANCE;
        Self { p, valid }
    }

    /// Rescales `p` to the smallest positive integer vector with the same
    /// ratios (gcd 1), e.g. `[1, 0.5, 0.2]` becomes `[10, 5, 2]`.
    ///
    /// Returns `None` if some ratio has no rational approximation with
    /// denominator up to `10^6` within relative error `1e-9`.
    pub fn integer_scaled(&self) -> Option<Vec<f64>> {
        if !self.valid {
            return None;
        }
        let first = self.p[0];
        let mut fracs = Vec::with_capacity(self.p.len());
        for v in &self.p {
            fracs.push(rational_approx(v / first, 1_000_000, 1e-9)?);
        }
        let lcm = fracs.iter().try_fold(1u64, |acc, &(_, d)| {
            let l = acc / gcd(acc, d) * d;
            (l <= 1_000_000_000).then_some(l)
        })?;
        let nums: Vec<u64> = fracs.iter().map(|&(num, d)| num * (lcm / d)).collect();
        let g = nums.iter().fold(0u64, |acc, &v| gcd(acc, v));
        Some(nums.iter().map(|&v| (v / g) as f64).collect())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Continued-fraction approximation of a positive real.
fn rational_approx(x: f64, max_den: u64, rel_tol: f64) -> Option<(u64, u64)> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= rel_tol * x {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// `max_ij |p_i a_ij - p_j a_ji| / max_ij (p_i a_ij)`, 0 for an empty graph.
pub fn max_balance_residual(g: &WeightedGraph, p: &[f64]) -> f64 {
    let n = g.n();
    let mut scale = 0.0_f64;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let fwd = p[i] * g.weight(i, j);
            let bwd = p[j] * g.weight(j, i);
            scale = scale.max(fwd.abs());
            worst = worst.max((fwd - bwd).abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Finds `p` with `p_i a_ij = p_j a_ji` by propagating ratios along a
/// spanning tree of the symmetrized edge set, then checking every edge.
///
/// One-way edges (`a_ij > 0`, `a_ji = 0`) make the result invalid.
pub fn find_detail_balance(g: &WeightedGraph) -> DetailBalance {
    let n = g.n();
    let mut p = vec![0.0; n];
    let mut seen = vec![false; n];
    p[0] = 1.0;
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if seen[j] {
                continue;
            }
            let a_ij = g.weight(i, j);
            let a_ji = g.weight(j, i);
            if a_ij == 0.0 && a_ji == 0.0 {
                continue;
            }
            if a_ij <= 0.0 || a_ji <= 0.0 {
                return DetailBalance::invalid(n);
            }
            p[j] = p[i] * a_ij / a_ji;
            seen[j] = true;
            queue.push_back(j);
        }
    }
    if !seen.iter().all(|&s| s) {
        return DetailBalance::invalid(n);
    }
    if max_balance_residual(g, &p) > DETAIL_BALANCE_TOLERANCE {
        return DetailBalance::invalid(n);
    }
    DetailBalance { p, valid: true }
}

/// The balance used for analysis and simulation: [`find_detail_balance`]
/// rescaled to its primitive integer form when one exists.
///
/// The mirror graph, and so its algebraic connectivity, scales with `p`;
/// the integer form makes that scale independent of node numbering.
pub fn analysis_detail_balance(g: &WeightedGraph) -> DetailBalance {
    let db = find_detail_balance(g);
    match db.integer_scaled() {
        Some(p) => DetailBalance { p, valid: true },
        None => db,
    }
}

/// Mirror weights `â_ij = p_i a_ij` (symmetric for a valid balance).
///
/// Both triangles take the mean of `p_i a_ij` and `p_j a_ji`, which agree to
/// within the balance tolerance, so the output is exactly symmetric.
pub fn mirror_weights(g: &WeightedGraph, db: &DetailBalance) -> Result<SquareMatrix, GraphError> {
    if !db.valid || db.p.len() != g.n() {
        return Err(GraphError::NotDetailBalanced);
    }
    let p = &db.p;
    Ok(SquareMatrix::from_fn(g.n(), |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (p[i] * g.weight(i, j) + p[j] * g.weight(j, i))
        }
    }))
}

/// Laplacian of the mirror graph: `l̂_ij = -p_i a_ij`, `l̂_ii = Σ_k p_i a_ik`.
pub fn mirror_laplacian(g: &WeightedGraph, db: &DetailBalance) -> Result<SquareMatrix, GraphError> {
    Ok(laplacian_of(&mirror_weights(g, db)?, false))
}

/// Coupling weights a protocol should use for this graph, and the Laplacian
/// whose `λ2` governs its convergence.
///
/// Undirected graphs use `A` as is; directed graphs must be strongly
/// connected and detail-balanced and are replaced by their mirror.
pub fn effective_weights(
    g: &WeightedGraph,
    balance: Option<&DetailBalance>,
) -> Result<SquareMatrix, GraphError> {
    if !is_connected(g) {
        return Err(GraphError::NotConnected);
    }
    if !g.is_directed() {
        return Ok(g.weights().clone());
    }
    match balance {
        Some(db) => mirror_weights(g, db),
        None => mirror_weights(g, &find_detail_balance(g)),
    }
}
