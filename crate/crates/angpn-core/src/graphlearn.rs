//! Neighborhood graph construction: pairwise distances, the per-row
//! adaptive-graph solve, and the fixed kNN baseline graph.
//!
//! The adaptive solve (`s_step`) treats each row independently: given costs
//! `c_j = (D - beta * F F^T)_ij` with the diagonal masked, it thresholds the
//! rescaled values `v_j = -c_j / (2 gamma_i)`. Two threshold rules are
//! supported:
//!
//! * `paper-literal` adds a fixed per-row shift `eta_i` computed from the k
//!   smallest distances and clamps at zero. Rows are not guaranteed to sum
//!   to 1.
//! * `exact-simplex` projects the row onto the probability simplex, so rows
//!   are exactly row-stochastic and the result is the minimizer of
//!   `sum_j c_j s_j + gamma * sum_j s_j^2` over the simplex.

use crate::error::{Error, Result};
use crate::numkit::{Matrix, NodeId, RowThresholdData, RowThresholdKind, Tape};
use crate::propagation::HyperParams;

/// How each row's threshold is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    /// Fixed shift from the k-nearest distance sum; clamp at zero.
    PaperLiteral,
    /// Exact Euclidean projection onto the probability simplex.
    ExactSimplex,
}

/// How the sparsity regularizer gamma is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMode {
    /// One global gamma for every row.
    Global,
    /// Per-row gamma chosen so that exactly the k nearest neighbors carry
    /// mass; the solve restricts each row to those k candidates.
    PerRowK,
}

/// Graph-learning mode: threshold rule plus gamma selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphMode {
    pub rule: ThresholdRule,
    pub gamma_mode: GammaMode,
}

impl GraphMode {
    pub fn exact_simplex() -> Self {
        GraphMode {
            rule: ThresholdRule::ExactSimplex,
            gamma_mode: GammaMode::Global,
        }
    }

    pub fn paper_literal() -> Self {
        GraphMode {
            rule: ThresholdRule::PaperLiteral,
            gamma_mode: GammaMode::Global,
        }
    }
}

impl Default for GraphMode {
    fn default() -> Self {
        GraphMode::exact_simplex()
    }
}

impl std::fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThresholdRule::PaperLiteral => write!(f, "paper-literal"),
            ThresholdRule::ExactSimplex => write!(f, "exact-simplex"),
        }
    }
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" => Ok(ThresholdRule::PaperLiteral),
            "exact-simplex" => Ok(ThresholdRule::ExactSimplex),
            other => Err(Error::Param(format!(
                "unknown graph mode '{other}' (expected paper-literal or exact-simplex)"
            ))),
        }
    }
}

impl std::fmt::Display for GammaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaMode::Global => write!(f, "global"),
            GammaMode::PerRowK => write!(f, "per-row-k"),
        }
    }
}

impl std::str::FromStr for GammaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(GammaMode::Global),
            "per-row-k" => Ok(GammaMode::PerRowK),
            other => Err(Error::Param(format!(
                "unknown gamma mode '{other}' (expected global or per-row-k)"
            ))),
        }
    }
}

/// Pairwise Euclidean distances with per-row sort order.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    d: Matrix,
    /// order[i] lists the off-diagonal indices of row i sorted by ascending
    /// distance, ties by ascending index.
    order: Vec<Vec<usize>>,
}

impl DistanceMatrix {
    /// Validates symmetry (within 1e-12), zero diagonal and nonnegativity,
    /// then computes the per-row sort order.
    pub fn from_matrix(d: Matrix) -> Result<Self> {
        let n = d.rows();
        if d.cols() != n {
            return Err(Error::shape(
                "distance matrix",
                format!("{}x{}", d.rows(), d.cols()),
                "square",
            ));
        }
        if n < 2 {
            return Err(Error::Param("distance matrix needs at least 2 points".into()));
        }
        for i in 0..n {
            if d.get(i, i) != 0.0 {
                return Err(Error::Data(format!("nonzero diagonal at ({i}, {i})")));
            }
            for j in 0..n {
                let v = d.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Data(format!("invalid distance {v} at ({i}, {j})")));
                }
                if (v - d.get(j, i)).abs() > 1e-12 {
                    return Err(Error::Data(format!(
                        "asymmetric distances at ({i}, {j}): {v} vs {}",
                        d.get(j, i)
                    )));
                }
            }
        }
        let order = sort_orders(&d);
        Ok(DistanceMatrix { d, order })
    }

    pub fn n(&self) -> usize {
        self.d.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d.get(i, j)
    }

    /// Off-diagonal indices of row `i`, ascending by distance then index.
    pub fn order(&self, i: usize) -> &[usize] {
        &self.order[i]
    }

    /// The `rank`-th smallest off-diagonal distance of row `i` (rank 0 is
    /// the nearest neighbor).
    pub fn sorted_distance(&self, i: usize, rank: usize) -> f64 {
        self.d.get(i, self.order[i][rank])
    }
}

fn sort_orders(d: &Matrix) -> Vec<Vec<usize>> {
    let n = d.rows();
    (0..n)
        .map(|i| {
            let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            idx.sort_unstable_by(|&a, &b| {
                d.get(i, a)
                    .total_cmp(&d.get(i, b))
                    .then_with(|| a.cmp(&b))
            });
            idx
        })
        .collect()
}

/// Pairwise Euclidean distances between the rows of `x`. Computed once per
/// training run from the original features and fixed thereafter.
pub fn pairwise_euclidean(x: &Matrix) -> Result<DistanceMatrix> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::Param(format!("need at least 2 points, got {n}")));
    }
    x.ensure_finite("pairwise_euclidean")?;
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut acc = 0.0;
            for (a, b) in x.row(i).iter().zip(x.row(j)) {
                let diff = a - b;
                acc += diff * diff;
            }
            let dist = acc.sqrt();
            d.set(i, j, dist);
            d.set(j, i, dist);
        }
    }
    let order = sort_orders(&d);
    Ok(DistanceMatrix { d, order })
}

/// Nonnegative affinity matrix with zero diagonal. Row-stochastic when the
/// producing mode guarantees it (kNN graphs and exact-simplex rows).
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    weights: Matrix,
}

impl AffinityMatrix {
    pub fn from_matrix(weights: Matrix) -> Result<Self> {
        if weights.rows() != weights.cols() {
            return Err(Error::shape(
                "affinity matrix",
                format!("{}x{}", weights.rows(), weights.cols()),
                "square",
            ));
        }
        for i in 0..weights.rows() {
            if weights.get(i, i) != 0.0 {
                return Err(Error::Data(format!("nonzero diagonal at ({i}, {i})")));
            }
            for j in 0..weights.cols() {
                let v = weights.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Data(format!("invalid affinity {v} at ({i}, {j})")));
                }
            }
        }
        Ok(AffinityMatrix { weights })
    }

    pub(crate) fn from_matrix_unchecked(weights: Matrix) -> Self {
        AffinityMatrix { weights }
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights.get(i, j)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.weights.row(i).iter().sum()).collect()
    }

    /// Header-less CSV, n rows of n comma-separated decimals.
    pub fn to_csv(&self) -> String {
        self.weights.to_csv()
    }

    /// Edge list "i,j,weight", one line per nonzero entry, row-major order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n() {
            for j in 0..self.n() {
                let w = self.weights.get(i, j);
                if w != 0.0 {
                    out.push_str(&format!("{i},{j},{w}\n"));
                }
            }
        }
        out
    }
}

/// One row of the adaptive-graph solve.
#[derive(Debug, Clone)]
pub struct SparseRowSolution {
    /// Full-length weight row; zero outside `support` and at the diagonal.
    pub weights: Vec<f64>,
    /// Threshold used: the fixed shift in paper-literal mode, or minus the
    /// projection threshold in exact-simplex mode (so the two coincide when
    /// the active set matches the k nearest).
    pub eta: f64,
    /// Indices with strictly positive weight.
    pub support: Vec<usize>,
}

/// Result of one S-step: the assembled affinity matrix plus per-row details.
#[derive(Debug, Clone)]
pub struct SStepSolution {
    pub affinity: AffinityMatrix,
    pub rows: Vec<SparseRowSolution>,
}

/// Per-row fixed shift: `eta = 1/k + sum of the k smallest off-diagonal
/// distances of row i divided by (2 k gamma)`.
pub fn eta_paper(dist: &DistanceMatrix, i: usize, k: usize, gamma: f64) -> Result<f64> {
    let n = dist.n();
    if k < 1 || k > n - 1 {
        return Err(Error::Param(format!(
            "k must be in [1, {}], got {k}",
            n - 1
        )));
    }
    if gamma <= 0.0 {
        return Err(Error::Param(format!("gamma must be positive, got {gamma}")));
    }
    let mut sum = 0.0;
    for rank in 0..k {
        sum += dist.sorted_distance(i, rank);
    }
    let k_f = k as f64;
    Ok(1.0 / k_f + sum / (2.0 * k_f * gamma))
}

/// Euclidean projection of `v` onto the probability simplex by the
/// sort-and-threshold method. Returns the projection and the threshold tau,
/// with `s_j = max(v_j - tau, 0)`.
pub fn simplex_project(v: &[f64]) -> (Vec<f64>, f64) {
    debug_assert!(!v.is_empty());
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (j + 1) as f64;
        // Holds at j = 0 unconditionally, so tau is always assigned.
        if u - t > 0.0 {
            tau = t;
        }
    }
    let s = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    (s, tau)
}

/// Per-row gammas for a mode: the global value, or the per-row-k choice
/// `(k * d_(k+1) - sum of the k smallest) / 2` that concentrates mass on the
/// k nearest neighbors.
pub fn effective_gammas(
    dist: &DistanceMatrix,
    k: usize,
    gamma: f64,
    mode: GammaMode,
) -> Result<Vec<f64>> {
    let n = dist.n();
    match mode {
        GammaMode::Global => {
            if gamma <= 0.0 {
                return Err(Error::Param(format!("gamma must be positive, got {gamma}")));
            }
            Ok(vec![gamma; n])
        }
        GammaMode::PerRowK => {
            if k < 1 || k > n - 2 {
                return Err(Error::Param(format!(
                    "per-row-k gamma needs k in [1, {}], got {k}",
                    n - 2
                )));
            }
            let k_f = k as f64;
            let mut gammas = Vec::with_capacity(n);
            for i in 0..n {
                let mut sum = 0.0;
                for rank in 0..k {
                    sum += dist.sorted_distance(i, rank);
                }
                let g = (k_f * dist.sorted_distance(i, k) - sum) / 2.0;
                if g <= 0.0 {
                    return Err(Error::Param(format!(
                        "degenerate per-row gamma {g} at row {i}: the {} nearest neighbors are equidistant",
                        k + 1
                    )));
                }
                gammas.push(g);
            }
            Ok(gammas)
        }
    }
}

/// Data-scaled default for the global gamma: the median over rows of the
/// per-row-k choice `(k * d_(k+1) - sum of the k smallest) / 2`, falling
/// back to the mean positive value and then to 1 for degenerate geometries.
pub fn auto_gamma(dist: &DistanceMatrix, k: usize) -> Result<f64> {
    let n = dist.n();
    let k = k.min(n.saturating_sub(2)).max(1);
    if n < 3 {
        return Ok(1.0);
    }
    let k_f = k as f64;
    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            let mut sum = 0.0;
            for rank in 0..k {
                sum += dist.sorted_distance(i, rank);
            }
            (k_f * dist.sorted_distance(i, k) - sum) / 2.0
        })
        .collect();
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let median = values[n / 2];
    if median > 0.0 {
        return Ok(median);
    }
    let positives: Vec<f64> = values.into_iter().filter(|&v| v > 0.0).collect();
    if positives.is_empty() {
        return Ok(1.0);
    }
    Ok(positives.iter().sum::<f64>() / positives.len() as f64)
}

/// Candidate neighbor indices for row `i`: all off-diagonal indices, or in
/// per-row-k mode the k smallest costs (ties by index).
fn row_candidates(costs: &[f64], i: usize, k: usize, mode: GammaMode) -> Vec<usize> {
    let n = costs.len();
    let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    match mode {
        GammaMode::Global => idx,
        GammaMode::PerRowK => {
            idx.sort_unstable_by(|&a, &b| costs[a].total_cmp(&costs[b]).then_with(|| a.cmp(&b)));
            idx.truncate(k);
            idx.sort_unstable();
            idx
        }
    }
}

/// Solves one row: rescale the candidate costs by -1/(2 gamma) and threshold
/// per the rule. The diagonal entry is masked (never a candidate).
fn threshold_row(
    costs: &[f64],
    candidates: &[usize],
    gamma: f64,
    rule: ThresholdRule,
    eta_fixed: Option<f64>,
) -> SparseRowSolution {
    let n = costs.len();
    let two_gamma = 2.0 * gamma;
    let mut weights = vec![0.0; n];
    let mut support = Vec::new();
    let eta;
    match rule {
        ThresholdRule::PaperLiteral => {
            eta = eta_fixed.expect("paper-literal rule requires a precomputed eta");
            for &j in candidates {
                let v = -costs[j] / two_gamma;
                let s = (v + eta).max(0.0);
                if s > 0.0 {
                    weights[j] = s;
                    support.push(j);
                }
            }
        }
        ThresholdRule::ExactSimplex => {
            let v: Vec<f64> = candidates.iter().map(|&j| -costs[j] / two_gamma).collect();
            let (s, tau) = simplex_project(&v);
            eta = -tau;
            for (l, &j) in candidates.iter().enumerate() {
                if s[l] > 0.0 {
                    weights[j] = s[l];
                    support.push(j);
                }
            }
        }
    }
    SparseRowSolution {
        weights,
        eta,
        support,
    }
}

/// Cost matrix `D - beta * F F^T`; the multiply is skipped entirely when
/// beta is zero, so the beta = 0 path never depends on F.
fn build_costs(dist: &DistanceMatrix, f: &Matrix, beta: f64) -> Result<Matrix> {
    if beta == 0.0 {
        return Ok(dist.matrix().clone());
    }
    let gram = f.matmul(&f.transpose())?;
    let d = dist.matrix();
    Ok(Matrix::from_fn(dist.n(), dist.n(), |i, j| {
        d.get(i, j) - beta * gram.get(i, j)
    }))
}

fn paper_etas(
    dist: &DistanceMatrix,
    k: usize,
    gammas: &[f64],
    rule: ThresholdRule,
) -> Result<Option<Vec<f64>>> {
    match rule {
        ThresholdRule::PaperLiteral => {
            let mut etas = Vec::with_capacity(dist.n());
            for i in 0..dist.n() {
                etas.push(eta_paper(dist, i, k, gammas[i])?);
            }
            Ok(Some(etas))
        }
        ThresholdRule::ExactSimplex => Ok(None),
    }
}

/// One adaptive-graph step: per row i, costs `c_j = (D - beta F F^T)_ij`
/// with the diagonal masked, thresholded per the mode.
pub fn s_step(
    dist: &DistanceMatrix,
    f: &Matrix,
    params: &HyperParams,
    mode: GraphMode,
) -> Result<SStepSolution> {
    let n = dist.n();
    if f.rows() != n {
        return Err(Error::shape(
            "s_step",
            format!("{} distance rows", n),
            format!("{} feature rows", f.rows()),
        ));
    }
    if !f.is_finite() {
        return Err(Error::Data("non-finite feature entries in s_step".into()));
    }
    if params.beta < 0.0 {
        return Err(Error::Param(format!(
            "beta must be nonnegative, got {}",
            params.beta
        )));
    }
    let gammas = effective_gammas(dist, params.k, params.gamma, mode.gamma_mode)?;
    let etas = paper_etas(dist, params.k, &gammas, mode.rule)?;
    let costs = build_costs(dist, f, params.beta)?;
    let rows: Vec<SparseRowSolution> = (0..n)
        .map(|i| {
            let candidates = row_candidates(costs.row(i), i, params.k, mode.gamma_mode);
            threshold_row(
                costs.row(i),
                &candidates,
                gammas[i],
                mode.rule,
                etas.as_ref().map(|e| e[i]),
            )
        })
        .collect();
    Ok(assemble(rows))
}

fn assemble(rows: Vec<SparseRowSolution>) -> SStepSolution {
    let n = rows.len();
    let mut weights = Matrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for &j in &row.support {
            weights.set(i, j, row.weights[j]);
        }
    }
    SStepSolution {
        affinity: AffinityMatrix::from_matrix_unchecked(weights),
        rows,
    }
}

/// Records an S-step on the tape: thresholds the value of `costs_node` and
/// pushes a row-threshold node carrying the data the backward sweep needs.
pub fn record_s_step(
    tape: &mut Tape,
    costs_node: NodeId,
    k: usize,
    gammas: &[f64],
    mode: GraphMode,
    etas: Option<&[f64]>,
) -> (NodeId, SStepSolution) {
    let costs = tape.value(costs_node).clone();
    let n = costs.rows();
    let rows: Vec<SparseRowSolution> = (0..n)
        .map(|i| {
            let candidates = row_candidates(costs.row(i), i, k, mode.gamma_mode);
            threshold_row(
                costs.row(i),
                &candidates,
                gammas[i],
                mode.rule,
                etas.map(|e| e[i]),
            )
        })
        .collect();
    let solution = assemble(rows);
    let data = RowThresholdData {
        kind: match mode.rule {
            ThresholdRule::PaperLiteral => RowThresholdKind::FixedShift,
            ThresholdRule::ExactSimplex => RowThresholdKind::SimplexActiveSet,
        },
        two_gamma: gammas.iter().map(|g| 2.0 * g).collect(),
        shift: solution.rows.iter().map(|r| r.eta).collect(),
        support: solution.rows.iter().map(|r| r.support.clone()).collect(),
    };
    let node = tape.push_row_threshold(costs_node, solution.affinity.matrix().clone(), data);
    (node, solution)
}

/// Binary kNN adjacency row-normalized so each row sums to 1. Ties broken
/// by ascending index; the diagonal stays zero.
pub fn knn_graph(dist: &DistanceMatrix, k: usize) -> Result<AffinityMatrix> {
    let n = dist.n();
    if k < 1 || k > n - 1 {
        return Err(Error::Param(format!(
            "k must be in [1, {}], got {k}",
            n - 1
        )));
    }
    let mut weights = Matrix::zeros(n, n);
    let degree = k as f64;
    for i in 0..n {
        for &j in &dist.order(i)[..k] {
            weights.set(i, j, 1.0 / degree);
        }
    }
    Ok(AffinityMatrix::from_matrix_unchecked(weights))
}
