//! Independent brute-force reference implementations used by tests.
//!
//! Everything here is deliberately slow and simple: scalar loops, textbook
//! algorithms, no code shared with the fast paths being checked. The
//! propagation reference transcribes the exact same arithmetic expressions
//! step by step so the fast path can be compared bit for bit.

use crate::error::{Error, Result};
use crate::graphlearn::{AffinityMatrix, GammaMode, ThresholdRule};
use crate::numkit::Matrix;
use crate::propagation::HyperParams;

/// Plain per-pair Euclidean norm.
pub fn euclidean_distance_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// Naive triple-loop matrix multiplication.
pub fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = 0.0;
            for k in 0..a.cols() {
                acc += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    out
}

/// Per-parameter gradient comparison report.
#[derive(Debug, Clone)]
pub struct ParamReport {
    pub param_index: usize,
    pub max_rel_error: f64,
    /// Entry where the worst relative error occurred.
    pub worst_entry: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Result of comparing analytic against numeric gradients.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub params: Vec<ParamReport>,
    pub max_rel_error: f64,
}

impl GradReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

impl std::fmt::Display for GradReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.params {
            writeln!(
                f,
                "param {}: max rel error {:.3e} at ({}, {}) analytic {:.9e} numeric {:.9e}",
                p.param_index, p.max_rel_error, p.worst_entry.0, p.worst_entry.1, p.analytic, p.numeric
            )?;
        }
        write!(f, "overall max rel error {:.3e}", self.max_rel_error)
    }
}

/// Relative error |a - n| / max(|a|, |n|, 1e-8).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients against numeric ones entry by entry.
pub fn compare_gradients(analytic: &[Matrix], numeric: &[Matrix]) -> GradReport {
    let mut params = Vec::with_capacity(analytic.len());
    let mut overall = 0.0f64;
    for (idx, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        assert_eq!(a.shape(), n.shape(), "gradient shapes must match");
        let mut report = ParamReport {
            param_index: idx,
            max_rel_error: 0.0,
            worst_entry: (0, 0),
            analytic: a.get(0, 0),
            numeric: n.get(0, 0),
        };
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let err = relative_error(a.get(i, j), n.get(i, j));
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst_entry = (i, j);
                    report.analytic = a.get(i, j);
                    report.numeric = n.get(i, j);
                }
            }
        }
        overall = overall.max(report.max_rel_error);
        params.push(report);
    }
    GradReport {
        params,
        max_rel_error: overall,
    }
}

/// Central finite differences of `loss` with respect to every entry of every
/// parameter: `(L(p + s) - L(p - s)) / (2 s)`.
pub fn fd_gradient<F>(mut loss: F, params: &[Matrix], step: f64) -> Result<Vec<Matrix>>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    if step <= 0.0 {
        return Err(Error::Param(format!("fd step must be positive, got {step}")));
    }
    let mut grads = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut g = Matrix::zeros(params[p].rows(), params[p].cols());
        for i in 0..params[p].rows() {
            for j in 0..params[p].cols() {
                let mut plus = params.to_vec();
                plus[p].set(i, j, params[p].get(i, j) + step);
                let lp = loss(&plus)?;
                let mut minus = params.to_vec();
                minus[p].set(i, j, params[p].get(i, j) - step);
                let lm = loss(&minus)?;
                if !lp.is_finite() || !lm.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss during finite differences at param {p} entry ({i}, {j})"
                    )));
                }
                g.set(i, j, (lp - lm) / (2.0 * step));
            }
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Exact minimizer of `sum_j c_j s_j + gamma sum_j s_j^2` over the
/// probability simplex, by enumerating every nonempty active set and
/// checking the KKT conditions. Exponential: inputs of length <= 16 only.
pub fn simplex_qp_oracle(costs: &[f64], gamma: f64) -> Vec<f64> {
    let m = costs.len();
    assert!(m >= 1 && m <= 16, "KKT enumeration supports 1..=16 costs");
    assert!(gamma > 0.0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let sum_c: f64 = active.iter().map(|&j| costs[j]).sum();
        let eta_tilde = (2.0 * gamma + sum_c) / active.len() as f64;
        let mut s = vec![0.0; m];
        let mut feasible = true;
        for &j in &active {
            let v = (eta_tilde - costs[j]) / (2.0 * gamma);
            if v < -1e-12 {
                feasible = false;
                break;
            }
            s[j] = v.max(0.0);
        }
        if !feasible {
            continue;
        }
        // Dual feasibility for inactive coordinates: c_j >= eta_tilde.
        for j in 0..m {
            if mask & (1 << j) == 0 && costs[j] < eta_tilde - 1e-12 {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let objective: f64 = s
            .iter()
            .enumerate()
            .map(|(j, &v)| costs[j] * v + gamma * v * v)
            .sum();
        if best.as_ref().map_or(true, |(b, _)| objective < *b) {
            best = Some((objective, s));
        }
    }
    best.expect("at least one active set satisfies KKT").1
}

/// Scalar-loop objective evaluation: distance fit + sparsity + coupled trace
/// + fidelity, each written as explicit sums.
pub fn objective_oracle(
    s: &Matrix,
    f: &Matrix,
    d: &Matrix,
    h: &Matrix,
    beta: f64,
    gamma: f64,
    mu: f64,
) -> f64 {
    let n = d.rows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += d.get(i, j) * s.get(i, j) + gamma * s.get(i, j) * s.get(i, j);
        }
    }
    // tr(F^T (I - S) F) = sum_ij (I - S)_ij <f_i, f_j>
    for i in 0..n {
        for j in 0..n {
            let m = if i == j { 1.0 } else { 0.0 } - s.get(i, j);
            let mut dot = 0.0;
            for a in 0..f.cols() {
                dot += f.get(i, a) * f.get(j, a);
            }
            total += beta * m * dot;
        }
    }
    for i in 0..n {
        for a in 0..f.cols() {
            let diff = f.get(i, a) - h.get(i, a);
            total += mu * diff * diff;
        }
    }
    total
}

/// Textbook Gaussian elimination without pivoting, solving
/// `(I - alpha S) F = (1 - alpha) H`.
pub fn dense_fixed_point_oracle(s: &AffinityMatrix, h: &Matrix, alpha: f64) -> Matrix {
    let n = s.n();
    let cols = h.cols();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![vec![0.0; cols]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = if i == j { 1.0 } else { 0.0 } - alpha * s.get(i, j);
        }
        for c in 0..cols {
            b[i][c] = (1.0 - alpha) * h.get(i, c);
        }
    }
    for col in 0..n {
        let pivot = a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / pivot;
            for j in col..n {
                a[row][j] -= factor * a[col][j];
            }
            for c in 0..cols {
                b[row][c] -= factor * b[col][c];
            }
        }
    }
    let mut out = Matrix::zeros(n, cols);
    for c in 0..cols {
        for row in (0..n).rev() {
            let mut v = b[row][c];
            for j in row + 1..n {
                v -= a[row][j] * out.get(j, c);
            }
            out.set(row, c, v / a[row][row]);
        }
    }
    out
}

/// Closed-form label propagation on a fixed graph: diffuse the one-hot
/// training labels to equilibrium and predict by row argmax. Used to justify
/// accuracy thresholds on synthetic data.
pub fn label_propagation_oracle(
    a: &AffinityMatrix,
    labels: &[usize],
    train_idx: &[usize],
    class_count: usize,
    alpha: f64,
) -> Vec<usize> {
    let n = a.n();
    let mut y0 = Matrix::zeros(n, class_count);
    for &i in train_idx {
        y0.set(i, labels[i], 1.0);
    }
    let diffused = dense_fixed_point_oracle(a, &y0, alpha);
    (0..n)
        .map(|i| {
            let mut best = 0;
            for c in 1..class_count {
                if diffused.get(i, c) > diffused.get(i, best) {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Scalar reference implementation of bias-corrected Adam over flat slices.
pub struct ScalarAdamOracle {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl ScalarAdamOracle {
    pub fn new(len: usize) -> Self {
        ScalarAdamOracle {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) {
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grads[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Step-by-step re-execution of the adaptive propagation layer with its own
/// scalar-loop graph solve. Written independently of the fast path but using
/// the same arithmetic expressions, so outputs match bit for bit.
pub fn propagate_reference(d: &Matrix, h: &Matrix, p: &HyperParams) -> (Matrix, Matrix) {
    let n = d.rows();
    let dim = h.cols();

    // Per-row ascending off-diagonal distance order, ties by index.
    let mut dist_order: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        idx.sort_unstable_by(|&x, &y| d.get(i, x).total_cmp(&d.get(i, y)).then_with(|| x.cmp(&y)));
        dist_order.push(idx);
    }

    // Per-row gamma.
    let gammas: Vec<f64> = match p.mode.gamma_mode {
        GammaMode::Global => vec![p.gamma; n],
        GammaMode::PerRowK => {
            let k_f = p.k as f64;
            (0..n)
                .map(|i| {
                    let mut sum = 0.0;
                    for r in 0..p.k {
                        sum += d.get(i, dist_order[i][r]);
                    }
                    (k_f * d.get(i, dist_order[i][p.k]) - sum) / 2.0
                })
                .collect()
        }
    };

    // Fixed shifts from the k smallest distances (paper-literal rule only).
    let etas: Vec<f64> = (0..n)
        .map(|i| {
            let k_f = p.k as f64;
            let mut sum = 0.0;
            for r in 0..p.k {
                sum += d.get(i, dist_order[i][r]);
            }
            1.0 / k_f + sum / (2.0 * k_f * gammas[i])
        })
        .collect();

    let mut f: Vec<Vec<f64>> = (0..n).map(|i| h.row(i).to_vec()).collect();
    let mut s = vec![vec![0.0; n]; n];

    for _ in 0..p.t_steps {
        // Graph solve, row by row.
        for i in 0..n {
            // Costs with the diagonal masked by exclusion.
            let mut costs = vec![0.0; n];
            for j in 0..n {
                if j == i {
                    continue;
                }
                if p.beta == 0.0 {
                    costs[j] = d.get(i, j);
                } else {
                    let mut dot = 0.0;
                    for a in 0..dim {
                        dot += f[i][a] * f[j][a];
                    }
                    costs[j] = d.get(i, j) - p.beta * dot;
                }
            }
            let candidates: Vec<usize> = match p.mode.gamma_mode {
                GammaMode::Global => (0..n).filter(|&j| j != i).collect(),
                GammaMode::PerRowK => {
                    let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                    idx.sort_unstable_by(|&x, &y| costs[x].total_cmp(&costs[y]).then_with(|| x.cmp(&y)));
                    idx.truncate(p.k);
                    idx.sort_unstable();
                    idx
                }
            };
            let two_gamma = 2.0 * gammas[i];
            for row in s[i].iter_mut() {
                *row = 0.0;
            }
            match p.mode.rule {
                ThresholdRule::PaperLiteral => {
                    for &j in &candidates {
                        let v = -costs[j] / two_gamma;
                        let val = v + etas[i];
                        if val > 0.0 {
                            s[i][j] = val;
                        }
                    }
                }
                ThresholdRule::ExactSimplex => {
                    let v: Vec<f64> = candidates.iter().map(|&j| -costs[j] / two_gamma).collect();
                    // Sort-and-threshold projection, own transcription.
                    let mut u = v.clone();
                    u.sort_unstable_by(|a, b| b.total_cmp(a));
                    let mut cum = 0.0;
                    let mut tau = 0.0;
                    for (rank, &uj) in u.iter().enumerate() {
                        cum += uj;
                        let t = (cum - 1.0) / (rank + 1) as f64;
                        if uj - t > 0.0 {
                            tau = t;
                        }
                    }
                    for (l, &j) in candidates.iter().enumerate() {
                        let val = v[l] - tau;
                        if val > 0.0 {
                            s[i][j] = val;
                        }
                    }
                }
            }
        }

        // One-step power iteration against the layer input.
        let one_minus = 1.0 - p.alpha;
        let mut next = vec![vec![0.0; dim]; n];
        for i in 0..n {
            for c in 0..dim {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += s[i][l] * h.get(l, c);
                }
                next[i][c] = p.alpha * acc + one_minus * h.get(i, c);
            }
        }
        f = next;
    }

    let f_mat = Matrix::from_fn(n, dim, |i, j| f[i][j]);
    let s_mat = Matrix::from_fn(n, n, |i, j| s[i][j]);
    (f_mat, s_mat)
}
