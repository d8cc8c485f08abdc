//! Feature propagation over fixed and learned neighborhood graphs.
//!
//! The fixed-graph path iterates `F <- alpha * A * F + (1 - alpha) * H`
//! toward the equilibrium `(1 - alpha) * (I - alpha A)^-1 * H`. The adaptive
//! path alternates the per-row graph solve with a one-step power iteration
//! `F = alpha * S * H + (1 - alpha) * H`; `anfp_exact` instead alternates
//! exact subproblem solves and records the joint objective so coordinate
//! descent monotonicity can be verified.

use crate::error::{Error, Result};
use crate::graphlearn::{
    effective_gammas, s_step, AffinityMatrix, DistanceMatrix, GraphMode, SStepSolution,
};
use crate::numkit::Matrix;

/// Whether training differentiates through the graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    /// Differentiate through all propagation iterations, including the
    /// dependence of the learned graph on the features.
    Unrolled,
    /// Treat the learned graph values from the forward pass as constants.
    FrozenGraph,
}

impl std::fmt::Display for GradMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradMode::Unrolled => write!(f, "unrolled"),
            GradMode::FrozenGraph => write!(f, "frozen-graph"),
        }
    }
}

impl std::str::FromStr for GradMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unrolled" => Ok(GradMode::Unrolled),
            "frozen-graph" => Ok(GradMode::FrozenGraph),
            other => Err(Error::Param(format!(
                "unknown grad mode '{other}' (expected unrolled or frozen-graph)"
            ))),
        }
    }
}

/// Propagation hyperparameters.
///
/// `alpha` is the neighbor fraction in (0, 1); `mu() = (1 - alpha) / alpha`
/// is the derived fidelity weight. `beta` couples the graph solve to the
/// current features, `gamma` controls graph sparsity, `k` is the neighbor
/// count and `t_steps` the number of alternations per layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: usize,
    pub t_steps: usize,
    pub mode: GraphMode,
    pub grad_mode: GradMode,
}

impl HyperParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        k: usize,
        t_steps: usize,
        mode: GraphMode,
        grad_mode: GradMode,
    ) -> Result<Self> {
        let p = HyperParams {
            alpha,
            beta,
            gamma,
            k,
            t_steps,
            mode,
            grad_mode,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Param(format!(
                "alpha must be strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        if self.beta < 0.0 {
            return Err(Error::Param(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        if self.gamma <= 0.0 {
            return Err(Error::Param(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.k < 1 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        if self.t_steps < 1 {
            return Err(Error::Param("t_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Fidelity weight mu = (1 - alpha) / alpha.
    pub fn mu(&self) -> f64 {
        (1.0 - self.alpha) / self.alpha
    }
}

/// `alpha * sh + (1 - alpha) * h`, entrywise. The single shared expression
/// for the one-step propagation update; the reference re-implementations in
/// tests must reproduce it bit for bit.
pub(crate) fn power_step(sh: &Matrix, h: &Matrix, alpha: f64) -> Matrix {
    let one_minus = 1.0 - alpha;
    Matrix::from_fn(h.rows(), h.cols(), |i, j| {
        alpha * sh.get(i, j) + one_minus * h.get(i, j)
    })
}

fn check_stochastic(a: &AffinityMatrix) -> Result<()> {
    for (i, sum) in a.row_sums().iter().enumerate() {
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Graph(format!(
                "row {i} sums to {sum}, expected 1 within 1e-6"
            )));
        }
    }
    Ok(())
}

fn check_alpha_iterate(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Param(format!(
            "alpha must be in [0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Iterated propagation `F^(t+1) = alpha A F^(t) + (1 - alpha) H` from
/// `F^(0) = H`, applied `steps` times.
pub fn nfp_iterate(a: &AffinityMatrix, h: &Matrix, alpha: f64, steps: usize) -> Result<Matrix> {
    check_alpha_iterate(alpha)?;
    check_stochastic(a)?;
    if a.n() != h.rows() {
        return Err(Error::shape("nfp_iterate", a.n(), h.rows()));
    }
    let mut f = h.clone();
    for _ in 0..steps {
        let af = a.matrix().matmul(&f)?;
        f = power_step(&af, h, alpha);
    }
    Ok(f)
}

/// Equilibrium `F* = (1 - alpha)(I - alpha A)^-1 H` via a dense LU solve.
pub fn nfp_closed_form(a: &AffinityMatrix, h: &Matrix, alpha: f64) -> Result<Matrix> {
    check_alpha_iterate(alpha)?;
    check_stochastic(a)?;
    if a.n() != h.rows() {
        return Err(Error::shape("nfp_closed_form", a.n(), h.rows()));
    }
    let n = a.n();
    let system = Matrix::from_fn(n, n, |i, j| {
        let base = if i == j { 1.0 } else { 0.0 };
        base - alpha * a.get(i, j)
    });
    let rhs = h.scale(1.0 - alpha);
    system.solve(&rhs)
}

/// Joint objective
/// `sum_ij D_ij S_ij + sum_i gamma_i ||S_i||^2 + beta tr(F^T (I - S) F)
///  + mu ||F - H||_F^2` with `mu = (1 - alpha) / alpha`.
pub fn anfp_objective(
    s: &AffinityMatrix,
    f: &Matrix,
    dist: &DistanceMatrix,
    h: &Matrix,
    p: &HyperParams,
) -> Result<f64> {
    let n = dist.n();
    if s.n() != n || f.rows() != n || h.rows() != n || f.cols() != h.cols() {
        return Err(Error::shape(
            "anfp_objective",
            format!("dist n={n}, S n={}", s.n()),
            format!("F {}x{}, H {}x{}", f.rows(), f.cols(), h.rows(), h.cols()),
        ));
    }
    let gammas = effective_gammas(dist, p.k, p.gamma, p.mode.gamma_mode)?;
    let d = dist.matrix();

    let mut fit = 0.0;
    let mut reg = 0.0;
    for i in 0..n {
        let mut row_sq = 0.0;
        for j in 0..n {
            let sij = s.get(i, j);
            fit += d.get(i, j) * sij;
            row_sq += sij * sij;
        }
        reg += gammas[i] * row_sq;
    }

    // tr(F^T (I - S) F) = ||F||_F^2 - sum_ij S_ij (F F^T)_ij
    let gram = f.matmul(&f.transpose())?;
    let mut coupled = 0.0;
    for i in 0..n {
        for j in 0..n {
            coupled += s.get(i, j) * gram.get(i, j);
        }
    }
    let trace_term = f.frobenius_norm().powi(2) - coupled;

    let mut fidelity = 0.0;
    for i in 0..n {
        for (a, b) in f.row(i).iter().zip(h.row(i)) {
            let diff = a - b;
            fidelity += diff * diff;
        }
    }

    Ok(fit + reg + p.beta * trace_term + p.mu() * fidelity)
}

/// Adaptive propagation: starting at `F = H`, alternate the graph solve
/// with the one-step power iteration `F = alpha S H + (1 - alpha) H` for
/// `t_steps` rounds. Returns the final features and the last graph.
pub fn anfp_propagate(
    dist: &DistanceMatrix,
    h: &Matrix,
    p: &HyperParams,
) -> Result<(Matrix, SStepSolution)> {
    if p.t_steps < 1 {
        return Err(Error::Param("t_steps must be at least 1".into()));
    }
    let mut f = h.clone();
    let mut last = None;
    for _ in 0..p.t_steps {
        let sol = s_step(dist, &f, p, p.mode)?;
        let sh = sol.affinity.matrix().matmul(h)?;
        f = power_step(&sh, h, p.alpha);
        last = Some(sol);
    }
    Ok((f, last.expect("t_steps >= 1")))
}

/// Fixed-graph propagation: the graph is built once from distances alone
/// (beta = 0, so it never adapts to the features) and applied in a single
/// power step.
pub fn ngpn_propagate(
    dist: &DistanceMatrix,
    h: &Matrix,
    p: &HyperParams,
) -> Result<(Matrix, SStepSolution)> {
    let fixed = HyperParams { beta: 0.0, ..*p };
    let sol = s_step(dist, h, &fixed, p.mode)?;
    let sh = sol.affinity.matrix().matmul(h)?;
    let f = power_step(&sh, h, p.alpha);
    Ok((f, sol))
}

/// Output of [`anfp_exact`].
pub struct ExactOutcome {
    pub features: Matrix,
    pub solution: SStepSolution,
    /// Joint objective recorded after every half-step (graph solve, then
    /// feature solve), `2 * sweeps` entries.
    pub trace: Vec<f64>,
}

/// Exact alternating minimization of the joint objective: per sweep, the
/// exact-simplex graph solve, then the exact feature solve
/// `(mu I + beta (I - (S + S^T)/2)) F = mu H`. Each half-step solves its
/// subproblem exactly, so the recorded objective is non-increasing.
pub fn anfp_exact(
    dist: &DistanceMatrix,
    h: &Matrix,
    p: &HyperParams,
    sweeps: usize,
) -> Result<ExactOutcome> {
    if sweeps < 1 {
        return Err(Error::Param("sweeps must be at least 1".into()));
    }
    let mode = GraphMode {
        rule: crate::graphlearn::ThresholdRule::ExactSimplex,
        gamma_mode: p.mode.gamma_mode,
    };
    let mut f = h.clone();
    let mut trace = Vec::with_capacity(2 * sweeps);
    let mut last = None;
    for _ in 0..sweeps {
        let sol = s_step(dist, &f, p, mode)?;
        trace.push(anfp_objective(&sol.affinity, &f, dist, h, p)?);
        f = exact_feature_step(&sol.affinity, h, p)?;
        trace.push(anfp_objective(&sol.affinity, &f, dist, h, p)?);
        last = Some(sol);
    }
    Ok(ExactOutcome {
        features: f,
        solution: last.expect("sweeps >= 1"),
        trace,
    })
}

/// Exact minimizer over F of `beta tr(F^T (I - S) F) + mu ||F - H||_F^2`.
/// The objective only sees the symmetric part of S, so the normal equations
/// use `(S + S^T) / 2`; the system is strictly diagonally dominant for
/// mu > 0 and hence nonsingular.
fn exact_feature_step(s: &AffinityMatrix, h: &Matrix, p: &HyperParams) -> Result<Matrix> {
    let n = s.n();
    let mu = p.mu();
    let system = Matrix::from_fn(n, n, |i, j| {
        let sym = (s.get(i, j) + s.get(j, i)) / 2.0;
        let diag = if i == j { mu + p.beta } else { 0.0 };
        diag - p.beta * sym
    });
    let rhs = h.scale(mu);
    system.solve(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphlearn::pairwise_euclidean;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn swap_graph() -> AffinityMatrix {
        AffinityMatrix::from_matrix(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap()
    }

    fn random_stochastic(n: usize, rng: &mut ChaCha8Rng) -> AffinityMatrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if i != j {
                    let v: f64 = rng.gen_range(0.01..1.0);
                    m.set(i, j, v);
                    sum += v;
                }
            }
            for j in 0..n {
                m.set(i, j, m.get(i, j) / sum);
            }
        }
        AffinityMatrix::from_matrix(m).unwrap()
    }

    fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn default_params() -> HyperParams {
        HyperParams::new(
            0.5,
            0.3,
            1.0,
            2,
            2,
            GraphMode::default(),
            GradMode::Unrolled,
        )
        .unwrap()
    }

    #[test]
    fn iterate_alpha_zero_returns_input() {
        let a = swap_graph();
        let h = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let f = nfp_iterate(&a, &h, 0.0, 7).unwrap();
        assert_eq!(f, h);
    }

    #[test]
    fn iterate_zero_steps_returns_input() {
        let a = swap_graph();
        let h = Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let f = nfp_iterate(&a, &h, 0.5, 0).unwrap();
        assert_eq!(f, h);
    }

    #[test]
    fn iterate_converges_to_two_thirds() {
        let a = swap_graph();
        let h = Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let f = nfp_iterate(&a, &h, 0.5, 50).unwrap();
        assert!((f.get(0, 0) - 2.0 / 3.0).abs() <= 1e-10);
        assert!((f.get(1, 0) - 1.0 / 3.0).abs() <= 1e-10);
    }

    #[test]
    fn closed_form_matches_hand_solve() {
        let a = swap_graph();
        let h = Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let f = nfp_closed_form(&a, &h, 0.5).unwrap();
        assert!((f.get(0, 0) - 2.0 / 3.0).abs() <= 1e-12);
        assert!((f.get(1, 0) - 1.0 / 3.0).abs() <= 1e-12);

        let id = nfp_closed_form(&a, &h, 0.0).unwrap();
        assert!((id.get(0, 0) - 1.0).abs() <= 1e-15);
        assert!((id.get(1, 0) - 0.0).abs() <= 1e-15);
    }

    #[test]
    fn closed_form_satisfies_fixed_point_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let a = random_stochastic(8, &mut rng);
            let h = random_matrix(8, 3, &mut rng);
            let alpha = rng.gen_range(0.1..0.9);
            let f = nfp_closed_form(&a, &h, alpha).unwrap();
            let af = a.matrix().matmul(&f).unwrap();
            let recomposed = power_step(&af, &h, alpha);
            let residual = f.sub(&recomposed).unwrap().max_abs();
            assert!(residual <= 1e-10, "residual {residual}");
        }
    }

    #[test]
    fn iterate_rejects_non_stochastic_rows() {
        let bad = AffinityMatrix::from_matrix(
            Matrix::from_rows(&[vec![0.0, 0.5], vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let h = Matrix::zeros(2, 1);
        assert!(matches!(
            nfp_iterate(&bad, &h, 0.5, 1),
            Err(Error::Graph(_))
        ));
    }

    #[test]
    fn geometric_convergence_in_operator_norm() {
        // ||F^(t) - F*|| <= alpha^t ||F^(0) - F*|| in the induced inf-norm,
        // where row-stochastic A is non-expansive.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let n = rng.gen_range(3..20);
            let a = random_stochastic(n, &mut rng);
            let h = random_matrix(n, 4, &mut rng);
            let alpha: f64 = rng.gen_range(0.2..0.9);
            let fstar = nfp_closed_form(&a, &h, alpha).unwrap();
            let base = h.sub(&fstar).unwrap().inf_norm();
            for t in [1usize, 5, 20] {
                let ft = nfp_iterate(&a, &h, alpha, t).unwrap();
                let gap = ft.sub(&fstar).unwrap().inf_norm();
                let bound = alpha.powi(t as i32) * base;
                assert!(
                    gap <= bound * (1.0 + 1e-9) + 1e-12,
                    "t={t}: {gap} > {bound}"
                );
            }
        }
    }

    #[test]
    fn variational_residual_vanishes_at_equilibrium() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_stochastic(10, &mut rng);
        let h = random_matrix(10, 2, &mut rng);
        let alpha = 0.6;
        let f = nfp_closed_form(&a, &h, alpha).unwrap();
        // (I - alpha A) F - (1 - alpha) H = 0
        let af = a.matrix().matmul(&f).unwrap();
        let lhs = f.sub(&af.scale(alpha)).unwrap();
        let rhs = h.scale(1.0 - alpha);
        assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-10);

        // On a symmetric row-stochastic graph the objective gradient
        // 2 (I - A) F + 2 mu (F - H) also vanishes.
        let ring = AffinityMatrix::from_matrix(Matrix::from_fn(6, 6, |i, j| {
            if (i + 1) % 6 == j || (j + 1) % 6 == i {
                0.5
            } else {
                0.0
            }
        }))
        .unwrap();
        let h = random_matrix(6, 3, &mut rng);
        let f = nfp_closed_form(&ring, &h, alpha).unwrap();
        let mu = (1.0 - alpha) / alpha;
        let af = ring.matrix().matmul(&f).unwrap();
        let grad = f
            .sub(&af)
            .unwrap()
            .scale(2.0)
            .add(&f.sub(&h).unwrap().scale(2.0 * mu))
            .unwrap();
        assert!(grad.max_abs() <= 1e-10, "gradient {}", grad.max_abs());
    }

    #[test]
    fn objective_zero_graph_reduces_to_beta_energy() {
        let x = Matrix::from_fn(4, 2, |i, j| (i + j) as f64 * 0.5);
        let dist = pairwise_euclidean(&x).unwrap();
        let s = AffinityMatrix::from_matrix(Matrix::zeros(4, 4)).unwrap();
        let p = default_params();
        let obj = anfp_objective(&s, &x, &dist, &x, &p).unwrap();
        let expect = p.beta * x.frobenius_norm().powi(2);
        assert!((obj - expect).abs() <= 1e-12, "{obj} vs {expect}");
    }

    #[test]
    fn objective_beta_zero_decouples() {
        let x = Matrix::from_fn(4, 2, |i, j| ((i * 2 + j) % 5) as f64 * 0.7);
        let dist = pairwise_euclidean(&x).unwrap();
        let p = HyperParams {
            beta: 0.0,
            ..default_params()
        };
        let sol = s_step(&dist, &x, &p, p.mode).unwrap();
        let obj = anfp_objective(&sol.affinity, &x, &dist, &x, &p).unwrap();
        let mut expect = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let sij = sol.affinity.get(i, j);
                expect += dist.get(i, j) * sij + p.gamma * sij * sij;
            }
        }
        assert!((obj - expect).abs() <= 1e-12);
    }

    #[test]
    fn objective_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = random_matrix(6, 3, &mut rng);
        let dist = pairwise_euclidean(&x).unwrap();
        let p = default_params();
        let sol = s_step(&dist, &x, &p, p.mode).unwrap();
        let f = random_matrix(6, 3, &mut rng);
        let obj = anfp_objective(&sol.affinity, &f, &dist, &x, &p).unwrap();
        let expect = crate::oracles::objective_oracle(
            sol.affinity.matrix(),
            &f,
            dist.matrix(),
            &x,
            p.beta,
            p.gamma,
            p.mu(),
        );
        assert!((obj - expect).abs() <= 1e-10, "{obj} vs {expect}");
    }

    #[test]
    fn propagate_alpha_zero_returns_input() {
        let x = Matrix::from_fn(5, 2, |i, j| (i as f64) * 0.3 + j as f64);
        let dist = pairwise_euclidean(&x).unwrap();
        let p = HyperParams {
            alpha: 0.0,
            ..default_params()
        };
        let (f, _) = anfp_propagate(&dist, &x, &p).unwrap();
        assert_eq!(f, x);
    }

    #[test]
    fn propagate_beta_zero_ignores_step_count() {
        let x = Matrix::from_fn(6, 2, |i, j| ((i * 3 + j) % 7) as f64 * 0.4);
        let dist = pairwise_euclidean(&x).unwrap();
        let base = HyperParams {
            beta: 0.0,
            ..default_params()
        };
        let one = HyperParams { t_steps: 1, ..base };
        let five = HyperParams { t_steps: 5, ..base };
        let (f1, s1) = anfp_propagate(&dist, &x, &one).unwrap();
        let (f5, s5) = anfp_propagate(&dist, &x, &five).unwrap();
        assert_eq!(f1, f5);
        assert_eq!(s1.affinity.matrix(), s5.affinity.matrix());
    }

    #[test]
    fn ngpn_equals_angpn_at_beta_zero_bitwise() {
        let x = Matrix::from_fn(7, 3, |i, j| ((i * 5 + 2 * j) % 9) as f64 * 0.31 - 1.0);
        let dist = pairwise_euclidean(&x).unwrap();
        let p = HyperParams {
            beta: 0.0,
            ..default_params()
        };
        let (fa, _) = anfp_propagate(&dist, &x, &p).unwrap();
        let (fn_, _) = ngpn_propagate(&dist, &x, &p).unwrap();
        assert_eq!(fa, fn_);
    }

    #[test]
    fn exact_trace_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let x = random_matrix(6, 2, &mut rng);
            let dist = pairwise_euclidean(&x).unwrap();
            let p = HyperParams {
                beta: rng.gen_range(0.1..1.0),
                gamma: rng.gen_range(0.3..2.0),
                ..default_params()
            };
            let out = anfp_exact(&dist, &x, &p, 10).unwrap();
            for w in out.trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-10,
                    "objective increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn exact_beta_zero_converges_first_sweep() {
        let x = Matrix::from_fn(5, 2, |i, j| ((i + 2 * j) % 4) as f64 * 0.8);
        let dist = pairwise_euclidean(&x).unwrap();
        let p = HyperParams {
            beta: 0.0,
            ..default_params()
        };
        let out = anfp_exact(&dist, &x, &p, 4).unwrap();
        // With beta = 0 the feature solve returns H and the graph never
        // changes, so all objective values after the first half-step agree.
        for w in out.trace.windows(2) {
            assert!((w[0] - w[1]).abs() <= 1e-12);
        }
        assert_eq!(out.features, x);
    }

    #[test]
    fn exact_beats_approximate_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let x = random_matrix(6, 2, &mut rng);
        let dist = pairwise_euclidean(&x).unwrap();
        let p = default_params();
        let exact = anfp_exact(&dist, &x, &p, 10).unwrap();
        let (f_approx, s_approx) = anfp_propagate(&dist, &x, &p).unwrap();
        let approx_obj = anfp_objective(&s_approx.affinity, &f_approx, &dist, &x, &p).unwrap();
        let exact_obj = *exact.trace.last().unwrap();
        assert!(
            exact_obj <= approx_obj + 1e-10,
            "exact {exact_obj} vs approximate {approx_obj}"
        );
    }

    #[test]
    fn hyperparams_validation() {
        assert!(HyperParams::new(0.0, 0.3, 1.0, 2, 2, GraphMode::default(), GradMode::Unrolled).is_err());
        assert!(HyperParams::new(1.0, 0.3, 1.0, 2, 2, GraphMode::default(), GradMode::Unrolled).is_err());
        assert!(HyperParams::new(0.5, -0.1, 1.0, 2, 2, GraphMode::default(), GradMode::Unrolled).is_err());
        assert!(HyperParams::new(0.5, 0.3, 0.0, 2, 2, GraphMode::default(), GradMode::Unrolled).is_err());
        assert!(HyperParams::new(0.5, 0.3, 1.0, 2, 0, GraphMode::default(), GradMode::Unrolled).is_err());
        let p = HyperParams::new(0.5, 0.3, 1.0, 2, 2, GraphMode::default(), GradMode::Unrolled).unwrap();
        assert!((p.mu() - 1.0).abs() < 1e-15);
    }
}
