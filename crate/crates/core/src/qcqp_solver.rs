//! Keep-ratio solver: maximize `i . alpha` subject to `a^T T a <= budget`
//! (with `a = (1, alpha)`) and `alpha_min <= alpha <= 1`.
//!
//! The cost `a^T T a` is generally not convex (a conv between two pruned
//! groups contributes a bilinear `alpha_in * alpha_out` term), so the solver
//! works on a sequence of convex majorants
//!
//! ```text
//! s_k(alpha) = a^T T a + gamma |alpha - alpha_k|^2
//! ```
//!
//! where `gamma` is a Gershgorin bound that makes `T_GG + gamma I` positive
//! semidefinite. `s_k` touches the cost at the current iterate, so every
//! subproblem solution is feasible for the original constraint and never
//! decreases the objective. Each subproblem has one quadratic constraint
//! plus box bounds, so it is solved through its 1-D dual: bisection on the
//! multiplier `lambda`, with the box-constrained Lagrangian maximizer found
//! by cyclic coordinate ascent (closed-form clipped updates). Once the
//! active bounds settle, a Newton step on the reduced KKT system polishes the
//! point to full precision.
//!
//! Small problems are started from several deterministic feasible points and
//! the best stationary point wins.

use ndarray::Array2;
use thiserror::Error;

use crate::net_model::ConstraintForm;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("budget {budget} does not exceed the cost {floor_cost} of the alpha_min floor")]
    InfeasibleBudget { budget: f64, floor_cost: f64 },
    #[error("expected {expected} importance entries, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub constraint_value: f64,
    /// Multiplier of the resource constraint.
    pub multiplier: f64,
    pub kkt_residual: f64,
    /// Coordinate-ascent sweeps spent across all starts.
    pub iterations: usize,
    pub status: SolverStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative width at which multiplier bisection stops.
    pub lambda_rel_tol: f64,
    /// Coordinate ascent stops when no coordinate moves more than this.
    pub sweep_tol: f64,
    /// Sweep budget per start.
    pub max_sweeps: usize,
    /// KKT tolerance relative to `|importance|_2`.
    pub kkt_rel_tol: f64,
    /// Problems with at most this many groups get extra starting points.
    pub multistart_max_groups: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            lambda_rel_tol: 1e-10,
            sweep_tol: 1e-10,
            max_sweeps: 100_000,
            kkt_rel_tol: 1e-6,
            multistart_max_groups: 12,
        }
    }
}

pub fn solve(
    importance: &[f64],
    form: &ConstraintForm,
    budget: f64,
    alpha_min: f64,
) -> Result<SolverResult, SolverError> {
    solve_with(importance, form, budget, alpha_min, &SolverOptions::default())
}

pub fn solve_with(
    importance: &[f64],
    form: &ConstraintForm,
    budget: f64,
    alpha_min: f64,
    opts: &SolverOptions,
) -> Result<SolverResult, SolverError> {
    let g = form.num_groups();
    if importance.len() != g {
        return Err(SolverError::DimensionMismatch {
            expected: g,
            found: importance.len(),
        });
    }
    if importance.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(SolverError::InvalidInput(
            "importance entries must be finite and >= 0".into(),
        ));
    }
    if !(alpha_min > 0.0 && alpha_min < 1.0) {
        return Err(SolverError::InvalidInput(format!(
            "alpha_min must lie in (0, 1), got {alpha_min}"
        )));
    }
    if !budget.is_finite() {
        return Err(SolverError::InvalidInput("budget must be finite".into()));
    }
    let problem = Problem::new(importance, form, budget, alpha_min, opts);

    let ones = vec![1.0; g];
    let full = problem.cost(&ones);
    if budget >= full {
        return Ok(problem.finish(ones, 0.0, 0, SolverStatus::Optimal));
    }
    let floor = problem.cost(&vec![alpha_min; g]);
    if budget <= floor {
        return Err(SolverError::InfeasibleBudget {
            budget,
            floor_cost: floor,
        });
    }

    let mut best: Option<SolverResult> = None;
    let mut sweeps = 0;
    for start in problem.starts() {
        let local = problem.local_solve(start);
        sweeps += local.iterations;
        let better = match &best {
            None => true,
            Some(b) => {
                let margin = 1e-12 * problem.scale;
                match (local.status, b.status) {
                    (SolverStatus::Optimal, SolverStatus::MaxIter) => true,
                    (SolverStatus::MaxIter, SolverStatus::Optimal) => false,
                    _ => local.objective > b.objective + margin,
                }
            }
        };
        if better {
            best = Some(local);
        }
    }
    let mut best = best.expect("at least one start");
    best.iterations = sweeps;
    Ok(best)
}

struct Problem<'a> {
    imp: &'a [f64],
    t: &'a Array2<f64>,
    budget: f64,
    lo: f64,
    opts: &'a SolverOptions,
    /// Gershgorin shift making the ratio block of T + gamma I diagonally dominant.
    gamma: f64,
    /// |importance|_2, floored away from zero.
    scale: f64,
}

struct Subproblem {
    alpha: Vec<f64>,
    lambda: f64,
    sweeps: usize,
}

impl<'a> Problem<'a> {
    fn new(
        imp: &'a [f64],
        form: &'a ConstraintForm,
        budget: f64,
        lo: f64,
        opts: &'a SolverOptions,
    ) -> Self {
        let t = &form.t_matrix;
        let g = imp.len();
        let mut gamma: f64 = 0.0;
        let mut row_scale: f64 = 0.0;
        for a in 1..=g {
            let off: f64 = (1..=g).filter(|&b| b != a).map(|b| t[[a, b]]).sum();
            gamma = gamma.max(off - t[[a, a]]);
            row_scale = row_scale.max(t.row(a).sum());
        }
        // Keep every coordinate update strictly convex.
        gamma += 1e-6 * row_scale.max(f64::MIN_POSITIVE);
        let norm = imp.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self {
            imp,
            t,
            budget,
            lo,
            opts,
            gamma,
            scale: if norm > 0.0 { norm } else { 1.0 },
        }
    }

    fn g(&self) -> usize {
        self.imp.len()
    }

    /// (T a) over the ratio rows, a = (1, alpha).
    fn t_times(&self, alpha: &[f64]) -> Vec<f64> {
        let t = self.t;
        (1..=alpha.len())
            .map(|a| t[[a, 0]] + alpha.iter().enumerate().map(|(j, x)| t[[a, j + 1]] * x).sum::<f64>())
            .collect()
    }

    fn cost(&self, alpha: &[f64]) -> f64 {
        let ta = self.t_times(alpha);
        let t00 = self.t[[0, 0]];
        let lin: f64 = alpha.iter().enumerate().map(|(j, x)| self.t[[0, j + 1]] * x).sum();
        t00 + lin + alpha.iter().zip(&ta).map(|(x, v)| x * v).sum::<f64>()
    }

    fn objective(&self, alpha: &[f64]) -> f64 {
        self.imp.iter().zip(alpha).map(|(i, a)| i * a).sum()
    }

    fn finish(&self, alpha: Vec<f64>, lambda: f64, sweeps: usize, status: SolverStatus) -> SolverResult {
        let (kkt, lambda) = self.kkt(&alpha, lambda);
        SolverResult {
            objective: self.objective(&alpha),
            constraint_value: self.cost(&alpha),
            multiplier: lambda,
            kkt_residual: kkt,
            iterations: sweeps,
            status,
            alpha,
        }
    }

    /// Deterministic feasible starting points on the budget boundary.
    fn starts(&self) -> Vec<Vec<f64>> {
        let g = self.g();
        let mut dirs: Vec<Vec<f64>> = vec![vec![1.0; g]];
        let max_imp = self.imp.iter().cloned().fold(0.0, f64::max);
        if max_imp > 0.0 {
            dirs.push(self.imp.iter().map(|v| v / max_imp).collect());
        }
        if g <= self.opts.multistart_max_groups {
            for k in 0..g {
                let mut only = vec![0.0; g];
                only[k] = 1.0;
                dirs.push(only);
                let mut all_but = vec![1.0; g];
                all_but[k] = 0.0;
                dirs.push(all_but);
            }
        }
        let mut starts: Vec<Vec<f64>> = Vec::with_capacity(dirs.len());
        for d in dirs {
            let p = self.boundary_point(&d);
            if !starts.contains(&p) {
                starts.push(p);
            }
        }
        starts
    }

    /// Largest t in [0, 1] with cost(lo + t (1 - lo) d) <= budget.
    fn boundary_point(&self, d: &[f64]) -> Vec<f64> {
        let at = |t: f64| -> Vec<f64> { d.iter().map(|x| self.lo + t * (1.0 - self.lo) * x).collect() };
        let end = at(1.0);
        if self.cost(&end) <= self.budget {
            return end;
        }
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.cost(&at(m)) <= self.budget {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        at(a)
    }

    fn local_solve(&self, start: Vec<f64>) -> SolverResult {
        let tol = self.opts.kkt_rel_tol * self.scale;
        let mut alpha = start;
        let mut lambda = 0.0;
        let mut sweeps = 0;
        let mut outer = 0usize;
        loop {
            let sub = self.surrogate(&alpha, lambda);
            sweeps += sub.sweeps;
            let step = alpha
                .iter()
                .zip(&sub.alpha)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            // Majorization never lowers the objective; guard against bisection roundoff.
            if self.objective(&sub.alpha) + 1e-15 * self.scale >= self.objective(&alpha) {
                alpha = sub.alpha;
            }
            lambda = sub.lambda;
            outer += 1;

            let (kkt, _) = self.kkt(&alpha, lambda);
            if kkt <= tol {
                return self.finish(alpha, lambda, sweeps, SolverStatus::Optimal);
            }
            if step < 1e-3 || outer.is_multiple_of(10) {
                if let Some((polished, lam)) = self.newton_polish(&alpha, lambda) {
                    let (kkt, _) = self.kkt(&polished, lam);
                    if kkt <= tol
                        && self.objective(&polished) + 1e-12 * self.scale >= self.objective(&alpha)
                    {
                        return self.finish(polished, lam, sweeps, SolverStatus::Optimal);
                    }
                }
            }
            if sweeps >= self.opts.max_sweeps || step == 0.0 {
                return self.finish(alpha, lambda, sweeps, SolverStatus::MaxIter);
            }
        }
    }

    /// Maximizes `i . alpha` subject to the convex majorant around `center`.
    fn surrogate(&self, center: &[f64], warm_lambda: f64) -> Subproblem {
        let g = self.g();
        let t = self.t;
        let gamma = self.gamma;
        // s(alpha) = c0 + 2 b.alpha + alpha^T Q alpha, Q = T_GG + gamma I
        let b: Vec<f64> = (0..g).map(|a| t[[a + 1, 0]] - gamma * center[a]).collect();
        let c0 = t[[0, 0]] + gamma * center.iter().map(|x| x * x).sum::<f64>();
        let q = |a: usize, c: usize| -> f64 {
            t[[a + 1, c + 1]] + if a == c { gamma } else { 0.0 }
        };
        let majorant = |alpha: &[f64]| -> f64 {
            let mut s = c0;
            for a in 0..g {
                let mut qa = 0.0;
                for c in 0..g {
                    qa += q(a, c) * alpha[c];
                }
                s += alpha[a] * (2.0 * b[a] + qa);
            }
            s
        };

        let ones = vec![1.0; g];
        if majorant(&ones) <= self.budget {
            return Subproblem {
                alpha: ones,
                lambda: 0.0,
                sweeps: 0,
            };
        }

        let mut sweeps = 0;
        let mut work = center.to_vec();
        let maximize = |lambda: f64, work: &mut Vec<f64>, sweeps: &mut usize| {
            let mut qa: Vec<f64> = (0..g)
                .map(|a| (0..g).map(|c| q(a, c) * work[c]).sum())
                .collect();
            loop {
                let mut moved: f64 = 0.0;
                for a in 0..g {
                    let qaa = q(a, a);
                    let rest = qa[a] - qaa * work[a];
                    let target = (self.imp[a] / lambda - 2.0 * (b[a] + rest)) / (2.0 * qaa);
                    let next = target.clamp(self.lo, 1.0);
                    let delta = next - work[a];
                    if delta != 0.0 {
                        for c in 0..g {
                            qa[c] += q(c, a) * delta;
                        }
                        work[a] = next;
                        moved = moved.max(delta.abs());
                    }
                }
                *sweeps += 1;
                if moved <= self.opts.sweep_tol || *sweeps >= self.opts.max_sweeps {
                    break;
                }
            }
        };

        let total_imp: f64 = self.imp.iter().sum();
        let mut lambda0 = if warm_lambda > 0.0 {
            warm_lambda
        } else {
            total_imp / majorant(&ones).max(f64::MIN_POSITIVE)
        };
        if !(lambda0 > 0.0) {
            lambda0 = 1.0;
        }

        // Bracket: s(alpha(hi)) <= budget < s(alpha(lo)).
        let mut hi = lambda0;
        let mut hi_alpha;
        let mut found = false;
        let mut tries = 0;
        loop {
            maximize(hi, &mut work, &mut sweeps);
            if majorant(&work) <= self.budget {
                hi_alpha = work.clone();
                found = true;
                break;
            }
            tries += 1;
            if tries > 400 || sweeps >= self.opts.max_sweeps {
                hi_alpha = center.to_vec();
                break;
            }
            hi *= 4.0;
        }
        if !found {
            return Subproblem {
                alpha: hi_alpha,
                lambda: hi,
                sweeps,
            };
        }
        let mut lo = hi;
        let mut tries = 0;
        loop {
            lo *= 0.25;
            maximize(lo, &mut work, &mut sweeps);
            if majorant(&work) > self.budget {
                break;
            }
            hi = lo;
            hi_alpha = work.clone();
            tries += 1;
            if tries > 400 {
                // Constraint inactive down to a vanishing multiplier.
                return Subproblem {
                    alpha: hi_alpha,
                    lambda: 0.0,
                    sweeps,
                };
            }
        }
        work = hi_alpha.clone();
        while hi - lo > self.opts.lambda_rel_tol * hi && sweeps < self.opts.max_sweeps {
            let mid = if hi > 2.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if mid <= lo || mid >= hi {
                break;
            }
            maximize(mid, &mut work, &mut sweeps);
            if majorant(&work) <= self.budget {
                hi = mid;
                hi_alpha.clone_from(&work);
            } else {
                lo = mid;
            }
        }
        Subproblem {
            alpha: hi_alpha,
            lambda: hi,
            sweeps,
        }
    }

    fn bound_state(&self, x: f64) -> Bound {
        let eps = 1e-9;
        if x <= self.lo + eps {
            Bound::Lower
        } else if x >= 1.0 - eps {
            Bound::Upper
        } else {
            Bound::Free
        }
    }

    /// KKT violation of `alpha` for the original problem and the multiplier used.
    fn kkt(&self, alpha: &[f64], hint: f64) -> (f64, f64) {
        let grad: Vec<f64> = self.t_times(alpha).iter().map(|v| 2.0 * v).collect();
        let active = self.cost(alpha) >= self.budget * (1.0 - 1e-9);
        let states: Vec<Bound> = alpha.iter().map(|&x| self.bound_state(x)).collect();
        let lambda = if !active {
            0.0
        } else {
            let (num, den) = states
                .iter()
                .zip(self.imp.iter().zip(&grad))
                .filter(|(s, _)| **s == Bound::Free)
                .fold((0.0, 0.0), |(n, d), (_, (i, gr))| (n + i * gr, d + gr * gr));
            if den > 0.0 {
                num / den
            } else {
                // Every coordinate sits on a bound: any multiplier in
                // [max lower ratio, min upper ratio] certifies optimality.
                let mut low: f64 = 0.0;
                let mut up = f64::INFINITY;
                for ((s, i), gr) in states.iter().zip(self.imp).zip(&grad) {
                    if *gr <= 0.0 {
                        continue;
                    }
                    match s {
                        Bound::Lower => low = low.max(i / gr),
                        Bound::Upper => up = up.min(i / gr),
                        Bound::Free => {}
                    }
                }
                if low <= up {
                    hint.clamp(low, up.max(low))
                } else {
                    0.5 * (low + up)
                }
            }
        }
        .max(0.0);
        let residual = states
            .iter()
            .zip(self.imp.iter().zip(&grad))
            .map(|(s, (i, gr))| {
                let r = i - lambda * gr;
                match s {
                    Bound::Lower => r.max(0.0),
                    Bound::Upper => (-r).max(0.0),
                    Bound::Free => r.abs(),
                }
            })
            .fold(0.0, f64::max);
        (residual, lambda)
    }

    /// Newton iteration on the reduced KKT system with bounds held fixed.
    fn newton_polish(&self, alpha: &[f64], lambda_hint: f64) -> Option<(Vec<f64>, f64)> {
        let free: Vec<usize> = (0..self.g())
            .filter(|&a| self.bound_state(alpha[a]) == Bound::Free)
            .collect();
        if free.is_empty() {
            return None;
        }
        let (_, lam_est) = self.kkt(alpha, lambda_hint);
        let mut x = alpha.to_vec();
        let mut lambda = if lam_est > 0.0 { lam_est } else { lambda_hint };
        if !(lambda > 0.0) {
            return None;
        }
        let m = free.len();
        for _ in 0..50 {
            let ta = self.t_times(&x);
            let mut jac = Array2::<f64>::zeros((m + 1, m + 1));
            let mut rhs = vec![0.0; m + 1];
            for (r, &a) in free.iter().enumerate() {
                rhs[r] = -(self.imp[a] - 2.0 * lambda * ta[a]);
                for (c, &b) in free.iter().enumerate() {
                    jac[[r, c]] = -2.0 * lambda * self.t[[a + 1, b + 1]];
                }
                jac[[r, m]] = -2.0 * ta[a];
                jac[[m, r]] = 2.0 * ta[a];
            }
            rhs[m] = -(self.cost(&x) - self.budget);
            let step = solve_dense(jac, rhs)?;
            for (r, &a) in free.iter().enumerate() {
                x[a] += step[r];
            }
            lambda += step[m];
            let size = step.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if !size.is_finite() {
                return None;
            }
            if size <= 1e-14 * (1.0 + lambda.abs()) {
                break;
            }
        }
        if !(lambda >= 0.0) || free.iter().any(|&a| x[a] < self.lo || x[a] > 1.0) {
            return None;
        }
        if self.cost(&x) > self.budget * (1.0 + 1e-12) {
            return None;
        }
        Some((x, lambda))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

/// Gaussian elimination with partial pivoting. `None` if singular.
fn solve_dense(mut a: Array2<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[[r, col]].abs().total_cmp(&a[[s, col]].abs()))?;
        if a[[pivot, col]].abs() <= 1e-14 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
            }
            b.swap(pivot, col);
        }
        for r in (col + 1)..n {
            let f = a[[r, col]] / a[[col, col]];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[[r, k]] -= f * a[[col, k]];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|k| a[[r, k]] * x[k]).sum();
        x[r] = (b[r] - s) / a[[r, r]];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net_model::BudgetKind;
    use ndarray::array;

    fn form(t: Array2<f64>) -> ConstraintForm {
        ConstraintForm::from_matrix(t, BudgetKind::Flops).unwrap()
    }

    #[test]
    fn symmetric_quadratic_budget() {
        let f = form(array![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let r = solve(&[1.0, 1.0], &f, 1.0, 0.01).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.alpha[0] - h).abs() < 1e-8 && (r.alpha[1] - h).abs() < 1e-8);
        assert!((r.objective - 2f64.sqrt()).abs() < 1e-8);
        assert!(r.constraint_value <= 1.0 * (1.0 + 1e-6));
    }

    #[test]
    fn slack_budget_keeps_everything() {
        let f = form(array![[0.0, 2.0, 0.0], [2.0, 0.0, 3.0], [0.0, 3.0, 0.0]]);
        let r = solve(&[0.3, 0.9], &f, f.full_cost, 0.05).unwrap();
        assert_eq!(r.alpha, vec![1.0, 1.0]);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.multiplier, 0.0);
    }

    #[test]
    fn floor_cost_budget_is_infeasible() {
        let f = form(array![[0.0, 2.0], [2.0, 1.0]]);
        let floor = f.evaluate(&[0.1]).unwrap();
        assert!(matches!(
            solve(&[1.0], &f, floor, 0.1),
            Err(SolverError::InfeasibleBudget { .. })
        ));
    }

    #[test]
    fn linear_cost_is_a_fractional_knapsack() {
        // cost = 4 a1 + 2 a2 (+ 0 const); importance per cost: a1 -> 0.25, a2 -> 0.25/...
        let f = form(array![[0.0, 2.0, 1.0], [2.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        // i = (1, 1): a2 is twice as efficient, fill it first
        let r = solve(&[1.0, 1.0], &f, 4.0, 0.05).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.alpha[1] - 1.0).abs() < 1e-9);
        assert!((r.alpha[0] - 0.5).abs() < 1e-8, "{:?}", r.alpha);
    }

    #[test]
    fn bilinear_chain_reaches_budget() {
        // cost = a1 + a1 a2 + a2
        let f = form(array![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]);
        let r = solve(&[1.0, 2.0], &f, 1.5, 0.05).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.constraint_value - 1.5).abs() < 1e-6);
        assert!(r.kkt_residual <= 1e-6 * 5f64.sqrt());
    }

    #[test]
    fn wrong_length_is_rejected() {
        let f = form(array![[0.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(
            solve(&[1.0, 1.0], &f, 1.0, 0.1),
            Err(SolverError::DimensionMismatch { expected: 1, found: 2 })
        ));
        assert!(matches!(
            solve(&[1.0], &f, 1.0, 0.0),
            Err(SolverError::InvalidInput(_))
        ));
    }

    #[test]
    fn dense_solve() {
        let x = solve_dense(array![[2.0, 1.0], [1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_dense(array![[1.0, 2.0], [2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }
}
