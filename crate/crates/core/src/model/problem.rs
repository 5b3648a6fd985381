//! Problem specification: coefficients, costs, mark space, horizon.

use std::fmt;
use std::sync::Arc;

use super::path::{CadlagPath, JumpKind};
use crate::error::{Error, Result};

/// Coefficient reading `(t, path prefix)`.
pub type PathFn<T> = Arc<dyn Fn(f64, &CadlagPath) -> T + Send + Sync>;
/// Coefficient reading `(t, path prefix, mark coordinates)`.
pub type MarkFn<T> = Arc<dyn Fn(f64, &CadlagPath, &[f64]) -> T + Send + Sync>;

/// Finite mark set with strictly positive intensity weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkSpace {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl MarkSpace {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Spec(format!(
                "{} marks but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Spec(format!("mark weight {w} is not strictly positive")));
        }
        Ok(Self { points, weights })
    }

    /// Scalar marks.
    pub fn scalar(values: &[f64], weights: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect(), weights.to_vec())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, mark: usize) -> &[f64] {
        &self.points[mark]
    }

    pub fn weight(&self, mark: usize) -> f64 {
        self.weights[mark]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass `lambda(U)`.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    dim: usize,
    horizon: f64,
    x0: Vec<f64>,
    drift: PathFn<Vec<f64>>,
    vol: PathFn<Vec<f64>>,
    jump: MarkFn<Vec<f64>>,
    running_cost: PathFn<f64>,
    barrier: PathFn<f64>,
    intervention_cost: MarkFn<f64>,
    marks: MarkSpace,
    markov: bool,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("x0", &self.x0)
            .field("marks", &self.marks)
            .field("markov", &self.markov)
            .finish_non_exhaustive()
    }
}

fn state(t: f64, path: &CadlagPath) -> &[f64] {
    path.value_at(t)
}

impl ProblemSpec {
    /// Zero coefficients, identity volatility, no marks.
    pub fn new(horizon: f64, x0: Vec<f64>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Spec(format!("horizon {horizon} must be positive")));
        }
        if x0.is_empty() {
            return Err(Error::Spec("state dimension must be positive".into()));
        }
        let dim = x0.len();
        let mut identity = vec![0.0; dim * dim];
        for i in 0..dim {
            identity[i * dim + i] = 1.0;
        }
        Ok(Self {
            dim,
            horizon,
            x0,
            drift: Arc::new(move |_, _| vec![0.0; dim]),
            vol: Arc::new(move |_, _| identity.clone()),
            jump: Arc::new(move |_, _, _| vec![0.0; dim]),
            running_cost: Arc::new(|_, _| 0.0),
            barrier: Arc::new(|_, _| 0.0),
            intervention_cost: Arc::new(|_, _, _| 0.0),
            marks: MarkSpace::default(),
            markov: false,
        })
    }

    pub fn with_drift(mut self, f: impl Fn(f64, &CadlagPath) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(f);
        self
    }

    /// Volatility as a row-major `dim x dim` matrix.
    pub fn with_vol(mut self, f: impl Fn(f64, &CadlagPath) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.vol = Arc::new(f);
        self
    }

    pub fn with_jump(
        mut self,
        f: impl Fn(f64, &CadlagPath, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jump = Arc::new(f);
        self
    }

    pub fn with_running_cost(mut self, f: impl Fn(f64, &CadlagPath) -> f64 + Send + Sync + 'static) -> Self {
        self.running_cost = Arc::new(f);
        self
    }

    pub fn with_barrier(mut self, f: impl Fn(f64, &CadlagPath) -> f64 + Send + Sync + 'static) -> Self {
        self.barrier = Arc::new(f);
        self
    }

    pub fn with_intervention_cost(
        mut self,
        f: impl Fn(f64, &CadlagPath, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.intervention_cost = Arc::new(f);
        self
    }

    pub fn with_markov_drift(self, f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.with_drift(move |t, p| f(t, state(t, p)))
    }

    pub fn with_markov_vol(self, f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.with_vol(move |t, p| f(t, state(t, p)))
    }

    pub fn with_markov_jump(
        self,
        f: impl Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.with_jump(move |t, p, e| f(t, state(t, p), e))
    }

    pub fn with_markov_running_cost(self, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.with_running_cost(move |t, p| f(t, state(t, p)))
    }

    pub fn with_markov_barrier(self, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.with_barrier(move |t, p| f(t, state(t, p)))
    }

    pub fn with_markov_intervention_cost(
        self,
        f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.with_intervention_cost(move |t, p, e| f(t, state(t, p), e))
    }

    pub fn with_marks(mut self, marks: MarkSpace) -> Self {
        self.marks = marks;
        self
    }

    /// Declare that every coefficient depends on the path only through its
    /// current state, which lets the solvers merge nodes by state.
    pub fn with_markov(mut self, markov: bool) -> Self {
        self.markov = markov;
        self
    }

    /// Multiply the intervention cost by `factor`.
    pub fn scale_intervention_cost(mut self, factor: f64) -> Self {
        let base = self.intervention_cost.clone();
        self.intervention_cost = Arc::new(move |t, p, e| factor * base(t, p, e));
        self
    }

    /// Add `c` to the running cost.
    pub fn shift_running_cost(mut self, c: f64) -> Self {
        let base = self.running_cost.clone();
        self.running_cost = Arc::new(move |t, p| base(t, p) + c);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn marks(&self) -> &MarkSpace {
        &self.marks
    }

    pub fn is_markov(&self) -> bool {
        self.markov
    }

    pub fn drift(&self, t: f64, path: &CadlagPath) -> Vec<f64> {
        (self.drift)(t, path)
    }

    pub fn vol(&self, t: f64, path: &CadlagPath) -> Vec<f64> {
        (self.vol)(t, path)
    }

    pub fn jump(&self, t: f64, path: &CadlagPath, mark: usize) -> Vec<f64> {
        (self.jump)(t, path, self.marks.point(mark))
    }

    pub fn running_cost(&self, t: f64, path: &CadlagPath) -> f64 {
        (self.running_cost)(t, path)
    }

    pub fn barrier(&self, t: f64, path: &CadlagPath) -> f64 {
        (self.barrier)(t, path)
    }

    pub fn intervention_cost(&self, t: f64, path: &CadlagPath, mark: usize) -> f64 {
        (self.intervention_cost)(t, path, self.marks.point(mark))
    }

    /// Spot-check coefficient shapes and the cost assumptions at the given
    /// `(t, state)` samples, each read as a constant path.
    pub fn sampled_checks(&self, samples: &[(f64, Vec<f64>)]) -> Result<SpecDiagnostics> {
        let mut diag = SpecDiagnostics::default();
        for (t, x) in samples {
            if x.len() != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: x.len() });
            }
            let path = CadlagPath::new(*t, x);
            let a = self.drift(*t, &path);
            if a.len() != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: a.len() });
            }
            let s = self.vol(*t, &path);
            if s.len() != self.dim * self.dim {
                return Err(Error::Dimension { expected: self.dim * self.dim, got: s.len() });
            }
            let psi = self.barrier(*t, &path);
            for mark in 0..self.marks.len() {
                diag.checked += 1;
                let g = self.jump(*t, &path, mark);
                if g.len() != self.dim {
                    return Err(Error::Dimension { expected: self.dim, got: g.len() });
                }
                let chi = self.intervention_cost(*t, &path, mark);
                if !(chi >= 0.0) {
                    diag.negative_cost += 1;
                }
                let mut moved = path.clone();
                moved.apply_jump(*t, &g, JumpKind::Impulse { mark })?;
                if psi > self.barrier(*t, &moved) + chi + 1e-12 {
                    diag.terminal_intervention_violations += 1;
                }
            }
        }
        Ok(diag)
    }

    /// Reject specifications whose sampled intervention cost is negative.
    pub fn validate(&self, samples: &[(f64, Vec<f64>)]) -> Result<SpecDiagnostics> {
        let diag = self.sampled_checks(samples)?;
        if diag.negative_cost > 0 {
            return Err(Error::Spec(format!(
                "intervention cost negative at {} sampled points",
                diag.negative_cost
            )));
        }
        Ok(diag)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SpecDiagnostics {
    pub checked: usize,
    pub negative_cost: usize,
    /// Samples where intervening immediately before stopping beats stopping.
    pub terminal_intervention_violations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_must_be_positive() {
        assert!(MarkSpace::scalar(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(MarkSpace::scalar(&[1.0], &[1.0, 2.0]).is_err());
        assert_eq!(MarkSpace::scalar(&[1.0, 2.0], &[1.0, 3.0]).unwrap().total(), 4.0);
    }

    #[test]
    fn sampled_checks_flag_profitable_terminal_intervention() {
        let spec = ProblemSpec::new(1.0, vec![0.0])
            .unwrap()
            .with_markov_barrier(|_, x| x[0])
            .with_markov_jump(|_, _, _| vec![-0.5])
            .with_markov_intervention_cost(|_, _, _| 0.3)
            .with_marks(MarkSpace::scalar(&[0.0], &[1.0]).unwrap());
        let d = spec.sampled_checks(&[(0.0, vec![0.0]), (0.5, vec![1.0])]).unwrap();
        assert_eq!(d.checked, 2);
        assert_eq!(d.terminal_intervention_violations, 2);

        let upward = spec.clone().with_markov_jump(|_, _, _| vec![0.5]);
        assert_eq!(upward.sampled_checks(&[(0.0, vec![0.0])]).unwrap().terminal_intervention_violations, 0);
    }

    #[test]
    fn negative_cost_fails_validation() {
        let spec = ProblemSpec::new(1.0, vec![0.0])
            .unwrap()
            .with_markov_intervention_cost(|_, _, _| -1.0)
            .with_marks(MarkSpace::scalar(&[0.0], &[1.0]).unwrap());
        assert!(matches!(spec.validate(&[(0.0, vec![0.0])]), Err(Error::Spec(_))));
    }

    #[test]
    fn scaling_and_shifting_wrap_the_originals() {
        let spec = ProblemSpec::new(1.0, vec![0.0])
            .unwrap()
            .with_markov_intervention_cost(|_, _, _| 0.3)
            .with_marks(MarkSpace::scalar(&[0.0], &[1.0]).unwrap())
            .scale_intervention_cost(2.0)
            .shift_running_cost(1.5);
        let p = CadlagPath::new(0.0, &[0.0]);
        assert_eq!(spec.intervention_cost(0.0, &p, 0), 0.6);
        assert_eq!(spec.running_cost(0.0, &p), 1.5);
    }
}
