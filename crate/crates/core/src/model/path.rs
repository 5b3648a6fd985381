//! Càdlàg paths with a finite jump list.
//!
//! A path is stored as right-continuous piecewise-constant data: a sorted list
//! of breakpoints with the state holding from each breakpoint until the next.
//! At a jump time the stored state is the post-jump value; the pre-jump value
//! lives in the [`Jump`] record. Several jumps may share a time (batched
//! impulses); they are kept in application order.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpKind {
    /// Atom of the Poisson random measure carrying the given mark.
    Random { mark: usize },
    /// Intervention of the impulse controller with the given mark.
    Impulse { mark: usize },
}

impl JumpKind {
    pub fn mark(&self) -> usize {
        match *self {
            JumpKind::Random { mark } | JumpKind::Impulse { mark } => mark,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    pub kind: JumpKind,
}

impl Jump {
    pub fn size(&self) -> Vec<f64> {
        self.post.iter().zip(&self.pre).map(|(a, b)| a - b).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    jumps: Vec<Jump>,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl CadlagPath {
    pub fn new(t0: f64, x0: &[f64]) -> Self {
        Self {
            dim: x0.len(),
            times: vec![t0],
            values: x0.to_vec(),
            jumps: Vec::new(),
        }
    }

    /// Build a path from breakpoints and a jump list, checking consistency.
    pub fn from_parts(times: Vec<f64>, values: Vec<Vec<f64>>, jumps: Vec<Jump>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Precondition("need one state per breakpoint".into()));
        }
        let dim = values[0].len();
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("breakpoints must be strictly increasing".into()));
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::Dimension { expected: dim, got: v.len() });
            }
        }
        for j in &jumps {
            if j.pre.len() != dim || j.post.len() != dim {
                return Err(Error::Dimension { expected: dim, got: j.pre.len() });
            }
        }
        if jumps.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::Precondition("jumps must be time-ordered".into()));
        }
        Ok(Self {
            dim,
            times,
            values: values.concat(),
            jumps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn current(&self) -> &[f64] {
        self.value(self.times.len() - 1)
    }

    pub fn current_time(&self) -> f64 {
        *self.times.last().expect("path has at least one breakpoint")
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// Append a breakpoint strictly after the current time.
    pub fn push(&mut self, t: f64, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        if t <= self.current_time() {
            return Err(Error::Precondition(format!(
                "breakpoint {t} not after current time {}",
                self.current_time()
            )));
        }
        self.times.push(t);
        self.values.extend_from_slice(x);
        Ok(())
    }

    /// Add `delta` to the state at time `t >= current_time()`.
    pub fn apply_jump(&mut self, t: f64, delta: &[f64], kind: JumpKind) -> Result<()> {
        if delta.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: delta.len() });
        }
        let now = self.current_time();
        if t < now {
            return Err(Error::Precondition(format!("jump at {t} before current time {now}")));
        }
        let pre = self.current().to_vec();
        let post: Vec<f64> = pre.iter().zip(delta).map(|(a, b)| a + b).collect();
        if t > now {
            self.times.push(t);
            self.values.extend_from_slice(&post);
        } else {
            let n = self.times.len();
            self.values[(n - 1) * self.dim..].copy_from_slice(&post);
        }
        self.jumps.push(Jump { time: t, pre, post, kind });
        Ok(())
    }

    fn index_at(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&s| s <= t);
        k.checked_sub(1)
    }

    /// Right-continuous value at `t`; the first breakpoint's state before it.
    pub fn value_at(&self, t: f64) -> &[f64] {
        self.value(self.index_at(t).unwrap_or(0))
    }

    /// Left limit `x_{t-}`.
    pub fn left_limit(&self, t: f64) -> &[f64] {
        let k = self.times.partition_point(|&s| s < t);
        self.value(k.saturating_sub(1))
    }

    /// `sup_{s <= t} |x_s|`.
    pub fn sup_norm(&self, t: f64) -> f64 {
        let end = self.index_at(t).map_or(1, |k| k + 1);
        let mut m = (0..end).map(|i| norm(self.value(i))).fold(0.0, f64::max);
        // pre-jump states of jumps at or before t are left limits, already covered
        // except for batches at a single time
        for j in self.jumps.iter().filter(|j| j.time <= t) {
            m = m.max(norm(&j.pre));
        }
        m
    }

    /// Restriction to `[0, t]`.
    pub fn prefix(&self, t: f64) -> CadlagPath {
        let end = self.index_at(t).map_or(1, |k| k + 1);
        CadlagPath {
            dim: self.dim,
            times: self.times[..end].to_vec(),
            values: self.values[..end * self.dim].to_vec(),
            jumps: self.jumps.iter().filter(|j| j.time <= t).cloned().collect(),
        }
    }

    /// The path just before jump `j` is applied: restricted to `[0, time_j]`
    /// with jumps `j, j+1, ...` at that time undone. The breakpoint at
    /// `time_j` is kept, so `current_time()` is the jump time.
    pub fn prefix_before_jump(&self, j: usize) -> CadlagPath {
        let jump = &self.jumps[j];
        let mut p = self.prefix(jump.time);
        p.jumps.truncate(j);
        let n = p.times.len();
        p.values[(n - 1) * p.dim..].copy_from_slice(&jump.pre);
        p
    }

    /// Continuous part `C(x)_t = x_t - sum of jumps up to t`.
    pub fn continuous_at(&self, t: f64) -> Vec<f64> {
        let mut v = self.value_at(t).to_vec();
        for j in self.jumps.iter().filter(|j| j.time <= t) {
            for (a, (post, pre)) in v.iter_mut().zip(j.post.iter().zip(&j.pre)) {
                *a -= post - pre;
            }
        }
        v
    }

    /// Bit-exact key of the whole path, for lattice deduplication.
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut key = Vec::with_capacity(self.times.len() * (1 + self.dim) + 2 * self.jumps.len());
        key.extend(self.times.iter().map(|t| t.to_bits()));
        key.extend(self.values.iter().map(|v| v.to_bits()));
        for j in &self.jumps {
            key.push(j.time.to_bits());
            key.push(match j.kind {
                JumpKind::Random { mark } => (mark as u64) << 1,
                JumpKind::Impulse { mark } => ((mark as u64) << 1) | 1,
            });
        }
        key
    }
}

/// Semi-metric between stopped paths `(t, x)` and `(t', x')`.
///
/// `|t - t'|` plus the sup distance between the continuous parts of the
/// stopped paths, plus for every jump index `i` the time and size
/// discrepancies of the `i`-th jumps, each cut off at the respective stopping
/// time. Jump lists of different length are paired by index; a missing jump
/// contributes zero on its side.
pub fn path_distance(t: f64, x: &CadlagPath, t2: f64, x2: &CadlagPath) -> Result<f64> {
    if x.dim() != x2.dim() {
        return Err(Error::Dimension { expected: x.dim(), got: x2.dim() });
    }
    let dim = x.dim();
    let mut grid: Vec<f64> = x
        .times()
        .iter()
        .chain(x2.times())
        .copied()
        .chain([t, t2])
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let sup = grid
        .iter()
        .map(|&s| {
            let a = x.continuous_at(s.min(t));
            let b = x2.continuous_at(s.min(t2));
            norm(&a.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>())
        })
        .fold(0.0, f64::max);

    let n = x.jump_count().max(x2.jump_count());
    let zero = vec![0.0; dim];
    let mut jump_terms = 0.0;
    for i in 0..n {
        let (ta, da) = match x.jumps().get(i) {
            Some(j) if j.time <= t => (j.time, j.size()),
            _ => (0.0, zero.clone()),
        };
        let (tb, db) = match x2.jumps().get(i) {
            Some(j) if j.time <= t2 => (j.time, j.size()),
            _ => (0.0, zero.clone()),
        };
        jump_terms += (ta - tb).abs() + norm(&da.iter().zip(&db).map(|(p, q)| p - q).collect::<Vec<_>>());
    }
    Ok((t - t2).abs() + sup + jump_terms)
}
