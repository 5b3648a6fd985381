//! Impulse controls: ordered intervention sequences and their algebra.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intervention {
    pub time: f64,
    /// Index into the problem's mark space.
    pub mark: usize,
}

/// Interventions `(eta_j, beta_j)` with non-decreasing times. Equal times
/// form a batch applied in list order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImpulseControl {
    interventions: Vec<Intervention>,
}

impl ImpulseControl {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(interventions: Vec<Intervention>) -> Result<Self> {
        if interventions.iter().any(|i| !i.time.is_finite()) {
            return Err(Error::Precondition("intervention time is not finite".into()));
        }
        if interventions.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::Precondition("intervention times must be non-decreasing".into()));
        }
        Ok(Self { interventions })
    }

    pub fn from_pairs(pairs: &[(f64, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(time, mark)| Intervention { time, mark }).collect())
    }

    pub fn interventions(&self) -> &[Intervention] {
        &self.interventions
    }

    pub fn len(&self) -> usize {
        self.interventions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interventions.is_empty()
    }

    /// `#{j : eta_j <= t}`.
    pub fn count_at_or_before(&self, t: f64) -> usize {
        self.interventions.partition_point(|i| i.time <= t)
    }

    /// `#{j : eta_j < t}`.
    pub fn count_before(&self, t: f64) -> usize {
        self.interventions.partition_point(|i| i.time < t)
    }

    /// The first `k` interventions.
    pub fn truncate(&self, k: usize) -> Self {
        Self {
            interventions: self.interventions[..k.min(self.len())].to_vec(),
        }
    }

    /// Interventions strictly before `tau`.
    pub fn restrict_before(&self, tau: f64) -> Self {
        self.truncate(self.count_before(tau))
    }

    /// Interventions at or before `tau`.
    pub fn restrict_at_or_before(&self, tau: f64) -> Self {
        self.truncate(self.count_at_or_before(tau))
    }

    /// Interventions at or after `t`.
    pub fn tail_from(&self, t: f64) -> Self {
        Self {
            interventions: self.interventions[self.count_before(t)..].to_vec(),
        }
    }

    pub fn push(&mut self, time: f64, mark: usize) -> Result<()> {
        if self.interventions.last().is_some_and(|l| time < l.time) || !time.is_finite() {
            return Err(Error::Precondition(format!("intervention at {time} out of order")));
        }
        self.interventions.push(Intervention { time, mark });
        Ok(())
    }
}

/// Keep the interventions of `u` at or before `t`, then append `v`.
pub fn concat(u: &ImpulseControl, t: f64, v: &ImpulseControl) -> Result<ImpulseControl> {
    if let Some(bad) = v.interventions.iter().find(|i| i.time < t) {
        return Err(Error::Precondition(format!(
            "appended intervention at {} precedes cutoff {t}",
            bad.time
        )));
    }
    let mut out = u.restrict_at_or_before(t);
    if out.interventions.last().is_some_and(|l| v.interventions.first().is_some_and(|f| f.time < l.time)) {
        return Err(Error::Precondition("concatenation would not be ordered".into()));
    }
    out.interventions.extend_from_slice(&v.interventions);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctrl(pairs: &[(f64, usize)]) -> ImpulseControl {
        ImpulseControl::from_pairs(pairs).unwrap()
    }

    #[test]
    fn concat_with_empty_sides() {
        let v = ctrl(&[(0.5, 1), (0.7, 0)]);
        assert_eq!(concat(&ImpulseControl::empty(), 0.5, &v).unwrap(), v);
        let u = ctrl(&[(0.2, 0), (1.0, 1)]);
        assert_eq!(concat(&u, 1.0, &ImpulseControl::empty()).unwrap(), u);
    }

    #[test]
    fn concat_replaces_the_tail() {
        let u = ctrl(&[(0.2, 1), (0.6, 2)]);
        let v = ctrl(&[(0.5, 3)]);
        assert_eq!(concat(&u, 0.5, &v).unwrap(), ctrl(&[(0.2, 1), (0.5, 3)]));
    }

    #[test]
    fn concat_rejects_early_interventions() {
        let u = ctrl(&[(0.2, 1)]);
        let v = ctrl(&[(0.4, 0)]);
        assert!(matches!(concat(&u, 0.5, &v), Err(Error::Precondition(_))));
    }

    #[test]
    fn restriction_boundaries() {
        let u = ctrl(&[(0.25, 0), (0.5, 1), (0.5, 0), (0.75, 1)]);
        assert_eq!(u.restrict_before(0.5).len(), 1);
        assert_eq!(u.restrict_at_or_before(0.5).len(), 3);
        assert_eq!(u.count_at_or_before(1.0), 4);
        assert_eq!(u.tail_from(0.5).len(), 3);
    }

    #[test]
    fn unordered_input_is_rejected() {
        assert!(ImpulseControl::from_pairs(&[(0.5, 0), (0.2, 0)]).is_err());
    }

    fn arb_control() -> impl Strategy<Value = ImpulseControl> {
        prop::collection::vec((0u32..=8, 0usize..3), 0..6).prop_map(|mut v| {
            v.sort_by_key(|p| p.0);
            ImpulseControl::from_pairs(&v.iter().map(|&(t, m)| (t as f64 / 8.0, m)).collect::<Vec<_>>())
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn restrict_before_is_idempotent(u in arb_control(), tau in 0.0f64..1.0) {
            let once = u.restrict_before(tau);
            prop_assert_eq!(once.restrict_before(tau), once);
        }

        #[test]
        fn split_and_concat_reproduces(u in arb_control(), cut in 0u32..16) {
            // odd sixteenths never coincide with an intervention time
            let t = (2 * cut + 1) as f64 / 32.0;
            let rebuilt = concat(&u.restrict_before(t), t, &u.tail_from(t)).unwrap();
            prop_assert_eq!(rebuilt, u);
        }
    }
}
