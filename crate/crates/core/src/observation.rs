//! Received-power measurements.

use crate::error::{Error, Result};
use crate::geometry::{Position, SceneBounds};

/// One received-power measurement (dB scale) tagged with its time slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub position: Position,
    pub value: f64,
    pub slot: u32,
}

impl Observation {
    pub fn new(position: Position, value: f64) -> Self {
        Self {
            position,
            value,
            slot: 0,
        }
    }

    pub fn at_slot(mut self, slot: u32) -> Self {
        self.slot = slot;
        self
    }
}

/// Ordered measurements that all belong to one time slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet {
    items: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(items: Vec<Observation>) -> Result<Self> {
        let mut set = Self::default();
        for o in items {
            set.push(o)?;
        }
        Ok(set)
    }

    /// Like [`ObservationSet::new`], additionally requiring every position to
    /// lie inside `bounds`.
    pub fn within(items: Vec<Observation>, bounds: &SceneBounds) -> Result<Self> {
        if let Some(o) = items.iter().find(|o| !bounds.contains(o.position)) {
            return Err(Error::OutOfCoverage(o.position));
        }
        Self::new(items)
    }

    pub fn push(&mut self, o: Observation) -> Result<()> {
        if !o.position.is_finite() {
            return Err(Error::invalid("observation", "position must be finite"));
        }
        if !o.value.is_finite() {
            return Err(Error::invalid("observation", "value must be finite"));
        }
        if let Some(first) = self.items.first() {
            if first.slot != o.slot {
                return Err(Error::MixedSlots {
                    first: first.slot,
                    other: o.slot,
                });
            }
        }
        self.items.push(o);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn slot(&self) -> Option<u32> {
        self.items.first().map(|o| o.slot)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[Observation] {
        &self.items
    }

    pub fn positions(&self) -> Vec<Position> {
        self.items.iter().map(|o| o.position).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.items.iter().map(|o| o.value).collect()
    }

    /// Arithmetic mean of the values, `None` when empty.
    pub fn mean_value(&self) -> Option<f64> {
        if self.items.is_empty() {
            return None;
        }
        Some(self.items.iter().map(|o| o.value).sum::<f64>() / self.items.len() as f64)
    }

    pub fn prefix(&self, n: usize) -> ObservationSet {
        Self {
            items: self.items[..n.min(self.items.len())].to_vec(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> ObservationSet {
        Self {
            items: indices.iter().map(|&i| self.items[i]).collect(),
        }
    }

    /// Merges observations at bit-identical positions into one carrying the
    /// mean of their values. Returns the merged set and the positions that
    /// were duplicated, both in first-occurrence order.
    pub fn dedup_positions(&self) -> (ObservationSet, Vec<Position>) {
        let mut merged: Vec<(Observation, usize)> = Vec::new();
        for o in &self.items {
            match merged.iter_mut().find(|(m, _)| m.position == o.position) {
                Some((m, count)) => {
                    m.value += o.value;
                    *count += 1;
                }
                None => merged.push((*o, 1)),
            }
        }
        let dups = merged
            .iter()
            .filter(|(_, c)| *c > 1)
            .map(|(m, _)| m.position)
            .collect();
        let items = merged
            .into_iter()
            .map(|(mut m, c)| {
                m.value /= c as f64;
                m
            })
            .collect();
        (Self { items }, dups)
    }
}

impl<'a> IntoIterator for &'a ObservationSet {
    type Item = &'a Observation;
    type IntoIter = std::slice::Iter<'a, Observation>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(x: f64, y: f64, v: f64) -> Observation {
        Observation::new(Position::new(x, y), v)
    }

    #[test]
    fn rejects_mixed_slots_and_non_finite_values() {
        let err = ObservationSet::new(vec![obs(0.0, 0.0, 1.0), obs(1.0, 0.0, 2.0).at_slot(1)]);
        assert!(matches!(err, Err(Error::MixedSlots { first: 0, other: 1 })));
        assert!(ObservationSet::new(vec![obs(0.0, 0.0, f64::NAN)]).is_err());
    }

    #[test]
    fn bounds_are_enforced_when_supplied() {
        let b = SceneBounds::sized(1.0, 1.0).unwrap();
        assert!(ObservationSet::within(vec![obs(1.0, 1.0, 0.0)], &b).is_ok());
        assert!(ObservationSet::within(vec![obs(1.5, 1.0, 0.0)], &b).is_err());
    }

    #[test]
    fn dedup_averages_values() {
        let set = ObservationSet::new(vec![
            obs(0.0, 0.0, 1.0),
            obs(1.0, 0.0, 5.0),
            obs(0.0, 0.0, 3.0),
        ])
        .unwrap();
        let (merged, dups) = set.dedup_positions();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged.as_slice()[0].value, 2.0);
        assert_eq!(dups, vec![Position::new(0.0, 0.0)]);
    }
}
