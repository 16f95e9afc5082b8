use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A finite union of closed intervals inside `]a, b]`; points are intervals with `lo = hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedSetDescriptor {
    pub a: f64,
    pub b: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl ClosedSetDescriptor {
    /// Sorts and merges overlapping intervals, then checks `F ⊂ ]a, b]`.
    pub fn new(a: f64, b: f64, mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Invalid(format!("interval [{a}, {b}] is empty")));
        }
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Invalid(format!("bad interval {lo}:{hi}")));
            }
            if lo <= a || hi > b {
                return Err(Error::Invalid(format!("{lo}:{hi} is not contained in ]{a}, {b}]")));
            }
        }
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(ClosedSetDescriptor { a, b, intervals: merged })
    }

    /// Parse `"x;lo:hi;..."`; the empty string is the empty set.
    pub fn parse(s: &str, a: f64, b: f64) -> Result<Self> {
        let mut out = Vec::new();
        for item in s.split(';').map(str::trim).filter(|x| !x.is_empty()) {
            let num = |x: &str| -> Result<f64> {
                x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {x:?} in {item:?}")))
            };
            match item.split_once(':') {
                Some((lo, hi)) => out.push((num(lo)?, num(hi)?)),
                None => {
                    let x = num(item)?;
                    out.push((x, x));
                }
            }
        }
        Self::new(a, b, out)
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn inf(&self) -> Option<f64> {
        self.intervals.first().map(|i| i.0)
    }

    pub fn sup(&self) -> Option<f64> {
        self.intervals.last().map(|i| i.1)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| t >= lo && t <= hi)
    }

    pub fn distance(&self, t: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| if t < lo { lo - t } else if t > hi { t - hi } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }

    /// Endpoints of the components (a point contributes once).
    pub fn boundary(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for &(lo, hi) in &self.intervals {
            out.push(lo);
            if hi > lo {
                out.push(hi);
            }
        }
        out
    }
}

impl fmt::Display for ClosedSetDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .intervals
            .iter()
            .map(|&(lo, hi)| if lo == hi { format!("{lo}") } else { format!("{lo}:{hi}") })
            .collect();
        write!(f, "{}", items.join(";"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_points_and_intervals() {
        let f = ClosedSetDescriptor::parse("1.0;1.5:2.0", 0.0, 2.5).unwrap();
        assert_eq!(f.intervals, vec![(1.0, 1.0), (1.5, 2.0)]);
        assert_eq!(f.to_string(), "1;1.5:2");
        assert!(ClosedSetDescriptor::parse("", 0.0, 1.0).unwrap().is_empty());
        assert!(f.contains(1.7) && !f.contains(1.2));
        assert_eq!(f.boundary(), vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn rejects_points_outside_half_open_interval() {
        assert!(matches!(ClosedSetDescriptor::parse("0.0", 0.0, 1.0), Err(Error::Invalid(_))));
        assert!(matches!(ClosedSetDescriptor::parse("1.2", 0.0, 1.0), Err(Error::Invalid(_))));
        assert!(ClosedSetDescriptor::parse("1.0", 0.0, 1.0).is_ok());
        assert!(matches!(ClosedSetDescriptor::parse("x", 0.0, 1.0), Err(Error::Parse(_))));
        assert!(matches!(ClosedSetDescriptor::parse("0.5:0.2", 0.0, 1.0), Err(Error::Invalid(_))));
    }

    #[test]
    fn merges_overlaps() {
        let f = ClosedSetDescriptor::parse("0.3:0.5;0.4:0.6;0.2", 0.0, 1.0).unwrap();
        assert_eq!(f.intervals, vec![(0.2, 0.2), (0.3, 0.6)]);
    }
}
