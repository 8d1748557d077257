//! Jump configurations: the sample points of the canonical jump space.
//!
//! A configuration is a finite set of `(time, size)` points kept in a normal
//! form (sorted by time, then size). The creation and annihilation maps
//! return new configurations; nothing here mutates in place.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measure::{JumpMeasure, Region};

/// A single jump `(time, size)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpPoint {
    pub time: f64,
    pub size: f64,
}

impl JumpPoint {
    pub const fn new(time: f64, size: f64) -> Self {
        Self { time, size }
    }

    fn order(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.size.total_cmp(&other.size))
    }

    fn validate(&self) -> Result<()> {
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(Error::param(format!("jump time {} must be finite and >= 0", self.time)));
        }
        if !self.size.is_finite() || self.size == 0.0 {
            return Err(Error::param(format!("jump size {} must be finite and nonzero", self.size)));
        }
        Ok(())
    }
}

/// A finite, time-sorted, duplicate-free set of jump points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JumpConfiguration {
    points: Vec<JumpPoint>,
}

impl JumpConfiguration {
    /// The empty configuration.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a configuration from arbitrary-order points.
    ///
    /// Rejects zero sizes, negative or non-finite times and exact duplicates.
    pub fn from_points(mut points: Vec<JumpPoint>) -> Result<Self> {
        for p in &points {
            p.validate()?;
        }
        points.sort_by(JumpPoint::order);
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("duplicate jump point in configuration"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[JumpPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, JumpPoint> {
        self.points.iter()
    }

    pub fn contains(&self, theta: &JumpPoint) -> bool {
        self.points
            .binary_search_by(|p| p.order(theta))
            .is_ok()
    }

    /// Creation map: inserts `theta`, or returns an identical copy when
    /// `theta` is already a point of the configuration.
    pub fn add_point(&self, theta: JumpPoint) -> Result<Self> {
        theta.validate()?;
        Ok(self.inserted(theta))
    }

    /// Creation map for a point already known to be valid (quadrature nodes,
    /// sampled points).
    pub(crate) fn inserted(&self, theta: JumpPoint) -> Self {
        debug_assert!(theta.validate().is_ok(), "invalid point {theta:?}");
        match self.points.binary_search_by(|p| p.order(&theta)) {
            Ok(_) => self.clone(),
            Err(pos) => {
                let mut points = Vec::with_capacity(self.points.len() + 1);
                points.extend_from_slice(&self.points[..pos]);
                points.push(theta);
                points.extend_from_slice(&self.points[pos..]);
                Self { points }
            }
        }
    }

    /// Annihilation map: drops `theta` if present.
    pub fn remove_point(&self, theta: JumpPoint) -> Self {
        match self.points.binary_search_by(|p| p.order(&theta)) {
            Ok(pos) => self.without_index(pos),
            Err(_) => self.clone(),
        }
    }

    /// The configuration with its `i`-th point removed.
    pub fn without_index(&self, i: usize) -> Self {
        let mut points = Vec::with_capacity(self.points.len().saturating_sub(1));
        points.extend_from_slice(&self.points[..i]);
        points.extend_from_slice(&self.points[i + 1..]);
        Self { points }
    }

    /// Keeps the points with `time <= m` and `|size| > 1/m`.
    pub fn project(&self, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("projection level must be >= 1"));
        }
        let horizon = m as f64;
        let cut = 1.0 / horizon;
        Ok(self.filter(|p| p.time <= horizon && p.size.abs() > cut))
    }

    /// Points with time strictly before `s`.
    pub fn restrict_before(&self, s: f64) -> Self {
        let end = self.points.partition_point(|p| p.time < s);
        Self {
            points: self.points[..end].to_vec(),
        }
    }

    /// Points lying in `region`.
    pub fn restrict_to(&self, region: &Region) -> Self {
        self.filter(|p| region.contains(p.time, p.size))
    }

    pub fn filter(&self, keep: impl Fn(&JumpPoint) -> bool) -> Self {
        Self {
            points: self.points.iter().copied().filter(|p| keep(p)).collect(),
        }
    }

    /// Union with a configuration on a disjoint support.
    pub fn merge(&self, other: &Self) -> Self {
        let mut points = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.points.len() && j < other.points.len() {
            match self.points[i].order(&other.points[j]) {
                Ordering::Less => {
                    points.push(self.points[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    points.push(other.points[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    points.push(self.points[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        points.extend_from_slice(&self.points[i..]);
        points.extend_from_slice(&other.points[j..]);
        Self { points }
    }

    /// `N(A)(ω)`.
    pub fn count_in(&self, region: &Region) -> usize {
        self.points
            .iter()
            .filter(|p| region.contains(p.time, p.size))
            .count()
    }

    /// Sum of the sizes of points with time `<= t`.
    pub fn jump_sum(&self, t: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.time <= t)
            .map(|p| p.size)
            .sum()
    }

    /// Sorted jump times, for quadrature breakpoints.
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.points.iter().map(|p| p.time).collect();
        ts.dedup();
        ts
    }

    /// `J_t(ω)`: jump sum up to `t` minus the compensator of the jumps in
    /// `{eps < |x| <= 1}`.
    pub fn path_value(&self, t: f64, measure: &JumpMeasure, eps: f64) -> Result<f64> {
        Ok(self.jump_sum(t) - measure.compensator(t, eps)?)
    }

    /// `time,size` lines in normal order, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            let _ = writeln!(out, "{},{}", p.time, p.size);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| Error::Config {
                    line: Some(n + 1),
                    message: format!("expected `time,size`, got `{line}`"),
                })
            };
            let time = parse(parts.next())?;
            let size = parse(parts.next())?;
            points.push(JumpPoint::new(time, size));
        }
        Self::from_points(points)
    }
}

impl<'a> IntoIterator for &'a JumpConfiguration {
    type Item = &'a JumpPoint;
    type IntoIter = std::slice::Iter<'a, JumpPoint>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}
