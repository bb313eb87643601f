//! Shared vocabulary: site windows and finite site configurations.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive interval of lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteWindow {
    pub lo: i64,
    pub hi: i64,
}

impl SiteWindow {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidWindow { lo, hi });
        }
        Ok(SiteWindow { lo, hi })
    }

    /// Symmetric window [-n, n].
    pub fn centered(n: i64) -> Self {
        SiteWindow { lo: -n, hi: n }
    }

    #[inline]
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // construction forbids lo > hi
    }

    #[inline]
    pub fn contains(&self, site: i64) -> bool {
        self.lo <= site && site <= self.hi
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    pub fn translate(&self, shift: i64) -> Self {
        SiteWindow { lo: self.lo + shift, hi: self.hi + shift }
    }
}

impl fmt::Display for SiteWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Finite set of active sites.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    active: BTreeSet<i64>,
}

impl Configuration {
    pub fn empty() -> Self {
        Configuration::default()
    }

    pub fn single(site: i64) -> Self {
        Configuration { active: BTreeSet::from([site]) }
    }

    /// Every site of the window active.
    pub fn full(window: SiteWindow) -> Self {
        Configuration { active: window.sites().collect() }
    }

    pub fn from_sites<I: IntoIterator<Item = i64>>(sites: I) -> Self {
        Configuration { active: sites.into_iter().collect() }
    }

    #[inline]
    pub fn contains(&self, site: i64) -> bool {
        self.active.contains(&site)
    }

    pub fn insert(&mut self, site: i64) {
        self.active.insert(site);
    }

    pub fn remove(&mut self, site: i64) {
        self.active.remove(&site);
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.active.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.active.iter().copied()
    }

    pub fn min(&self) -> Option<i64> {
        self.active.first().copied()
    }

    pub fn max(&self) -> Option<i64> {
        self.active.last().copied()
    }

    pub fn union(&self, other: &Self) -> Self {
        Configuration { active: self.active.union(&other.active).copied().collect() }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Configuration { active: self.active.intersection(&other.active).copied().collect() }
    }

    pub fn intersects(&self, other: &Self) -> bool {
        // Iterate the smaller set.
        let (small, big) =
            if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().any(|s| big.contains(s))
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.active.is_subset(&other.active)
    }

    pub fn translate(&self, shift: i64) -> Self {
        Configuration { active: self.active.iter().map(|s| s + shift).collect() }
    }

    /// Restriction to the window.
    pub fn clip(&self, window: SiteWindow) -> Self {
        Configuration {
            active: self.active.range(window.lo..=window.hi).copied().collect(),
        }
    }

    /// Restriction to the inclusive site interval [lo, hi].
    pub fn clip_interval(&self, lo: i64, hi: i64) -> Self {
        Configuration { active: self.active.range(lo..=hi).copied().collect() }
    }
}

impl FromIterator<i64> for Configuration {
    fn from_iter<I: IntoIterator<Item = i64>>(iter: I) -> Self {
        Configuration::from_sites(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_validation() {
        assert!(SiteWindow::new(3, 2).is_err());
        let w = SiteWindow::new(-2, 2).unwrap();
        assert_eq!(w.len(), 5);
        assert!(w.contains(0) && !w.contains(3));
    }

    #[test]
    fn configuration_ops() {
        let a = Configuration::from_sites([0, 2, 5]);
        let b = Configuration::from_sites([2, 3]);
        assert!(a.intersects(&b));
        assert_eq!(a.union(&b).len(), 4);
        assert_eq!(a.intersection(&b), Configuration::single(2));
        assert_eq!(a.min(), Some(0));
        assert_eq!(a.max(), Some(5));
        assert_eq!(a.translate(10).min(), Some(10));
        assert_eq!(a.clip_interval(1, 4), Configuration::single(2));
        assert!(Configuration::empty().is_subset(&a));
    }
}
