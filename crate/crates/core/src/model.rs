//! Lattices, spin spaces, translation-invariant pair potentials, boundary
//! conditions and finite-volume Hamiltonians.
//!
//! Distances on `Z^d` are measured in the l1 norm throughout; in one
//! dimension this is the usual `|x - y|`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`. Ordering is lexicographic on the coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: Vec<i64>) -> Self {
        assert!(!coords.is_empty(), "sites need at least one coordinate");
        Site(coords)
    }

    pub fn origin(d: usize) -> Self {
        Site::new(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn offset(&self, disp: &[i64]) -> Site {
        debug_assert_eq!(disp.len(), self.0.len());
        Site(self.0.iter().zip(disp).map(|(a, b)| a + b).collect())
    }

    pub fn displacement_to(&self, other: &Site) -> Vec<i64> {
        other.0.iter().zip(&self.0).map(|(b, a)| b - a).collect()
    }

    pub fn l1(&self) -> u64 {
        l1_norm(&self.0)
    }

    pub fn distance(&self, other: &Site) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub fn l1_norm(v: &[i64]) -> u64 {
    v.iter().map(|c| c.unsigned_abs()).sum()
}

/// All non-zero displacements `v` in `Z^d` with `lo <= |v|_1 <= hi`, in
/// lexicographic order.
pub fn displacements(d: usize, lo: u64, hi: u64) -> Vec<Vec<i64>> {
    fn rec(d: usize, budget: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        let used = l1_norm(prefix) as i64;
        let room = budget - used;
        for c in -room..=room {
            prefix.push(c);
            rec(d, budget, prefix, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    rec(d, hi as i64, &mut Vec::with_capacity(d), &mut all);
    all.retain(|v| {
        let n = l1_norm(v);
        n >= lo.max(1) && n <= hi
    });
    all
}

/// Number of points of `Z^d` with l1 norm exactly `r`.
pub fn l1_sphere_count(d: usize, r: u64) -> u128 {
    if r == 0 {
        return 1;
    }
    // sum_i 2^i C(d,i) C(r-1,i-1)
    let mut total: u128 = 0;
    for i in 1..=d.min(r as usize) {
        total += (1u128 << i) * binom(d as u128, i as u128) * binom(r as u128 - 1, i as u128 - 1);
    }
    total
}

fn binom(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// The cube `[-k, k]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub d: usize,
    pub k: u32,
}

impl LatticeBox {
    pub fn new(d: usize, k: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("box.d", "dimension must be at least 1"));
        }
        Ok(LatticeBox { d, k })
    }

    pub fn cardinality(&self) -> usize {
        (2 * self.k as usize + 1).pow(self.d as u32)
    }

    pub fn contains(&self, x: &Site) -> bool {
        x.dim() == self.d && x.coords().iter().all(|c| c.unsigned_abs() <= self.k as u64)
    }

    /// Sites of the box in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        let k = self.k as i64;
        let side = (2 * k + 1) as usize;
        let n = self.cardinality();
        let mut out = Vec::with_capacity(n);
        for mut idx in 0..n {
            let mut coords = vec![0i64; self.d];
            for slot in coords.iter_mut().rev() {
                *slot = (idx % side) as i64 - k;
                idx /= side;
            }
            out.push(Site(coords));
        }
        out
    }

    pub fn region(&self) -> Region {
        Region::from_sorted_unique(self.d, self.sites())
    }
}

/// A finite subset of `Z^d` with a fixed (lexicographic) site order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    d: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl Region {
    pub fn from_sites(d: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        if sites.iter().any(|s| s.dim() != d) {
            return Err(Error::Domain(format!("all sites must have dimension {d}")));
        }
        sites.sort();
        sites.dedup();
        Ok(Self::from_sorted_unique(d, sites))
    }

    fn from_sorted_unique(d: usize, sites: Vec<Site>) -> Self {
        let index = sites
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        Region { d, sites, index }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn index_of(&self, x: &Site) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.index.contains_key(x)
    }

    /// `self ∩ (r0 Z)^d`.
    pub fn sublattice(&self, r0: u32) -> Region {
        let r0 = r0.max(1) as i64;
        let sites = self
            .sites
            .iter()
            .filter(|s| s.coords().iter().all(|c| c.rem_euclid(r0) == 0))
            .cloned()
            .collect();
        Self::from_sorted_unique(self.d, sites)
    }

    pub fn minus(&self, other: &Region) -> Region {
        let sites = self
            .sites
            .iter()
            .filter(|s| !other.contains(s))
            .cloned()
            .collect();
        Self::from_sorted_unique(self.d, sites)
    }

    /// Sites outside the region within l1 distance `radius` of it.
    pub fn exterior_shell(&self, radius: u32) -> Vec<Site> {
        let disps = displacements(self.d, 1, radius as u64);
        let mut out: Vec<Site> = self
            .sites
            .iter()
            .flat_map(|x| disps.iter().map(move |v| x.offset(v)))
            .filter(|y| !self.contains(y))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Finite state space `E` with positive weights (the measure `lambda`) and an
/// integer observable `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinSpace {
    labels: Vec<String>,
    weights: Vec<f64>,
    f: Vec<i64>,
}

impl SpinSpace {
    pub fn new(labels: Vec<String>, weights: Vec<f64>, f: Vec<i64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid(
                "spinSpace.labels",
                "need at least one label",
            ));
        }
        if weights.len() != labels.len() {
            return Err(Error::invalid(
                "spinSpace.weights",
                format!("expected {} weights, got {}", labels.len(), weights.len()),
            ));
        }
        if f.len() != labels.len() {
            return Err(Error::invalid(
                "spinSpace.f",
                format!(
                    "expected {} observable values, got {}",
                    labels.len(),
                    f.len()
                ),
            ));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(
                format!("spinSpace.weights[{i}]"),
                "weights must be positive and finite",
            ));
        }
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != labels.len() {
            return Err(Error::invalid(
                "spinSpace.labels",
                "labels must be distinct",
            ));
        }
        Ok(SpinSpace { labels, weights, f })
    }

    /// `E = {+, -}` with counting measure and `f(sigma) = sigma_0`.
    pub fn ising() -> Self {
        SpinSpace::new(vec!["+".into(), "-".into()], vec![1.0, 1.0], vec![1, -1]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn f(&self) -> &[i64] {
        &self.f
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `lambda(E)`.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `||f||`, the sup-norm of the observable.
    pub fn f_norm(&self) -> f64 {
        self.f.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as f64
    }

    /// `lambda(f^2)`.
    pub fn lambda_f2(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.f)
            .map(|(w, v)| w * (*v as f64).powi(2))
            .sum()
    }

    /// `Var_lambda(f) = lambda((f - lambda(f))^2)` with the unnormalised measure.
    pub fn lambda_variance(&self) -> f64 {
        let mean: f64 = self
            .weights
            .iter()
            .zip(&self.f)
            .map(|(w, v)| w * *v as f64)
            .sum();
        self.weights
            .iter()
            .zip(&self.f)
            .map(|(w, v)| w * (*v as f64 - mean).powi(2))
            .sum()
    }

    /// True when `f` takes at least two distinct values (all weights are
    /// positive, so this is `Var_lambda(f) > 0` for a probability `lambda`).
    pub fn is_nondegenerate(&self) -> bool {
        self.f.iter().any(|v| *v != self.f[0])
    }
}

/// Radial profile of a product-form coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "camelCase")]
pub enum Coupling {
    /// `J` at distance 1, `r^(-2+alpha)` beyond.
    LongRangeIsing {
        j: f64,
        alpha: f64,
    },
    /// `amplitude * ratio^r`.
    Geometric {
        amplitude: f64,
        ratio: f64,
    },
    /// `values[r-1]` at distance `r`, zero past the end.
    FiniteRange {
        values: Vec<f64>,
    },
    Zero,
}

/// The long-range Ising coupling: `J` at distance 1 and `r^(-2+alpha)` for `r > 1`.
pub fn coupling_j(distance: u64, j: f64, alpha: f64) -> Result<f64> {
    if distance < 1 {
        return Err(Error::Domain("coupling distance must be at least 1".into()));
    }
    if !(j > 0.0) {
        return Err(Error::Domain(format!("J must be positive, got {j}")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "alpha must lie in [0,1), got {alpha}"
        )));
    }
    Ok(if distance == 1 {
        j
    } else {
        (distance as f64).powf(alpha - 2.0)
    })
}

impl Coupling {
    pub fn at(&self, r: u64) -> f64 {
        match self {
            Coupling::LongRangeIsing { j, alpha } => {
                if r == 0 {
                    0.0
                } else if r == 1 {
                    *j
                } else {
                    (r as f64).powf(alpha - 2.0)
                }
            }
            Coupling::Geometric { amplitude, ratio } => {
                if r == 0 {
                    0.0
                } else {
                    amplitude * ratio.powi(r as i32)
                }
            }
            Coupling::FiniteRange { values } => {
                if r == 0 {
                    0.0
                } else {
                    values.get(r as usize - 1).copied().unwrap_or(0.0)
                }
            }
            Coupling::Zero => 0.0,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Coupling::LongRangeIsing { j, alpha } => {
                if !(*j > 0.0) || !j.is_finite() {
                    return Err(Error::invalid("potential.params.J", "J must be positive"));
                }
                if !(0.0..1.0).contains(alpha) {
                    return Err(Error::invalid(
                        "potential.params.alpha",
                        format!("alpha must lie in [0,1), got {alpha}"),
                    ));
                }
                if d != 1 {
                    return Err(Error::invalid(
                        "potential.family",
                        "the long-range Ising coupling is absolutely summable only for d = 1",
                    ));
                }
            }
            Coupling::Geometric { amplitude, ratio } => {
                if !amplitude.is_finite() {
                    return Err(Error::invalid(
                        "potential.params.amplitude",
                        "must be finite",
                    ));
                }
                if !(0.0..1.0).contains(ratio) {
                    return Err(Error::invalid(
                        "potential.params.ratio",
                        "ratio must lie in [0,1)",
                    ));
                }
            }
            Coupling::FiniteRange { values } => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(
                        "potential.params.values",
                        "values must be finite",
                    ));
                }
            }
            Coupling::Zero => {}
        }
        Ok(())
    }

    /// `sup_{s >= r} |coupling(s)|` for the untruncated profile.
    pub fn sup_beyond(&self, r: u64) -> f64 {
        let r = r.max(1);
        match self {
            Coupling::LongRangeIsing { j, alpha } => {
                let far = (r.max(2) as f64).powf(alpha - 2.0);
                if r == 1 {
                    j.abs().max(far)
                } else {
                    far
                }
            }
            Coupling::Geometric { amplitude, ratio } => amplitude.abs() * ratio.powi(r as i32),
            Coupling::FiniteRange { values } => values
                .iter()
                .skip(r as usize - 1)
                .fold(0.0f64, |m, v| m.max(v.abs())),
            Coupling::Zero => 0.0,
        }
    }
}

/// Remainder of a lattice sum beyond a truncation radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "camelCase")]
pub enum Tail {
    /// The remainder is known exactly.
    Exact(f64),
    /// An analytic upper bound on the remainder.
    Bound(f64),
    Divergent,
    Unavailable,
}

impl Tail {
    /// The value to add on the adverse side of a pessimistic comparison.
    pub fn pessimistic(&self) -> Option<f64> {
        match self {
            Tail::Exact(v) | Tail::Bound(v) => Some(*v),
            Tail::Divergent | Tail::Unavailable => None,
        }
    }

    pub fn scale(self, k: f64) -> Tail {
        match self {
            Tail::Exact(v) => Tail::Exact(v * k),
            Tail::Bound(v) => Tail::Bound(v * k),
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Kernel {
    /// `Phi(x, a, b) = -coupling(|x|) * s_a * s_b`.
    Product { coupling: Coupling, spins: Vec<f64> },
    /// Arbitrary energies per displacement: `entries[x][a][b]`.
    Table {
        entries: BTreeMap<Vec<i64>, Vec<Vec<f64>>>,
    },
}

/// A translation-invariant two-body potential with a computational cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPotential {
    d: usize,
    kernel: Kernel,
    truncation_radius: u32,
}

impl PairPotential {
    pub fn new(d: usize, kernel: Kernel, truncation_radius: u32, n_labels: usize) -> Result<Self> {
        if truncation_radius == 0 {
            return Err(Error::invalid(
                "potential.truncationRadius",
                "must be at least 1",
            ));
        }
        let kernel = match kernel {
            Kernel::Product { coupling, spins } => {
                coupling.validate(d)?;
                if spins.len() != n_labels {
                    return Err(Error::invalid(
                        "potential.spins",
                        format!("expected {n_labels} spin values, got {}", spins.len()),
                    ));
                }
                Kernel::Product { coupling, spins }
            }
            Kernel::Table { entries } => Kernel::Table {
                entries: symmetrize_table(d, entries, n_labels)?,
            },
        };
        Ok(PairPotential {
            d,
            kernel,
            truncation_radius,
        })
    }

    pub fn long_range_ising(j: f64, alpha: f64, truncation_radius: u32) -> Result<Self> {
        Self::new(
            1,
            Kernel::Product {
                coupling: Coupling::LongRangeIsing { j, alpha },
                spins: vec![1.0, -1.0],
            },
            truncation_radius,
            2,
        )
    }

    pub fn product(
        d: usize,
        coupling: Coupling,
        spins: Vec<f64>,
        truncation_radius: u32,
    ) -> Result<Self> {
        let n = spins.len();
        Self::new(d, Kernel::Product { coupling, spins }, truncation_radius, n)
    }

    pub fn zero(d: usize, n_labels: usize, truncation_radius: u32) -> Self {
        Self::new(
            d,
            Kernel::Product {
                coupling: Coupling::Zero,
                spins: vec![0.0; n_labels],
            },
            truncation_radius,
            n_labels,
        )
        .expect("zero potential is always valid")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn truncation_radius(&self) -> u32 {
        self.truncation_radius
    }

    pub fn with_truncation(&self, radius: u32) -> Result<Self> {
        if radius == 0 {
            return Err(Error::invalid(
                "potential.truncationRadius",
                "must be at least 1",
            ));
        }
        let mut p = self.clone();
        p.truncation_radius = radius;
        Ok(p)
    }

    /// Energy of the family itself, ignoring the truncation radius.
    pub fn raw_energy(&self, disp: &[i64], a: usize, b: usize) -> f64 {
        match &self.kernel {
            Kernel::Product { coupling, spins } => {
                -coupling.at(l1_norm(disp)) * spins[a] * spins[b]
            }
            Kernel::Table { entries } => entries.get(disp).map_or(0.0, |m| m[a][b]),
        }
    }

    /// `Phi_{x, x+disp}(a, b)` in the truncated model.
    pub fn energy(&self, disp: &[i64], a: usize, b: usize) -> f64 {
        let r = l1_norm(disp);
        if r == 0 || r > self.truncation_radius as u64 {
            0.0
        } else {
            self.raw_energy(disp, a, b)
        }
    }

    fn max_spin_product(spins: &[f64]) -> f64 {
        let m = spins.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        m * m
    }

    /// `||Phi_{0,disp}||`, the sup-norm over spin pairs (untruncated family).
    pub fn sup_norm(&self, disp: &[i64]) -> f64 {
        match &self.kernel {
            Kernel::Product { coupling, spins } => {
                coupling.at(l1_norm(disp)).abs() * Self::max_spin_product(spins)
            }
            Kernel::Table { entries } => entries.get(disp).map_or(0.0, |m| {
                m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()))
            }),
        }
    }

    /// `max_{a,b} |g(Phi_{0,disp}(a,b))|`, e.g. `g(e) = exp(-beta e) - 1`.
    pub fn sup_over_spins(&self, disp: &[i64], n_labels: usize, g: impl Fn(f64) -> f64) -> f64 {
        let mut m = 0.0f64;
        for a in 0..n_labels {
            for b in 0..n_labels {
                m = m.max(g(self.raw_energy(disp, a, b)).abs());
            }
        }
        m
    }

    /// `sup_{|x| >= r} ||Phi_{x,0}||` for the untruncated family.
    pub fn sup_norm_beyond(&self, r: u64) -> f64 {
        match &self.kernel {
            Kernel::Product { coupling, spins } => {
                coupling.sup_beyond(r) * Self::max_spin_product(spins)
            }
            Kernel::Table { entries } => entries
                .iter()
                .filter(|(k, _)| l1_norm(k) >= r.max(1))
                .map(|(k, _)| self.sup_norm(k))
                .fold(0.0, f64::max),
        }
    }

    /// Largest distance at which the family is non-zero, if finite.
    pub fn range(&self) -> Option<u64> {
        match &self.kernel {
            Kernel::Product { coupling, spins } => {
                if Self::max_spin_product(spins) == 0.0 {
                    return Some(0);
                }
                match coupling {
                    Coupling::Zero => Some(0),
                    Coupling::FiniteRange { values } => Some(
                        values
                            .iter()
                            .rposition(|v| *v != 0.0)
                            .map_or(0, |i| i as u64 + 1),
                    ),
                    Coupling::Geometric { amplitude, ratio } => {
                        if *amplitude == 0.0 || *ratio == 0.0 {
                            Some(0)
                        } else {
                            None
                        }
                    }
                    Coupling::LongRangeIsing { .. } => None,
                }
            }
            Kernel::Table { entries } => Some(
                entries
                    .iter()
                    .filter(|(k, _)| self.sup_norm(k) > 0.0)
                    .map(|(k, _)| l1_norm(k))
                    .max()
                    .unwrap_or(0),
            ),
        }
    }

    /// Remainder bound for `sum_{|y| > radius} g(||Phi_{0,y}||)` where the
    /// per-distance value is a non-decreasing function `g` of the sup-norm
    /// with `g(0) = 0`, given a majorant `g(s) <= slope * s^power`.
    fn tail_of(&self, radius: u64, slope: f64, power: f64) -> Tail {
        if let Some(range) = self.range() {
            if range <= radius {
                return Tail::Exact(0.0);
            }
        }
        match &self.kernel {
            Kernel::Product { coupling, spins } => {
                let s2 = Self::max_spin_product(spins);
                match coupling {
                    Coupling::LongRangeIsing { alpha, .. } => {
                        let exponent = (alpha - 2.0) * power;
                        if exponent >= -1.0 {
                            return Tail::Divergent;
                        }
                        // d = 1: 2 sum_{r>R} r^e <= 2 int_R^inf x^e dx, R >= 1
                        let r = radius.max(1) as f64;
                        let int = r.powf(exponent + 1.0) / (-(exponent + 1.0));
                        Tail::Bound(2.0 * slope * s2.powf(power) * int)
                    }
                    Coupling::Geometric { amplitude, ratio } => {
                        if self.d != 1 {
                            return Tail::Unavailable;
                        }
                        let q = ratio.powf(power);
                        let first = q.powi(radius as i32 + 1);
                        Tail::Bound(
                            2.0 * slope * (amplitude.abs() * s2).powf(power) * first / (1.0 - q),
                        )
                    }
                    Coupling::FiniteRange { values } => {
                        let mut t = 0.0;
                        for (i, v) in values.iter().enumerate() {
                            let r = i as u64 + 1;
                            if r > radius {
                                t += slope
                                    * (v.abs() * s2).powf(power)
                                    * l1_sphere_count(self.d, r) as f64;
                            }
                        }
                        Tail::Bound(t)
                    }
                    Coupling::Zero => Tail::Exact(0.0),
                }
            }
            Kernel::Table { .. } => Tail::Exact(0.0),
        }
    }
}

fn symmetrize_table(
    d: usize,
    entries: BTreeMap<Vec<i64>, Vec<Vec<f64>>>,
    n: usize,
) -> Result<BTreeMap<Vec<i64>, Vec<Vec<f64>>>> {
    let mut out = entries.clone();
    for (disp, m) in &entries {
        let path = format!("potential.table[{disp:?}]");
        if disp.len() != d || l1_norm(disp) == 0 {
            return Err(Error::invalid(
                path,
                "displacement must be a non-zero d-vector",
            ));
        }
        if m.len() != n || m.iter().any(|row| row.len() != n) {
            return Err(Error::invalid(
                path,
                format!("expected a {n}x{n} energy matrix"),
            ));
        }
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(path, "energies must be finite"));
        }
        let neg: Vec<i64> = disp.iter().map(|c| -c).collect();
        let mirrored: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| m[b][a]).collect()).collect();
        match entries.get(&neg) {
            Some(other) => {
                if other != &mirrored {
                    return Err(Error::invalid(
                        path,
                        "kernel must satisfy Phi(x,a,b) = Phi(-x,b,a)",
                    ));
                }
            }
            None => {
                out.insert(neg, mirrored);
            }
        }
    }
    Ok(out)
}

/// Partial sum and analytic tail of `|||Phi|||`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub radius: u64,
    pub partial_sum: f64,
    pub tail: Tail,
}

impl NormReport {
    /// `partial + tail` when the tail is known, `+inf` otherwise.
    pub fn pessimistic(&self) -> f64 {
        self.tail
            .pessimistic()
            .map_or(f64::INFINITY, |t| self.partial_sum + t)
    }
}

/// `sum_{0 < |y| <= radius} ||Phi_{0,y}||` with the family's analytic tail.
pub fn potential_norm(phi: &PairPotential, radius: u64) -> NormReport {
    let partial_sum = displacements(phi.d, 1, radius)
        .iter()
        .map(|v| phi.sup_norm(v))
        .sum();
    NormReport {
        radius,
        partial_sum,
        tail: phi.tail_of(radius, 1.0, 1.0),
    }
}

/// Tail of `sum_{|y| > radius} sup |exp(-beta Phi) - 1|`, using
/// `|e^u - 1| <= |u| e^|u|` and the decay of the family beyond `radius`.
pub(crate) fn boltzmann_defect_tail(phi: &PairPotential, radius: u64, beta: f64) -> Tail {
    let far = phi.sup_norm_beyond(radius + 1);
    phi.tail_of(radius, 1.0, 1.0)
        .scale(beta * (beta * far).exp())
}

pub(crate) fn sqrt_norm_tail(phi: &PairPotential, radius: u64) -> Tail {
    phi.tail_of(radius, 1.0, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub radius: u64,
    /// `sum_{0 < |x| <= radius} ||Phi_{x,0}||^(1/2)`
    pub sqrt_partial_sum: f64,
    /// `sup_{|x| >= radius} ||Phi_{x,0}||`
    pub tail_sup: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Summability {
    Convergent,
    Divergent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaninoProbe {
    pub rows: Vec<ProbeRow>,
    /// Verdict from the family's closed form, when it has one.
    pub analytic: Option<Summability>,
    /// Log-log growth exponent of the partial sums fitted over the radii;
    /// negative means the increments shrink faster than `1/R`.
    pub fitted_growth_exponent: Option<f64>,
    pub sqrt_series_converges: bool,
    pub tail_sup_positive: bool,
    pub condition_holds: bool,
}

/// Probes the square-root summability and infinite-range requirement on a
/// potential over increasing radii.
pub fn campanino_condition_probe(phi: &PairPotential, radii: &[u64]) -> Result<CampaninoProbe> {
    if radii.is_empty() {
        return Err(Error::Precondition("radii must be non-empty".into()));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) || radii[0] == 0 {
        return Err(Error::Precondition(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    let max_r = *radii.last().unwrap();
    let mut shell: BTreeMap<u64, f64> = BTreeMap::new();
    for v in displacements(phi.d, 1, max_r) {
        *shell.entry(l1_norm(&v)).or_default() += phi.sup_norm(&v).sqrt();
    }
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let sqrt_partial_sum = shell.range(..=r).map(|(_, v)| v).sum();
        rows.push(ProbeRow {
            radius: r,
            sqrt_partial_sum,
            tail_sup: phi.sup_norm_beyond(r),
        });
    }

    let analytic = match phi.tail_of(max_r, 1.0, 0.5) {
        Tail::Divergent => Some(Summability::Divergent),
        Tail::Exact(_) | Tail::Bound(_) => Some(Summability::Convergent),
        Tail::Unavailable => None,
    };

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in rows.windows(2) {
        let inc = w[1].sqrt_partial_sum - w[0].sqrt_partial_sum;
        let density = inc / (w[1].radius - w[0].radius) as f64;
        if density > 0.0 {
            xs.push(((w[0].radius + w[1].radius) as f64 / 2.0).ln());
            ys.push(density.ln());
        }
    }
    let fitted_growth_exponent = if xs.len() >= 2 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx + 1.0)
    } else {
        None
    };

    let sqrt_series_converges = match analytic {
        Some(v) => v == Summability::Convergent,
        // No increments at all means the sum is already exhausted.
        None => fitted_growth_exponent.map_or(xs.is_empty(), |g| g < 0.0),
    };
    let tail_sup_positive = phi.range().is_none() && rows.iter().all(|r| r.tail_sup > 0.0);
    Ok(CampaninoProbe {
        rows,
        analytic,
        fitted_growth_exponent,
        sqrt_series_converges,
        tail_sup_positive,
        condition_holds: sqrt_series_converges && tail_sup_positive,
    })
}

/// How interior pairs are counted in the Hamiltonian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PairConvention {
    /// Each unordered pair `{x,y}` inside the volume contributes once.
    #[default]
    Unordered,
    /// Sum over ordered pairs `x != y`: interior pairs contribute twice.
    Ordered,
}

impl PairConvention {
    pub fn interior_factor(self) -> f64 {
        match self {
            PairConvention::Unordered => 1.0,
            PairConvention::Ordered => 2.0,
        }
    }
}

/// A spin space together with a pair potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub spins: SpinSpace,
    pub potential: PairPotential,
    pub convention: PairConvention,
}

impl Model {
    pub fn new(
        spins: SpinSpace,
        potential: PairPotential,
        convention: PairConvention,
    ) -> Result<Self> {
        if let Kernel::Product { spins: s, .. } = potential.kernel() {
            if s.len() != spins.len() {
                return Err(Error::invalid(
                    "potential.spins",
                    format!("expected {} spin values, got {}", spins.len(), s.len()),
                ));
            }
        }
        Ok(Model {
            spins,
            potential,
            convention,
        })
    }

    /// One-dimensional long-range Ising model with `f = sigma_0`.
    pub fn long_range_ising(j: f64, alpha: f64, truncation_radius: u32) -> Result<Self> {
        Model::new(
            SpinSpace::ising(),
            PairPotential::long_range_ising(j, alpha, truncation_radius)?,
            PairConvention::Unordered,
        )
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn n_labels(&self) -> usize {
        self.spins.len()
    }
}

/// Exterior spins seen by a finite volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "camelCase")]
pub enum BoundaryCondition {
    /// All exterior terms dropped.
    Free,
    /// Every exterior site carries the same label.
    Constant { label: usize },
    /// Labels listed per site; a needed site missing from the map is an error.
    Explicit { spins: BTreeMap<Site, usize> },
    /// `inner` on the listed sites, `outer` everywhere else.
    Composite {
        inner: BTreeMap<Site, usize>,
        outer: Box<BoundaryCondition>,
    },
}

impl BoundaryCondition {
    /// Label at an exterior site, `None` when the rule drops the term.
    pub fn spin_at(&self, y: &Site) -> Result<Option<usize>> {
        match self {
            BoundaryCondition::Free => Ok(None),
            BoundaryCondition::Constant { label } => Ok(Some(*label)),
            BoundaryCondition::Explicit { spins } => spins
                .get(y)
                .map(|l| Some(*l))
                .ok_or_else(|| Error::BoundaryUndefined(y.clone())),
            BoundaryCondition::Composite { inner, outer } => match inner.get(y) {
                Some(l) => Ok(Some(*l)),
                None => outer.spin_at(y),
            },
        }
    }

    pub fn translated(&self, shift: &[i64]) -> BoundaryCondition {
        let mv = |m: &BTreeMap<Site, usize>| m.iter().map(|(s, l)| (s.offset(shift), *l)).collect();
        match self {
            BoundaryCondition::Explicit { spins } => {
                BoundaryCondition::Explicit { spins: mv(spins) }
            }
            BoundaryCondition::Composite { inner, outer } => BoundaryCondition::Composite {
                inner: mv(inner),
                outer: Box::new(outer.translated(shift)),
            },
            other => other.clone(),
        }
    }

    fn max_label(&self) -> Option<usize> {
        match self {
            BoundaryCondition::Free => None,
            BoundaryCondition::Constant { label } => Some(*label),
            BoundaryCondition::Explicit { spins } => spins.values().copied().max(),
            BoundaryCondition::Composite { inner, outer } => {
                inner.values().copied().max().max(outer.max_label())
            }
        }
    }
}

/// One interior pair with its energy matrix `energy[a * n + b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub energy: Vec<f64>,
}

/// A model compiled onto a region with a fixed boundary condition: interior
/// pair energies plus the exterior field `h_x(e)`.
#[derive(Clone, Debug)]
pub struct Interaction {
    pub n_sites: usize,
    pub n_labels: usize,
    pub pairs: Vec<PairTerm>,
    /// `field[x][e] = sum_{y outside, |y-x| <= R} Phi(e, omega_y)`.
    pub field: Vec<Vec<f64>>,
    /// For each site, `(other site, pair index)`.
    pub neighbors: Vec<Vec<(usize, usize)>>,
    pub f: Vec<i64>,
    pub ln_weight: Vec<f64>,
    pair_lookup: HashMap<(usize, usize), usize>,
}

impl Interaction {
    pub fn compile(model: &Model, region: &Region, bc: &BoundaryCondition) -> Result<Self> {
        let d = model.dim();
        if region.dim() != d {
            return Err(Error::Domain(format!(
                "region dimension {} does not match potential dimension {d}",
                region.dim()
            )));
        }
        let n = model.n_labels();
        if let Some(l) = bc.max_label() {
            if l >= n {
                return Err(Error::invalid(
                    "boundary",
                    format!("label index {l} out of range"),
                ));
            }
        }
        let phi = &model.potential;
        let factor = model.convention.interior_factor();
        let disps = displacements(d, 1, phi.truncation_radius() as u64);

        let mut pairs = Vec::new();
        let mut field = vec![vec![0.0; n]; region.len()];
        for (i, x) in region.sites().iter().enumerate() {
            for v in &disps {
                let y = x.offset(v);
                match region.index_of(&y) {
                    Some(j) if j > i => {
                        let mut energy = vec![0.0; n * n];
                        for a in 0..n {
                            for b in 0..n {
                                energy[a * n + b] = factor * phi.energy(v, a, b);
                            }
                        }
                        if energy.iter().any(|e| *e != 0.0) {
                            pairs.push(PairTerm { i, j, energy });
                        }
                    }
                    Some(_) => {}
                    None => {
                        if let Some(w) = bc.spin_at(&y)? {
                            for (e, h) in field[i].iter_mut().enumerate() {
                                *h += phi.energy(v, e, w);
                            }
                        }
                    }
                }
            }
        }
        pairs.sort_by_key(|p| (p.i, p.j));
        let mut neighbors = vec![Vec::new(); region.len()];
        let mut pair_lookup = HashMap::with_capacity(pairs.len());
        for (k, p) in pairs.iter().enumerate() {
            neighbors[p.i].push((p.j, k));
            neighbors[p.j].push((p.i, k));
            pair_lookup.insert((p.i, p.j), k);
        }
        Ok(Interaction {
            n_sites: region.len(),
            n_labels: n,
            pairs,
            field,
            neighbors,
            f: model.spins.f().to_vec(),
            ln_weight: model.spins.weights().iter().map(|w| w.ln()).collect(),
            pair_lookup,
        })
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairTerm> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pair_lookup.get(&key).map(|k| &self.pairs[*k])
    }

    /// Energy of pair `k` seen from `site` carrying `a` against `b`.
    #[inline]
    pub fn pair_energy_from(&self, k: usize, site: usize, a: usize, b: usize) -> f64 {
        let p = &self.pairs[k];
        if p.i == site {
            p.energy[a * self.n_labels + b]
        } else {
            p.energy[b * self.n_labels + a]
        }
    }

    pub fn energy(&self, sigma: &[usize]) -> f64 {
        let n = self.n_labels;
        let mut e = 0.0;
        for p in &self.pairs {
            e += p.energy[sigma[p.i] * n + sigma[p.j]];
        }
        for (x, s) in sigma.iter().enumerate() {
            e += self.field[x][*s];
        }
        e
    }

    /// Change of energy when site `x` moves from `sigma[x]` to `new`.
    pub fn delta_energy(&self, sigma: &[usize], x: usize, new: usize) -> f64 {
        let old = sigma[x];
        let mut de = self.field[x][new] - self.field[x][old];
        for &(y, k) in &self.neighbors[x] {
            de += self.pair_energy_from(k, x, new, sigma[y])
                - self.pair_energy_from(k, x, old, sigma[y]);
        }
        de
    }

    pub fn sk(&self, sigma: &[usize]) -> i64 {
        sigma.iter().map(|s| self.f[*s]).sum()
    }
}

/// `H_Lambda^omega(sigma)`: interior pairs per the model's convention plus
/// all exterior terms within the truncation radius.
pub fn hamiltonian(
    model: &Model,
    region: &Region,
    sigma: &[usize],
    bc: &BoundaryCondition,
) -> Result<f64> {
    if sigma.len() != region.len() {
        return Err(Error::IncompleteConfiguration {
            expected: region.len(),
            got: sigma.len(),
        });
    }
    if let Some(s) = sigma.iter().find(|s| **s >= model.n_labels()) {
        return Err(Error::Domain(format!("spin label index {s} out of range")));
    }
    Ok(Interaction::compile(model, region, bc)?.energy(sigma))
}
