//! Bonds, polymers, polymer enumeration and the activity functions of the
//! high-temperature expansion.
//!
//! Sites are referred to by their index in a [`Region`]. Only supports inside
//! the region are ever generated.

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, saturating_pow, Error, Result};
use crate::model::{BoundaryCondition, Interaction, Model, Region, Site};

pub const DEFAULT_ACTIVITY_BUDGET: u128 = 1 << 20;
pub const DEFAULT_POLYMER_BUDGET: usize = 1 << 22;

/// A singleton `{i}` or a pair `{i, j}` with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bond {
    Single(usize),
    Pair(usize, usize),
}

impl Bond {
    pub fn pair(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "a pair bond needs two distinct sites");
        Bond::Pair(a.min(b), a.max(b))
    }

    fn key(&self) -> (usize, usize, usize) {
        match *self {
            Bond::Single(i) => (i, 0, 0),
            Bond::Pair(i, j) => (i, 1, j),
        }
    }

    pub fn contains(&self, x: usize) -> bool {
        match *self {
            Bond::Single(i) => i == x,
            Bond::Pair(i, j) => i == x || j == x,
        }
    }

    pub fn intersects(&self, other: &Bond) -> bool {
        match *other {
            Bond::Single(i) => self.contains(i),
            Bond::Pair(i, j) => self.contains(i) || self.contains(j),
        }
    }

    pub fn is_single(&self) -> bool {
        matches!(self, Bond::Single(_))
    }

    fn push_sites(&self, out: &mut Vec<usize>) {
        match *self {
            Bond::Single(i) => out.push(i),
            Bond::Pair(i, j) => {
                out.push(i);
                out.push(j);
            }
        }
    }
}

impl Ord for Bond {
    /// Lexicographic on the sorted site list: `{0} < {0,1} < {1}`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Bond {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// True iff every two bonds are joined by a chain of intersecting bonds.
pub fn is_connected(bonds: &[Bond]) -> Result<bool> {
    if bonds.is_empty() {
        return Err(Error::Precondition(
            "connectivity of an empty bond set".into(),
        ));
    }
    let mut seen = vec![false; bonds.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(a) = queue.pop_front() {
        for b in 0..bonds.len() {
            if !seen[b] && bonds[a].intersects(&bonds[b]) {
                seen[b] = true;
                reached += 1;
                queue.push_back(b);
            }
        }
    }
    Ok(reached == bonds.len())
}

/// A connected set of bonds. The empty polymer is allowed only as the
/// argument of the hat activity, where it has value 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Polymer {
    bonds: Vec<Bond>,
    support: Vec<usize>,
}

impl Polymer {
    pub fn new(mut bonds: Vec<Bond>) -> Result<Self> {
        bonds.sort();
        bonds.dedup();
        if !bonds.is_empty() && !is_connected(&bonds)? {
            return Err(Error::Domain("bond set is not connected".into()));
        }
        Ok(Self::from_sorted(bonds))
    }

    pub fn empty() -> Self {
        Polymer {
            bonds: Vec::new(),
            support: Vec::new(),
        }
    }

    pub fn single(x: usize) -> Self {
        Self::from_sorted(vec![Bond::Single(x)])
    }

    fn from_sorted(bonds: Vec<Bond>) -> Self {
        let mut support = Vec::with_capacity(bonds.len() * 2);
        for b in &bonds {
            b.push_sites(&mut support);
        }
        support.sort_unstable();
        support.dedup();
        Polymer { bonds, support }
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// `R~`, sorted.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    pub fn gamma1(&self) -> Vec<Bond> {
        self.bonds
            .iter()
            .filter(|b| b.is_single())
            .copied()
            .collect()
    }

    pub fn gamma2(&self) -> Vec<Bond> {
        self.bonds
            .iter()
            .filter(|b| !b.is_single())
            .copied()
            .collect()
    }

    /// The pair-bond part as a polymer (connected whenever `|R~| >= 2`).
    pub fn gamma2_polymer(&self) -> Polymer {
        Self::from_sorted(self.gamma2())
    }

    pub fn n_singles(&self) -> usize {
        self.bonds.iter().filter(|b| b.is_single()).count()
    }

    /// Membership in the pair-only family.
    pub fn is_pair_only(&self) -> bool {
        self.bonds.iter().all(|b| !b.is_single())
    }

    pub fn intersects(&self, other: &Polymer) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.support.len() && j < other.support.len() {
            match self.support[i].cmp(&other.support[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn support_mask(&self) -> u64 {
        self.support.iter().fold(0u64, |m, x| m | (1u64 << x))
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        let a = self.support.first().copied().unwrap_or(usize::MAX);
        let b = other.support.first().copied().unwrap_or(usize::MAX);
        a.cmp(&b)
            .then(self.bonds.len().cmp(&other.bonds.len()))
            .then_with(|| self.bonds.cmp(&other.bonds))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Cutoffs {
    pub max_bonds: usize,
    /// Largest l1 distance of a pair bond.
    pub max_pair_range: u64,
    /// Pair bonds only.
    pub restrict_to_r2: bool,
}

/// All bonds inside the region allowed by the cutoffs, in bond order.
pub fn bond_universe(region: &Region, max_pair_range: u64, restrict_to_r2: bool) -> Vec<Bond> {
    let n = region.len();
    let mut bonds = Vec::new();
    for i in 0..n {
        if !restrict_to_r2 {
            bonds.push(Bond::Single(i));
        }
        for j in i + 1..n {
            if region.site(i).distance(region.site(j)) <= max_pair_range {
                bonds.push(Bond::Pair(i, j));
            }
        }
    }
    bonds.sort();
    bonds
}

/// Every connected bond set within the cutoffs, each exactly once, sorted by
/// (minimal support site, number of bonds, bond list).
pub fn enumerate_polymers(
    region: &Region,
    truncation_radius: u32,
    cutoffs: Cutoffs,
) -> Result<Vec<Polymer>> {
    enumerate_polymers_with_budget(region, truncation_radius, cutoffs, DEFAULT_POLYMER_BUDGET)
}

pub fn enumerate_polymers_with_budget(
    region: &Region,
    truncation_radius: u32,
    cutoffs: Cutoffs,
    budget: usize,
) -> Result<Vec<Polymer>> {
    if cutoffs.max_bonds == 0 {
        return Err(Error::invalid("cutoffs.maxBonds", "must be at least 1"));
    }
    if cutoffs.max_pair_range > truncation_radius as u64 {
        return Err(Error::invalid(
            "cutoffs.maxPairRange",
            format!("must not exceed the truncation radius {truncation_radius}"),
        ));
    }
    let universe = bond_universe(region, cutoffs.max_pair_range, cutoffs.restrict_to_r2);
    let m = universe.len();
    let adj: Vec<Vec<usize>> = (0..m)
        .map(|a| {
            (0..m)
                .filter(|&b| b != a && universe[a].intersects(&universe[b]))
                .collect()
        })
        .collect();

    let mut out: Vec<Polymer> = Vec::new();
    let mut in_sub = vec![false; m];
    let mut near = vec![0u32; m]; // number of chosen bonds adjacent to each bond
    let mut sub = Vec::with_capacity(cutoffs.max_bonds);

    struct Ctx<'a> {
        universe: &'a [Bond],
        adj: &'a [Vec<usize>],
        max: usize,
        budget: usize,
    }

    // Connected-set enumeration in the style of ESU: each set is produced
    // once, from its smallest bond `root`.
    #[allow(clippy::too_many_arguments)]
    fn extend(
        ctx: &Ctx,
        root: usize,
        sub: &mut Vec<usize>,
        ext: Vec<usize>,
        in_sub: &mut [bool],
        near: &mut [u32],
        out: &mut Vec<Polymer>,
    ) -> Result<()> {
        let mut bonds: Vec<Bond> = sub.iter().map(|i| ctx.universe[*i]).collect();
        bonds.sort();
        out.push(Polymer::from_sorted(bonds));
        if out.len() > ctx.budget {
            return Err(Error::Budget {
                what: "polymers",
                needed: out.len() as u128,
                budget: ctx.budget as u128,
            });
        }
        if sub.len() == ctx.max {
            return Ok(());
        }
        let mut ext = ext;
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for &u in &ctx.adj[w] {
                if u > root && !in_sub[u] && near[u] == 0 && !next.contains(&u) {
                    next.push(u);
                }
            }
            sub.push(w);
            in_sub[w] = true;
            for &u in &ctx.adj[w] {
                near[u] += 1;
            }
            extend(ctx, root, sub, next, in_sub, near, out)?;
            for &u in &ctx.adj[w] {
                near[u] -= 1;
            }
            in_sub[w] = false;
            sub.pop();
        }
        Ok(())
    }

    let ctx = Ctx {
        universe: &universe,
        adj: &adj,
        max: cutoffs.max_bonds,
        budget,
    };
    for root in 0..m {
        sub.push(root);
        in_sub[root] = true;
        for &u in &adj[root] {
            near[u] += 1;
        }
        let ext: Vec<usize> = adj[root].iter().copied().filter(|&u| u > root).collect();
        extend(&ctx, root, &mut sub, ext, &mut in_sub, &mut near, &mut out)?;
        for &u in &adj[root] {
            near[u] -= 1;
        }
        in_sub[root] = false;
        sub.pop();
    }
    out.sort_by(|a, b| a.canonical_cmp(b));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "camelCase")]
pub enum ActivityKind {
    /// `zeta^t`
    ZetaT,
    /// `zeta-hat`, pair bonds with `|xi|`
    ZetaHat,
    /// `e^{c |R~|} zeta-hat`
    EtaC(f64),
    /// `zeta-tilde^t`, per-site phase on every support site
    ZetaTilde,
}

impl ActivityKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActivityKind::ZetaT => "zeta_t",
            ActivityKind::ZetaHat => "zeta_hat",
            ActivityKind::EtaC(_) => "eta_c",
            ActivityKind::ZetaTilde => "zeta_tilde",
        }
    }
}

/// Everything the activities depend on: the compiled interaction on the
/// region with its boundary condition, `beta`, `t` and `D_k`.
#[derive(Clone, Debug)]
pub struct ActivityContext {
    region: Region,
    beta: f64,
    t: f64,
    d_k: Option<f64>,
    interaction: Interaction,
    /// Single-site probability masses `p_x(e) lambda(e)`.
    q: Vec<Vec<f64>>,
    /// `ln sum_e lambda(e) exp(-beta h_x(e))`
    log_norm: Vec<f64>,
    budget: u128,
}

impl ActivityContext {
    pub fn new(
        model: &Model,
        region: &Region,
        beta: f64,
        bc: &BoundaryCondition,
        t: f64,
        d_k: Option<f64>,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Domain(format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        if let Some(d) = d_k {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Precondition(format!(
                    "D_k must be positive, got {d}"
                )));
            }
        }
        if t != 0.0 && d_k.is_none() {
            return Err(Error::Precondition("D_k is required when t != 0".into()));
        }
        let interaction = Interaction::compile(model, region, bc)?;
        let mut q = Vec::with_capacity(region.len());
        let mut log_norm = Vec::with_capacity(region.len());
        for h in &interaction.field {
            let logs: Vec<f64> = h
                .iter()
                .zip(&interaction.ln_weight)
                .map(|(h, lw)| lw - beta * h)
                .collect();
            let ln_z = crate::gibbs::log_sum_exp(&logs);
            q.push(logs.iter().map(|l| (l - ln_z).exp()).collect());
            log_norm.push(ln_z);
        }
        Ok(ActivityContext {
            region: region.clone(),
            beta,
            t,
            d_k,
            interaction,
            q,
            log_norm,
            budget: DEFAULT_ACTIVITY_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn d_k(&self) -> Option<f64> {
        self.d_k
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn n_labels(&self) -> usize {
        self.interaction.n_labels
    }

    /// `t / sqrt(D_k)`, zero when `t = 0`.
    pub fn u(&self) -> f64 {
        match self.d_k {
            Some(d) if self.t != 0.0 => self.t / d.sqrt(),
            _ => 0.0,
        }
    }

    /// Probability of each label under `p_x`, i.e. `p_x(e) lambda(e)`.
    pub fn single_site_density(&self, x: usize) -> &[f64] {
        &self.q[x]
    }

    pub fn single_site_density_at(&self, x: &Site) -> Result<&[f64]> {
        let i = self
            .region
            .index_of(x)
            .ok_or_else(|| Error::Domain(format!("site {x} is not in the region")))?;
        Ok(&self.q[i])
    }

    /// `ln prod_x sum_e lambda(e) exp(-beta h_x(e))`
    pub fn log_normalizer(&self) -> f64 {
        crate::gibbs::stable_sum(self.log_norm.iter().copied())
    }

    pub fn site_log_normalizer(&self, x: usize) -> f64 {
        self.log_norm[x]
    }

    /// `xi_{x}(e) = exp(i u f(e)) - 1`
    pub fn xi_single(&self, e: usize) -> Complex64 {
        let arg = self.u() * self.interaction.f[e] as f64;
        Complex64::new(arg.cos() - 1.0, arg.sin())
    }

    pub fn phase(&self, e: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.u() * self.interaction.f[e] as f64)
    }

    /// `xi_{x,y}(a, b) = exp(-beta Phi(a, b)) - 1`, indexed `[a * n + b]`
    /// with `a` the label at `min(x, y)`. All zero when the pair does not
    /// interact.
    pub fn xi_pair(&self, x: usize, y: usize) -> Vec<f64> {
        let n = self.n_labels();
        match self.interaction.pair(x, y) {
            Some(p) => p.energy.iter().map(|e| (-self.beta * e).exp_m1()).collect(),
            None => vec![0.0; n * n],
        }
    }

    /// `E_x(exp(i u f))` under `p_x`.
    pub fn site_charfn(&self, x: usize) -> Complex64 {
        self.q[x]
            .iter()
            .enumerate()
            .map(|(e, p)| self.phase(e) * p)
            .sum()
    }

    pub fn activity(&self, r: &Polymer, kind: ActivityKind) -> Result<Complex64> {
        let pair_only = r.is_pair_only();
        match kind {
            ActivityKind::ZetaT => {
                if r.is_empty() {
                    return Err(Error::KindMismatch {
                        kind: kind.name(),
                        reason: "the empty polymer has no activity".into(),
                    });
                }
            }
            _ => {
                if !pair_only {
                    return Err(Error::KindMismatch {
                        kind: kind.name(),
                        reason: "polymer contains singleton bonds".into(),
                    });
                }
                if r.is_empty() {
                    return match kind {
                        ActivityKind::ZetaHat | ActivityKind::EtaC(_) => {
                            Ok(Complex64::new(1.0, 0.0))
                        }
                        _ => Err(Error::KindMismatch {
                            kind: kind.name(),
                            reason: "the empty polymer has no activity".into(),
                        }),
                    };
                }
            }
        }
        let support = r.support();
        let n = self.n_labels();
        check_budget(
            "activity states",
            saturating_pow(n, support.len()),
            self.budget,
        )?;
        let pos = |x: usize| support.binary_search(&x).unwrap();

        let hat = matches!(kind, ActivityKind::ZetaHat | ActivityKind::EtaC(_));
        let pairs: Vec<(usize, usize, Vec<f64>)> = r
            .bonds()
            .iter()
            .filter_map(|b| match *b {
                Bond::Pair(i, j) => {
                    let mut xi = self.xi_pair(i, j);
                    if hat {
                        xi.iter_mut().for_each(|v| *v = v.abs());
                    }
                    Some((pos(i), pos(j), xi))
                }
                Bond::Single(_) => None,
            })
            .collect();
        if pairs.iter().any(|(_, _, xi)| xi.iter().all(|v| *v == 0.0)) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let singles: Vec<usize> = r
            .bonds()
            .iter()
            .filter_map(|b| match *b {
                Bond::Single(i) => Some(pos(i)),
                Bond::Pair(..) => None,
            })
            .collect();
        let xi1: Vec<Complex64> = (0..n).map(|e| self.xi_single(e)).collect();
        if !singles.is_empty() && xi1.iter().all(|z| z.norm() == 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let site_factor: Vec<Vec<Complex64>> = support
            .iter()
            .map(|&x| {
                (0..n)
                    .map(|e| {
                        let p = Complex64::new(self.q[x][e], 0.0);
                        if matches!(kind, ActivityKind::ZetaTilde) {
                            p * self.phase(e)
                        } else {
                            p
                        }
                    })
                    .collect()
            })
            .collect();

        let m = support.len();
        let total = n.pow(m as u32);
        let mut sigma = vec![0usize; m];
        let mut acc = Complex64::new(0.0, 0.0);
        for idx in 0..total {
            crate::gibbs::decode_config(idx, m, n, &mut sigma);
            let mut w = Complex64::new(1.0, 0.0);
            for (k, s) in sigma.iter().enumerate() {
                w *= site_factor[k][*s];
            }
            for (a, b, xi) in &pairs {
                w *= xi[sigma[*a] * n + sigma[*b]];
            }
            for &a in &singles {
                w *= xi1[sigma[a]];
            }
            acc += w;
        }
        if let ActivityKind::EtaC(c) = kind {
            acc *= (c * m as f64).exp();
        }
        Ok(acc)
    }
}

/// Polymer listing for debugging exports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolymerRecord {
    pub sites: Vec<Site>,
    pub bonds: Vec<Vec<Site>>,
    /// `kind -> [re, im]`; kinds not applicable to the polymer are omitted.
    pub activities: BTreeMap<String, [f64; 2]>,
}

pub fn export_polymers(
    ctx: &ActivityContext,
    polymers: &[Polymer],
    kinds: &[ActivityKind],
) -> Result<Vec<PolymerRecord>> {
    polymers
        .iter()
        .map(|r| {
            let site = |i: usize| ctx.region().site(i).clone();
            let mut activities = BTreeMap::new();
            for k in kinds {
                match ctx.activity(r, *k) {
                    Ok(z) => {
                        activities.insert(k.name().to_string(), [z.re, z.im]);
                    }
                    Err(Error::KindMismatch { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(PolymerRecord {
                sites: r.support().iter().map(|i| site(*i)).collect(),
                bonds: r
                    .bonds()
                    .iter()
                    .map(|b| match *b {
                        Bond::Single(i) => vec![site(i)],
                        Bond::Pair(i, j) => vec![site(i), site(j)],
                    })
                    .collect(),
                activities,
            })
        })
        .collect()
}
