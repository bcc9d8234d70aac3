//! Intersection graphs, Ursell functions, polymer partition functions and the
//! truncated cluster series for `log Xi`.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, saturating_pow, Error, Result};
use crate::gibbs::{decode_config, ExactGibbs};
use crate::model::{BoundaryCondition, Model, Region};
use crate::polymer::{ActivityContext, ActivityKind, Polymer};
use crate::unionfind::UnionFind;

pub const URSELL_EDGE_BUDGET: usize = 24;
pub const DEFAULT_FAMILY_BUDGET: u128 = 1 << 24;
pub const DEFAULT_TUPLE_BUDGET: u128 = 1 << 28;

/// Graph on `0..n` joining tuple entries whose supports meet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl IntersectionGraph {
    pub fn of(polymers: &[&Polymer]) -> Self {
        let n = polymers.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if polymers[i].intersects(polymers[j]) {
                    edges.push((i, j));
                }
            }
        }
        IntersectionGraph { n, edges }
    }

    pub fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.n);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        self.n <= 1 || uf.components() == 1
    }

    /// `sum over connected spanning subgraphs G of (-1)^{e(G)}`.
    pub fn signed_connected_count(&self) -> Result<i64> {
        if self.n <= 1 {
            return Ok(1);
        }
        let e = self.edges.len();
        if e > URSELL_EDGE_BUDGET {
            return Err(Error::Budget {
                what: "intersection graph edges",
                needed: e as u128,
                budget: URSELL_EDGE_BUDGET as u128,
            });
        }
        if !self.is_connected() {
            return Ok(0);
        }
        let mut total: i64 = 0;
        for mask in 0u32..(1u32 << e) {
            if (mask.count_ones() as usize) < self.n - 1 {
                continue;
            }
            let mut uf = UnionFind::new(self.n);
            for (k, &(a, b)) in self.edges.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    uf.union(a, b);
                }
            }
            if uf.components() == 1 {
                total += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
            }
        }
        Ok(total)
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// The Ursell function of an ordered tuple, exactly.
pub fn ursell(polymers: &[Polymer]) -> Result<BigRational> {
    if polymers.is_empty() {
        return Err(Error::Precondition(
            "Ursell function of an empty tuple".into(),
        ));
    }
    if polymers.len() == 1 {
        return Ok(BigRational::one());
    }
    let refs: Vec<&Polymer> = polymers.iter().collect();
    let g = IntersectionGraph::of(&refs);
    let count = g.signed_connected_count()?;
    if count == 0 {
        return Ok(BigRational::zero());
    }
    Ok(BigRational::new(
        BigInt::from(count),
        factorial(polymers.len()),
    ))
}

/// Signed connected-subgraph counts keyed by `(n, edge mask over the
/// complete graph on n vertices)`.
#[derive(Default)]
struct UrsellCache {
    table: Mutex<HashMap<(usize, u64), i64>>,
}

impl UrsellCache {
    fn count(&self, polymers: &[&Polymer]) -> Result<i64> {
        let n = polymers.len();
        let mut mask = 0u64;
        let mut bit = 0;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if polymers[i].intersects(polymers[j]) {
                    mask |= 1 << bit;
                    edges.push((i, j));
                }
                bit += 1;
            }
        }
        if let Some(v) = self.table.lock().unwrap().get(&(n, mask)) {
            return Ok(*v);
        }
        let v = IntersectionGraph { n, edges }.signed_connected_count()?;
        self.table.lock().unwrap().insert((n, mask), v);
        Ok(v)
    }
}

fn region_mask_guard(region: &Region) -> Result<()> {
    if region.len() > 62 {
        return Err(Error::Precondition(
            "polymer partition functions support at most 62 sites".into(),
        ));
    }
    Ok(())
}

/// `Xi = sum over families of pairwise disjoint supports of prod W(S)`,
/// where `W` maps support masks to the summed activity of all polymers with
/// that support.
pub fn xi_from_support_weights(
    weights: &HashMap<u64, Complex64>,
    budget: u128,
) -> Result<Complex64> {
    let universe = weights.keys().fold(0u64, |m, s| m | s);
    check_budget(
        "disjoint-family states",
        1u128 << universe.count_ones(),
        budget,
    )?;
    let mut by_low: HashMap<u32, Vec<(u64, Complex64)>> = HashMap::new();
    for (s, w) in weights {
        if *s != 0 && (w.re != 0.0 || w.im != 0.0) {
            by_low.entry(s.trailing_zeros()).or_default().push((*s, *w));
        }
    }
    for v in by_low.values_mut() {
        v.sort_by_key(|(s, _)| *s);
    }
    let mut memo: HashMap<u64, Complex64> = HashMap::new();
    fn rec(
        v: u64,
        by_low: &HashMap<u32, Vec<(u64, Complex64)>>,
        memo: &mut HashMap<u64, Complex64>,
    ) -> Complex64 {
        if v == 0 {
            return Complex64::new(1.0, 0.0);
        }
        if let Some(x) = memo.get(&v) {
            return *x;
        }
        let low = v.trailing_zeros();
        let rest = v & !(1u64 << low);
        let mut acc = rec(rest, by_low, memo);
        if let Some(list) = by_low.get(&low) {
            for (s, w) in list {
                if s & !v == 0 {
                    acc += w * rec(v & !s, by_low, memo);
                }
            }
        }
        memo.insert(v, acc);
        acc
    }
    Ok(rec(universe, &by_low, &mut memo))
}

/// `Xi` for an explicit polymer family and activity kind.
pub fn polymer_partition_function(
    ctx: &ActivityContext,
    polymers: &[Polymer],
    kind: ActivityKind,
) -> Result<Complex64> {
    region_mask_guard(ctx.region())?;
    let mut weights: HashMap<u64, Complex64> = HashMap::new();
    let acts: Vec<Result<Complex64>> = polymers.par_iter().map(|r| ctx.activity(r, kind)).collect();
    for (r, a) in polymers.iter().zip(acts) {
        *weights.entry(r.support_mask()).or_default() += a?;
    }
    xi_from_support_weights(&weights, DEFAULT_FAMILY_BUDGET)
}

/// Summed `zeta^t` activity of all polymers (no cutoffs) with each support.
///
/// For a fixed configuration, `G(T) = prod_{b in T} (1 + xi_b)` sums the bond
/// products over all bond sets inside `T`; splitting off the component of the
/// lowest site gives the connected parts by inclusion and exclusion. Weighting
/// by the single-site laws and summing over configurations yields the
/// activity sums, because the laws of sites outside a support integrate to 1.
pub fn full_family_support_weights(ctx: &ActivityContext) -> Result<HashMap<u64, Complex64>> {
    let n = ctx.region().len();
    region_mask_guard(ctx.region())?;
    let q = ctx.n_labels();
    let states = saturating_pow(q, n);
    check_budget(
        "full-family configurations x subsets",
        states.saturating_mul(saturating_pow(3, n)),
        DEFAULT_FAMILY_BUDGET * 16,
    )?;

    let xi1: Vec<Complex64> = (0..q).map(|e| ctx.xi_single(e)).collect();
    let mut xi2 = vec![vec![Vec::new(); n]; n];
    for (i, row) in xi2.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate().skip(i + 1) {
            *slot = ctx.xi_pair(i, j);
        }
    }
    let full = 1usize << n;
    let total = q.pow(n as u32);

    // fixed chunks keep the summation order independent of the thread count
    const CHUNK: usize = 64;
    let partial: Vec<Vec<Complex64>> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            (chunk * CHUNK..((chunk + 1) * CHUNK).min(total)).fold(
                vec![Complex64::new(0.0, 0.0); full],
                |mut acc, idx| {
                    let mut sigma = vec![0usize; n];
                    decode_config(idx, n, q, &mut sigma);
                    let weight: f64 = sigma
                        .iter()
                        .enumerate()
                        .map(|(x, e)| ctx.single_site_density(x)[*e])
                        .product();
                    if weight == 0.0 {
                        return acc;
                    }
                    let mut g = vec![Complex64::new(1.0, 0.0); full];
                    for t in 1..full {
                        let v = 63 - (t as u64).leading_zeros() as usize;
                        let rest = t & !(1 << v);
                        let mut val = g[rest] * (xi1[sigma[v]] + 1.0);
                        let mut r = rest;
                        while r != 0 {
                            let y = r.trailing_zeros() as usize;
                            r &= r - 1;
                            val *= 1.0 + xi2[y][v][sigma[y] * q + sigma[v]];
                        }
                        g[t] = val;
                    }
                    let mut c = vec![Complex64::new(0.0, 0.0); full];
                    for t in 1..full {
                        let low = t & t.wrapping_neg();
                        let others = t & !low;
                        let mut val = g[t];
                        // proper subsets S of t containing the lowest site
                        let mut sub = others;
                        loop {
                            let s = sub | low;
                            if s != t {
                                val -= c[s] * g[t & !s];
                            }
                            if sub == 0 {
                                break;
                            }
                            sub = (sub - 1) & others;
                        }
                        c[t] = val;
                    }
                    for t in 1..full {
                        let mut ct = c[t];
                        if t.count_ones() == 1 {
                            ct -= 1.0;
                        }
                        acc[t] += ct * weight;
                    }
                    acc
                },
            )
        })
        .collect();
    let mut weights = HashMap::new();
    for t in 1..full {
        let mut sum = Complex64::new(0.0, 0.0);
        for p in &partial {
            sum += p[t];
        }
        if sum.re != 0.0 || sum.im != 0.0 {
            weights.insert(t as u64, sum);
        }
    }
    Ok(weights)
}

/// `Xi` for the complete polymer family of the region with `zeta^t`.
pub fn full_family_partition_function(ctx: &ActivityContext) -> Result<Complex64> {
    let w = full_family_support_weights(ctx)?;
    xi_from_support_weights(&w, DEFAULT_FAMILY_BUDGET)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub beta: f64,
    pub t: f64,
    pub d_k: f64,
    pub n_sites: usize,
    /// `Z_t` from the enumerated Gibbs measure.
    pub lhs: [f64; 2],
    /// `prod_x int e^{-beta h_x} dlambda * Xi`
    pub rhs: [f64; 2],
    pub rel_error: f64,
}

/// Compares the enumerated twisted partition function with the product of
/// single-site normalisers times the polymer partition function.
pub fn factorization_check(
    model: &Model,
    region: &Region,
    beta: f64,
    bc: &BoundaryCondition,
    t: f64,
) -> Result<FactorizationReport> {
    let g = ExactGibbs::build(model, region, beta, bc)?;
    let d_k = g.sk_statistics().variance;
    let ctx = ActivityContext::new(model, region, beta, bc, t, (d_k > 0.0).then_some(d_k))?;
    let z_t = g.twisted_partition_function(ctx.u());
    let xi = full_family_partition_function(&ctx)?;
    let rhs = xi * ctx.log_normalizer().exp();
    Ok(FactorizationReport {
        beta,
        t,
        d_k,
        n_sites: region.len(),
        lhs: [z_t.re, z_t.im],
        rhs: [rhs.re, rhs.im],
        rel_error: (z_t - rhs).norm() / z_t.norm(),
    })
}

/// Restriction of the cluster series to tuples meeting a pin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "camelCase")]
pub enum Pin {
    /// Some polymer in the tuple has this region index in its support.
    Site(usize),
    /// Some polymer in the tuple equals this one.
    Polymer(Polymer),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub order: usize,
    pub pin: Option<Pin>,
    /// Only tuples with some polymer of support size > 1.
    pub only_multi_site: bool,
    /// Sum `|phi^T| prod |activity|` instead of the signed series.
    pub absolute: bool,
}

impl SeriesOptions {
    pub fn plain(order: usize) -> Self {
        SeriesOptions {
            order,
            pin: None,
            only_multi_site: false,
            absolute: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub n: usize,
    /// Ordered tuples with non-zero Ursell function and non-zero activities.
    pub term_count: u128,
    pub increment: [f64; 2],
    pub partial_sum: [f64; 2],
}

pub const MAX_SERIES_ORDER: usize = 5;

/// Partial sums of `sum_n sum_{(R_1..R_n)} phi^T prod activity` for
/// `n <= order`. Ordered tuples are grouped into multisets, weighted by the
/// number of orderings. Polymers with zero activity are skipped since every
/// tuple containing them vanishes.
pub fn truncated_log_series(
    ctx: &ActivityContext,
    polymers: &[Polymer],
    kind: ActivityKind,
    opts: &SeriesOptions,
) -> Result<Vec<SeriesRow>> {
    let acts: Vec<Complex64> = polymers
        .par_iter()
        .map(|r| ctx.activity(r, kind))
        .collect::<Result<_>>()?;
    log_series_from_activities(polymers, &acts, opts)
}

pub fn log_series_from_activities(
    polymers: &[Polymer],
    activities: &[Complex64],
    opts: &SeriesOptions,
) -> Result<Vec<SeriesRow>> {
    if opts.order == 0 || opts.order > MAX_SERIES_ORDER {
        return Err(Error::invalid(
            "series.order",
            format!("must lie in 1..={MAX_SERIES_ORDER}"),
        ));
    }
    let live: Vec<usize> = (0..polymers.len())
        .filter(|&i| activities[i].re != 0.0 || activities[i].im != 0.0)
        .collect();
    let p = live.len() as u128;
    // multisets of size n from p items: C(p + n - 1, n)
    let mut multisets: u128 = 0;
    for n in 1..=opts.order {
        let mut c: u128 = 1;
        for k in 0..n as u128 {
            c = c.saturating_mul(p + k) / (k + 1);
        }
        multisets = multisets.saturating_add(c);
    }
    check_budget("cluster tuples", multisets, DEFAULT_TUPLE_BUDGET)?;

    let cache = UrsellCache::default();
    let fact: Vec<f64> = (0..=opts.order)
        .map(|k| (1..=k).map(|v| v as f64).product())
        .collect();

    struct Acc {
        sum: Vec<Complex64>,
        count: Vec<u128>,
    }

    let pinned = |i: usize| match &opts.pin {
        None => true,
        Some(Pin::Site(x)) => polymers[i].support().binary_search(x).is_ok(),
        Some(Pin::Polymer(r)) => &polymers[i] == r,
    };

    #[allow(clippy::too_many_arguments)]
    fn walk(
        start: usize,
        chosen: &mut Vec<usize>,
        live: &[usize],
        polymers: &[Polymer],
        activities: &[Complex64],
        opts: &SeriesOptions,
        cache: &UrsellCache,
        fact: &[f64],
        pinned: &dyn Fn(usize) -> bool,
        acc: &mut Acc,
    ) -> Result<()> {
        let n = chosen.len();
        let tuple: Vec<&Polymer> = chosen.iter().map(|i| &polymers[*i]).collect();
        let ok_pin = opts.pin.is_none() || chosen.iter().any(|i| pinned(*i));
        let ok_multi =
            !opts.only_multi_site || chosen.iter().any(|i| polymers[*i].support().len() > 1);
        if ok_pin && ok_multi {
            let count = cache.count(&tuple)?;
            if count != 0 {
                // multiplicities
                let mut mult_fact = 1.0;
                let mut orderings = fact[n];
                let mut run = 1;
                for k in 1..=n {
                    if k < n && chosen[k] == chosen[k - 1] {
                        run += 1;
                    } else {
                        mult_fact *= fact[run];
                        run = 1;
                    }
                }
                orderings /= mult_fact;
                let mut prod = Complex64::new(1.0, 0.0);
                for i in chosen.iter() {
                    prod *= if opts.absolute {
                        Complex64::new(activities[*i].norm(), 0.0)
                    } else {
                        activities[*i]
                    };
                }
                let coeff = if opts.absolute {
                    count.abs() as f64
                } else {
                    count as f64
                };
                acc.sum[n] += prod * (coeff / mult_fact);
                acc.count[n] += orderings.round() as u128;
            }
        }
        if n == opts.order {
            return Ok(());
        }
        for k in start..live.len() {
            chosen.push(live[k]);
            walk(
                k, chosen, live, polymers, activities, opts, cache, fact, pinned, acc,
            )?;
            chosen.pop();
        }
        Ok(())
    }

    let per_lead: Vec<Result<Acc>> = (0..live.len())
        .into_par_iter()
        .map(|k| {
            let mut acc = Acc {
                sum: vec![Complex64::new(0.0, 0.0); opts.order + 1],
                count: vec![0; opts.order + 1],
            };
            let mut chosen = vec![live[k]];
            walk(
                k,
                &mut chosen,
                &live,
                polymers,
                activities,
                opts,
                &cache,
                &fact,
                &pinned,
                &mut acc,
            )?;
            Ok(acc)
        })
        .collect();

    let mut sum = vec![Complex64::new(0.0, 0.0); opts.order + 1];
    let mut count = vec![0u128; opts.order + 1];
    for a in per_lead {
        let a = a?;
        for n in 1..=opts.order {
            sum[n] += a.sum[n];
            count[n] += a.count[n];
        }
    }
    let mut rows = Vec::with_capacity(opts.order);
    let mut partial = Complex64::new(0.0, 0.0);
    for n in 1..=opts.order {
        partial += sum[n];
        rows.push(SeriesRow {
            n,
            term_count: count[n],
            increment: [sum[n].re, sum[n].im],
            partial_sum: [partial.re, partial.im],
        });
    }
    Ok(rows)
}

/// Exact rational to the nearest double.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
