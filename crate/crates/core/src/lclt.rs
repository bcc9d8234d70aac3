//! Lattice span of `f`, integral and local CLT discrepancies, the
//! four-integral majorant of the local discrepancy, characteristic-function
//! bound checks and the sublattice decimation experiment.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, saturating_pow, Error, Result};
use crate::gibbs::{
    decode_config, stable_sum, ExactGibbs, McRun, SkStatistics, DEFAULT_STATE_BUDGET,
};
use crate::model::{BoundaryCondition, LatticeBox, Model, PairConvention, Site, SpinSpace};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `f(e) = a + b h` with `b` in `[p, q]` for every label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanInfo {
    pub a: i64,
    pub h: i64,
    pub p: i64,
    pub q: i64,
}

impl SpanInfo {
    /// Index range of `S_k` on `n` sites.
    pub fn b_range(&self, n: usize) -> (i64, i64) {
        (self.p * n as i64, self.q * n as i64)
    }

    pub fn value(&self, n: usize, b: i64) -> i64 {
        n as i64 * self.a + b * self.h
    }

    /// Inverse of [`value`](Self::value), `None` off the lattice.
    pub fn index_of(&self, n: usize, s: i64) -> Option<i64> {
        let r = s - n as i64 * self.a;
        (r.rem_euclid(self.h) == 0).then(|| r / self.h)
    }
}

pub fn detect_span(spins: &SpinSpace) -> Result<SpanInfo> {
    let mut vals: Vec<i64> = spins.f().to_vec();
    vals.sort_unstable();
    vals.dedup();
    if vals.len() < 2 {
        return Err(Error::Domain(
            "f takes a single value, so it has no span".into(),
        ));
    }
    let a = vals[0];
    let h = vals[1..].iter().fold(0i64, |g, v| g.gcd(&(v - a)));
    Ok(SpanInfo {
        a,
        h,
        p: 0,
        q: (vals[vals.len() - 1] - a) / h,
    })
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn ln_normal_density(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Sup distance between the law of `(S - mean) / sqrt(D)` and the standard
/// normal, checking both one-sided limits at every atom.
pub fn kolmogorov_distance(stats: &SkStatistics) -> Result<f64> {
    if !(stats.variance > 0.0) {
        return Err(Error::Precondition(
            "Kolmogorov distance needs D_k > 0".into(),
        ));
    }
    let sd = stats.variance.sqrt();
    let mut cum = 0.0;
    let mut worst = 0.0f64;
    for (s, p) in &stats.mass {
        let phi = normal_cdf((*s as f64 - stats.mean) / sd);
        worst = worst.max((cum - phi).abs());
        cum += p;
        worst = worst.max((cum - phi).abs());
    }
    Ok(worst.min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcltRow {
    pub k: u32,
    pub n_sites: usize,
    pub d_k: f64,
    pub d_k_per_site: f64,
    pub kolmogorov: f64,
}

pub fn iclt_row(k: u32, n_sites: usize, stats: &SkStatistics) -> Result<IcltRow> {
    Ok(IcltRow {
        k,
        n_sites,
        d_k: stats.variance,
        d_k_per_site: stats.variance / n_sites as f64,
        kolmogorov: kolmogorov_distance(stats)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcltCell {
    pub b: i64,
    pub s: i64,
    pub p: f64,
    pub z: f64,
    pub scaled: f64,
    pub gaussian: f64,
    pub discrepancy: f64,
    /// Zero in exact mode.
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcltTable {
    pub n_sites: usize,
    pub d_k: f64,
    pub mean: f64,
    pub method: Method,
    pub sup: f64,
    pub sup_radius: f64,
    pub argmax_b: i64,
    pub cells: Vec<LcltCell>,
}

fn lclt_from_masses(
    n_sites: usize,
    mean: f64,
    d_k: f64,
    span: &SpanInfo,
    mass: &BTreeMap<i64, (f64, f64)>,
    method: Method,
) -> Result<LcltTable> {
    if !(d_k > 0.0) {
        return Err(Error::Precondition(
            "local discrepancy needs D_k > 0".into(),
        ));
    }
    for s in mass.keys() {
        if span.index_of(n_sites, *s).is_none() {
            return Err(Error::Domain(format!("S_k = {s} is off the lattice of f")));
        }
    }
    let sd = d_k.sqrt();
    let scale = sd / span.h as f64;
    let (lo, hi) = span.b_range(n_sites);
    let cells: Vec<LcltCell> = (lo..=hi)
        .map(|b| {
            let s = span.value(n_sites, b);
            let (p, r) = mass.get(&s).copied().unwrap_or((0.0, 0.0));
            let z = (s as f64 - mean) / sd;
            let gaussian = ln_normal_density(z).exp();
            LcltCell {
                b,
                s,
                p,
                z,
                scaled: scale * p,
                gaussian,
                discrepancy: (scale * p - gaussian).abs(),
                radius: scale * r,
            }
        })
        .collect();
    let best = cells
        .iter()
        .fold(None::<&LcltCell>, |m, c| match m {
            Some(m) if m.discrepancy >= c.discrepancy => Some(m),
            _ => Some(c),
        })
        .expect("b range is never empty");
    Ok(LcltTable {
        n_sites,
        d_k,
        mean,
        method,
        sup: best.discrepancy,
        sup_radius: best.radius,
        argmax_b: best.b,
        cells,
    })
}

/// `sup_b |(sqrt(D_k)/h) P(S_k = |L| a + b h) - phi(z_{k,b})|` from an exact law.
pub fn lclt_discrepancy(
    stats: &SkStatistics,
    n_sites: usize,
    span: &SpanInfo,
) -> Result<LcltTable> {
    let mass = stats.mass.iter().map(|(s, p)| (*s, (*p, 0.0))).collect();
    lclt_from_masses(
        n_sites,
        stats.mean,
        stats.variance,
        span,
        &mass,
        Method::Exact,
    )
}

/// Monte Carlo variant: the empirical mean and variance stand in for the
/// exact ones and every cell carries its propagated radius.
pub fn lclt_discrepancy_mc(run: &McRun, n_sites: usize, span: &SpanInfo) -> Result<LcltTable> {
    let n = run.samples.len() as f64;
    let mean = run.samples.iter().map(|s| *s as f64).sum::<f64>() / n;
    let var = run
        .samples
        .iter()
        .map(|s| (*s as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let mass = run
        .mass
        .iter()
        .map(|r| (r.s, (r.p_hat, r.radius)))
        .collect();
    lclt_from_masses(n_sites, mean, var, span, &mass, Method::MonteCarlo)
}

/// Composite trapezoid rule with one halving; returns the fine value and
/// the Richardson error estimate `|T_2n - T_n| / 3`.
pub fn trapezoid(lo: f64, hi: f64, n: usize, g: impl Fn(f64) -> f64 + Sync) -> (f64, f64) {
    if hi <= lo {
        return (0.0, 0.0);
    }
    let rule = |m: usize| {
        let h = (hi - lo) / m as f64;
        let vals: Vec<f64> = (1..m)
            .into_par_iter()
            .map(|i| g(lo + h * i as f64))
            .collect();
        let inner = stable_sum(vals);
        h * (0.5 * (g(lo) + g(hi)) + inner)
    };
    let coarse = rule(n);
    let fine = rule(2 * n);
    (fine, (fine - coarse).abs() / 3.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralDecomposition {
    pub b: f64,
    pub delta: f64,
    pub d_k: f64,
    pub resolution: usize,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub sum: f64,
    /// `sum / (2 pi)`
    pub majorant: f64,
    /// Total Richardson error estimate over the three numerical integrals.
    pub grid_error: f64,
    pub converged: bool,
}

/// Integrals are over both signs of `t`; the integrands are even because the
/// characteristic function satisfies `mu(e^{-itS}) = conj mu(e^{itS})`.
pub fn integral_decomposition(
    stats: &SkStatistics,
    span: &SpanInfo,
    b: f64,
    delta: f64,
    resolution: usize,
) -> Result<IntegralDecomposition> {
    let d_k = stats.variance;
    if !(d_k > 0.0) {
        return Err(Error::Precondition(
            "integral decomposition needs D_k > 0".into(),
        ));
    }
    let sd = d_k.sqrt();
    let mid = delta * sd;
    let top = PI / span.h as f64 * sd;
    if !(b > 0.0 && b < mid && mid <= top) {
        return Err(Error::Precondition(format!(
            "need 0 < B < delta sqrt(D_k) <= (pi/h) sqrt(D_k), got B = {b}, {mid}, {top}"
        )));
    }
    if resolution < 2 {
        return Err(Error::Precondition("resolution must be at least 2".into()));
    }
    let modulus = |t: f64| {
        stats
            .characteristic_function(t, true)
            .map(|c| c.norm())
            .unwrap_or(f64::NAN)
    };
    let (i1, e1) = trapezoid(0.0, b, resolution, |t| {
        let c = stats.characteristic_function(t, true).unwrap();
        (c - (-0.5 * t * t).exp()).norm()
    });
    let (i3, e3) = trapezoid(b, mid, resolution, modulus);
    let (i4, e4) = trapezoid(mid, top, resolution, modulus);
    let i2 = (2.0 * PI).sqrt() * libm::erfc(b / SQRT_2);
    let (i1, i3, i4) = (2.0 * i1, 2.0 * i3, 2.0 * i4);
    let grid_error = 2.0 * (e1 + e3 + e4);
    let sum = i1 + i2 + i3 + i4;
    Ok(IntegralDecomposition {
        b,
        delta,
        d_k,
        resolution,
        i1,
        i2,
        i3,
        i4,
        sum,
        majorant: sum / (2.0 * PI),
        grid_error,
        converged: grid_error <= 1e-8 * sum.max(1.0),
    })
}

/// Which bound is being checked, with the constants it needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "camelCase")]
pub enum Regime {
    /// `|t| < delta sqrt(D_k)`, bound `exp(-t^2 D |L| / D_k)`.
    HighT { delta: f64, d: f64 },
    /// `delta sqrt(D_k) <= |t| <= (pi/h) sqrt(D_k)`, bound `exp(-C |L|)`.
    HighTTail { delta: f64, c: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharfnPoint {
    pub t: f64,
    pub modulus: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharfnCheck {
    pub regime: Regime,
    pub n_sites: usize,
    pub d_k: f64,
    pub points: Vec<CharfnPoint>,
    pub violations: usize,
    pub first_violation: Option<f64>,
}

/// Modulus against bound on a grid over the positive half of the regime's
/// interval (the modulus is even in `t`). The open interval of `HighT` is
/// sampled at cell midpoints.
pub fn charfn_bound_check(
    stats: &SkStatistics,
    n_sites: usize,
    span: &SpanInfo,
    regime: Regime,
    grid: usize,
) -> Result<CharfnCheck> {
    let d_k = stats.variance;
    if !(d_k > 0.0) {
        return Err(Error::Precondition(
            "characteristic-function check needs D_k > 0".into(),
        ));
    }
    if grid == 0 {
        return Err(Error::Precondition("grid must be non-empty".into()));
    }
    let sd = d_k.sqrt();
    let n = n_sites as f64;
    let (ts, bound): (Vec<f64>, Box<dyn Fn(f64) -> f64 + Sync>) = match regime {
        Regime::HighT { delta, d } => {
            if !(d > 0.0) {
                return Err(Error::NonPositiveConstant {
                    name: "D",
                    value: d,
                });
            }
            let top = delta * sd;
            let ts = (0..grid)
                .map(|i| -top + 2.0 * top * (i as f64 + 0.5) / grid as f64)
                .collect();
            (ts, Box::new(move |t: f64| (-t * t * d * n / d_k).exp()))
        }
        Regime::HighTTail { delta, c } => {
            if !(c > 0.0) {
                return Err(Error::NonPositiveConstant {
                    name: "C",
                    value: c,
                });
            }
            let (lo, hi) = (delta * sd, PI / span.h as f64 * sd);
            if lo > hi {
                return Err(Error::Precondition("delta must not exceed pi/h".into()));
            }
            let ts = (0..grid)
                .map(|i| {
                    if grid == 1 {
                        lo
                    } else {
                        lo + (hi - lo) * i as f64 / (grid - 1) as f64
                    }
                })
                .collect();
            (ts, Box::new(move |_| (-c * n).exp()))
        }
    };
    let points: Vec<CharfnPoint> = ts
        .par_iter()
        .map(|&t| {
            let modulus = stats.characteristic_function(t, true).unwrap().norm();
            let bound = bound(t);
            CharfnPoint {
                t,
                modulus,
                bound,
                holds: modulus <= bound,
            }
        })
        .collect();
    let violations = points.iter().filter(|p| !p.holds).count();
    let first_violation = points.iter().find(|p| !p.holds).map(|p| p.t);
    Ok(CharfnCheck {
        regime,
        n_sites,
        d_k,
        points,
        violations,
        first_violation,
    })
}

/// Splits a box into the sublattice `L ∩ (r0 Z)^d` and its complement.
pub fn decimation_split(
    bx: &LatticeBox,
    r0: u32,
) -> Result<(crate::model::Region, crate::model::Region)> {
    let full = bx.region();
    let sub = full.sublattice(r0);
    if sub.is_empty() {
        return Err(Error::Precondition(format!(
            "no sublattice sites for r0 = {r0}"
        )));
    }
    let rest = full.minus(&sub);
    Ok((sub, rest))
}

fn refuse_ordered(model: &Model) -> Result<()> {
    if model.convention == PairConvention::Ordered {
        return Err(Error::Precondition(
            "conditioning needs interior and boundary pairs to carry the same weight; use the unordered convention".into(),
        ));
    }
    Ok(())
}

/// `(omega' on the complement) ∨ outer`, the boundary seen by the sublattice.
pub fn composite_boundary(
    rest: &[Site],
    omega: &[usize],
    outer: &BoundaryCondition,
) -> BoundaryCondition {
    BoundaryCondition::Composite {
        inner: rest.iter().cloned().zip(omega.iter().copied()).collect(),
        outer: Box::new(outer.clone()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecimationSample {
    pub index: usize,
    pub omega: Vec<usize>,
    /// Sup of the modulus over the large-|u| grid.
    pub sup_modulus: f64,
    pub argmax_u: f64,
    /// Sup over the small-|u| grid of modulus divided by the quadratic bound,
    /// present when a quadratic constant was supplied.
    pub small_u_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecimationBounds {
    pub delta: f64,
    /// Exponent for the quadratic bound near `u = 0`.
    pub d_cam: Option<f64>,
    /// Exponent for the uniform bound on `delta <= |u| <= pi/h`.
    pub c_cam: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecimationReport {
    pub r0: u32,
    pub beta: f64,
    pub sublattice_sites: usize,
    pub complement_sites: usize,
    pub seed: u64,
    pub bounds: DecimationBounds,
    pub grid: usize,
    /// Max over the sampled boundaries; a lower bound of the sup over all.
    pub sup_modulus_lower_bound: f64,
    pub uniform_bound: Option<f64>,
    pub uniform_bound_holds: Option<bool>,
    pub small_u_holds: Option<bool>,
    pub samples: Vec<DecimationSample>,
}

/// For each sampled `omega'` on the complement of the sublattice, the law of
/// `sum_{x in sublattice} f(sigma_x)` under the conditional measure, and the
/// modulus of its characteristic function `|E exp(i u S)|` on
/// `delta <= u <= pi/h` (and on `0 < u < delta` when a quadratic constant is
/// given). Since the complement's contribution to `S_k` is fixed by
/// `omega'`, this modulus equals that of the full-box `mu(e^{itSbar_k} |
/// omega')` at `t = u sqrt(D_k)`.
#[allow(clippy::too_many_arguments)]
pub fn decimation_experiment(
    model: &Model,
    bx: &LatticeBox,
    bc: &BoundaryCondition,
    beta: f64,
    r0: u32,
    samples: usize,
    seed: u64,
    bounds: DecimationBounds,
    grid: usize,
) -> Result<DecimationReport> {
    refuse_ordered(model)?;
    let span = detect_span(&model.spins)?;
    let (sub, rest) = decimation_split(bx, r0)?;
    check_budget(
        "conditional sublattice configurations",
        saturating_pow(model.n_labels(), sub.len()),
        DEFAULT_STATE_BUDGET,
    )?;
    if grid < 2 {
        return Err(Error::Precondition(
            "grid must have at least 2 points".into(),
        ));
    }
    let top = PI / span.h as f64;
    if !(bounds.delta > 0.0 && bounds.delta <= top) {
        return Err(Error::Domain(format!(
            "delta must lie in (0, pi/h], got {}",
            bounds.delta
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omegas: Vec<Vec<usize>> = (0..samples)
        .map(|_| {
            (0..rest.len())
                .map(|_| rng.gen_range(0..model.n_labels()))
                .collect()
        })
        .collect();
    let n_sub = sub.len() as f64;
    let rows: Vec<DecimationSample> = omegas
        .into_iter()
        .enumerate()
        .map(|(index, omega)| {
            let cbc = composite_boundary(rest.sites(), &omega, bc);
            let g = ExactGibbs::build(model, &sub, beta, &cbc)?;
            let stats = g.sk_statistics();
            let mut best = (0.0f64, bounds.delta);
            for i in 0..grid {
                let u = bounds.delta + (top - bounds.delta) * i as f64 / (grid - 1) as f64;
                let m = stats.raw_charfn(u).norm();
                if m > best.0 {
                    best = (m, u);
                }
            }
            let small_u_ratio = bounds.d_cam.filter(|d| *d > 0.0).map(|d| {
                (0..grid)
                    .map(|i| {
                        let u = bounds.delta * (i as f64 + 0.5) / grid as f64;
                        stats.raw_charfn(u).norm() / (-u * u * d * n_sub).exp()
                    })
                    .fold(0.0, f64::max)
            });
            Ok(DecimationSample {
                index,
                omega,
                sup_modulus: best.0,
                argmax_u: best.1,
                small_u_ratio,
            })
        })
        .collect::<Result<_>>()?;
    let sup = rows.iter().map(|r| r.sup_modulus).fold(0.0, f64::max);
    let uniform_bound = bounds
        .c_cam
        .filter(|c| *c > 0.0)
        .map(|c| (-c * n_sub).exp());
    let small_u_holds = bounds.d_cam.filter(|d| *d > 0.0).map(|_| {
        rows.iter()
            .all(|r| r.small_u_ratio.is_some_and(|x| x <= 1.0))
    });
    Ok(DecimationReport {
        r0,
        beta,
        sublattice_sites: sub.len(),
        complement_sites: rest.len(),
        seed,
        bounds,
        grid,
        sup_modulus_lower_bound: sup,
        uniform_bound,
        uniform_bound_holds: uniform_bound.map(|b| sup <= b),
        small_u_holds,
        samples: rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalProbabilityReport {
    pub complement_configurations: usize,
    pub max_abs_error: f64,
}

/// Compares the sublattice marginal of the full-box measure with the
/// average of the conditional measures over every complement configuration.
pub fn total_probability_check(
    model: &Model,
    bx: &LatticeBox,
    bc: &BoundaryCondition,
    beta: f64,
    r0: u32,
) -> Result<TotalProbabilityReport> {
    refuse_ordered(model)?;
    let full = bx.region();
    let (sub, rest) = decimation_split(bx, r0)?;
    let g = ExactGibbs::build(model, &full, beta, bc)?;
    let sub_idx: Vec<usize> = sub
        .sites()
        .iter()
        .map(|s| full.index_of(s).unwrap())
        .collect();
    let rest_idx: Vec<usize> = rest
        .sites()
        .iter()
        .map(|s| full.index_of(s).unwrap())
        .collect();
    let marginal = g.marginal(&sub_idx);
    let weights = g.marginal(&rest_idx);
    let n = model.n_labels();
    let count = saturating_pow(n, rest.len());
    check_budget("complement configurations", count, DEFAULT_STATE_BUDGET)?;
    let count = count as usize;
    let partial: Vec<BTreeMap<Vec<usize>, f64>> = (0..count)
        .into_par_iter()
        .map(|idx| {
            let mut omega = vec![0; rest.len()];
            decode_config(idx, rest.len(), n, &mut omega);
            let w = weights.get(&omega).copied().unwrap_or(0.0);
            let cg = ExactGibbs::build(
                model,
                &sub,
                beta,
                &composite_boundary(rest.sites(), &omega, bc),
            )?;
            let mut out = BTreeMap::new();
            let mut sigma = vec![0; sub.len()];
            for j in 0..cg.n_configs() {
                decode_config(j, sub.len(), n, &mut sigma);
                out.insert(sigma.clone(), w * cg.probability(j));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut mixed: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for m in partial {
        for (k, v) in m {
            *mixed.entry(k).or_default() += v;
        }
    }
    let max_abs_error = mixed
        .iter()
        .map(|(k, v)| (v - marginal.get(k).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max);
    Ok(TotalProbabilityReport {
        complement_configurations: count,
        max_abs_error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub iclt: IcltRow,
    pub lclt: LcltTable,
}

/// Exact ICLT and LCLT rows on the boxes `[-k, k]^d` for each `k`.
pub fn exact_sweep(
    model: &Model,
    beta: f64,
    bc: &BoundaryCondition,
    ks: &[u32],
) -> Result<Vec<SweepRow>> {
    let span = detect_span(&model.spins)?;
    ks.iter()
        .map(|&k| {
            let bx = LatticeBox::new(model.dim(), k)?;
            let g = ExactGibbs::build(model, &bx.region(), beta, bc)?;
            let stats = g.sk_statistics();
            let n = bx.cardinality();
            Ok(SweepRow {
                iclt: iclt_row(k, n, &stats)?,
                lclt: lclt_discrepancy(&stats, n, &span)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpinSpace;

    fn space(f: Vec<i64>) -> SpinSpace {
        let n = f.len();
        SpinSpace::new((0..n).map(|i| format!("s{i}")).collect(), vec![1.0; n], f).unwrap()
    }

    #[test]
    fn spans() {
        let s = detect_span(&SpinSpace::ising()).unwrap();
        assert_eq!((s.a, s.h), (-1, 2));
        let s = detect_span(&space(vec![0, 3, 6])).unwrap();
        assert_eq!((s.a, s.h, s.q), (0, 3, 2));
        assert_eq!(detect_span(&space(vec![1, 4, 6])).unwrap().h, 1);
        assert!(detect_span(&space(vec![2, 2])).is_err());
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
    }

    #[test]
    fn single_site_lclt() {
        let stats = SkStatistics {
            mean: 0.0,
            variance: 1.0,
            mass: [(-1, 0.5), (1, 0.5)].into_iter().collect(),
        };
        let span = detect_span(&SpinSpace::ising()).unwrap();
        let t = lclt_discrepancy(&stats, 1, &span).unwrap();
        let phi1 = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert_eq!(t.cells.len(), 2);
        assert!((t.sup - (0.25 - phi1).abs()).abs() < 1e-15);
        let k = kolmogorov_distance(&stats).unwrap();
        assert!((k - (0.5 - normal_cdf(-1.0))).abs() < 1e-15);
    }

    #[test]
    fn tail_integral() {
        let stats = SkStatistics {
            mean: 0.0,
            variance: 100.0,
            mass: BTreeMap::from([(0, 1.0)]),
        };
        let span = SpanInfo {
            a: 0,
            h: 1,
            p: 0,
            q: 0,
        };
        let r = integral_decomposition(&stats, &span, 8.0, 1.0, 64).unwrap();
        // Simpson on [8, 20], doubled for both signs
        let n = 12_000;
        let h = 12.0 / n as f64;
        let g = |t: f64| (-0.5 * t * t).exp();
        let simpson: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * g(8.0 + h * i as f64)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((r.i2 - 2.0 * simpson).abs() < 1e-9 * r.i2);
        assert!(r.i2 < 3.2e-15);
        assert!(integral_decomposition(&stats, &span, 20.0, 1.0, 64).is_err());
    }
}
