//! Closed-form convergence constants and thresholds, grid-based
//! characteristic-function constants, and the pinned polymer-sum check.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lclt::detect_span;
use crate::model::{
    boltzmann_defect_tail, displacements, l1_norm, potential_norm, sqrt_norm_tail,
    BoundaryCondition, Model, PairPotential, Region, Site, SpinSpace, Tail,
};
use crate::polymer::{enumerate_polymers, ActivityContext, ActivityKind, Cutoffs, Polymer};

/// Relative resolution of threshold searches.
pub const BISECTION_TOL: f64 = 1e-10;
pub const DEFAULT_GRID: usize = 4096;
pub const GRID_TOL: f64 = 1e-6;

/// A lattice sum truncated at `radius` together with its remainder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSum {
    pub radius: u64,
    pub partial: f64,
    pub tail: Tail,
}

impl LatticeSum {
    /// Partial sum plus tail; `+inf` when the tail is unknown or divergent.
    pub fn pessimistic(&self) -> f64 {
        self.tail
            .pessimistic()
            .map_or(f64::INFINITY, |t| self.partial + t)
    }

    fn scaled(&self, k: f64) -> LatticeSum {
        LatticeSum {
            radius: self.radius,
            partial: self.partial * k,
            tail: self.tail.scale(k),
        }
    }
}

/// `sum_{0 < |y| <= R} max_{a,b} |exp(-beta Phi_{0,y}(a,b)) - 1|`.
pub fn boltzmann_defect_sum(
    phi: &PairPotential,
    n_labels: usize,
    beta: f64,
    radius: u64,
) -> LatticeSum {
    let partial = displacements(phi.dim(), 1, radius)
        .iter()
        .map(|v| phi.sup_over_spins(v, n_labels, |e| (-beta * e).exp_m1()))
        .sum();
    LatticeSum {
        radius,
        partial,
        tail: if beta == 0.0 {
            Tail::Exact(0.0)
        } else {
            boltzmann_defect_tail(phi, radius, beta)
        },
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(0.0..std::f64::consts::E.recip()).contains(&c) {
        return Err(Error::Domain(format!("C must lie in [0, 1/e), got {c}")));
    }
    Ok(())
}

/// `a_beta = (1 + C)^2 e^4 sum ||exp(-beta Phi) - 1||`.
pub fn a_beta(
    c: f64,
    beta: f64,
    phi: &PairPotential,
    n_labels: usize,
    radius: u64,
) -> Result<LatticeSum> {
    check_c(c)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "beta must be finite and non-negative, got {beta}"
        )));
    }
    Ok(boltzmann_defect_sum(phi, n_labels, beta, radius).scaled((1.0 + c).powi(2) * 4f64.exp()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// `+inf` when the predicate holds for every beta.
    pub beta: f64,
    /// Value of the defining expression minus its limit at `beta`.
    pub residual: f64,
}

/// Largest `beta` with `value(beta) < 1`, assuming `value` increases.
fn bisect_threshold(value: impl Fn(f64) -> f64) -> Threshold {
    let beta = bisect_predicate(|b| value(b) < 1.0, 1e-3);
    Threshold {
        beta,
        residual: if beta.is_finite() {
            value(beta) - 1.0
        } else {
            f64::NAN
        },
    }
}

/// Largest `beta >= 0` at which `holds` is true, for a predicate that holds
/// on an initial interval. The search starts at `start` and doubles until
/// the predicate fails; `+inf` if it never does below `1e8`.
pub fn bisect_predicate(holds: impl Fn(f64) -> bool, start: f64) -> f64 {
    if !holds(0.0) {
        return 0.0;
    }
    let mut hi = start;
    while holds(hi) {
        hi *= 2.0;
        if hi > 1e8 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    while hi - lo > BISECTION_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `beta_C`: the largest `beta` with `Ce + a_beta < 1` for the truncated
/// potential.
pub fn beta_c_solve(
    c: f64,
    phi: &PairPotential,
    n_labels: usize,
    radius: u64,
) -> Result<Threshold> {
    check_c(c)?;
    if potential_norm(phi, radius).partial_sum == 0.0 {
        return Ok(Threshold {
            beta: f64::INFINITY,
            residual: f64::NAN,
        });
    }
    let ce = c * std::f64::consts::E;
    let pref = (1.0 + c).powi(2) * 4f64.exp();
    let sums: Vec<Vec<f64>> = displacements(phi.dim(), 1, radius)
        .iter()
        .map(|v| {
            let mut es = Vec::with_capacity(n_labels * n_labels);
            for a in 0..n_labels {
                for b in 0..n_labels {
                    es.push(phi.raw_energy(v, a, b));
                }
            }
            es
        })
        .collect();
    let value = |beta: f64| {
        let s: f64 = sums
            .iter()
            .map(|es| {
                es.iter()
                    .fold(0.0f64, |m, e| m.max((-beta * e).exp_m1().abs()))
            })
            .sum();
        ce + pref * s
    };
    Ok(bisect_threshold(value))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConstants {
    pub q: f64,
    /// `-ln(1 - q)`
    pub a_delta: f64,
    /// `sum_{n>=3} ((n-1) q^{n-2} + q^{n-1})`
    pub b_delta: f64,
}

pub fn series_constants(delta: f64, f_norm: f64) -> Result<SeriesConstants> {
    let q = delta * f_norm;
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!(
            "delta ||f|| must lie in [0, 1), got {q}"
        )));
    }
    Ok(SeriesConstants {
        q,
        a_delta: -(-q).ln_1p(),
        b_delta: q / (1.0 - q).powi(2) + q * (1.0 + q) / (1.0 - q),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaConstants {
    /// `A(delta) + a_beta` with `C = delta ||f||`
    pub alpha_delta_beta: f64,
    /// `a_beta` with `C = 0`
    pub alpha_beta: f64,
    /// `e^{2(2+c)} sum ||exp(-beta Phi) - 1||`
    pub alpha_bar_c_beta: f64,
    pub alpha_delta_beta_below_one: bool,
    pub alpha_beta_below_one: bool,
    pub alpha_bar_below_one: bool,
}

pub fn alpha_constants(
    delta: f64,
    beta: f64,
    c: f64,
    phi: &PairPotential,
    n_labels: usize,
    radius: u64,
    f_norm: f64,
) -> Result<AlphaConstants> {
    let sc = series_constants(delta, f_norm)?;
    let c_delta = delta * f_norm;
    let s = boltzmann_defect_sum(phi, n_labels, beta, radius);
    let a_delta = if c_delta < std::f64::consts::E.recip() {
        a_beta(c_delta, beta, phi, n_labels, radius)?
    } else {
        s.scaled((1.0 + c_delta).powi(2) * 4f64.exp())
    };
    let a0 = a_beta(0.0, beta, phi, n_labels, radius)?;
    let bar = s.scaled((2.0 * (2.0 + c)).exp());
    Ok(AlphaConstants {
        alpha_delta_beta: sc.a_delta + a_delta.partial,
        alpha_beta: a0.partial,
        alpha_bar_c_beta: bar.partial,
        alpha_delta_beta_below_one: sc.a_delta + a_delta.pessimistic() < 1.0,
        alpha_beta_below_one: a0.pessimistic() < 1.0,
        alpha_bar_below_one: bar.pessimistic() < 1.0,
    })
}

/// `d(beta) = exp(-2 beta |||Phi|||) lambda(f^2) / lambda(E)`, using the
/// norm with its tail when one is known.
pub fn d_beta(spins: &SpinSpace, phi: &PairPotential, beta: f64, radius: u64) -> f64 {
    let norm = potential_norm(phi, radius);
    let nn = norm
        .tail
        .pessimistic()
        .map_or(norm.partial_sum, |t| norm.partial_sum + t);
    (-2.0 * beta * nn).exp() * spins.lambda_f2() / spins.total_mass()
}

fn norm_for_bounds(phi: &PairPotential, radius: u64) -> f64 {
    let n = potential_norm(phi, radius);
    n.tail
        .pessimistic()
        .map_or(n.partial_sum, |t| n.partial_sum + t)
}

/// Result of a sup over a t-grid with one refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSup {
    pub sup: f64,
    pub argmax: f64,
    pub refined_sup: f64,
    pub points: usize,
    pub converged: bool,
}

/// Sup of `g` over `[lo, hi]` on a uniform grid of `points` and `2 points`.
pub fn grid_sup(lo: f64, hi: f64, points: usize, g: impl Fn(f64) -> f64) -> GridSup {
    let run = |n: usize| {
        let mut best = (f64::NEG_INFINITY, lo);
        for i in 0..n {
            let t = if n == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            };
            let v = g(t);
            if v > best.0 {
                best = (v, t);
            }
        }
        best
    };
    let (coarse, _) = run(points);
    let (fine, arg) = run(2 * points - 1);
    GridSup {
        sup: fine,
        argmax: arg,
        refined_sup: fine,
        points,
        converged: (fine - coarse).abs() <= GRID_TOL,
    }
}

/// `|sum_e w(e) exp(i t f(e))|` for a probability vector `w`.
pub fn law_charfn_modulus(w: &[f64], f: &[i64], t: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (p, v) in w.iter().zip(f) {
        re += p * (t * *v as f64).cos();
        im += p * (t * *v as f64).sin();
    }
    re.hypot(im)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnedenkoConstant {
    pub epsilon: f64,
    pub d_x: f64,
    pub grid: GridSup,
}

/// `d_X = -ln sup_{eps <= t <= 2 pi / h - eps} |E exp(i t X)|` for the law
/// `nu = lambda / lambda(E)` of `f`.
pub fn gnedenko_constant(spins: &SpinSpace, epsilon: f64) -> Result<GnedenkoConstant> {
    let span = detect_span(spins)?;
    let hi = 2.0 * std::f64::consts::PI / span.h as f64 - epsilon;
    if !(epsilon > 0.0 && epsilon < hi) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, pi/h), got {epsilon}"
        )));
    }
    let nu: Vec<f64> = spins
        .weights()
        .iter()
        .map(|w| w / spins.total_mass())
        .collect();
    let grid = grid_sup(epsilon, hi, DEFAULT_GRID, |t| {
        law_charfn_modulus(&nu, spins.f(), t)
    });
    Ok(GnedenkoConstant {
        epsilon,
        d_x: -grid.sup.ln(),
        grid,
    })
}

/// Boundary conditions used for the uniform-in-omega sups: every constant
/// label plus `samples` random assignments on the exterior of the origin.
pub fn sample_boundaries(model: &Model, samples: usize, seed: u64) -> Vec<BoundaryCondition> {
    let n = model.n_labels();
    let mut out: Vec<BoundaryCondition> = (0..n)
        .map(|label| BoundaryCondition::Constant { label })
        .collect();
    let origin = Region::from_sites(model.dim(), [Site::origin(model.dim())]).unwrap();
    let shell = origin.exterior_shell(model.potential.truncation_radius());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let spins: BTreeMap<Site, usize> = shell
            .iter()
            .map(|y| (y.clone(), rng.gen_range(0..n)))
            .collect();
        out.push(BoundaryCondition::Explicit { spins });
    }
    out
}

/// Single-site law at the origin of the one-site volume under `bc`.
pub fn origin_law(model: &Model, beta: f64, bc: &BoundaryCondition) -> Result<Vec<f64>> {
    let origin = Region::from_sites(model.dim(), [Site::origin(model.dim())]).unwrap();
    let ctx = ActivityContext::new(model, &origin, beta, bc, 0.0, None)?;
    Ok(ctx.single_site_density(0).to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropConstants {
    pub d_beta: f64,
    pub gnedenko: GnedenkoConstant,
    /// `-ln sup_{omega, delta <= t <= pi/h} |E_x^omega exp(i t f)|` over the
    /// sampled boundary conditions; a lower bound of the true sup, so an
    /// upper bound of the constant.
    pub c_b: f64,
    pub c_b_grid: GridSup,
    pub c0: f64,
    pub epsilon_c: f64,
    pub c_c: f64,
    pub beta_prime_delta: f64,
    pub boundary_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropInputs {
    pub beta: f64,
    pub delta: f64,
    /// Gnedenko window `eps`.
    pub epsilon: f64,
    /// Slack in the construction of `c_c`; `None` takes `(1 - e^{-c0}) / 2`.
    pub epsilon_c: Option<f64>,
    pub radius: u64,
    pub boundary_samples: usize,
    pub seed: u64,
}

pub fn prop_constants(model: &Model, inp: &PropInputs) -> Result<PropConstants> {
    let spins = &model.spins;
    if !spins.is_nondegenerate() {
        return Err(Error::Domain("f is constant, so Var(f) = 0".into()));
    }
    let span = detect_span(spins)?;
    let top = std::f64::consts::PI / span.h as f64;
    if !(inp.delta > 0.0 && inp.delta < top) {
        return Err(Error::Domain(format!(
            "delta must lie in (0, pi/h) = (0, {top}), got {}",
            inp.delta
        )));
    }
    let gnedenko = gnedenko_constant(spins, inp.epsilon)?;

    let bcs = sample_boundaries(model, inp.boundary_samples, inp.seed);
    let laws: Vec<Vec<f64>> = bcs
        .iter()
        .map(|bc| origin_law(model, inp.beta, bc))
        .collect::<Result<_>>()?;
    let c_b_grid = grid_sup(inp.delta, top, DEFAULT_GRID, |t| {
        laws.iter()
            .map(|w| law_charfn_modulus(w, spins.f(), t))
            .fold(0.0, f64::max)
    });

    let nu: Vec<f64> = spins
        .weights()
        .iter()
        .map(|w| w / spins.total_mass())
        .collect();
    let nu_grid = grid_sup(inp.delta, top, DEFAULT_GRID, |t| {
        law_charfn_modulus(&nu, spins.f(), t)
    });
    let c0 = -nu_grid.sup.ln();
    let epsilon_c = inp.epsilon_c.unwrap_or((1.0 - (-c0).exp()) / 2.0);
    if !(epsilon_c > 0.0 && epsilon_c + (-c0).exp() < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon_c must satisfy 0 < eps + e^(-c0) < 1, got {epsilon_c}"
        )));
    }
    let c_c = -(epsilon_c + (-c0).exp()).ln();
    let nn = norm_for_bounds(&model.potential, inp.radius);
    let beta_prime_delta = if nn == 0.0 {
        f64::INFINITY
    } else {
        (epsilon_c / (2.0 * spins.f_norm() + 1.0)).ln_1p() / (2.0 * nn)
    };
    Ok(PropConstants {
        d_beta: d_beta(spins, &model.potential, inp.beta, inp.radius),
        gnedenko,
        c_b: -c_b_grid.sup.ln(),
        c_b_grid,
        c0,
        epsilon_c,
        c_c,
        beta_prime_delta,
        boundary_samples: bcs.len(),
    })
}

/// `B(z, K) = sqrt(z) K / (1 - sqrt(z) K)`.
pub fn cct_b(z: f64, k: f64) -> Result<f64> {
    let s = z.sqrt() * k;
    if !(z >= 0.0) || !(s < 1.0) {
        return Err(Error::Domain(format!("sqrt(z) K must be below 1, got {s}")));
    }
    Ok(s / (1.0 - s))
}

/// `C(z, K) = z exp(B(sqrt z, K))`.
pub fn cct_c(z: f64, k: f64) -> Result<f64> {
    Ok(z * cct_b(z.sqrt(), k)?.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "camelCase")]
pub enum PsiSource {
    /// `Psi(x)` for listed non-zero displacements; `Psi(0) = 1` is implied.
    Explicit { values: Vec<(Vec<i64>, f64)> },
    /// `Psi(x) = ||Phi_{x,0}|| / PhiBar(r0)` on the sublattice `(r0 Z)^d`.
    FromPotential { r0: u32, radius: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CctConstants {
    /// `sum Psi^{1/2}` including `Psi(0) = 1`.
    pub k: LatticeSum,
    pub z0: f64,
    /// Built from the pessimistic `K`; absent when `sqrt(z0) K >= 1`.
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub c_below_one: bool,
}

/// `sup_{|x| >= r0} ||Phi_{x,0}||`.
pub fn phi_bar(phi: &PairPotential, r0: u32) -> f64 {
    phi.sup_norm_beyond(r0 as u64)
}

/// `K` for `Psi` built from the potential on the sublattice.
pub fn k_from_potential(phi: &PairPotential, r0: u32, radius: u64) -> Result<LatticeSum> {
    let bar = phi_bar(phi, r0);
    if !(bar > 0.0) {
        return Err(Error::Domain(format!(
            "PhiBar({r0}) vanishes, so Psi is undefined"
        )));
    }
    let r0i = r0.max(1) as i64;
    let mut partial = 1.0;
    for v in displacements(phi.dim(), 1, radius) {
        if v.iter().all(|c| c.rem_euclid(r0i) == 0) {
            partial += (phi.sup_norm(&v) / bar).sqrt();
        }
    }
    // every sublattice point beyond the radius is also a lattice point
    let tail = match sqrt_norm_tail(phi, radius) {
        Tail::Exact(v) => Tail::Bound(v / bar.sqrt()),
        other => other.scale(1.0 / bar.sqrt()),
    };
    Ok(LatticeSum {
        radius,
        partial,
        tail,
    })
}

pub fn cct_constants(
    phi: Option<&PairPotential>,
    source: &PsiSource,
    z0: f64,
) -> Result<CctConstants> {
    let k = match source {
        PsiSource::Explicit { values } => {
            let mut partial = 1.0;
            for (x, v) in values {
                if l1_norm(x) == 0 {
                    return Err(Error::invalid("psi.values", "Psi(0) is fixed to 1"));
                }
                if !(*v > 0.0) {
                    return Err(Error::invalid("psi.values", "Psi must be positive"));
                }
                partial += v.sqrt();
            }
            LatticeSum {
                radius: 0,
                partial,
                tail: Tail::Exact(0.0),
            }
        }
        PsiSource::FromPotential { r0, radius } => {
            let phi = phi.ok_or_else(|| {
                Error::Precondition("Psi from a potential needs the potential".into())
            })?;
            k_from_potential(phi, *r0, *radius)?
        }
    };
    let kk = k.pessimistic();
    let b = cct_b(z0, kk).ok();
    let c = cct_c(z0, kk).ok();
    Ok(CctConstants {
        k,
        z0,
        b,
        c,
        c_below_one: c.is_some_and(|c| c < 1.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaInputs {
    pub delta: f64,
    pub beta: f64,
    /// Constant from the small-beta single-site bound, used for the
    /// high-temperature exponent.
    pub c_high_t: f64,
    /// Constant from the fixed-beta single-site bound, used for the
    /// decimated exponent.
    pub c_cam: f64,
    pub r0: u32,
    pub radius: u64,
}

/// A constant with the flag saying whether it may be used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: Option<f64>,
    pub positive: bool,
}

impl Flagged {
    fn from(value: Option<f64>) -> Self {
        Flagged {
            value,
            positive: value.is_some_and(|v| v > 0.0),
        }
    }

    fn suppressed() -> Self {
        Flagged {
            value: None,
            positive: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub inputs: LemmaInputs,
    pub d_beta: f64,
    /// `C = 4 delta ||f||` and its threshold, used in `D_highT`.
    pub c_kp: f64,
    pub beta_c: f64,
    pub d_beta_c: f64,
    pub a_beta_kp: f64,
    pub beta_below_beta_c: bool,
    pub series: SeriesConstants,
    pub d_high_t: Flagged,
    pub alpha_beta: f64,
    pub alpha_bar_c_beta: f64,
    pub c_high_t: Flagged,
    pub phi_bar_r0: f64,
    pub k: Option<LatticeSum>,
    pub z0_cam: f64,
    pub z1_cam: f64,
    pub phi_cam: Flagged,
    pub d_cam: Flagged,
    pub z0_cam_decimated: f64,
    pub c_cam: Flagged,
}

fn cct_tail_term(z: f64, k: f64) -> Option<f64> {
    let c = cct_c(z, k).ok()?;
    if !(c < 1.0) {
        return None;
    }
    let b = cct_b(z.sqrt(), k).ok()?;
    Some(c * b / (1.0 - c))
}

pub fn lemma_constants(model: &Model, inp: &LemmaInputs) -> Result<LemmaConstants> {
    let phi = &model.potential;
    let n = model.n_labels();
    let f = model.spins.f_norm();
    let (delta, beta) = (inp.delta, inp.beta);
    let series = series_constants(delta, f)?;
    let d_b = d_beta(&model.spins, phi, beta, inp.radius);
    let q = delta * f;

    // high temperature, small t
    let c_kp = 4.0 * q;
    let (beta_c, d_beta_c, a_kp, d_high_t) = if c_kp < std::f64::consts::E.recip() {
        let th = beta_c_solve(c_kp, phi, n, inp.radius)?;
        let a = a_beta(c_kp, beta, phi, n, inp.radius)?.pessimistic();
        let dbc = if th.beta.is_finite() {
            d_beta(&model.spins, phi, th.beta, inp.radius)
        } else {
            model.spins.lambda_f2() / model.spins.total_mass()
        };
        let d = 0.5 * (q.cos() * dbc - delta * f.powi(3) - series.b_delta * f * f - f * f * a / q);
        (
            th.beta,
            dbc,
            a,
            Flagged::from(Some(d).filter(|v| v.is_finite())),
        )
    } else {
        (0.0, f64::NAN, f64::NAN, Flagged::suppressed())
    };

    // high temperature, large t
    let alpha_beta = a_beta(0.0, beta, phi, n, inp.radius)?.pessimistic();
    let alpha_bar = boltzmann_defect_sum(phi, n, beta, inp.radius)
        .scaled((2.0 * (2.0 + inp.c_high_t)).exp())
        .pessimistic();
    let c_high_t =
        Flagged::from(Some(inp.c_high_t - alpha_beta - alpha_bar).filter(|v| v.is_finite()));

    // decimation
    let bar = phi_bar(phi, inp.r0);
    let k = k_from_potential(phi, inp.r0, inp.radius).ok();
    let kk = k.map_or(f64::INFINITY, |k| k.pessimistic());
    let bz = beta * bar * (beta * bar).exp();
    let z0 = (4.0 * q).max(bz);
    let z1 = bz;
    let phi_cam = if kk.is_finite() && q > 0.0 {
        match (cct_b(z0.sqrt(), kk), cct_c(z0, kk)) {
            (Ok(b), Ok(c)) if c < 1.0 => {
                Flagged::from(Some(f * (z0 / delta) * b.exp() * b / (1.0 - c)))
            }
            _ => Flagged::suppressed(),
        }
    } else {
        Flagged::suppressed()
    };
    let d_cam = match phi_cam.value {
        Some(p) => Flagged::from(Some(
            0.5 * (q.cos() * d_b - 2.0 * delta * f.powi(3) - series.b_delta * f * f - p),
        )),
        None => Flagged::suppressed(),
    };
    let z0_dec = beta * bar * (2.0 * inp.c_cam + beta * bar).exp();
    let c_cam = if kk.is_finite() {
        match (cct_tail_term(z0_dec, kk), cct_tail_term(z1, kk)) {
            (Some(a), Some(b)) => Flagged::from(Some(inp.c_cam - a - b)),
            _ => Flagged::suppressed(),
        }
    } else {
        Flagged::suppressed()
    };

    Ok(LemmaConstants {
        inputs: *inp,
        d_beta: d_b,
        c_kp,
        beta_c,
        d_beta_c,
        a_beta_kp: a_kp,
        beta_below_beta_c: beta < beta_c,
        series,
        d_high_t,
        alpha_beta,
        alpha_bar_c_beta: alpha_bar,
        c_high_t,
        phi_bar_r0: bar,
        k,
        z0_cam: z0,
        z1_cam: z1,
        phi_cam,
        d_cam,
        z0_cam_decimated: z0_dec,
        c_cam,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpReport {
    pub c: f64,
    pub beta: f64,
    pub cutoffs: Cutoffs,
    pub polymers_counted: usize,
    /// Truncated pinned sum; a lower bound of the full sum.
    pub lhs: f64,
    pub a_beta: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

/// `sum_{R meets pin} C^{|gamma1|} zeta-hat(gamma2) e^{|R~|}` against
/// `(Ce + a_beta) |pin|`.
pub fn kp_pinned_verify(
    ctx: &ActivityContext,
    model: &Model,
    c: f64,
    pin: &Polymer,
    cutoffs: Cutoffs,
) -> Result<KpReport> {
    check_c(c)?;
    if pin.is_empty() {
        return Err(Error::Precondition(
            "pin must be a non-empty polymer".into(),
        ));
    }
    let radius = model.potential.truncation_radius() as u64;
    let a = a_beta(c, ctx.beta(), &model.potential, model.n_labels(), radius)?.partial;
    let polymers = enumerate_polymers(ctx.region(), model.potential.truncation_radius(), cutoffs)?;
    let mut lhs = 0.0;
    let mut counted = 0;
    for r in polymers.iter().filter(|r| r.intersects(pin)) {
        let hat = ctx.activity(&r.gamma2_polymer(), ActivityKind::ZetaHat)?.re;
        lhs += c.powi(r.n_singles() as i32) * hat * (r.support().len() as f64).exp();
        counted += 1;
    }
    let rhs = (c * std::f64::consts::E + a) * pin.support().len() as f64;
    Ok(KpReport {
        c,
        beta: ctx.beta(),
        cutoffs,
        polymers_counted: counted,
        lhs,
        a_beta: a,
        rhs,
        margin: rhs - lhs,
        holds: lhs <= rhs,
    })
}

/// Largest `beta` with `D_highT > 0` at the given `delta`.
pub fn beta_delta(model: &Model, delta: f64, radius: u64) -> Result<f64> {
    let eval = |beta: f64| {
        lemma_constants(
            model,
            &LemmaInputs {
                delta,
                beta,
                c_high_t: 0.0,
                c_cam: 0.0,
                r0: 1,
                radius,
            },
        )
        .map(|l| l.d_high_t.positive)
        .unwrap_or(false)
    };
    lemma_constants(
        model,
        &LemmaInputs {
            delta,
            beta: 0.0,
            c_high_t: 0.0,
            c_cam: 0.0,
            r0: 1,
            radius,
        },
    )?;
    Ok(bisect_predicate(eval, 1e-6))
}

/// Largest `beta` with `C_highT > 0` for the constant `c`.
pub fn beta_of_c(model: &Model, c: f64, radius: u64) -> Result<f64> {
    let n = model.n_labels();
    let phi = &model.potential;
    let value = |beta: f64| -> f64 {
        let a = a_beta(0.0, beta, phi, n, radius)
            .map(|s| s.pessimistic())
            .unwrap_or(f64::INFINITY);
        let bar = boltzmann_defect_sum(phi, n, beta, radius)
            .scaled((2.0 * (2.0 + c)).exp())
            .pessimistic();
        c - a - bar
    };
    Ok(bisect_predicate(|b| value(b) > 0.0, 1e-9))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstantsInputs {
    pub beta: f64,
    pub delta: f64,
    /// `C` of the pinned-sum condition.
    pub c_kp: f64,
    pub epsilon: f64,
    pub epsilon_c: Option<f64>,
    pub r0: u32,
    pub radius: u64,
    pub boundary_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpConstants {
    pub c: f64,
    pub a_beta: LatticeSum,
    pub beta_c: Threshold,
    pub condition_holds: bool,
    pub series: SeriesConstants,
    pub alpha: AlphaConstants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest `beta` with `D_highT > 0`.
    pub beta_delta: f64,
    /// Largest `beta` with `C_highT > 0`.
    pub beta_of_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub inputs: ConstantsInputs,
    pub truncation_radius: u32,
    pub norm: crate::model::NormReport,
    pub kp: KpConstants,
    pub prop: PropConstants,
    pub lemma: LemmaConstants,
    pub thresholds: Thresholds,
}

pub fn constants_report(model: &Model, inp: &ConstantsInputs) -> Result<ConstantsReport> {
    let phi = &model.potential;
    let n = model.n_labels();
    let prop = prop_constants(
        model,
        &PropInputs {
            beta: inp.beta,
            delta: inp.delta,
            epsilon: inp.epsilon,
            epsilon_c: inp.epsilon_c,
            radius: inp.radius,
            boundary_samples: inp.boundary_samples,
            seed: inp.seed,
        },
    )?;
    let a = a_beta(inp.c_kp, inp.beta, phi, n, inp.radius)?;
    let kp = KpConstants {
        c: inp.c_kp,
        a_beta: a,
        beta_c: beta_c_solve(inp.c_kp, phi, n, inp.radius)?,
        condition_holds: inp.c_kp * std::f64::consts::E + a.pessimistic() < 1.0,
        series: series_constants(inp.delta, model.spins.f_norm())?,
        alpha: alpha_constants(
            inp.delta,
            inp.beta,
            prop.c_c,
            phi,
            n,
            inp.radius,
            model.spins.f_norm(),
        )?,
    };
    let lemma = lemma_constants(
        model,
        &LemmaInputs {
            delta: inp.delta,
            beta: inp.beta,
            c_high_t: prop.c_c,
            c_cam: prop.c_b,
            r0: inp.r0,
            radius: inp.radius,
        },
    )?;
    let thresholds = Thresholds {
        beta_delta: beta_delta(model, inp.delta, inp.radius)?,
        beta_of_c: beta_of_c(model, prop.c_c, inp.radius)?,
    };
    Ok(ConstantsReport {
        inputs: *inp,
        truncation_radius: phi.truncation_radius(),
        norm: potential_norm(phi, inp.radius),
        kp,
        prop,
        lemma,
        thresholds,
    })
}
