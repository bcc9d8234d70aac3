//! Exact finite-volume Gibbs distributions by enumeration, and a Metropolis
//! sampler for volumes beyond the enumeration budget.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_budget, saturating_pow, Error, Result};
use crate::model::{BoundaryCondition, Interaction, Model, Region};

pub const DEFAULT_STATE_BUDGET: u128 = 1 << 24;

/// Configurations per work chunk. Each chunk starts from a freshly computed
/// energy so incremental updates never accumulate over more than this many
/// steps.
const CHUNK: usize = 1 << 12;

/// Neumaier-compensated sum.
pub(crate) fn stable_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + stable_sum(xs.iter().map(|x| (x - m).exp())).ln()
}

/// Decodes configuration `idx` in mixed radix, last site fastest.
pub fn decode_config(mut idx: usize, n_sites: usize, n_labels: usize, out: &mut [usize]) {
    for slot in out[..n_sites].iter_mut().rev() {
        *slot = idx % n_labels;
        idx /= n_labels;
    }
}

/// The Gibbs measure on a region, fully enumerated.
#[derive(Clone, Debug)]
pub struct ExactGibbs {
    region: Region,
    beta: f64,
    interaction: Interaction,
    log_weights: Vec<f64>,
    sk: Vec<i32>,
    log_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkStatistics {
    pub mean: f64,
    /// `D_k`
    pub variance: f64,
    /// `P(S_k = s)` for every attained `s`.
    pub mass: BTreeMap<i64, f64>,
}

impl ExactGibbs {
    pub fn build(
        model: &Model,
        region: &Region,
        beta: f64,
        bc: &BoundaryCondition,
    ) -> Result<Self> {
        Self::build_with_budget(model, region, beta, bc, DEFAULT_STATE_BUDGET)
    }

    pub fn build_with_budget(
        model: &Model,
        region: &Region,
        beta: f64,
        bc: &BoundaryCondition,
        budget: u128,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Domain(format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        let n = region.len();
        let q = model.n_labels();
        check_budget("configurations", saturating_pow(q, n), budget)?;
        let interaction = Interaction::compile(model, region, bc)?;
        let total = q.pow(n as u32);
        let mut log_weights = vec![0.0f64; total];
        let mut sk = vec![0i32; total];

        let chunk = {
            let mut c = 1usize;
            while c * q <= CHUNK && c < total {
                c *= q;
            }
            c.min(total)
        };
        let it = &interaction;
        log_weights
            .par_chunks_mut(chunk)
            .zip(sk.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(ci, (lw, s))| {
                let mut sigma = vec![0usize; n];
                decode_config(ci * chunk, n, q, &mut sigma);
                let mut energy = it.energy(&sigma);
                let mut ln_lambda: f64 = sigma.iter().map(|e| it.ln_weight[*e]).sum();
                let mut sum_f: i64 = it.sk(&sigma);
                for k in 0..lw.len() {
                    if k > 0 {
                        // odometer step, last site fastest
                        let mut x = n;
                        loop {
                            x -= 1;
                            let old = sigma[x];
                            let new = (old + 1) % q;
                            energy += it.delta_energy(&sigma, x, new);
                            ln_lambda += it.ln_weight[new] - it.ln_weight[old];
                            sum_f += it.f[new] - it.f[old];
                            sigma[x] = new;
                            if new != 0 {
                                break;
                            }
                        }
                    }
                    lw[k] = ln_lambda - beta * energy;
                    s[k] = sum_f as i32;
                }
            });
        let log_z = log_sum_exp(&log_weights);
        Ok(ExactGibbs {
            region: region.clone(),
            beta,
            interaction,
            log_weights,
            sk,
            log_z,
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn n_configs(&self) -> usize {
        self.log_weights.len()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    /// Per-configuration `ln(prod lambda(sigma_x)) - beta H(sigma)`.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn config(&self, idx: usize) -> Vec<usize> {
        let mut sigma = vec![0; self.region.len()];
        decode_config(
            idx,
            self.region.len(),
            self.interaction.n_labels,
            &mut sigma,
        );
        sigma
    }

    pub fn probability(&self, idx: usize) -> f64 {
        (self.log_weights[idx] - self.log_z).exp()
    }

    pub fn sk_of(&self, idx: usize) -> i64 {
        self.sk[idx] as i64
    }

    pub fn sk_statistics(&self) -> SkStatistics {
        let mut buckets: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for (lw, s) in self.log_weights.iter().zip(&self.sk) {
            buckets.entry(*s as i64).or_default().push(*lw);
        }
        let mass: BTreeMap<i64, f64> = buckets
            .into_iter()
            .map(|(s, lws)| (s, (log_sum_exp(&lws) - self.log_z).exp()))
            .collect();
        let mean = stable_sum(mass.iter().map(|(s, p)| *s as f64 * p));
        let variance = stable_sum(mass.iter().map(|(s, p)| (*s as f64 - mean).powi(2) * p));
        SkStatistics {
            mean,
            variance,
            mass,
        }
    }

    /// `mu(exp(i t Sbar_k))` when `centered`, `mu(exp(i t S_k))` otherwise.
    pub fn characteristic_function(&self, t: f64, centered: bool) -> Result<Complex64> {
        self.sk_statistics().characteristic_function(t, centered)
    }

    /// `Z_t = sum_sigma w(sigma) exp(i u S_k(sigma))`.
    pub fn twisted_partition_function(&self, u: f64) -> Complex64 {
        let stats = self.sk_statistics();
        stats.raw_charfn(u) * self.z()
    }

    /// Marginal law of the spins at the given region indices.
    pub fn marginal(&self, sites: &[usize]) -> BTreeMap<Vec<usize>, f64> {
        let mut buckets: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        let mut sigma = vec![0; self.region.len()];
        for (idx, lw) in self.log_weights.iter().enumerate() {
            decode_config(
                idx,
                self.region.len(),
                self.interaction.n_labels,
                &mut sigma,
            );
            let key: Vec<usize> = sites.iter().map(|i| sigma[*i]).collect();
            buckets.entry(key).or_default().push(*lw);
        }
        buckets
            .into_iter()
            .map(|(k, lws)| (k, (log_sum_exp(&lws) - self.log_z).exp()))
            .collect()
    }
}

impl SkStatistics {
    pub fn total_mass(&self) -> f64 {
        stable_sum(self.mass.values().copied())
    }

    /// `mu(exp(i u S_k))`.
    pub fn raw_charfn(&self, u: f64) -> Complex64 {
        let re = stable_sum(self.mass.iter().map(|(s, p)| p * (u * *s as f64).cos()));
        let im = stable_sum(self.mass.iter().map(|(s, p)| p * (u * *s as f64).sin()));
        Complex64::new(re, im)
    }

    pub fn characteristic_function(&self, t: f64, centered: bool) -> Result<Complex64> {
        if !centered {
            return Ok(self.raw_charfn(t));
        }
        if !(self.variance > 0.0) {
            return Err(Error::Precondition(
                "centered characteristic function needs D_k > 0".into(),
            ));
        }
        let sd = self.variance.sqrt();
        let re = stable_sum(
            self.mass
                .iter()
                .map(|(s, p)| p * (t * (*s as f64 - self.mean) / sd).cos()),
        );
        let im = stable_sum(
            self.mass
                .iter()
                .map(|(s, p)| p * (t * (*s as f64 - self.mean) / sd).sin()),
        );
        Ok(Complex64::new(re, im))
    }
}

/// Metropolis run parameters. `sweeps` counts all sweeps including burn-in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    pub seed: u64,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
}

/// Single-site Metropolis chain with systematic scan.
#[derive(Clone, Debug)]
pub struct McChain {
    seed: u64,
    rng: ChaCha8Rng,
    beta: f64,
    interaction: Interaction,
    sigma: Vec<usize>,
    sweep_count: u64,
    proposed: u64,
    accepted: u64,
}

impl McChain {
    /// Starts from a configuration drawn uniformly with the seeded generator.
    pub fn new(
        model: &Model,
        region: &Region,
        beta: f64,
        bc: &BoundaryCondition,
        seed: u64,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Domain(format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        let interaction = Interaction::compile(model, region, bc)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = interaction.n_labels;
        let sigma = (0..region.len()).map(|_| rng.gen_range(0..q)).collect();
        Ok(McChain {
            seed,
            rng,
            beta,
            interaction,
            sigma,
            sweep_count: 0,
            proposed: 0,
            accepted: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweep_count
    }

    pub fn configuration(&self) -> &[usize] {
        &self.sigma
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn sk(&self) -> i64 {
        self.interaction.sk(&self.sigma)
    }

    /// One pass over all sites in region order. The acceptance ratio
    /// includes `lambda(new)/lambda(old)` so that non-uniform weights are
    /// sampled correctly; for counting measure it is `exp(-beta dH)`.
    pub fn sweep(&mut self) {
        let q = self.interaction.n_labels;
        if q < 2 {
            self.sweep_count += 1;
            return;
        }
        for x in 0..self.sigma.len() {
            let old = self.sigma[x];
            let new = if q == 2 {
                1 - old
            } else {
                let r = self.rng.gen_range(0..q - 1);
                if r >= old {
                    r + 1
                } else {
                    r
                }
            };
            let dh = self.interaction.delta_energy(&self.sigma, x, new);
            let log_ratio =
                self.interaction.ln_weight[new] - self.interaction.ln_weight[old] - self.beta * dh;
            self.proposed += 1;
            let accept = log_ratio >= 0.0 || self.rng.gen::<f64>() < log_ratio.exp();
            if accept {
                self.sigma[x] = new;
                self.accepted += 1;
            }
        }
        self.sweep_count += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McMassRow {
    pub s: i64,
    pub p_hat: f64,
    pub tau_int: f64,
    pub n_eff: f64,
    /// `3 sqrt(p_hat (1 - p_hat) / n_eff)`
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRun {
    pub options: McOptions,
    pub samples: Vec<i64>,
    pub acceptance_rate: f64,
    pub mass: Vec<McMassRow>,
}

impl McRun {
    pub fn row(&self, s: i64) -> Option<&McMassRow> {
        self.mass.iter().find(|r| r.s == s)
    }
}

/// Integrated autocorrelation time with Sokal's automatic window (c = 5),
/// clamped below at 1.
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let mean = stable_sum(xs.iter().copied()) / n as f64;
    let var = stable_sum(xs.iter().map(|x| (x - mean).powi(2))) / n as f64;
    if var <= 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = stable_sum((0..n - lag).map(|i| (xs[i] - mean) * (xs[i + lag] - mean)))
            / (n - lag) as f64;
        tau += 2.0 * c / var;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

pub fn metropolis_run(
    model: &Model,
    region: &Region,
    beta: f64,
    bc: &BoundaryCondition,
    options: McOptions,
) -> Result<McRun> {
    if options.sweeps <= options.burn_in {
        return Err(Error::Precondition("sweeps must exceed burnIn".into()));
    }
    if options.thinning == 0 {
        return Err(Error::Precondition("thinning must be at least 1".into()));
    }
    let mut chain = McChain::new(model, region, beta, bc, options.seed)?;
    let mut samples =
        Vec::with_capacity(((options.sweeps - options.burn_in) / options.thinning + 1) as usize);
    for s in 0..options.sweeps {
        chain.sweep();
        if s >= options.burn_in && (s - options.burn_in).is_multiple_of(options.thinning) {
            samples.push(chain.sk());
        }
    }
    let mut values: Vec<i64> = samples.clone();
    values.sort_unstable();
    values.dedup();
    let n = samples.len() as f64;
    let mass = values
        .par_iter()
        .map(|&v| {
            let ind: Vec<f64> = samples
                .iter()
                .map(|s| if *s == v { 1.0 } else { 0.0 })
                .collect();
            let p_hat = stable_sum(ind.iter().copied()) / n;
            let tau_int = integrated_autocorrelation_time(&ind);
            let n_eff = n / tau_int;
            McMassRow {
                s: v,
                p_hat,
                tau_int,
                n_eff,
                radius: 3.0 * (p_hat * (1.0 - p_hat) / n_eff).sqrt(),
            }
        })
        .collect();
    Ok(McRun {
        options,
        samples,
        acceptance_rate: chain.acceptance_rate(),
        mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatticeBox, PairConvention, PairPotential, Site, SpinSpace};

    fn chain_model(alpha: f64, r: u32) -> Model {
        Model::long_range_ising(1.0, alpha, r).unwrap()
    }

    #[test]
    fn beta_zero_counts_states() {
        let m = chain_model(0.0, 3);
        let region = LatticeBox::new(1, 1).unwrap().region();
        let g = ExactGibbs::build(&m, &region, 0.0, &BoundaryCondition::Free).unwrap();
        assert!((g.z() - 8.0).abs() < 1e-12);
        let s = g.sk_statistics();
        assert!(s.mean.abs() < 1e-15);
        assert!((s.variance - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_site_is_lambda_mass() {
        let m = chain_model(0.5, 3);
        let region = LatticeBox::new(1, 0).unwrap().region();
        let g = ExactGibbs::build(&m, &region, 0.7, &BoundaryCondition::Free).unwrap();
        assert!((g.z() - 2.0).abs() < 1e-12);
        let phi = g.characteristic_function(0.3, false).unwrap();
        assert!((phi.re - 0.3f64.cos()).abs() < 1e-15);
        assert!(phi.im.abs() < 1e-15);
    }

    #[test]
    fn budget_refusal() {
        let m = chain_model(0.0, 2);
        let region = LatticeBox::new(1, 4).unwrap().region();
        let err = ExactGibbs::build_with_budget(&m, &region, 0.1, &BoundaryCondition::Free, 100)
            .unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn weighted_spin_space_z_at_beta_zero() {
        let spins = SpinSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![0.5, 1.0, 2.0],
            vec![0, 1, 3],
        )
        .unwrap();
        let phi = PairPotential::zero(1, 3, 2);
        let m = Model::new(spins, phi, PairConvention::Unordered).unwrap();
        let region = LatticeBox::new(1, 1).unwrap().region();
        let g = ExactGibbs::build(&m, &region, 0.0, &BoundaryCondition::Free).unwrap();
        assert!((g.z() - 3.5f64.powi(3)).abs() < 1e-10);
    }

    #[test]
    fn metropolis_beta_zero_accepts_everything() {
        let m = chain_model(0.0, 3);
        let region = LatticeBox::new(1, 2).unwrap().region();
        let opts = McOptions {
            seed: 7,
            sweeps: 100,
            burn_in: 10,
            thinning: 1,
        };
        let run = metropolis_run(&m, &region, 0.0, &BoundaryCondition::Free, opts).unwrap();
        assert_eq!(run.acceptance_rate, 1.0);
        assert_eq!(run.samples.len(), 90);
        let again = metropolis_run(&m, &region, 0.0, &BoundaryCondition::Free, opts).unwrap();
        assert_eq!(run.samples, again.samples);
    }

    #[test]
    fn one_site_chain_matches_conditional_law() {
        let m = chain_model(0.5, 3);
        let region = Region::from_sites(1, [Site::new(vec![0])]).unwrap();
        let bc = BoundaryCondition::Constant { label: 0 };
        let beta = 0.3;
        let opts = McOptions {
            seed: 11,
            sweeps: 200_000,
            burn_in: 100,
            thinning: 1,
        };
        let run = metropolis_run(&m, &region, beta, &bc, opts).unwrap();
        // h(+) = -2 (1 + 2^-1.5 + 3^-1.5), h(-) = -h(+)
        let h: f64 = -2.0 * (1.0 + 2f64.powf(-1.5) + 3f64.powf(-1.5));
        let p_plus = (-beta * h).exp() / ((-beta * h).exp() + (beta * h).exp());
        let row = run.row(1).unwrap();
        assert!(
            (row.p_hat - p_plus).abs() <= row.radius,
            "{} vs {p_plus}",
            row.p_hat
        );
    }

    #[test]
    fn stable_sum_cancels() {
        assert_eq!(stable_sum([1e16, 1.0, -1e16]), 1.0);
    }
}
