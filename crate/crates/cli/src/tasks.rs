//! One function per subcommand. Each writes its files under `<out>/<task>/`
//! and returns a record for the manifest.

use std::f64::consts::PI;

use lrclt_core::bounds::{
    beta_c_solve, constants_report, kp_pinned_verify, lemma_constants, prop_constants,
    ConstantsInputs, ConstantsReport, KpReport, LemmaConstants, LemmaInputs, PropConstants,
    PropInputs,
};
use lrclt_core::cluster::{
    factorization_check, full_family_partition_function, truncated_log_series, FactorizationReport,
    SeriesOptions, SeriesRow,
};
use lrclt_core::gibbs::McMassRow;
use lrclt_core::lclt::{
    charfn_bound_check, decimation_experiment, detect_span, iclt_row, integral_decomposition,
    lclt_discrepancy, lclt_discrepancy_mc, total_probability_check, CharfnCheck, DecimationBounds,
    DecimationReport, IcltRow, IntegralDecomposition, LcltTable, Regime, TotalProbabilityReport,
};
use lrclt_core::polymer::{enumerate_polymers, ActivityContext, ActivityKind, Cutoffs, Polymer};
use lrclt_core::{
    metropolis_run, Error as CoreError, ExactGibbs, LatticeBox, McOptions, SkStatistics,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{Resolved, Task};
use crate::output::{Cell, OutputDir, Status, TaskRecord};
use crate::CliError;

/// Allowance for quadrature error in the integral majorant check.
pub const GRID_ALLOWANCE: f64 = 1e-6;
/// Largest identity error accepted by the factorization check.
pub const FACTORIZATION_TOL: f64 = 1e-10;
/// Largest law-of-total-probability error accepted.
pub const TOTAL_PROBABILITY_TOL: f64 = 1e-10;
/// Polymer families larger than this skip the truncated series.
pub const SERIES_FAMILY_LIMIT: usize = 4096;

fn core(e: CoreError) -> CliError {
    if e.is_budget() {
        CliError::Budget(e.to_string())
    } else {
        CliError::Core(e.to_string())
    }
}

struct Recorder {
    task: Task,
    status: Status,
    notes: Vec<String>,
    files: Vec<String>,
}

impl Recorder {
    fn new(task: Task) -> Self {
        Recorder {
            task,
            status: Status::Ok,
            notes: Vec::new(),
            files: Vec::new(),
        }
    }

    fn path(&self, file: &str) -> String {
        format!("{}/{}", self.task.name(), file)
    }

    fn csv(
        &mut self,
        out: &mut OutputDir,
        file: &str,
        header: &[&str],
        rows: &[Vec<Cell>],
    ) -> Result<(), CliError> {
        let e = out.write_csv(&self.path(file), header, rows)?;
        self.files.push(e.path);
        Ok(())
    }

    fn json<T: Serialize>(
        &mut self,
        out: &mut OutputDir,
        file: &str,
        value: &T,
    ) -> Result<(), CliError> {
        let e = out.write_json(&self.path(file), value)?;
        self.files.push(e.path);
        Ok(())
    }

    fn violation(&mut self, note: String) {
        self.status = Status::Violation;
        self.notes.push(note);
    }

    fn refuse(&mut self, note: String) {
        if self.status == Status::Ok {
            self.status = Status::Refused;
        }
        self.notes.push(note);
    }

    fn finish(self) -> TaskRecord {
        TaskRecord {
            task: self.task.name().into(),
            status: self.status,
            notes: self.notes,
            files: self.files,
        }
    }
}

pub fn run_task(r: &Resolved, task: Task, out: &mut OutputDir) -> Result<TaskRecord, CliError> {
    match task {
        Task::VerifyExpansion => verify_expansion(r, out),
        Task::Bounds => bounds(r, out),
        Task::Lclt => lclt(r, out),
        Task::Charfn => charfn(r, out),
        Task::Decimate => decimate(r, out),
        Task::Mc => mc(r, out),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub factorization: Vec<FactorizationReport>,
    pub series_beta: f64,
    pub series_family_size: Option<usize>,
    pub log_xi: Option<[f64; 2]>,
    pub series: Vec<SeriesRow>,
}

pub fn verify_expansion(r: &Resolved, out: &mut OutputDir) -> Result<TaskRecord, CliError> {
    let mut rec = Recorder::new(Task::VerifyExpansion);
    let region = r.bx.region();
    let cfg = &r.config.expansion;
    let mut reports = Vec::new();
    for &beta in &cfg.betas {
        for &t in &cfg.ts {
            let rep = factorization_check(&r.model, &region, beta, &r.bc, t).map_err(core)?;
            if rep.rel_error.is_nan() || rep.rel_error > FACTORIZATION_TOL {
                rec.violation(format!(
                    "factorization error {:e} at beta {beta}, t {t}",
                    rep.rel_error
                ));
            }
            reports.push(rep);
        }
    }
    rec.csv(
        out,
        "factorization.csv",
        &[
            "n_sites",
            "beta",
            "t",
            "d_k",
            "lhs_re",
            "lhs_im",
            "rhs_re",
            "rhs_im",
            "rel_error",
        ],
        &reports
            .iter()
            .map(|f| {
                vec![
                    f.n_sites.into(),
                    f.beta.into(),
                    f.t.into(),
                    f.d_k.into(),
                    f.lhs[0].into(),
                    f.lhs[1].into(),
                    f.rhs[0].into(),
                    f.rhs[1].into(),
                    f.rel_error.into(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;

    // At t = 0 every single-site bond has zero activity, so the pair-only
    // family carries the whole series.
    let mut report = ExpansionReport {
        factorization: reports,
        series_beta: r.config.beta,
        series_family_size: None,
        log_xi: None,
        series: Vec::new(),
    };
    if cfg.series_order > 0 {
        let ctx = ActivityContext::new(&r.model, &region, r.config.beta, &r.bc, 0.0, None)
            .map_err(core)?;
        let radius = r.model.potential.truncation_radius();
        let n = region.len();
        let cut = Cutoffs {
            max_bonds: n * (n - 1) / 2,
            max_pair_range: radius as u64,
            restrict_to_r2: true,
        };
        match enumerate_polymers(&region, radius, cut) {
            Ok(family) if family.len() <= SERIES_FAMILY_LIMIT => {
                let xi = full_family_partition_function(&ctx).map_err(core)?;
                let target = xi.ln();
                let rows = match truncated_log_series(
                    &ctx,
                    &family,
                    ActivityKind::ZetaT,
                    &SeriesOptions::plain(cfg.series_order),
                ) {
                    Ok(rows) => rows,
                    Err(e) if e.is_budget() => {
                        rec.notes.push(format!("series skipped: {e}"));
                        Vec::new()
                    }
                    Err(e) => return Err(core(e)),
                };
                rec.csv(
                    out,
                    "series.csv",
                    &[
                        "order",
                        "term_count",
                        "increment_re",
                        "increment_im",
                        "partial_re",
                        "partial_im",
                        "abs_error",
                    ],
                    &rows
                        .iter()
                        .map(|s| {
                            let err = (Complex64::new(s.partial_sum[0], s.partial_sum[1]) - target)
                                .norm();
                            vec![
                                s.n.into(),
                                Cell::S(s.term_count.to_string()),
                                s.increment[0].into(),
                                s.increment[1].into(),
                                s.partial_sum[0].into(),
                                s.partial_sum[1].into(),
                                err.into(),
                            ]
                        })
                        .collect::<Vec<_>>(),
                )?;
                report.series_family_size = Some(family.len());
                report.log_xi = Some([target.re, target.im]);
                report.series = rows;
            }
            Ok(family) => rec.notes.push(format!(
                "series skipped: {} polymers exceed the limit of {SERIES_FAMILY_LIMIT}",
                family.len()
            )),
            Err(e) if e.is_budget() => rec.notes.push(format!("series skipped: {e}")),
            Err(e) => return Err(core(e)),
        }
    }
    rec.json(out, "expansion.json", &report)?;
    Ok(rec.finish())
}

fn constants_inputs(r: &Resolved, beta: f64) -> ConstantsInputs {
    let b = &r.config.bounds;
    ConstantsInputs {
        beta,
        delta: b.delta,
        c_kp: r.config.kp.c,
        epsilon: b.epsilon,
        epsilon_c: b.epsilon_c,
        r0: b.r0,
        radius: b.radius,
        boundary_samples: b.boundary_samples,
        seed: r.config.seed,
    }
}

fn prop_at(r: &Resolved, beta: f64) -> Result<PropConstants, CliError> {
    let b = &r.config.bounds;
    prop_constants(
        &r.model,
        &PropInputs {
            beta,
            delta: b.delta,
            epsilon: b.epsilon,
            epsilon_c: b.epsilon_c,
            radius: b.radius,
            boundary_samples: b.boundary_samples,
            seed: r.config.seed,
        },
    )
    .map_err(core)
}

fn lemma_at(
    r: &Resolved,
    beta: f64,
    prop: &PropConstants,
    r0: u32,
) -> Result<LemmaConstants, CliError> {
    lemma_constants(
        &r.model,
        &LemmaInputs {
            delta: r.config.bounds.delta,
            beta,
            c_high_t: prop.c_c,
            c_cam: prop.c_b,
            r0,
            radius: r.config.bounds.radius,
        },
    )
    .map_err(core)
}

/// Index of the site closest to the centre of the box.
fn centre_index(bx: &LatticeBox) -> usize {
    bx.cardinality() / 2
}

pub fn kp_check(r: &Resolved) -> Result<KpReport, CliError> {
    let kp = &r.config.kp;
    let beta = match kp.beta {
        Some(b) => b,
        None => {
            let th = beta_c_solve(
                kp.c,
                &r.model.potential,
                r.model.n_labels(),
                r.config.bounds.radius,
            )
            .map_err(core)?;
            if th.beta.is_finite() {
                th.beta / 2.0
            } else {
                r.config.beta
            }
        }
    };
    let region = r.bx.region();
    let ctx = ActivityContext::new(&r.model, &region, beta, &r.bc, 0.0, None).map_err(core)?;
    kp_pinned_verify(
        &ctx,
        &r.model,
        kp.c,
        &Polymer::single(centre_index(&r.bx)),
        r.config.kp_cutoffs(),
    )
    .map_err(core)
}

fn flat_constants(c: &ConstantsReport) -> Vec<Vec<Cell>> {
    let row = |name: &str, value: f64, ok: Option<bool>| {
        vec![
            Cell::S(name.into()),
            value.into(),
            ok.map_or(Cell::S(String::new()), Cell::B),
        ]
    };
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    let l = &c.lemma;
    vec![
        row("norm_partial", c.norm.partial_sum, None),
        row("a_beta", c.kp.a_beta.partial, Some(c.kp.condition_holds)),
        row("beta_c", c.kp.beta_c.beta, None),
        row("a_delta", c.kp.series.a_delta, None),
        row("b_delta", c.kp.series.b_delta, None),
        row(
            "alpha_delta_beta",
            c.kp.alpha.alpha_delta_beta,
            Some(c.kp.alpha.alpha_delta_beta_below_one),
        ),
        row(
            "alpha_beta",
            c.kp.alpha.alpha_beta,
            Some(c.kp.alpha.alpha_beta_below_one),
        ),
        row(
            "alpha_bar_c_beta",
            c.kp.alpha.alpha_bar_c_beta,
            Some(c.kp.alpha.alpha_bar_below_one),
        ),
        row("d_beta", c.prop.d_beta, None),
        row(
            "gnedenko_d_x",
            c.prop.gnedenko.d_x,
            Some(c.prop.gnedenko.grid.converged),
        ),
        row("c_b", c.prop.c_b, Some(c.prop.c_b_grid.converged)),
        row("c0", c.prop.c0, None),
        row("c_c", c.prop.c_c, None),
        row("beta_prime_delta", c.prop.beta_prime_delta, None),
        row("d_high_t", opt(l.d_high_t.value), Some(l.d_high_t.positive)),
        row("c_high_t", opt(l.c_high_t.value), Some(l.c_high_t.positive)),
        row("phi_bar_r0", l.phi_bar_r0, None),
        row("k_partial", l.k.map_or(f64::NAN, |k| k.partial), None),
        row("z0_cam", l.z0_cam, None),
        row("z1_cam", l.z1_cam, None),
        row("phi_cam", opt(l.phi_cam.value), Some(l.phi_cam.positive)),
        row("d_cam", opt(l.d_cam.value), Some(l.d_cam.positive)),
        row("c_cam", opt(l.c_cam.value), Some(l.c_cam.positive)),
        row("beta_delta", c.thresholds.beta_delta, None),
        row("beta_of_c", c.thresholds.beta_of_c, None),
    ]
}

pub fn bounds(r: &Resolved, out: &mut OutputDir) -> Result<TaskRecord, CliError> {
    let mut rec = Recorder::new(Task::Bounds);
    let report = constants_report(&r.model, &constants_inputs(r, r.config.beta)).map_err(core)?;
    rec.json(out, "constants.json", &report)?;
    rec.csv(
        out,
        "constants.csv",
        &["name", "value", "flag"],
        &flat_constants(&report),
    )?;
    for g in [&report.prop.gnedenko.grid, &report.prop.c_b_grid] {
        if !g.converged {
            rec.notes
                .push("a characteristic-function grid did not converge to 1e-6".into());
        }
    }
    let kp = kp_check(r)?;
    if !kp.holds {
        rec.violation(format!("pinned sum {:e} exceeds {:e}", kp.lhs, kp.rhs));
    }
    rec.json(out, "kp.json", &kp)?;
    Ok(rec.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LcltRow {
    pub k: u32,
    pub iclt: IcltRow,
    pub lclt: LcltTable,
    pub integrals: Option<IntegralDecomposition>,
    /// `2 pi sup_b discrepancy <= I1 + I2 + I3 + I4 + allowance`
    pub majorant_holds: Option<bool>,
}

fn mc_statistics(mass: &[McMassRow], samples: &[i64]) -> SkStatistics {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| *s as f64).sum::<f64>() / n;
    let variance = samples
        .iter()
        .map(|s| (*s as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    SkStatistics {
        mean,
        variance,
        mass: mass.iter().map(|m| (m.s, m.p_hat)).collect(),
    }
}

pub fn lclt_rows(r: &Resolved) -> Result<(Vec<LcltRow>, Vec<String>), CliError> {
    let span = detect_span(&r.model.spins).map_err(core)?;
    let cfg = &r.config.lclt;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for k in r.ks() {
        let bx = LatticeBox::new(r.model.dim(), k).map_err(core)?;
        let region = bx.region();
        let n = bx.cardinality();
        let (stats, table) = match ExactGibbs::build(&r.model, &region, r.config.beta, &r.bc) {
            Ok(g) => {
                let stats = g.sk_statistics();
                let table = lclt_discrepancy(&stats, n, &span).map_err(core)?;
                (stats, table)
            }
            Err(e) if e.is_budget() => {
                notes.push(format!("k = {k}: {e}; using Metropolis"));
                let m = &r.config.mc;
                let run = metropolis_run(
                    &r.model,
                    &region,
                    r.config.beta,
                    &r.bc,
                    McOptions {
                        seed: r.config.seed,
                        sweeps: m.sweeps,
                        burn_in: m.burn_in,
                        thinning: m.thinning,
                    },
                )
                .map_err(core)?;
                let table = lclt_discrepancy_mc(&run, n, &span).map_err(core)?;
                (mc_statistics(&run.mass, &run.samples), table)
            }
            Err(e) => return Err(core(e)),
        };
        let iclt = iclt_row(k, n, &stats).map_err(core)?;
        let integrals =
            match integral_decomposition(&stats, &span, cfg.b, cfg.delta, cfg.resolution) {
                Ok(i) => Some(i),
                Err(CoreError::Precondition(m)) => {
                    notes.push(format!("k = {k}: integrals skipped, {m}"));
                    None
                }
                Err(e) => return Err(core(e)),
            };
        let majorant_holds = integrals.map(|i| 2.0 * PI * table.sup <= i.sum + GRID_ALLOWANCE);
        rows.push(LcltRow {
            k,
            iclt,
            lclt: table,
            integrals,
            majorant_holds,
        });
    }
    Ok((rows, notes))
}

pub fn lclt(r: &Resolved, out: &mut OutputDir) -> Result<TaskRecord, CliError> {
    let mut rec = Recorder::new(Task::Lclt);
    let (rows, notes) = lclt_rows(r)?;
    rec.notes.extend(notes);
    for row in &rows {
        if row.majorant_holds == Some(false) {
            rec.violation(format!(
                "k = {}: 2 pi sup discrepancy exceeds the integral majorant",
                row.k
            ));
        }
    }
    rec.csv(
        out,
        "lclt.csv",
        &[
            "k",
            "n_sites",
            "D_k",
            "D_k_per_site",
            "kolmogorov",
            "discrepancy",
            "radius",
            "argmax_b",
            "method",
        ],
        &rows
            .iter()
            .map(|w| {
                vec![
                    w.k.into(),
                    w.iclt.n_sites.into(),
                    w.iclt.d_k.into(),
                    w.iclt.d_k_per_site.into(),
                    w.iclt.kolmogorov.into(),
                    w.lclt.sup.into(),
                    w.lclt.sup_radius.into(),
                    w.lclt.argmax_b.into(),
                    Cell::S(format!("{:?}", w.lclt.method).to_lowercase()),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    let mut cells = Vec::new();
    for w in &rows {
        for c in &w.lclt.cells {
            cells.push(vec![
                w.k.into(),
                c.b.into(),
                c.s.into(),
                c.p.into(),
                c.z.into(),
                c.scaled.into(),
                c.gaussian.into(),
                c.discrepancy.into(),
                c.radius.into(),
            ]);
        }
    }
    rec.csv(
        out,
        "lclt_cells.csv",
        &[
            "k",
            "b",
            "s",
            "p",
            "z",
            "scaled",
            "gaussian",
            "discrepancy",
            "radius",
        ],
        &cells,
    )?;
    let integrals: Vec<Vec<Cell>> = rows
        .iter()
        .filter_map(|w| w.integrals.map(|i| (w, i)))
        .map(|(w, i)| {
            vec![
                w.k.into(),
                i.b.into(),
                i.delta.into(),
                i.i1.into(),
                i.i2.into(),
                i.i3.into(),
                i.i4.into(),
                i.sum.into(),
                (2.0 * PI * w.lclt.sup).into(),
                i.grid_error.into(),
                w.majorant_holds.unwrap_or(false).into(),
            ]
        })
        .collect();
    rec.csv(
        out,
        "integrals.csv",
        &[
            "k",
            "B",
            "delta",
            "I1",
            "I2",
            "I3",
            "I4",
            "sum",
            "two_pi_discrepancy",
            "grid_error",
            "holds",
        ],
        &integrals,
    )?;
    rec.json(out, "lclt.json", &rows)?;
    Ok(rec.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharfnRun {
    pub beta: f64,
    pub constant: Option<f64>,
    pub check: Option<CharfnCheck>,
    pub refusal: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharfnReport {
    pub high_t: CharfnRun,
    pub high_t_tail: CharfnRun,
}

/// Half the largest point of a 201-point grid on `[0, beta_C]` with `D > 0`.
pub fn auto_high_t_beta(r: &Resolved) -> Result<f64, CliError> {
    let delta = r.config.bounds.delta;
    let c = 4.0 * delta * r.model.spins.f_norm();
    let top = beta_c_solve(
        c,
        &r.model.potential,
        r.model.n_labels(),
        r.config.bounds.radius,
    )
    .map_err(core)?
    .beta;
    let top = if top.is_finite() { top } else { 1.0 };
    let mut best = 0.0;
    for i in 0..=200 {
        let beta = top * i as f64 / 200.0;
        let prop = prop_at(r, beta)?;
        if lemma_at(r, beta, &prop, r.config.bounds.r0)?
            .d_high_t
            .positive
        {
            best = beta;
        }
    }
    Ok(best / 2.0)
}

/// Half the largest `beta` with `C > 0`, capped by the single-site threshold.
pub fn auto_tail_beta(r: &Resolved) -> Result<f64, CliError> {
    let prop = prop_at(r, 0.0)?;
    let b =
        lrclt_core::bounds::beta_of_c(&r.model, prop.c_c, r.config.bounds.radius).map_err(core)?;
    let b = b.min(prop.beta_prime_delta);
    Ok(if b.is_finite() {
        b / 2.0
    } else {
        r.config.beta
    })
}

fn charfn_run(r: &Resolved, beta: f64, tail: bool) -> Result<CharfnRun, CliError> {
    let span = detect_span(&r.model.spins).map_err(core)?;
    let delta = r.config.bounds.delta;
    let prop = prop_at(r, beta)?;
    let lemma = lemma_at(r, beta, &prop, r.config.bounds.r0)?;
    let (flag, regime) = if tail {
        (
            lemma.c_high_t,
            lemma.c_high_t.value.map(|c| Regime::HighTTail { delta, c }),
        )
    } else {
        (
            lemma.d_high_t,
            lemma.d_high_t.value.map(|d| Regime::HighT { delta, d }),
        )
    };
    if !flag.positive {
        return Ok(CharfnRun {
            beta,
            constant: flag.value,
            check: None,
            refusal: Some(format!(
                "constant {} is not positive at beta = {beta}; see bounds/constants.json",
                if tail { "C" } else { "D" }
            )),
        });
    }
    let g = ExactGibbs::build(&r.model, &r.bx.region(), beta, &r.bc).map_err(core)?;
    let check = charfn_bound_check(
        &g.sk_statistics(),
        r.bx.cardinality(),
        &span,
        regime.unwrap(),
        r.config.charfn.grid,
    )
    .map_err(core)?;
    Ok(CharfnRun {
        beta,
        constant: flag.value,
        check: Some(check),
        refusal: None,
    })
}

pub fn charfn_report(r: &Resolved) -> Result<CharfnReport, CliError> {
    let bh = match r.config.charfn.high_t_beta {
        Some(b) => b,
        None => auto_high_t_beta(r)?,
    };
    let bt = match r.config.charfn.tail_beta {
        Some(b) => b,
        None => auto_tail_beta(r)?,
    };
    Ok(CharfnReport {
        high_t: charfn_run(r, bh, false)?,
        high_t_tail: charfn_run(r, bt, true)?,
    })
}

pub fn charfn(r: &Resolved, out: &mut OutputDir) -> Result<TaskRecord, CliError> {
    let mut rec = Recorder::new(Task::Charfn);
    let report = charfn_report(r)?;
    for (name, run) in [
        ("high_t", &report.high_t),
        ("high_t_tail", &report.high_t_tail),
    ] {
        if let Some(msg) = &run.refusal {
            rec.refuse(format!("{name}: {msg}"));
        }
        if let Some(check) = &run.check {
            if check.violations > 0 {
                rec.violation(format!(
                    "{name}: {} grid points exceed the bound, first at t = {:e}",
                    check.violations,
                    check.first_violation.unwrap_or(f64::NAN)
                ));
            }
            rec.csv(
                out,
                &format!("charfn_{name}.csv"),
                &["t", "modulus", "bound", "holds"],
                &check
                    .points
                    .iter()
                    .map(|p| vec![p.t.into(), p.modulus.into(), p.bound.into(), p.holds.into()])
                    .collect::<Vec<_>>(),
            )?;
        }
    }
    rec.json(out, "charfn.json", &report)?;
    Ok(rec.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecimateReport {
    pub lemma: LemmaConstants,
    pub experiment: DecimationReport,
    pub total_probability: TotalProbabilityReport,
    pub total_probability_holds: bool,
}

pub fn decimate_report(r: &Resolved) -> Result<DecimateReport, CliError> {
    let d = &r.config.decimation;
    let beta = r.config.beta;
    let prop = prop_at(r, beta)?;
    let lemma = lemma_at(r, beta, &prop, d.r0)?;
    let bounds = DecimationBounds {
        delta: r.config.bounds.delta,
        d_cam: lemma.d_cam.value.filter(|_| lemma.d_cam.positive),
        c_cam: lemma.c_cam.value.filter(|_| lemma.c_cam.positive),
    };
    let experiment = decimation_experiment(
        &r.model,
        &r.bx,
        &r.bc,
        beta,
        d.r0,
        d.samples,
        r.config.seed,
        bounds,
        d.grid,
    )
    .map_err(core)?;
    let total_probability =
        total_probability_check(&r.model, &r.bx, &r.bc, beta, d.r0).map_err(core)?;
    Ok(DecimateReport {
        lemma,
        experiment,
        total_probability_holds: total_probability.max_abs_error <= TOTAL_PROBABILITY_TOL,
        total_probability,
    })
}

pub fn decimate(r: &Resolved, out: &mut OutputDir) -> Result<TaskRecord, CliError> {
    let mut rec = Recorder::new(Task::Decimate);
    let rep = decimate_report(r)?;
    if !rep.total_probability_holds {
        rec.violation(format!(
            "law of total probability off by {:e}",
            rep.total_probability.max_abs_error
        ));
    }
    if rep.experiment.uniform_bound_holds == Some(false) {
        rec.violation("sampled conditional modulus exceeds exp(-C_cam |sublattice|)".into());
    }
    if rep.experiment.small_u_holds == Some(false) {
        rec.violation("sampled conditional modulus exceeds the quadratic bound".into());
    }
    if rep.experiment.bounds.c_cam.is_none() {
        rec.notes
            .push("C_cam is not positive; the uniform bound was not checked".into());
    }
    if rep.experiment.bounds.d_cam.is_none() {
        rec.notes
            .push("D_cam is not positive; the quadratic bound was not checked".into());
    }
    rec.csv(
        out,
        "decimation.csv",
        &["sample", "sup_modulus", "argmax_u", "small_u_ratio"],
        &rep.experiment
            .samples
            .iter()
            .map(|s| {
                vec![
                    s.index.into(),
                    s.sup_modulus.into(),
                    s.argmax_u.into(),
                    s.small_u_ratio.unwrap_or(f64::NAN).into(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    rec.json(out, "decimation.json", &rep)?;
    Ok(rec.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McCompareRow {
    pub s: i64,
    pub p_hat: f64,
    pub radius: f64,
    pub tau_int: f64,
    pub n_eff: f64,
    pub p_exact: Option<f64>,
    pub within: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McReport {
    pub options: McOptions,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub rows: Vec<McCompareRow>,
}

pub fn mc_report(r: &Resolved) -> Result<McReport, CliError> {
    let m = &r.config.mc;
    let region = r.bx.region();
    let options = McOptions {
        seed: r.config.seed,
        sweeps: m.sweeps,
        burn_in: m.burn_in,
        thinning: m.thinning,
    };
    let run = metropolis_run(&r.model, &region, r.config.beta, &r.bc, options).map_err(core)?;
    let exact = match ExactGibbs::build(&r.model, &region, r.config.beta, &r.bc) {
        Ok(g) => Some(g.sk_statistics()),
        Err(e) if e.is_budget() => None,
        Err(e) => return Err(core(e)),
    };
    let mut values: Vec<i64> = run.mass.iter().map(|m| m.s).collect();
    if let Some(ex) = &exact {
        values.extend(ex.mass.keys().copied());
    }
    values.sort_unstable();
    values.dedup();
    let rows = values
        .into_iter()
        .map(|s| {
            let m = run.row(s);
            let (p_hat, radius, tau_int, n_eff) = m.map_or((0.0, 0.0, f64::NAN, f64::NAN), |m| {
                (m.p_hat, m.radius, m.tau_int, m.n_eff)
            });
            let p_exact = exact
                .as_ref()
                .map(|e| e.mass.get(&s).copied().unwrap_or(0.0));
            McCompareRow {
                s,
                p_hat,
                radius,
                tau_int,
                n_eff,
                p_exact,
                within: p_exact.map(|p| (p - p_hat).abs() <= radius),
            }
        })
        .collect();
    Ok(McReport {
        options,
        samples: run.samples.len(),
        acceptance_rate: run.acceptance_rate,
        rows,
    })
}

pub fn mc(r: &Resolved, out: &mut OutputDir) -> Result<TaskRecord, CliError> {
    let mut rec = Recorder::new(Task::Mc);
    let rep = mc_report(r)?;
    let bad: Vec<i64> = rep
        .rows
        .iter()
        .filter(|w| w.within == Some(false))
        .map(|w| w.s)
        .collect();
    if !bad.is_empty() {
        rec.violation(format!(
            "mass estimates outside their radius at S = {bad:?}"
        ));
    }
    if rep.rows.iter().all(|w| w.p_exact.is_none()) {
        rec.notes
            .push("no exact law within budget; estimates are not compared".into());
    }
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    rec.csv(
        out,
        "mc.csv",
        &[
            "s", "p_hat", "radius", "tau_int", "n_eff", "p_exact", "within",
        ],
        &rep.rows
            .iter()
            .map(|w| {
                vec![
                    w.s.into(),
                    w.p_hat.into(),
                    w.radius.into(),
                    w.tau_int.into(),
                    w.n_eff.into(),
                    opt(w.p_exact).into(),
                    w.within.map_or(Cell::S(String::new()), Cell::B),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    rec.json(out, "mc.json", &rep)?;
    Ok(rec.finish())
}
