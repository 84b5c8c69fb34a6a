//! Command-line front end.
//!
//! Every command writes its files into `--output DIR` together with
//! `provenance.txt`, which holds the canonical configuration, its hash and
//! the derived phase seeds. Outputs depend only on the input files, the
//! configuration and the seed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::design::{kw_optimize, KwResult, KwTrace, RobustObjective};
use crate::eligibility::{
    construct_from_summaries, n1_impact_study, range_shrinkage_ranking, summarize_all, DimScore, EligibilityOptions,
    EligibleSet,
};
use crate::error::{Error, Result};
use crate::model::sample_uniform;
use crate::reliability::{low_rmin_ranking, reliability_report};
use crate::seed;
use crate::summary::{SLOT_NAMES, TimeSeries};

pub mod config;
pub mod io;

use config::RunConfig;
use io::{fmt_full, fmt_short, read_records, read_series, write_csv, write_series, write_text};

#[derive(Debug, Parser)]
#[command(name = "drocal", version, about = "Eligibility-set calibration, reliability bounds and robust design")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Master seed; overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-e work (0 = all cores).
    #[arg(long, default_value_t = 0, global = true)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the 12-slot spectral summary of every data series.
    Summarize {
        /// Data series CSV: one row per series, `dt` then the values.
        #[arg(long)]
        data: PathBuf,
    },
    /// Degree of eligibility of sampled epistemic values.
    Eligibility {
        /// Data series CSV: one row per series, `dt` then the values.
        #[arg(long)]
        data: PathBuf,
    },
    /// Failure-probability ranges, severities and R_min/R_max per eligible e.
    Reliability {
        /// `eligibility.csv` from an earlier eligibility run.
        #[arg(long)]
        records: PathBuf,
        /// Data series CSV: one row per series, `dt` then the values.
        #[arg(long)]
        data: PathBuf,
    },
    /// Kiefer-Wolfowitz search for a design with a lower robust objective.
    Design {
        /// `eligibility.csv` from an earlier eligibility run.
        #[arg(long)]
        records: PathBuf,
        /// Data series CSV: one row per series, `dt` then the values.
        #[arg(long)]
        data: PathBuf,
    },
    /// Eligible fraction and ranges under data subsampling.
    #[command(name = "n1-study")]
    N1Study {
        /// Data series CSV: one row per series, `dt` then the values.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated subsample sizes; overrides `study.sizes`.
        #[arg(long)]
        sizes: Option<String>,
    },
    /// Simulate a synthetic data file at `generate.e_true`.
    Generate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Summarize { .. } => "summarize",
            Command::Eligibility { .. } => "eligibility",
            Command::Reliability { .. } => "reliability",
            Command::Design { .. } => "design",
            Command::N1Study { .. } => "n1-study",
            Command::Generate => "generate",
        }
    }
}

/// Process exit code for an error: 2 input, 3 model or protocol, 4 solver.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::InvalidBand(_) | Error::EmptyEligibleSet | Error::Io(_) => 2,
        Error::Model(_) => 3,
        Error::Solver(_) | Error::EmptyPolytope { .. } | Error::Internal(_) => 4,
    }
}

/// Parse arguments, run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &global.set {
        cfg.apply_override(kv)?;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    std::fs::create_dir_all(&cli.global.output)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        cfg,
        out: cli.global.output.clone(),
        workers: if cli.global.jobs == 0 { pool.current_num_threads() } else { cli.global.jobs },
    };
    ctx.write_provenance(cli.command.name())?;
    pool.install(|| match &cli.command {
        Command::Summarize { data } => ctx.summarize(data),
        Command::Eligibility { data } => ctx.eligibility(data),
        Command::Reliability { records, data } => ctx.reliability(records, data),
        Command::Design { records, data } => ctx.design(records, data),
        Command::N1Study { data, sizes } => ctx.n1_study(data, sizes.as_deref()),
        Command::Generate => ctx.generate(),
    })
}

/// Per-phase seeds derived from the master seed.
pub struct PhaseSeeds {
    pub a_samples: u64,
    pub e_samples: u64,
    pub kw: u64,
    pub generate: u64,
}

impl PhaseSeeds {
    pub fn new(master: u64) -> Self {
        PhaseSeeds {
            a_samples: seed::derive(master, "a-samples", 0),
            e_samples: seed::derive(master, "e-samples", 0),
            kw: seed::derive(master, "kw", 0),
            generate: seed::derive(master, "generate", 0),
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    workers: usize,
}

fn e_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|d| format!("e{d}")).collect()
}

fn ranking_rows(scores: &[DimScore]) -> Vec<Vec<String>> {
    scores
        .iter()
        .enumerate()
        .map(|(rank, s)| {
            vec![
                (rank + 1).to_string(),
                format!("e{}", s.dim + 1),
                fmt_full(s.score),
                fmt_full(s.p05),
                fmt_full(s.p95),
            ]
        })
        .collect()
}

const RANKING_HEADER: [&str; 5] = ["rank", "dim", "score", "p05", "p95"];

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn seeds(&self) -> PhaseSeeds {
        PhaseSeeds::new(self.cfg.seed)
    }

    fn write_provenance(&self, command: &str) -> Result<()> {
        let s = self.seeds();
        let text = format!(
            "drocal {}\ncommand = {command}\nconfig_hash = {}\nseed.a_samples = {}\nseed.e_samples = {}\nseed.kw = {}\nseed.generate = {}\n\n{}",
            env!("CARGO_PKG_VERSION"),
            self.cfg.hash(),
            s.a_samples,
            s.e_samples,
            s.kw,
            s.generate,
            self.cfg.canonical()
        );
        write_text(&self.path("provenance.txt"), &text)
    }

    fn a_samples(&self) -> Result<Vec<Vec<f64>>> {
        Ok(sample_uniform(&self.cfg.a_box()?, self.cfg.k, self.seeds().a_samples))
    }

    fn e_samples(&self) -> Result<Vec<Vec<f64>>> {
        Ok(sample_uniform(&self.cfg.e_box()?, self.cfg.n2, self.seeds().e_samples))
    }

    fn options(&self) -> EligibilityOptions {
        EligibilityOptions {
            alpha: self.cfg.alpha,
            q_threshold: self.cfg.q_threshold,
            tie_rule: self.cfg.tie_rule,
            ..EligibilityOptions::default()
        }
    }

    fn data_summaries(&self, data: &Path) -> Result<Vec<Vec<f64>>> {
        summarize_all(&read_series(data)?, &self.cfg.bands)
    }

    fn summarize(&self, data: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .data_summaries(data)?
            .iter()
            .map(|r| r.iter().map(|&v| fmt_full(v)).collect())
            .collect();
        write_csv(&self.path("summary.csv"), &SLOT_NAMES, &rows)
    }

    fn eligibility(&self, data: &Path) -> Result<()> {
        let summaries = self.data_summaries(data)?;
        let model = self.cfg.build_model(self.workers)?;
        let e_samples = self.e_samples()?;
        let run = construct_from_summaries(
            &summaries,
            model.as_ref(),
            &e_samples,
            &self.a_samples()?,
            &self.cfg.bands,
            &self.options(),
        )?;
        let dim = self.cfg.e_lo.len();
        let thr = fmt_full(run.threshold);

        let mut header = vec!["index".to_string()];
        header.extend(e_header(dim));
        header.extend(["q_star", "threshold", "eligible", "error"].map(String::from));
        let rows: Vec<Vec<String>> = run
            .outcomes
            .iter()
            .enumerate()
            .map(|(l, o)| {
                let mut row = vec![l.to_string()];
                row.extend(e_samples[l].iter().map(|&v| fmt_full(v)));
                match o {
                    Ok(r) => row.extend([fmt_full(r.q_star), thr.clone(), u8::from(r.eligible).to_string(), String::new()]),
                    Err(f) => row.extend([String::new(), thr.clone(), "0".into(), f.error.to_string()]),
                }
                row
            })
            .collect();
        write_csv(&self.path("eligibility.csv"), &header, &rows)?;

        for d in 0..dim {
            let rows: Vec<Vec<String>> = run
                .records()
                .map(|r| vec![fmt_full(r.e[d]), fmt_full(r.q_star)])
                .collect();
            let header = [format!("e{}", d + 1), format!("q_star (threshold = {thr})")];
            write_csv(&self.path(&format!("scatter_e{}.csv", d + 1)), &header, &rows)?;
        }

        let ranking = match range_shrinkage_ranking(run.records(), &self.cfg.e_box()?) {
            Ok(scores) => ranking_rows(&scores),
            Err(Error::EmptyEligibleSet) => Vec::new(),
            Err(e) => return Err(e),
        };
        write_csv(&self.path("ranking.csv"), &RANKING_HEADER, &ranking)?;

        let text = format!(
            "threshold: {}\nevaluated: {}\nfailed: {}\neligible: {}\neligible fraction: {}\nk/n1: {}\n",
            fmt_short(run.threshold),
            run.records().count(),
            run.failures().count(),
            run.eligible().count(),
            fmt_short(run.eligible_fraction()),
            fmt_short(run.k_over_n1()),
        );
        write_text(&self.path("eligibility_summary.txt"), &text)
    }

    /// Polytopes of the eligible records, rebuilt on this run's a-samples.
    fn eligible_set(&self, records: &Path, data: &Path) -> Result<(EligibleSet, Vec<Vec<f64>>, f64)> {
        let rows = read_records(records)?;
        let threshold = match rows.first() {
            Some(r) => r.threshold,
            None => return Err(Error::EmptyEligibleSet),
        };
        if rows.iter().any(|r| r.threshold != threshold) {
            return Err(Error::invalid(format!("{}: threshold column is not constant", records.display())));
        }
        let eligible: Vec<Vec<f64>> = rows.iter().filter(|r| r.eligible).map(|r| r.e.clone()).collect();
        if eligible.is_empty() {
            return Err(Error::EmptyEligibleSet);
        }
        if let Some(bad) = eligible.iter().find(|e| e.len() != self.cfg.e_lo.len()) {
            return Err(Error::invalid(format!(
                "records have {} epistemic columns, the configuration has {}",
                bad.len(),
                self.cfg.e_lo.len()
            )));
        }
        let summaries = self.data_summaries(data)?;
        let model = self.cfg.build_model(self.workers)?;
        let set = EligibleSet::rebuild(
            &summaries,
            model.as_ref(),
            &eligible,
            &self.a_samples()?,
            &self.cfg.bands,
            threshold,
            self.cfg.tie_rule,
        )?;
        Ok((set, summaries, threshold))
    }

    fn reliability(&self, records: &Path, data: &Path) -> Result<()> {
        let (set, _, _) = self.eligible_set(records, data)?;
        let model = self.cfg.build_model(self.workers)?;
        let report = reliability_report(&set, model.as_ref(), &self.cfg.theta)?;

        let mut rows: Vec<Vec<String>> = report
            .requirement_ranges
            .iter()
            .enumerate()
            .map(|(i, r)| vec![format!("R{}", i + 1), fmt_full(r.lo), fmt_full(r.hi)])
            .collect();
        rows.push(vec!["R".into(), fmt_full(report.combined.lo), fmt_full(report.combined.hi)]);
        write_csv(&self.path("ranges.csv"), &["quantity", "lo", "hi"], &rows)?;

        let rows: Vec<Vec<String>> = report
            .severities
            .iter()
            .enumerate()
            .map(|(i, s)| vec![format!("s{}", i + 1), fmt_full(*s)])
            .collect();
        write_csv(&self.path("severities.csv"), &["quantity", "value"], &rows)?;

        let mut header = e_header(self.cfg.e_lo.len());
        header.extend(["r_min", "r_max"].map(String::from));
        let rows: Vec<Vec<String>> = report
            .table
            .iter()
            .map(|row| {
                let mut r: Vec<String> = row.e.iter().map(|&v| fmt_full(v)).collect();
                r.extend([fmt_full(row.r_min), fmt_full(row.r_max)]);
                r
            })
            .collect();
        write_csv(&self.path("rmin_rmax.csv"), &header, &rows)?;

        let scores = low_rmin_ranking(&report.table, &self.cfg.e_box()?)?;
        write_csv(&self.path("ranking_low_rmin.csv"), &RANKING_HEADER, &ranking_rows(&scores))?;

        let mut text = format!("eligible e: {}\n", set.len());
        for (i, r) in report.requirement_ranges.iter().enumerate() {
            text += &format!("R{}: [{}, {}]\n", i + 1, fmt_short(r.lo), fmt_short(r.hi));
        }
        text += &format!("R: [{}, {}]\n", fmt_short(report.combined.lo), fmt_short(report.combined.hi));
        for (i, s) in report.severities.iter().enumerate() {
            text += &format!("s{}: {}\n", i + 1, fmt_short(*s));
        }
        write_text(&self.path("reliability_summary.txt"), &text)
    }

    fn design(&self, records: &Path, data: &Path) -> Result<()> {
        let (set, summaries, threshold) = self.eligible_set(records, data)?;
        let model = self.cfg.build_model(self.workers)?;
        let candidates = match self.cfg.policy {
            crate::design::SamplePolicy::Recompute => read_records(records)?.into_iter().map(|r| r.e).collect(),
            _ => Vec::new(),
        };
        let objective = RobustObjective {
            model: model.as_ref(),
            set: &set,
            data_summaries: &summaries,
            candidates: &candidates,
            a_box: self.cfg.a_box()?,
            bands: self.cfg.bands,
            q_threshold: threshold,
            tie_rule: self.cfg.tie_rule,
            policy: self.cfg.policy,
        };
        let mut kw = self.cfg.kw.clone();
        kw.theta_baseline = self.cfg.theta.clone();
        match kw_optimize(|th, s| objective.eval(th, s), &kw, self.seeds().kw) {
            Ok(res) => {
                self.write_trace(&res.trace)?;
                self.write_design(&kw.theta_baseline, &res)
            }
            Err(err) => {
                self.write_trace(&err.trace)?;
                Err(err.error)
            }
        }
    }

    fn write_trace(&self, trace: &KwTrace) -> Result<()> {
        let dim = self.cfg.theta.len();
        let mut header: Vec<String> = ["n", "coord", "seed", "c_n", "a_n"].map(String::from).to_vec();
        header.extend((1..=dim).map(|d| format!("x_before{d}")));
        header.extend(["u", "l", "g"].map(String::from));
        header.extend((1..=dim).map(|d| format!("x_after{d}")));
        let rows: Vec<Vec<String>> = trace
            .steps
            .iter()
            .map(|s| {
                let mut r = vec![
                    s.n.to_string(),
                    (s.coord + 1).to_string(),
                    s.seed.to_string(),
                    fmt_full(s.c_n),
                    fmt_full(s.a_n),
                ];
                r.extend(s.x_before.iter().map(|&v| fmt_full(v)));
                r.extend([fmt_full(s.u), fmt_full(s.l), fmt_full(s.g)]);
                r.extend(s.x_after.iter().map(|&v| fmt_full(v)));
                r
            })
            .collect();
        write_csv(&self.path("kw_trace.csv"), &header, &rows)?;

        let mut header = vec!["n".to_string()];
        header.extend((1..=dim).map(|d| format!("x{d}")));
        header.push("f".into());
        let rows: Vec<Vec<String>> = trace
            .assessments
            .iter()
            .map(|a| {
                let mut r = vec![a.n.to_string()];
                r.extend(a.x.iter().map(|&v| fmt_full(v)));
                r.push(fmt_full(a.f));
                r
            })
            .collect();
        write_csv(&self.path("kw_assessments.csv"), &header, &rows)
    }

    fn write_design(&self, baseline: &[f64], res: &KwResult) -> Result<()> {
        let rows: Vec<Vec<String>> = (0..baseline.len())
            .map(|d| {
                vec![
                    format!("theta{}", d + 1),
                    fmt_full(baseline[d]),
                    fmt_full(res.x_new[d]),
                    fmt_full(res.theta_new[d]),
                ]
            })
            .collect();
        write_csv(&self.path("theta_new.csv"), &["coord", "baseline", "x", "theta_new"], &rows)?;
        let selected = match res.selected {
            crate::design::Selection::Last => "last",
            crate::design::Selection::BestSeen => "best-seen",
        };
        let text = format!(
            "f_baseline = {}\nf_new = {}\nselected = {selected}\nassess_seed = {}\n",
            fmt_full(res.f_baseline),
            fmt_full(res.f_new),
            res.assess_seed
        );
        write_text(&self.path("design_summary.txt"), &text)
    }

    fn n1_study(&self, data: &Path, sizes: Option<&str>) -> Result<()> {
        let sizes: Vec<usize> = match sizes {
            Some(s) => {
                let mut c = self.cfg.clone();
                c.set("study.sizes", s)?;
                c.study_sizes
            }
            None => self.cfg.study_sizes.clone(),
        };
        let series = read_series(data)?;
        let model = self.cfg.build_model(self.workers)?;
        let rows = n1_impact_study(
            &series,
            model.as_ref(),
            &sizes,
            &self.cfg.study_seeds,
            &self.e_samples()?,
            &self.a_samples()?,
            &self.cfg.bands,
            &self.options(),
        )?;
        let dim = self.cfg.e_lo.len();
        let mut header: Vec<String> = ["n1", "seed", "evaluated", "eligible", "eligible_fraction"]
            .map(String::from)
            .to_vec();
        for d in 1..=dim {
            header.push(format!("e{d}_min"));
            header.push(format!("e{d}_max"));
        }
        let out: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.size.to_string(),
                    r.seed.to_string(),
                    r.evaluated.to_string(),
                    r.eligible.to_string(),
                    fmt_full(r.eligible_fraction),
                ];
                for range in &r.ranges {
                    match range {
                        Some((lo, hi)) => row.extend([fmt_full(*lo), fmt_full(*hi)]),
                        None => row.extend([String::new(), String::new()]),
                    }
                }
                row
            })
            .collect();
        write_csv(&self.path("n1_study.csv"), &header, &out)
    }

    fn generate(&self) -> Result<()> {
        let model = self.cfg.build_model(self.workers)?;
        let e = &self.cfg.generate_e_true;
        if !self.cfg.e_box()?.contains(e) {
            return Err(Error::invalid(format!("generate.e_true = {e:?} is outside the epistemic box")));
        }
        let a = sample_uniform(&self.cfg.a_box()?, self.cfg.generate_n1, self.seeds().generate);
        let series = a
            .iter()
            .map(|a| model.simulate(a, e))
            .collect::<Result<Vec<TimeSeries>>>()?;
        write_series(&self.path("data.csv"), &series)
    }
}
