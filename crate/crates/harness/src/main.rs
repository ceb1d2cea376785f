use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kepler_core::decimal::format_f64;
use kepler_core::packing::save_patch;
use kepler_core::prover::{prove_lower_bound, replay_certificate, ProofCertificate, ProofOutcome};
use kepler_core::score::ScoreRow;
use kepler_harness::cancel::{run_cancellation, Tolerances};
use kepler_harness::config::Config;
use kepler_harness::patches::{self, Kind};
use kepler_harness::scoring::{run_score, summary, ScoreDoc, EVIDENCE};
use kepler_harness::search::{run_search, SearchSpec};
use kepler_harness::{proving, startup_check, HarnessError, Result, Status};

#[derive(Parser)]
#[command(name = "kepler", version, about = "Packing scores, cancellation checks, parameter search and inequality proofs")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an FCC or HCP patch.
    Gen(GenArgs),
    /// Score every interior center of a patch.
    Score(ScoreArgs),
    /// Check the cancellation identities on a patch.
    CancelCheck(CancelArgs),
    /// Search score parameters.
    Search(SearchArgs),
    /// Prove a lower bound for an expression over a domain.
    Prove(ProveArgs),
    /// Re-check a proof certificate.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct GenArgs {
    /// fcc or hcp
    kind: String,
    /// Patch radius (ignored with --periodic).
    radius: Option<f64>,
    /// Emit a periodic fundamental cell instead of a finite patch.
    #[arg(long)]
    periodic: bool,
    /// Supercell factor for --periodic.
    #[arg(long, default_value_t = 1)]
    supercell: usize,
    /// Jitter amplitude for --periodic (the lattice is dilated to keep distances >= 2).
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    q2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    s_rule: Option<String>,
    #[arg(long)]
    cutoff: Option<f64>,
}

impl ParamArgs {
    fn apply(&self, c: &mut Config) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.q2, self.q2);
        set(&mut c.q1, self.q1);
        set(&mut c.q0, self.q0);
        set(&mut c.m, self.m);
        set(&mut c.r, self.r);
        set(&mut c.cutoff, self.cutoff);
        if let Some(s) = &self.s_rule {
            c.s_rule = s.clone();
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Structured JSON output.
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// CSV table output.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Patch file or generator spec (fcc:6, hcp:6, fcc-cell, hcp-cell).
    patch: String,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CancelArgs {
    patch: String,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SearchArgs {
    /// Search specification (flat TOML).
    spec: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ProveArgs {
    expr: PathBuf,
    domain: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    target: String,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_leaves: Option<usize>,
    #[arg(long)]
    no_lp: bool,
    #[arg(long)]
    slack: Option<f64>,
    /// Certificate output file.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Failure report output file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    expr: PathBuf,
    certificate: PathBuf,
    /// Defaults to the certificate's own target.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e}");
            e.status().into()
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    startup_check()?;
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Gen(a) => gen(a, &config),
        Command::Score(a) => {
            a.params.apply(&mut config);
            score(a, &config)
        }
        Command::CancelCheck(a) => {
            a.params.apply(&mut config);
            cancel(a, &config)
        }
        Command::Search(a) => search(a),
        Command::Prove(a) => prove(a, &mut config),
        Command::Replay(a) => replay(a),
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| HarnessError::usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_text<T: serde::Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Internal(e.to_string()))
}

fn json_text<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| HarnessError::Internal(e.to_string()))
}

fn gen(a: GenArgs, config: &Config) -> Result<Status> {
    let kind = Kind::parse(&a.kind)?;
    let patch = if a.periodic {
        patches::periodic(kind, a.supercell, a.jitter, a.seed.unwrap_or(config.seed))?
    } else {
        let radius = a.radius.ok_or_else(|| HarnessError::usage("gen needs a radius (or --periodic)"))?;
        patches::generate(kind, radius)?
    };
    let mut buf = Vec::new();
    save_patch(&patch, &mut buf).map_err(|e| HarnessError::Internal(e.to_string()))?;
    emit(&String::from_utf8_lossy(&buf), a.output.as_deref())?;
    Ok(Status::Pass)
}

fn score(a: ScoreArgs, config: &Config) -> Result<Status> {
    let params = config.score_params()?;
    let patch = patches::resolve(&a.patch)?;
    let run = run_score(&patch, &params, config.cutoff, config.extension_radius)?;
    let rows: Vec<ScoreRow> = run.reports.iter().map(|r| r.to_row()).collect();
    let sum = summary(&run);
    let text = if a.out.json {
        json_text(&ScoreDoc {
            evidence: EVIDENCE,
            patch: &a.patch,
            params: &params,
            centers: rows,
            summary: sum,
        })?
    } else if a.out.csv {
        csv_text(&rows)?
    } else {
        let mut t = format!("# {EVIDENCE}\n");
        let _ = writeln!(
            t,
            "{:>6}  {:>22} {:>22}  {:>22} {:>22}",
            "center", "volume.lo", "volume.hi", "margin.lo", "margin.hi"
        );
        for r in &rows {
            let _ = writeln!(
                t,
                "{:>6}  {:>22} {:>22}  {:>22} {:>22}",
                r.center, r.voronoi_volume_lo, r.voronoi_volume_hi, r.margin_lo, r.margin_hi
            );
        }
        match (&sum.min_margin_lo, sum.min_margin_center) {
            (Some(m), Some(c)) => {
                let _ = writeln!(t, "min margin.lo = {m} at center {c} ({} interior centers)", sum.interior_centers);
            }
            _ => t.push_str("no interior centers\n"),
        }
        if let (Some(lo), Some(hi), Some(ok)) = (&sum.density_lo, &sum.density_hi, sum.density_consistent) {
            let verdict = if ok { "consistent" } else { "EXCEEDS" };
            let _ = writeln!(t, "density estimate [{lo}, {hi}] vs pi/sqrt(18) = {}: {verdict}", sum.density_bound);
        }
        t
    };
    emit(&text, None)?;
    if run.reports.is_empty() {
        eprintln!("no interior centers in {}", a.patch);
        return Ok(Status::Fail);
    }
    Ok(Status::Pass)
}

fn cancel(a: CancelArgs, config: &Config) -> Result<Status> {
    let params = config.score_params()?;
    let patch = patches::resolve(&a.patch)?;
    let tol = Tolerances {
        identity: config.identity_tol,
        eps_sum: config.eps_sum_tol,
        extension_radius: config.extension_radius,
    };
    let rep = run_cancellation(&a.patch, &patch, &params, &tol)?;
    let text = if a.json {
        json_text(&rep)?
    } else {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        let hull = |h: Option<kepler_core::Interval>| {
            h.map_or("-".to_string(), |h| format!("[{}, {}]", format_f64(h.lo()), format_f64(h.hi())))
        };
        let mut t = String::new();
        let _ = writeln!(
            t,
            "delta identity: {} triangles, residual hull {}, max width {}: {}",
            rep.delta.checked,
            hull(rep.delta.hull),
            format_f64(rep.delta.max_width),
            verdict(rep.delta.pass)
        );
        let _ = writeln!(
            t,
            "mu identity: {} S-triangles, max |sum| {}: {}",
            rep.mu.checked,
            rep.mu.max_abs,
            verdict(rep.mu.pass)
        );
        match &rep.eps_sum {
            Some(e) => {
                let _ = writeln!(t, "periodic eps-sum: {}: {}", hull(e.hull), verdict(e.pass));
            }
            None => {
                let _ = writeln!(t, "{}", rep.notice.as_deref().unwrap_or("eps-sum skipped"));
            }
        }
        let _ = writeln!(t, "overall: {}", verdict(rep.pass));
        t
    };
    emit(&text, None)?;
    Ok(if rep.pass { Status::Pass } else { Status::Fail })
}

fn search(a: SearchArgs) -> Result<Status> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| HarnessError::usage(format!("{}: {e}", a.spec.display())))?;
    let spec = SearchSpec::parse(&text)?;
    let rows = run_search(&spec)?;
    let text = if a.out.json {
        #[derive(serde::Serialize)]
        struct Doc<'a, T> {
            evidence: &'static str,
            rows: &'a [T],
        }
        json_text(&Doc {
            evidence: EVIDENCE,
            rows: &rows,
        })?
    } else if a.out.csv {
        csv_text(&rows)?
    } else {
        let mut t = format!("# {EVIDENCE}\n");
        let _ = writeln!(
            t,
            "{:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>24}  worst",
            "rank", "q2", "q1", "q0", "M", "r", "min margin.lo"
        );
        for r in &rows {
            let _ = writeln!(
                t,
                "{:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>24}  {}#{}",
                r.rank,
                format_f64(r.q2),
                format_f64(r.q1),
                format_f64(r.q0),
                format_f64(r.m),
                format_f64(r.r),
                r.min_margin_lo,
                r.worst_packing,
                r.worst_center
            );
        }
        t
    };
    emit(&text, None)?;
    Ok(Status::Pass)
}

fn prove(a: ProveArgs, config: &mut Config) -> Result<Status> {
    let e = proving::load_expr(&a.expr)?;
    let d = proving::load_domain(&a.domain)?;
    let target = proving::parse_target(&a.target)?;
    if let Some(v) = a.max_depth {
        config.max_depth = v;
    }
    if let Some(v) = a.max_leaves {
        config.max_leaves = v;
    }
    if let Some(v) = a.slack {
        config.slack = v;
    }
    if a.no_lp {
        config.lp = false;
    }
    let outcome = prove_lower_bound(&e, &d, target, &config.prover_options()).map_err(HarnessError::usage)?;
    match outcome {
        ProofOutcome::Proven(cert) => {
            replay_certificate(&e, &cert, target).map_err(|err| HarnessError::Internal(err.to_string()))?;
            println!(
                "proven: {} >= {} - {} ({} leaves, depth {})",
                cert.expr,
                format_f64(target),
                format_f64(cert.slack),
                cert.leaf_count(),
                cert.tree.depth()
            );
            if let Some(path) = &a.output {
                emit(&cert.to_json(), Some(path))?;
            }
            Ok(Status::Pass)
        }
        ProofOutcome::Undecided(rep) => {
            let boxes: Vec<String> = rep
                .bounds
                .iter()
                .map(|b| format!("[{}, {}]", format_f64(b.lo()), format_f64(b.hi())))
                .collect();
            println!("undecided ({:?}) at depth {} on box {}", rep.reason, rep.depth, boxes.join(" x "));
            println!(
                "best sampled value {} at {:?} (a candidate for inspection, not a counterexample)",
                format_f64(rep.best_value),
                rep.best_point
            );
            if let Some(path) = &a.report {
                emit(&json_text(&rep)?, Some(path))?;
            }
            Ok(Status::Fail)
        }
    }
}

fn replay(a: ReplayArgs) -> Result<Status> {
    let e = proving::load_expr(&a.expr)?;
    let text = std::fs::read_to_string(&a.certificate)
        .map_err(|err| HarnessError::usage(format!("{}: {err}", a.certificate.display())))?;
    let cert = ProofCertificate::from_json(&text)
        .map_err(|err| HarnessError::usage(format!("{}: {err}", a.certificate.display())))?;
    let target = match &a.target {
        Some(t) => proving::parse_target(t)?,
        None => cert.target,
    };
    match replay_certificate(&e, &cert, target) {
        Ok(stats) => {
            println!("valid: {} leaves, depth {}", stats.leaves, stats.depth);
            Ok(Status::Pass)
        }
        Err(err) => {
            println!("rejected: {err}");
            Ok(Status::Fail)
        }
    }
}
