//! `structsdp` command-line front end. Reports go to stdout, diagnostics to
//! stderr. Exit codes: 0 success, 1 error, 2 infeasible or unbounded,
//! 3 solver did not converge.

mod config;
mod report;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use structsdp::apps::{self, LTISystem, PStructure, SeaStar};
use structsdp::decomp::{assign_cones, block_cover, solve_decomposed, ConeAssignment, Side};
use structsdp::refine::{certify, certify_solution, cob_run};
use structsdp::solver::{self, SolverSettings};
use structsdp::sos::{self, Polynomial};
use structsdp::sparsity::{merge_cliques, CliqueCover, MergePolicy};
use structsdp::{ConeKind, ConicProblem, Solution, Status};

use config::FileConfig;
use report::{histogram, num, Format, Report};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "structsdp", version, about = "Structured-subset bounds for sparse semidefinite programs")]
struct Cli {
    /// Solver tolerance.
    #[arg(long, global = true, env = "STRUCTSDP_EPS")]
    eps: Option<f64>,
    /// Solver iteration cap.
    #[arg(long, global = true, env = "STRUCTSDP_MAX_ITER")]
    max_iter: Option<usize>,
    /// Output format (default json, csv for `cob`).
    #[arg(long, global = true, value_enum, env = "STRUCTSDP_FORMAT")]
    format: Option<Format>,
    /// `key = value` file with defaults for eps, max_iter and format.
    #[arg(long, global = true, env = "STRUCTSDP_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bound an SDP with structured cones on its chordal cliques.
    Approx(ApproxArgs),
    /// Change-of-basis refinement; prints the cost per iteration.
    Cob(CobArgs),
    /// Check whether a solution proves a decomposed bound tight.
    Certify(CertifyArgs),
    /// Lower bound on the minimum of a polynomial via sums of squares.
    SosMin(SosArgs),
    /// Upper bound on the H-infinity norm of an LTI system.
    Hinf(HinfArgs),
    /// Generate problem instances.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BoundSide {
    /// Restrict the clique blocks of X (completion).
    Upper,
    /// Restrict the clique terms of the slack (construction).
    Lower,
}

impl From<BoundSide> for Side {
    fn from(s: BoundSide) -> Side {
        match s {
            BoundSide::Upper => Side::Completion,
            BoundSide::Lower => Side::Construction,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Decomposition {
    /// Problem file, SDPA sparse (.dat-s) or JSON.
    #[arg(long)]
    input: PathBuf,
    /// dd, sdd, diag, psd, fwK or bfwK; a trailing `*` selects the dual cone.
    #[arg(long, default_value = "dd")]
    cone: String,
    #[arg(long, value_enum, default_value = "upper")]
    side: BoundSide,
    /// Cliques up to this size stay PSD.
    #[arg(long, default_value_t = 0)]
    threshold: usize,
    /// Merge cliques while the union has at most this many vertices.
    #[arg(long)]
    merge_cap: Option<usize>,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[command(flatten)]
    d: Decomposition,
    /// Eigenvalue tolerance of the tightness check.
    #[arg(long, default_value_t = 1e-5)]
    cert_tol: f64,
    /// Write the recovered (X, y, Z) as JSON.
    #[arg(long)]
    save_solution: Option<PathBuf>,
    /// Write per-clique sizes, cones and certificate eigenvalues as CSV.
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CobArgs {
    #[command(flatten)]
    d: Decomposition,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Stop after a few steps with relative gain below this.
    #[arg(long, default_value_t = 1e-6)]
    stall_tol: f64,
    /// Problem block to refine.
    #[arg(long, default_value_t = 0)]
    block: usize,
    /// Also write the iteration,cost CSV here.
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Solution JSON, as written by `approx --save-solution`.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, value_enum, default_value = "upper")]
    side: BoundSide,
    #[arg(long, default_value_t = 0)]
    block: usize,
    #[arg(long)]
    merge_cap: Option<usize>,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

#[derive(Args, Debug)]
struct SosArgs {
    /// Polynomial in text form: one `coeff e1 .. eN` line per monomial.
    #[arg(long)]
    poly: PathBuf,
    /// Relaxation degree (even).
    #[arg(long)]
    degree: u32,
    /// Use the correlative-sparsity relaxation.
    #[arg(long)]
    sparse: bool,
    #[arg(long, default_value = "psd")]
    cone: String,
    /// Constraint g(x) >= 0; repeatable.
    #[arg(long)]
    ineq: Vec<PathBuf>,
    /// Constraint h(x) = 0; repeatable.
    #[arg(long)]
    eq: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PStruct {
    Dense,
    BlockDiagonal,
}

#[derive(Args, Debug)]
struct HinfArgs {
    /// System JSON (A, B, C, D, partition, adjacency).
    #[arg(long)]
    system: PathBuf,
    #[arg(long, value_enum, default_value = "dense")]
    p_structure: PStruct,
    #[arg(long, default_value = "psd")]
    cone: String,
    /// Decompose the LMI and keep cliques up to this size PSD.
    #[arg(long)]
    threshold: Option<usize>,
    /// Also report a frequency-sweep lower bound on this many points.
    #[arg(long, default_value_t = 0)]
    sweep: usize,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Random SDP with a block-arrow pattern (JSON, or SDPA with --sdpa or a .dat-s name).
    BlockArrow {
        #[arg(long, default_value_t = 15)]
        blocks: usize,
        #[arg(long, default_value_t = 10)]
        blocksize: usize,
        #[arg(long, default_value_t = 10)]
        arrowhead: usize,
        #[arg(long, default_value_t = 80)]
        constraints: usize,
        #[arg(long)]
        sdpa: bool,
    },
    /// Networked LTI system with a head and jointed arms (JSON).
    SeaStar {
        #[arg(long, default_value_t = SeaStar::default().head)]
        head: usize,
        #[arg(long, default_value_t = SeaStar::default().arms)]
        arms: usize,
        #[arg(long, default_value_t = SeaStar::default().knuckles)]
        knuckles: usize,
        #[arg(long, default_value_t = SeaStar::default().agents_per_knuckle)]
        agents: usize,
        #[arg(long, default_value_t = SeaStar::default().coupling)]
        coupling: f64,
    },
    /// Lehmer plus chained Rosenbrock test polynomial (text); ignores --seed.
    LehmerRosenbrock {
        #[arg(long, default_value_t = 12)]
        n: usize,
    },
}

struct Ctx {
    settings: SolverSettings,
    format: Option<Format>,
}

impl Ctx {
    fn from_cli(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut settings = SolverSettings::default();
        if let Some(e) = cli.eps.or(file.eps) {
            if !(e > 0.0) {
                bail!("eps must be positive, got {e}");
            }
            settings.eps = e;
        }
        if let Some(m) = cli.max_iter.or(file.max_iter) {
            settings.max_iter = m;
        }
        let format = match (cli.format, &file.format) {
            (Some(f), _) => Some(f),
            (None, Some(s)) => Some(s.parse().map_err(anyhow::Error::msg).context("config format")?),
            (None, None) => None,
        };
        Ok(Self { settings, format })
    }

    fn format_or(&self, f: Format) -> Format {
        self.format.unwrap_or(f)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<structsdp::Error>() {
                Some(structsdp::Error::Numerical(_) | structsdp::Error::NotSolved(_)) => EXIT_NUMERICAL,
                _ => EXIT_ERROR,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let ctx = Ctx::from_cli(cli)?;
    match &cli.cmd {
        Command::Approx(a) => approx(a, &ctx),
        Command::Cob(a) => cob(a, &ctx),
        Command::Certify(a) => certify_cmd(a, &ctx),
        Command::SosMin(a) => sos_min(a, &ctx),
        Command::Hinf(a) => hinf(a, &ctx),
        Command::Gen(a) => generate(a),
    }
}

fn exit_code(s: Status) -> u8 {
    match s {
        Status::Optimal => 0,
        Status::Infeasible | Status::Unbounded => EXIT_INFEASIBLE,
        Status::MaxIter | Status::NumericalError => EXIT_NUMERICAL,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(r: &Report, f: Format) {
    print!("{}", r.render(f));
}

/// JSON when the text opens with `{`, SDPA sparse otherwise.
fn load_problem(path: &Path) -> Result<ConicProblem> {
    let text = read(path)?;
    let p = if text.trim_start().starts_with('{') {
        solver::import_json(&text)
    } else {
        solver::import_sdpa(&text)
    }
    .with_context(|| format!("parsing {}", path.display()))?;
    Ok(p)
}

fn parse_cone(s: &str) -> Result<ConeKind> {
    Ok(s.parse::<ConeKind>()?)
}

fn cover_of(p: &ConicProblem, block: usize, merge_cap: Option<usize>) -> Result<CliqueCover> {
    let cover = block_cover(p, block)?;
    Ok(match merge_cap {
        Some(c) => merge_cliques(&cover, &MergePolicy::cap(c)),
        None => cover,
    })
}

/// One assignment per PSD block of the problem.
fn assignments(p: &ConicProblem, d: &Decomposition) -> Result<Vec<ConeAssignment>> {
    let cone = parse_cone(&d.cone)?;
    let mut out = Vec::new();
    for (k, b) in p.blocks.iter().enumerate() {
        if !b.cone.is_psd() || b.dim == 0 {
            continue;
        }
        let cover = cover_of(p, k, d.merge_cap)?;
        out.push(assign_cones(&cover, &cone, d.threshold).with_side(d.side.into()).on_block(k));
    }
    if out.is_empty() {
        bail!("the problem has no PSD block to decompose");
    }
    Ok(out)
}

fn merged_histogram(a: &[ConeAssignment]) -> Vec<(usize, usize)> {
    let mut h = std::collections::BTreeMap::new();
    for x in a {
        for (s, c) in x.cover.size_histogram() {
            *h.entry(s).or_insert(0) += c;
        }
    }
    h.into_iter().collect()
}

fn bound_name(b: structsdp::decomp::Bound) -> &'static str {
    match b {
        structsdp::decomp::Bound::Upper => "upper",
        structsdp::decomp::Bound::Lower => "lower",
        structsdp::decomp::Bound::Exact => "exact",
    }
}

fn approx(args: &ApproxArgs, ctx: &Ctx) -> Result<u8> {
    let p = load_problem(&args.d.input)?;
    let asg = assignments(&p, &args.d)?;
    let side: Side = args.d.side.into();
    let t0 = Instant::now();
    let r = solve_decomposed(&p, &asg, side, &ctx.settings)?;
    let secs = t0.elapsed().as_secs_f64();
    let cert = match &r.recovered {
        Some(rec) if r.status == Status::Optimal => Some(certify(rec, side, args.cert_tol)?),
        _ => None,
    };
    let mut rep = Report::new();
    rep.put("status", r.status.to_string())
        .put("bound", bound_name(r.bound))
        .put("value", num(r.value))
        .put("seconds", num(secs))
        .put("cliques", histogram(&merged_histogram(&asg)))
        .put("lowered_n", r.lowered_size.0)
        .put("lowered_m", r.lowered_size.1);
    match &cert {
        Some(c) => rep.put("certified", c.tight).put("worst_eigenvalue", num(c.worst())),
        None => rep.put("certified", serde_json::Value::Null).put("worst_eigenvalue", serde_json::Value::Null),
    };
    if let Some(path) = &args.save_solution {
        let rec = r.recovered.as_ref().context("no solution to save")?;
        let s = Solution {
            status: r.status,
            x: rec.x.clone(),
            y: rec.y.clone(),
            z: rec.z.clone(),
            primal_residual: rec.solution.primal_residual,
            dual_residual: rec.solution.dual_residual,
            primal_objective: r.value,
            dual_objective: r.value,
            iterations: rec.solution.iterations,
        };
        write(path, &solver::export_solution_json(&s)?)?;
    }
    if let Some(path) = &args.emit_plot_data {
        let mut csv = String::from("block,clique,size,cone,min_eigenvalue\n");
        let mut lambdas = cert.iter().flat_map(|c| c.labels.iter().zip(&c.lambda_min));
        let mut lookup = std::collections::HashMap::new();
        for (l, v) in &mut lambdas {
            lookup.insert(*l, *v);
        }
        for a in &asg {
            for (k, (c, kind)) in a.cover.cliques.iter().zip(&a.kinds).enumerate() {
                let lam = lookup.get(&(a.block, k)).map(|v| format!("{v:e}")).unwrap_or_default();
                let _ = writeln!(csv, "{},{},{},{kind},{lam}", a.block + 1, k + 1, c.len());
            }
        }
        write(path, &csv)?;
    }
    emit(&rep, ctx.format_or(Format::Json));
    Ok(exit_code(r.status))
}

fn cob(args: &CobArgs, ctx: &Ctx) -> Result<u8> {
    let p = load_problem(&args.d.input)?;
    let asg = assignments(&p, &args.d)?;
    let a = asg
        .into_iter()
        .find(|a| a.block == args.block)
        .with_context(|| format!("block {} is not a PSD block", args.block))?;
    let t0 = Instant::now();
    let run = cob_run(&p, &a, args.iters, args.stall_tol, &ctx.settings)?;
    let secs = t0.elapsed().as_secs_f64();
    let csv = solver::sequence_csv(&run.costs);
    if let Some(path) = &args.emit_plot_data {
        write(path, &csv)?;
    }
    match ctx.format_or(Format::Csv) {
        Format::Csv => print!("{csv}"),
        f => {
            let mut rep = Report::new();
            rep.put("status", run.last.status.to_string())
                .put("bound", bound_name(a.bound()))
                .put("costs", serde_json::Value::Array(run.costs.iter().map(|&c| num(c)).collect()))
                .put("final", num(*run.costs.last().unwrap()))
                .put("certified", run.certified)
                .put("seconds", num(secs));
            emit(&rep, f);
        }
    }
    Ok(exit_code(run.last.status))
}

fn certify_cmd(args: &CertifyArgs, ctx: &Ctx) -> Result<u8> {
    let p = load_problem(&args.input)?;
    let s = solver::import_solution_json(&read(&args.solution)?).context("parsing solution")?;
    let cover = cover_of(&p, args.block, args.merge_cap)?;
    let t = certify_solution(&p, &s, &cover, args.block, args.side.into(), args.tol)?;
    let mut rep = Report::new();
    rep.put("tight", t.tight).put("worst_eigenvalue", num(t.worst())).put("tol", num(t.tol)).put("checked", t.labels.len());
    emit(&rep, ctx.format_or(Format::Json));
    Ok(0)
}

fn load_poly(path: &Path) -> Result<Polynomial> {
    Polynomial::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn sos_min(args: &SosArgs, ctx: &Ctx) -> Result<u8> {
    let p = load_poly(&args.poly)?;
    let gs = args.ineq.iter().map(|f| load_poly(f)).collect::<Result<Vec<_>>>()?;
    let hs = args.eq.iter().map(|f| load_poly(f)).collect::<Result<Vec<_>>>()?;
    let cone = parse_cone(&args.cone)?;
    let t0 = Instant::now();
    let prog = if args.sparse {
        sos::build_sparse_putinar_auto(&p, &gs, &hs, args.degree)?
    } else {
        sos::build_putinar(&p, &gs, &hs, args.degree)?
    };
    let q = sos::restrict_gram(&prog, &cone)?;
    let r = sos::solve_sos(&prog, &q, &ctx.settings)?;
    let secs = t0.elapsed().as_secs_f64();
    let sizes: Vec<usize> = prog.grams.iter().map(|g| g.basis.len()).collect();
    let mut rep = Report::new();
    rep.put("status", r.status.to_string())
        .put("gamma", num(r.gamma))
        .put("cone", cone.to_string())
        .put("gram_blocks", sizes.len())
        .put("largest_gram", sizes.iter().copied().max().unwrap_or(0))
        .put("seconds", num(secs));
    emit(&rep, ctx.format_or(Format::Json));
    Ok(exit_code(r.status))
}

fn hinf(args: &HinfArgs, ctx: &Ctx) -> Result<u8> {
    let sys = LTISystem::from_json(&read(&args.system)?).context("parsing system")?;
    let cone = parse_cone(&args.cone)?;
    let structure = match args.p_structure {
        PStruct::Dense => PStructure::Dense,
        PStruct::BlockDiagonal => PStructure::BlockDiagonal,
    };
    let r = apps::hinf_bound(&sys, structure, &cone, args.threshold, &ctx.settings)?;
    let mut rep = Report::new();
    rep.put("status", r.status.to_string()).put("gamma", num(r.gamma));
    if args.sweep > 0 {
        let lo = apps::hnorm_sweep(&sys, &apps::log_grid(1e-3, 1e3, args.sweep))?;
        rep.put("sweep_lower_bound", num(lo));
    }
    rep.put("cliques", histogram(&r.histogram)).put("seconds", num(r.elapsed.as_secs_f64()));
    emit(&rep, ctx.format_or(Format::Json));
    Ok(exit_code(r.status))
}

fn generate(args: &GenArgs) -> Result<u8> {
    let sdpa_name = args.out.as_ref().is_some_and(|p| p.to_string_lossy().ends_with(".dat-s"));
    let text = match &args.kind {
        GenKind::BlockArrow { blocks, blocksize, arrowhead, constraints, sdpa } => {
            let p = apps::gen_block_arrow(*blocks, *blocksize, *arrowhead, *constraints, args.seed)?;
            if *sdpa || sdpa_name {
                solver::export_sdpa(&p)?
            } else {
                solver::export_json(&p)?
            }
        }
        GenKind::SeaStar { head, arms, knuckles, agents, coupling } => {
            let s = SeaStar { head: *head, arms: *arms, knuckles: *knuckles, agents_per_knuckle: *agents, coupling: *coupling };
            apps::gen_sea_star(&s, args.seed)?.to_json()
        }
        GenKind::LehmerRosenbrock { n } => sos::gen_lehmer_rosenbrock(*n)?.to_text(),
    };
    match &args.out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_codes() {
        assert_eq!(exit_code(Status::Optimal), 0);
        assert_eq!(exit_code(Status::Infeasible), EXIT_INFEASIBLE);
        assert_eq!(exit_code(Status::Unbounded), EXIT_INFEASIBLE);
        assert_eq!(exit_code(Status::MaxIter), EXIT_NUMERICAL);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
