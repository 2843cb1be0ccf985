//! `mmspace`: command-line access to the distances, the excursion coding
//! and the experiments. JSON goes to stdout (or `--out`), a one-line
//! summary to stderr.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error, 3 failed
//! experiment assertion.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mmspace::error::Error;
use mmspace::excursion::{code_excursion, d_excursion, sample_excursion, Excursion, ExcursionKind, GammaOptions, Resolution};
use mmspace::gp_box::{box_lambda, build_glued_space, glued_upper_bound, gromov_prohorov, BoxConfig, BoxResult, GlueSearch, DEFAULT_MAX_PAIRS};
use mmspace::harness::{
    run_continuity_check, run_counterexample, run_lipschitz_check, run_theorem_check, ContinuitySchedule, ExperimentReport,
    Perturbation,
};
use mmspace::io::{
    coded_tree_to_json, excursion_to_json, measure_from_json, mm_space_to_json, rational_json, read_excursion, read_json_file,
    read_mm_space, excursion_from_json, mm_space_from_json,
};
use mmspace::mm_core::{canonicalize, sample_mm_space, FiniteMMSpace};
use mmspace::prohorov::{prohorov_bruteforce, prohorov_flow, CommonSpaceMeasures};
use mmspace::rational::{Rational, Scalar};

#[derive(Debug, Parser)]
#[command(name = "mmspace", version, about = "Distances between finite metric measure spaces and excursion-coded trees")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Exact rational arithmetic (default).
    #[arg(long, global = true, conflicts_with = "float")]
    rational: bool,
    /// Floating-point arithmetic for mm-space distances.
    #[arg(long, global = true)]
    float: bool,
    /// Worker threads for parallel experiments.
    #[arg(long, global = true, env = "MMSPACE_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print a bare value instead of JSON.
    #[arg(long, global = true)]
    raw: bool,
    /// Also write an experiment table as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distances.
    #[command(subcommand)]
    Dist(Dist),
    /// Best gluing found, or the gluing along a given correspondence.
    Glue {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Correspondence as `i-j,i-j,...`.
        #[arg(long, value_parser = parse_pairs, requires = "eps")]
        pairs: Option<Pairs>,
        #[arg(long, value_parser = parse_rational)]
        eps: Option<Rational>,
    },
    /// Finite tree coded by an excursion, as an mmspace/1 document.
    CodeExcursion {
        #[arg(long)]
        h: PathBuf,
        #[arg(long, value_parser = parse_rational)]
        level_step: Option<Rational>,
        /// Extra cut times, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_rational)]
        cuts: Vec<Rational>,
    },
    #[command(subcommand)]
    Experiment(Experiment),
    /// Checks an mmspace/1 or excursion/1 file.
    Validate { file: PathBuf },
    /// Merges points at distance 0 and drops zero-weight points.
    Canonicalize { file: PathBuf },
    /// Seeded random input.
    #[command(subcommand)]
    Sample(Sample),
}

#[derive(Debug, Subcommand)]
enum Dist {
    /// Prohorov distance between two measures on one space.
    Prohorov {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Flow)]
        method: Method,
    },
    /// Gromov-Prohorov distance.
    Gp {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Largest number of positive-weight pairs searched exactly.
        #[arg(long, default_value_t = DEFAULT_MAX_PAIRS)]
        max_pairs: usize,
    },
    /// Box distance with parameter lambda.
    Box {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_parser = parse_rational, default_value = "1")]
        lambda: Rational,
        #[arg(long, default_value_t = DEFAULT_MAX_PAIRS)]
        max_pairs: usize,
    },
    /// d_lambda + d_Gamma between two excursions.
    Excursion {
        #[arg(long)]
        h: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Tree distance d_h(s, t).
    Dh {
        #[arg(long)]
        h: PathBuf,
        #[arg(long, value_parser = parse_rational)]
        s: Rational,
        #[arg(long, value_parser = parse_rational)]
        t: Rational,
    },
}

#[derive(Debug, Subcommand)]
enum Experiment {
    TheoremCheck {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        n_max: usize,
    },
    Lipschitz {
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    Counterexample {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,6,8")]
        n_list: Vec<u32>,
    },
    Continuity {
        /// Reference excursion (default: the tent).
        #[arg(long)]
        h: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        steps: u32,
        #[arg(long, value_delimiter = ',', default_value = "null,value-jitter,breakpoint-jitter,spike", value_parser = parse_perturbation)]
        perturbations: Vec<Perturbation>,
        #[arg(long, default_value_t = 8)]
        grid: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Flow,
    Bruteforce,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Pl,
    Pc,
}

#[derive(Debug, Subcommand)]
enum Sample {
    Mmspace {
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        #[arg(long, value_parser = parse_rational, default_value = "2")]
        diameter: Rational,
    },
    Excursion {
        #[arg(long, value_enum, default_value_t = KindArg::Pl)]
        kind: KindArg,
        #[arg(long, default_value_t = 4)]
        max_pieces: usize,
    },
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    Rational::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
struct Pairs(Vec<(usize, usize)>);

fn parse_pairs(s: &str) -> Result<Pairs, String> {
    s.split(',')
        .map(|p| {
            let (x, y) = p.split_once('-').ok_or_else(|| format!("pair {p:?} is not of the form i-j"))?;
            Ok((x.trim().parse().map_err(|_| format!("bad index in {p:?}"))?, y.trim().parse().map_err(|_| format!("bad index in {p:?}"))?))
        })
        .collect::<Result<Vec<_>, String>>()
        .map(Pairs)
}

fn parse_perturbation(s: &str) -> Result<Perturbation, String> {
    Perturbation::parse(s).ok_or_else(|| format!("unknown perturbation {s:?}; expected null, value-jitter, breakpoint-jitter or spike"))
}

enum Failure {
    Domain(Error),
    Usage(String),
    Assertions(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

/// Result of a command: a JSON document and optionally a bare value for
/// `--raw`.
struct Output {
    json: Value,
    raw: Option<String>,
    summary: String,
}

trait Emit: Scalar {
    fn json(&self) -> Value;
    fn raw(&self) -> String;
}

impl Emit for Rational {
    fn json(&self) -> Value {
        rational_json(self)
    }
    fn raw(&self) -> String {
        self.to_string()
    }
}

impl Emit for f64 {
    fn json(&self) -> Value {
        json!({ "float": self })
    }
    fn raw(&self) -> String {
        format!("{self}")
    }
}

fn mode(g: &Global) -> &'static str {
    if g.float {
        "float"
    } else {
        "rational"
    }
}

fn value_output<S: Emit>(op: &str, v: &S, mut extra: Value) -> Output {
    extra["operation"] = json!(op);
    extra["value"] = v.json();
    Output { raw: Some(v.raw()), summary: format!("{op} = {}", v.raw()), json: extra }
}

fn box_output<S: Emit>(op: &str, r: &BoxResult<S>, g: &Global) -> Output {
    value_output(
        op,
        &r.value,
        json!({
            "mode": mode(g),
            "exact_search": r.exact,
            "correspondence": r.correspondence.pairs(),
            "distortion": r.correspondence.distortion().json(),
            "maxmass": r.correspondence.maxmass().json(),
        }),
    )
}

fn dist_gp<S: Emit>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, max_pairs: usize, g: &Global) -> Result<Output, Failure> {
    Ok(box_output("gp", &gromov_prohorov(a, b, &BoxConfig { max_pairs })?, g))
}

fn dist_box<S: Emit>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, lambda: &S, max_pairs: usize, g: &Global) -> Result<Output, Failure> {
    let mut out = box_output("box", &box_lambda(a, b, lambda, &BoxConfig { max_pairs })?, g);
    out.json["lambda"] = lambda.json();
    Ok(out)
}

fn dist_prohorov<S: Emit>(space: &FiniteMMSpace<S>, mu: Vec<S>, nu: Vec<S>, method: Method, g: &Global) -> Result<Output, Failure> {
    let cm = CommonSpaceMeasures::on_space(space, mu, nu)?;
    let (value, name) = match method {
        Method::Flow => (prohorov_flow(&cm), "flow"),
        Method::Bruteforce => (prohorov_bruteforce(&cm)?, "bruteforce"),
    };
    Ok(value_output("prohorov", &value, json!({ "mode": mode(g), "method": name })))
}

fn glue<S: Emit>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, pairs: &Option<Pairs>, eps: Option<S>, g: &Global) -> Result<Output, Failure> {
    match (pairs, eps) {
        (Some(Pairs(pairs)), Some(eps)) => {
            let glued = build_glued_space(a, b, pairs, &eps)?;
            let p = glued.prohorov(a, b)?;
            let matrix: Vec<Vec<Value>> = glued.matrix().iter().map(|r| r.iter().map(|x| x.json()).collect()).collect();
            Ok(value_output("glue", &p, json!({ "mode": mode(g), "pairs": pairs, "eps": eps.json(), "dist": matrix })))
        }
        _ => {
            let bound = glued_upper_bound(a, b, &GlueSearch { seed: g.seed, ..GlueSearch::default() })?;
            Ok(value_output(
                "glue",
                &bound.value,
                json!({ "mode": mode(g), "pairs": bound.pairs, "eps": bound.eps.map(|e| e.json()), "exhaustive": bound.exhaustive }),
            ))
        }
    }
}

fn experiment_output(report: ExperimentReport, g: &Global) -> Result<Output, Failure> {
    if let Some(path) = &g.csv {
        fs::write(path, report.to_csv()).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    }
    Ok(Output { summary: report.one_line(), raw: None, json: report.to_json() })
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Dist(Dist::Prohorov { space, mu, nu, method }) => {
            let s = read_mm_space(space)?;
            let (mu, nu) = (measure_from_json(&read_json_file(mu)?)?, measure_from_json(&read_json_file(nu)?)?);
            if g.float {
                let f = |v: Vec<Rational>| v.iter().map(Rational::to_f64).collect::<Vec<_>>();
                dist_prohorov(&s.to_f64(), f(mu), f(nu), *method, g)
            } else {
                dist_prohorov(&s, mu, nu, *method, g)
            }
        }
        Command::Dist(Dist::Gp { a, b, max_pairs }) => {
            let (a, b) = (read_mm_space(a)?, read_mm_space(b)?);
            if g.float {
                dist_gp(&a.to_f64(), &b.to_f64(), *max_pairs, g)
            } else {
                dist_gp(&a, &b, *max_pairs, g)
            }
        }
        Command::Dist(Dist::Box { a, b, lambda, max_pairs }) => {
            let (a, b) = (read_mm_space(a)?, read_mm_space(b)?);
            if g.float {
                dist_box(&a.to_f64(), &b.to_f64(), &lambda.to_f64(), *max_pairs, g)
            } else {
                dist_box(&a, &b, lambda, *max_pairs, g)
            }
        }
        Command::Dist(Dist::Excursion { h, g: other, tolerance }) => {
            if tolerance.is_nan() || *tolerance <= 0.0 {
                return Err(Failure::Usage("dist excursion: --tolerance must be positive".into()));
            }
            let (h, k) = (read_excursion(h)?, read_excursion(other)?);
            let d = d_excursion(&h, &k, &GammaOptions { tolerance: *tolerance, ..GammaOptions::default() });
            let gamma = match d.gamma.exact() {
                Some(v) => json!({ "exact": rational_json(&v) }),
                None => json!({ "lo": d.gamma.lo, "hi": d.gamma.hi, "squared": d.gamma.square.map(|s| rational_json(&s)) }),
            };
            let (value, raw) = match d.exact() {
                Some(v) => (rational_json(&v), v.to_string()),
                None => (json!({ "estimate": d.estimate(), "lo": d.lo, "hi": d.hi }), format!("{}", d.estimate())),
            };
            Ok(Output {
                summary: format!("excursion distance = {raw}"),
                raw: Some(raw),
                json: json!({ "operation": "excursion", "value": value, "d_lambda": rational_json(&d.lambda), "d_gamma": gamma }),
            })
        }
        Command::Dist(Dist::Dh { h, s, t }) => {
            let h = read_excursion(h)?;
            Ok(value_output("dh", &h.dh(s, t)?, json!({ "s": s.to_string(), "t": t.to_string() })))
        }
        Command::Glue { a, b, pairs, eps } => {
            let (a, b) = (read_mm_space(a)?, read_mm_space(b)?);
            if g.float {
                glue(&a.to_f64(), &b.to_f64(), pairs, eps.map(|e| e.to_f64()), g)
            } else {
                glue(&a, &b, pairs, *eps, g)
            }
        }
        Command::CodeExcursion { h, level_step, cuts } => {
            let h = read_excursion(h)?;
            if let Some(bad) = cuts.iter().find(|c| !(Rational::ZERO < **c && **c < Rational::ONE)) {
                return Err(Failure::Usage(format!("code-excursion: --cuts entry {bad} is outside (0,1)")));
            }
            if level_step.is_some_and(|s| !s.is_positive()) {
                return Err(Failure::Usage("code-excursion: --level-step must be positive".into()));
            }
            let tree = code_excursion(&h, &Resolution { cuts: cuts.clone(), level_step: *level_step });
            Ok(Output {
                summary: format!("coded tree with {} points, approximation bound {}", tree.space.len(), tree.bound),
                raw: None,
                json: coded_tree_to_json(&tree),
            })
        }
        Command::Experiment(e) => {
            let report = match e {
                Experiment::TheoremCheck { count, n_max } => run_theorem_check(g.seed, *count, *n_max)?,
                Experiment::Lipschitz { count } => run_lipschitz_check(g.seed, *count),
                Experiment::Counterexample { n_list } => run_counterexample(n_list)?,
                Experiment::Continuity { h, steps, perturbations, grid } => {
                    let h = match h {
                        Some(path) => read_excursion(path)?,
                        None => Excursion::tent(),
                    };
                    let schedule = ContinuitySchedule { steps: *steps, perturbations: perturbations.clone(), grid: *grid };
                    run_continuity_check(&h, &schedule, g.seed)?
                }
            };
            experiment_output(report, g)
        }
        Command::Validate { file } => {
            let doc = read_json_file(file)?;
            let is_excursion = doc.get("kind").is_some() || doc.get("format").and_then(Value::as_str) == Some(mmspace::io::EXCURSION_FORMAT);
            let json = if is_excursion {
                let h = excursion_from_json(&doc)?;
                json!({ "valid": true, "format": mmspace::io::EXCURSION_FORMAT, "kind": h.kind().to_string(), "pieces": h.pieces() })
            } else {
                let s = mm_space_from_json(&doc)?;
                json!({ "valid": true, "format": mmspace::io::MMSPACE_FORMAT, "points": s.len() })
            };
            Ok(Output { summary: format!("{} is valid", file.display()), raw: Some("valid".into()), json })
        }
        Command::Canonicalize { file } => {
            let s = canonicalize(&read_mm_space(file)?);
            Ok(Output { summary: format!("canonical space with {} points", s.len()), raw: None, json: mm_space_to_json(&s) })
        }
        Command::Sample(Sample::Mmspace { n_max, diameter }) => {
            if *n_max == 0 || !diameter.is_positive() {
                return Err(Failure::Usage("sample mmspace: --n-max and --diameter must be positive".into()));
            }
            let s = sample_mm_space(g.seed, *n_max, *diameter);
            Ok(Output { summary: format!("sampled space with {} points", s.len()), raw: None, json: mm_space_to_json(&s) })
        }
        Command::Sample(Sample::Excursion { kind, max_pieces }) => {
            let kind = match kind {
                KindArg::Pl => ExcursionKind::PiecewiseLinear,
                KindArg::Pc => ExcursionKind::PiecewiseConstant,
            };
            let h = sample_excursion(g.seed, kind, *max_pieces);
            Ok(Output { summary: format!("sampled {kind} excursion with {} pieces", h.pieces()), raw: None, json: excursion_to_json(&h) })
        }
    }
}

fn emit(output: &Output, g: &Global) -> Result<(), Failure> {
    let text = match (&output.raw, g.raw) {
        (Some(raw), true) => format!("{raw}\n"),
        _ => {
            let mut s = serde_json::to_string_pretty(&output.json).expect("JSON values serialize");
            s.push('\n');
            s
        }
    };
    match &g.out {
        Some(path) => fs::write(path, text).map_err(|source| Failure::Domain(Error::Io { path: path.display().to_string(), source })),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = run(&cli).and_then(|out| {
        emit(&out, &cli.global)?;
        eprintln!("{}", out.summary);
        if let Command::Experiment(_) = cli.command {
            let failed = out.json["totals"]["failed"].as_u64().unwrap_or(0) as usize;
            if failed > 0 {
                return Err(Failure::Assertions(failed));
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Assertions(n)) => {
            eprintln!("error: {n} experiment assertion(s) failed");
            ExitCode::from(3)
        }
    }
}
