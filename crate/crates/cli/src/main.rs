use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use chainscreen::comparative::{default_expansion_compare, fosd_compare, verify_expansion_dominance, Expansion};
use chainscreen::mechanism::{check_ic, rationalize_by_distribution, rationalize_by_technology};
use chainscreen::model::{PromisedUtility, TypeChain};
use chainscreen::random::random_quadratic_scenario;
use chainscreen::solver::{extract_segments, objective, union_grid, Problem, SegmentLabel, BRUTE_FORCE_BUDGET, SEGMENT_TOL};
use chainscreen::{complete_info_curve, CompleteInfoProfile, Scenario, Solution};
use chainscreen_apps::ceo::{ceo_scenario, CeoConfig};
use chainscreen_apps::civil::{civil_servant_scenario, CivilConfig};
use chainscreen_apps::fda::{fda_scenario, FdaCase, FdaConfig};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

/// Optimal screening when the agent privately knows a nested set of
/// feasible technologies.
#[derive(Debug, Parser)]
#[command(name = "chainscreen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a scenario for the optimal promised utility.
    Solve {
        scenario: PathBuf,
        /// Write the solution JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a plot table `type,u_c,upper_closure,lower_closure,U`.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Dp)]
        method: Method,
        /// Replace the utility grid by this many equal steps over its range.
        #[arg(long)]
        grid_steps: Option<usize>,
    },
    /// Complete-information curve, its closures and the drop count K.
    Benchmark {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment structure of the optimal promise, with its count checks.
    Segments {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = SEGMENT_TOL)]
        tol: f64,
    },
    /// Compare the dynamic program against exhaustive enumeration.
    OracleCheck {
        /// Scenario to check; omit when sweeping random instances.
        scenario: Option<PathBuf>,
        /// Check this many random instances instead.
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long, env = "CHAINSCREEN_SEED", default_value_t = 0)]
        seed: u64,
        /// Largest number of types in swept instances.
        #[arg(long, default_value_t = 6)]
        max_types: usize,
        /// Largest number of grid levels in swept instances.
        #[arg(long, default_value_t = 8)]
        max_levels: usize,
    },
    /// Comparative statics between a base scenario and a second one.
    Compare {
        #[arg(long, value_enum)]
        mode: CompareMode,
        base: PathBuf,
        /// Expanded frontiers (expansion), new weights (fosd) or new default
        /// (default). Not needed for an on-chain expansion given by `--map`.
        other: Option<PathBuf>,
        /// Comma-separated chain type contained in each expanded type.
        #[arg(long, value_delimiter = ',')]
        projection: Option<Vec<usize>>,
        /// Comma-separated chain type each type is promoted to.
        #[arg(long, value_delimiter = ',')]
        map: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one of the built-in application scenarios.
    Scenario {
        #[arg(value_enum)]
        kind: AppKind,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of types.
        #[arg(long)]
        types: Option<usize>,
        /// FDA only: which region holds the regulator's favorite test.
        #[arg(long, value_enum, default_value_t = FdaRegion::BelowRange)]
        fda_case: FdaRegion,
        /// Civil servant only: servant's distaste for change.
        #[arg(long, default_value_t = 0.8)]
        bias: f64,
    },
    /// Build an instance under which a candidate promise is optimal.
    Rationalize {
        #[arg(long, value_enum)]
        by: RationalizeBy,
        /// JSON with `u_c`, `candidate` and optional `weights`.
        candidate: PathBuf,
        /// Distribution only: scenario whose surface is used to re-solve.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Dp,
    Structural,
    BruteForce,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CompareMode {
    Expansion,
    Fosd,
    Default,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AppKind {
    Fda,
    Civil,
    Ceo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FdaRegion {
    Accessible,
    AboveRange,
    BelowRange,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RationalizeBy {
    Dist,
    Tech,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateFile {
    u_c: Vec<f64>,
    candidate: Vec<f64>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

/// Everything went through; `false` means an invariant check failed.
type Outcome = anyhow::Result<bool>;

const REPRODUCE_TOL: f64 = 1e-9;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Solve { scenario, out, csv, method, grid_steps } => {
            solve(&scenario, out.as_deref(), csv.as_deref(), method, grid_steps)
        }
        Command::Benchmark { scenario, out } => {
            let s = load(&scenario)?;
            emit(out.as_deref(), &json!(complete_info_curve(&s.surface)))?;
            Ok(true)
        }
        Command::Segments { scenario, out, tol } => segments(&scenario, out.as_deref(), tol),
        Command::OracleCheck { scenario, sweep, seed, max_types, max_levels } => match (scenario, sweep) {
            (Some(path), None) => oracle_file(&path),
            (None, Some(n)) => oracle_sweep(n, seed, max_types, max_levels),
            _ => bail!("give either a scenario file or --sweep N"),
        },
        Command::Compare { mode, base, other, projection, map, out } => {
            compare(mode, &base, other.as_deref(), projection, map, out.as_deref())
        }
        Command::Scenario { kind, out, types, fda_case, bias } => {
            let s = app_scenario(kind, types, fda_case, bias)?;
            write_text(out.as_deref(), &(s.to_json()? + "\n"))?;
            Ok(true)
        }
        Command::Rationalize { by, candidate, scenario, out } => {
            rationalize(by, &candidate, scenario.as_deref(), out.as_deref())
        }
    }
}

fn load(path: &Path) -> anyhow::Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("in {}", path.display()))
}

fn write_text(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(out: Option<&Path>, value: &Value) -> anyhow::Result<()> {
    write_text(out, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn solution_json(sol: &Solution, profile: &CompleteInfoProfile) -> anyhow::Result<Value> {
    let mut v = serde_json::to_value(sol)?;
    v["K"] = json!(profile.k);
    Ok(v)
}

fn plot_table(s: &Scenario, profile: &CompleteInfoProfile, sol: &Solution) -> String {
    let mut text = String::from("type,u_c,upper_closure,lower_closure,U\n");
    for i in 0..s.len() {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            s.chain.labels()[i],
            profile.u_c[i],
            profile.upper_closure[i],
            profile.lower_closure[i],
            sol.promise.values()[i]
        ));
    }
    text
}

fn solve(path: &Path, out: Option<&Path>, csv: Option<&Path>, method: Method, grid_steps: Option<usize>) -> Outcome {
    let mut s = load(path)?;
    if let Some(steps) = grid_steps {
        if steps == 0 {
            bail!("--grid-steps must be positive");
        }
        let (lo, hi) = (s.u_grid[0], s.u_grid[s.u_grid.len() - 1]);
        let grid = (0..=steps).map(|k| if k == steps { hi } else { lo + (hi - lo) * k as f64 / steps as f64 });
        s = s.with_grid(grid.collect())?;
    }
    let profile = complete_info_curve(&s.surface);
    let problem = Problem::from_scenario(&s, &profile)?;
    let sol = match method {
        Method::Dp => problem.solve_dp()?,
        Method::Structural => problem.structural_solve()?,
        Method::BruteForce => problem.brute_force(BRUTE_FORCE_BUDGET)?,
    };
    emit(out, &solution_json(&sol, &profile)?)?;
    if let Some(p) = csv {
        fs::write(p, plot_table(&s, &profile, &sol)).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(check_ic(&sol.promise, profile.ubar).pass)
}

fn segments(path: &Path, out: Option<&Path>, tol: f64) -> Outcome {
    let s = load(path)?;
    let profile = complete_info_curve(&s.surface);
    let sol = Problem::from_scenario(&s, &profile)?.solve_dp()?;
    let segs = extract_segments(&sol.promise, &profile.u_c, tol)?;
    let count = |l: SegmentLabel| segs.iter().filter(|s| s.label == l).count();
    let (follow, constant) = (count(SegmentLabel::FollowCurve), count(SegmentLabel::Constant));
    let constant_bound = constant <= profile.k;
    let follow_bound = follow <= constant + 1;
    emit(
        out,
        &json!({
            "segments": segs,
            "K": profile.k,
            "follow_segments": follow,
            "constant_segments": constant,
            "checks": {
                "constant segments <= K": constant_bound,
                "follow segments <= constant segments + 1": follow_bound,
            }
        }),
    )?;
    Ok(constant_bound && follow_bound)
}

/// DP and enumeration agree bit for bit on value and promise.
fn oracle_agrees(s: &Scenario) -> anyhow::Result<bool> {
    let profile = complete_info_curve(&s.surface);
    let problem = Problem::from_scenario(s, &profile)?;
    let dp = problem.solve_dp()?;
    let bf = problem.brute_force(BRUTE_FORCE_BUDGET)?;
    Ok(dp.value.to_bits() == bf.value.to_bits())
}

fn oracle_file(path: &Path) -> Outcome {
    let ok = oracle_agrees(&load(path)?)?;
    println!("{}", if ok { "dp == brute_force" } else { "dp != brute_force" });
    Ok(ok)
}

/// Instance `k` of a sweep, seeded independently of the worker schedule.
fn sweep_instance(seed: u64, k: usize, max_types: usize, max_levels: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
    let n = rng.gen_range(1..=max_types);
    let m = rng.gen_range(2..=max_levels);
    random_quadratic_scenario(&mut rng, n, m)
}

fn oracle_sweep(count: usize, seed: u64, max_types: usize, max_levels: usize) -> Outcome {
    if max_types == 0 || max_levels < 2 {
        bail!("need at least one type and two grid levels");
    }
    let results: Vec<anyhow::Result<bool>> = (0..count)
        .into_par_iter()
        .map(|k| oracle_agrees(&sweep_instance(seed, k, max_types, max_levels)))
        .collect();
    let mut mismatches = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        if !r.with_context(|| format!("instance {k}"))? {
            mismatches.push(k);
        }
    }
    if mismatches.is_empty() {
        println!("dp == brute_force on {count} instances (seed {seed})");
    } else {
        println!("dp != brute_force on {} of {count} instances (seed {seed}): {mismatches:?}", mismatches.len());
    }
    Ok(mismatches.is_empty())
}

fn compare(
    mode: CompareMode,
    base: &Path,
    other: Option<&Path>,
    projection: Option<Vec<usize>>,
    map: Option<Vec<usize>>,
    out: Option<&Path>,
) -> Outcome {
    let b = load(base)?;
    let other = || -> anyhow::Result<Scenario> {
        let p = other.context("this comparison needs a second scenario")?;
        let o = load(p)?;
        if o.len() != b.len() {
            bail!("scenarios have {} and {} types", b.len(), o.len());
        }
        Ok(o)
    };
    let (report, pass) = match mode {
        CompareMode::Expansion => {
            let exp = match map {
                Some(map) => Expansion::OnChain { map },
                None => {
                    let o = other()?;
                    let projection = projection.unwrap_or_else(|| (0..b.len()).collect());
                    Expansion::OffChain { frontiers: o.surface.frontiers().to_vec(), projection }
                }
            };
            let r = verify_expansion_dominance(&b, &exp)?;
            (serde_json::to_value(&r)?, r.pass())
        }
        CompareMode::Fosd => {
            let r = fosd_compare(&b, other()?.weights())?;
            (serde_json::to_value(&r)?, r.pass())
        }
        CompareMode::Default => {
            let r = default_expansion_compare(&b, other()?.surface.default_frontier())?;
            (serde_json::to_value(&r)?, r.pass())
        }
    };
    let mut report = report;
    report["pass"] = json!(pass);
    emit(out, &report)?;
    Ok(pass)
}

fn app_scenario(kind: AppKind, types: Option<usize>, region: FdaRegion, bias: f64) -> anyhow::Result<Scenario> {
    Ok(match kind {
        AppKind::Fda => {
            let case = match region {
                FdaRegion::Accessible => FdaCase::OptimumAccessible,
                FdaRegion::AboveRange => FdaCase::OptimumAboveRange,
                FdaRegion::BelowRange => FdaCase::OptimumBelowRange,
            };
            fda_scenario(&FdaConfig::case(case, types.unwrap_or(21)))?.scenario
        }
        AppKind::Civil => civil_servant_scenario(&CivilConfig::uniform(101, bias, types.unwrap_or(21)))?.scenario,
        AppKind::Ceo => ceo_scenario(&CeoConfig::evenly_spaced(types.unwrap_or(50)))?.scenario,
    })
}

/// Re-solves `s` and checks the optimum matches `candidate` on `indices`
/// and in value.
fn reproduces(s: &Scenario, candidate: &PromisedUtility, indices: &[usize]) -> anyhow::Result<bool> {
    let profile = complete_info_curve(&s.surface);
    let sol = Problem::from_scenario(s, &profile)?.solve_dp()?;
    let on_support = indices.iter().all(|&i| (sol.promise.values()[i] - candidate.values()[i]).abs() <= REPRODUCE_TOL);
    let value = objective(s.weights(), &s.surface, candidate.values())?;
    Ok(on_support && (sol.value - value).abs() <= REPRODUCE_TOL)
}

fn rationalize(by: RationalizeBy, path: &Path, scenario: Option<&Path>, out: Option<&Path>) -> Outcome {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file: CandidateFile = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("candidate JSON: {e}"))?;
    let n = file.u_c.len();
    let candidate = PromisedUtility(file.candidate);
    let follows = |i: usize| (candidate.values()[i] - file.u_c[i]).abs() <= SEGMENT_TOL;
    match by {
        RationalizeBy::Dist => {
            let weights = rationalize_by_distribution(&file.u_c, &candidate)?;
            let mut report = json!({ "weights": weights });
            let mut pass = true;
            if let Some(p) = scenario {
                let s = load(p)?;
                let profile = complete_info_curve(&s.surface);
                if profile.u_c.iter().zip(&file.u_c).any(|(a, b)| (a - b).abs() > SEGMENT_TOL) || s.len() != n {
                    bail!("the scenario's complete-information curve differs from u_c");
                }
                let s = s.with_weights(weights.clone())?;
                let support: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
                pass = reproduces(&s, &candidate, &support)?;
                report["reproduces"] = json!(pass);
            }
            emit(out, &report)?;
            Ok(pass)
        }
        RationalizeBy::Tech => {
            let weights = file.weights.unwrap_or_else(|| vec![1.0 / n as f64; n]);
            let surface = rationalize_by_technology(&file.u_c, &candidate, &weights)?;
            let labels = (1..=n).map(|i| i as f64).collect();
            let grid = union_grid(&[&file.u_c, candidate.values()]);
            let s = Scenario::new(TypeChain::new(labels, weights)?, surface, grid)?;
            let support: Vec<usize> = (0..n).filter(|&i| follows(i)).collect();
            let pass = reproduces(&s, &candidate, &support)?;
            let scenario: Value = serde_json::from_str(&s.to_json()?)?;
            emit(out, &json!({ "scenario": scenario, "reproduces": pass }))?;
            Ok(pass)
        }
    }
}
