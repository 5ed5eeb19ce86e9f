//! Batch front-end over the rkzero library.
//!
//! One task per invocation: `rkzero <task> --spec doc.rkz [flags]`.
//! Tasks read their inputs from the document (see [`rkzero::specdoc`]);
//! command-line flags override document settings, which override built-in
//! defaults. Results are printed to stdout as a single JSON record, except
//! for `grid` and `weights` which emit a header line plus comma-delimited
//! rows. Exit status is nonzero only for hard errors — a quadrature that
//! runs out of budget still reports its best estimate, flagged in
//! `diagnostics`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use rkzero::density::{density_at, theorem_main_check, MixedDensityQuery};
use rkzero::montecarlo::{expand_basis, mc_expected_count, McOptions};
use rkzero::polytope::{bernstein_count, kushnirenko_check};
use rkzero::quad::{integrate_density, CountEstimate, Domain, QuadOptions};
use rkzero::space::{ComplexPoint, SpaceExpr};
use rkzero::specdoc::{parse_document, GridAxis, SpecDocument, TaskSpec};
use rkzero::Error;

#[derive(Parser)]
#[command(name = "rkzero", version, about = "Expected zero counts of Gaussian analytic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the expected-zero density over the document's domain.
    Expect(Common),
    /// Monte Carlo zero counting in a disk.
    Mc(Common),
    /// Mixed count two ways: direct integral vs coefficient extraction.
    Mixed(Common),
    /// Newton-polytope counts: Bernstein numbers or a Kushnirenko check.
    Bkk(Common),
    /// Sample the density on a grid and emit delimited rows.
    Grid(Common),
    /// Expand a diagonal space into explicit basis weights.
    Weights(Common),
}

#[derive(Args)]
struct Common {
    /// Task document path.
    #[arg(long)]
    spec: PathBuf,
    /// Quadrature tolerance (overrides the document).
    #[arg(long)]
    tol: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Disk radius for Monte Carlo counting.
    #[arg(long)]
    radius: Option<f64>,
    /// Worker threads for Monte Carlo batches (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Density evaluation budget for quadrature.
    #[arg(long)]
    budget: Option<u64>,
    /// Series truncation order for infinite-dimensional atoms.
    #[arg(long)]
    truncation: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match &cli.command {
        Command::Expect(a) => ("expect", a),
        Command::Mc(a) => ("mc", a),
        Command::Mixed(a) => ("mixed", a),
        Command::Bkk(a) => ("bkk", a),
        Command::Grid(a) => ("grid", a),
        Command::Weights(a) => ("weights", a),
    };
    match run(task, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse { .. } | Error::Document(_) | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

struct Settings {
    tol: f64,
    samples: usize,
    seed: u64,
    radius: f64,
    threads: Option<usize>,
    budget: u64,
    truncation: usize,
}

impl Settings {
    /// Precedence: flags > document > defaults.
    fn resolve(args: &Common, doc: &SpecDocument) -> Settings {
        Settings {
            tol: args.tol.or(doc.tol).unwrap_or(1e-7),
            samples: args.samples.or(doc.samples).unwrap_or(20_000),
            seed: args.seed.or(doc.seed).unwrap_or(0),
            radius: args.radius.or(doc.radius).unwrap_or(1.0),
            threads: args.threads.or(doc.threads),
            budget: args.budget.or(doc.budget).unwrap_or(10_000_000),
            truncation: args.truncation.or(doc.truncation).unwrap_or(64),
        }
    }

    fn quad(&self) -> QuadOptions {
        QuadOptions { tol: self.tol, budget: self.budget }
    }
}

fn run(task: &str, args: &Common) -> rkzero::Result<()> {
    let text = std::fs::read_to_string(&args.spec)?;
    let doc = parse_document(&text)?;
    if let Some(t) = &doc.task {
        if t.kind() != task {
            return Err(Error::Document(format!(
                "document declares task `{}` but the `{}` subcommand was invoked",
                t.kind(),
                task
            )));
        }
    }
    let settings = Settings::resolve(args, &doc);
    match task {
        "expect" => run_expect(args, &doc, &settings),
        "mc" => run_mc(args, &doc, &settings),
        "mixed" => run_mixed(args, &doc, &settings),
        "bkk" => run_bkk(args, &doc, &settings),
        "grid" => run_grid(&doc),
        "weights" => run_weights(&doc, &settings),
        _ => unreachable!(),
    }
}

/// The document's single defined space, or the task's explicit choice.
fn single_space(doc: &SpecDocument, from_task: Option<&SpaceExpr>) -> rkzero::Result<SpaceExpr> {
    if let Some(s) = from_task {
        return Ok(s.clone());
    }
    match doc.spaces.len() {
        1 => Ok(doc.spaces[0].1.clone()),
        0 => Err(Error::Document("no space defined in the document".into())),
        n => Err(Error::Document(format!(
            "{n} spaces defined; name one in a `task = ...` line"
        ))),
    }
}

fn query_from_spaces(spaces: Vec<SpaceExpr>) -> rkzero::Result<MixedDensityQuery> {
    if spaces.len() == 1 && spaces[0].nvars() > 1 {
        MixedDensityQuery::unmixed(spaces.into_iter().next().unwrap())
    } else {
        MixedDensityQuery::new(spaces)
    }
}

fn domain_of(doc: &SpecDocument) -> rkzero::Result<Domain> {
    doc.domain
        .clone()
        .ok_or_else(|| Error::Document("the document does not define a domain".into()))
}

#[derive(Serialize)]
struct EstimateRecord {
    value: f64,
    error: f64,
    evaluations: u64,
    method: rkzero::quad::Method,
}

impl From<&CountEstimate> for EstimateRecord {
    fn from(e: &CountEstimate) -> Self {
        EstimateRecord {
            value: e.value,
            error: e.error,
            evaluations: e.evaluations,
            method: e.method,
        }
    }
}

fn emit(record: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(record).expect("serializable record"));
}

fn run_expect(args: &Common, doc: &SpecDocument, settings: &Settings) -> rkzero::Result<()> {
    let spaces = match &doc.task {
        Some(TaskSpec::Expect(s)) => s.clone(),
        _ => vec![single_space(doc, None)?],
    };
    let domain = domain_of(doc)?;
    let query = query_from_spaces(spaces)?;
    let est = integrate_density(&query, &domain, &settings.quad())?;
    emit(&json!({
        "task": "expect",
        "inputs": {
            "spec": args.spec.display().to_string(),
            "spaces": query.spaces().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "domain": domain.to_string(),
            "tol": settings.tol,
            "budget": settings.budget,
        },
        "value": est.value,
        "error": est.error,
        "evaluations": est.evaluations,
        "method": est.method,
        "diagnostics": { "budget_exhausted": est.budget_exhausted },
    }));
    Ok(())
}

fn run_mc(args: &Common, doc: &SpecDocument, settings: &Settings) -> rkzero::Result<()> {
    let space = match &doc.task {
        Some(TaskSpec::Mc(s)) => s.clone(),
        _ => single_space(doc, None)?,
    };
    let opts = McOptions { truncation: settings.truncation, ..Default::default() };
    let run = || mc_expected_count(&space, settings.radius, settings.samples, settings.seed, &opts);
    let report = match settings.threads {
        Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Document(format!("thread pool: {e}")))?
            .install(run),
        _ => run(),
    }?;
    emit(&json!({
        "task": "mc",
        "inputs": {
            "spec": args.spec.display().to_string(),
            "space": space.to_string(),
            "radius": settings.radius,
            "samples": settings.samples,
            "seed": settings.seed,
            "truncation": settings.truncation,
        },
        "value": report.mean,
        "error": report.stderr,
        "samples": report.samples,
        "seed": report.seed,
        "method": "monte-carlo",
        "histogram": report.histogram,
        "diagnostics": {
            "discarded": report.discarded,
            "truncation_bias": report.truncation_bias,
        },
    }));
    Ok(())
}

fn run_mixed(args: &Common, doc: &SpecDocument, settings: &Settings) -> rkzero::Result<()> {
    let spaces = match &doc.task {
        Some(TaskSpec::Mixed(s)) => s.clone(),
        _ if !doc.spaces.is_empty() => doc.spaces.iter().map(|(_, s)| s.clone()).collect(),
        _ => return Err(Error::Document("no spaces defined for the mixed task".into())),
    };
    let domain = domain_of(doc)?;
    let (direct, extracted) = theorem_main_check(&spaces, &domain, &settings.quad())?;
    let discrepancy = (direct.value - extracted.value).abs();
    let agrees = discrepancy <= direct.error + extracted.error + 1e-12;
    emit(&json!({
        "task": "mixed",
        "inputs": {
            "spec": args.spec.display().to_string(),
            "spaces": spaces.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "domain": domain.to_string(),
            "tol": settings.tol,
            "budget": settings.budget,
        },
        "value": direct.value,
        "error": direct.error + extracted.error,
        "method": direct.method,
        "direct": EstimateRecord::from(&direct),
        "extracted": EstimateRecord::from(&extracted),
        "discrepancy": discrepancy,
        "agrees": agrees,
        "diagnostics": {
            "budget_exhausted": direct.budget_exhausted || extracted.budget_exhausted,
        },
    }));
    Ok(())
}

fn run_bkk(args: &Common, doc: &SpecDocument, settings: &Settings) -> rkzero::Result<()> {
    let task = match &doc.task {
        Some(t @ (TaskSpec::Bkk(_) | TaskSpec::Kushnirenko(..))) => t.clone(),
        Some(_) => unreachable!("task kind checked in run()"),
        None => match (doc.supports.len(), doc.weight_tables.len()) {
            (_, 0) if !doc.supports.is_empty() => {
                TaskSpec::Bkk(doc.supports.iter().map(|(_, s)| s.clone()).collect())
            }
            (1, 1) => TaskSpec::Kushnirenko(
                doc.supports[0].1.clone(),
                doc.weight_tables[0].1.clone(),
            ),
            _ => {
                return Err(Error::Document(
                    "ambiguous bkk inputs; add a `task = bkk(...)` or `task = kushnirenko(...)` line".into(),
                ))
            }
        },
    };
    match task {
        TaskSpec::Bkk(supports) => {
            let count = bernstein_count(&supports)?;
            emit(&json!({
                "task": "bkk",
                "inputs": {
                    "spec": args.spec.display().to_string(),
                    "supports": supports.iter().map(|s| {
                        s.points().map(|p| p.to_vec()).collect::<Vec<_>>()
                    }).collect::<Vec<_>>(),
                },
                "value": count,
                "error": 0.0,
                "method": "polytope",
                "diagnostics": {},
            }));
        }
        TaskSpec::Kushnirenko(support, weights) => {
            let (combinatorial, integral) = kushnirenko_check(&support, &weights, &settings.quad())?;
            let discrepancy = (combinatorial - integral.value).abs();
            let agrees = discrepancy <= settings.tol.max(1e-3) + integral.error;
            emit(&json!({
                "task": "bkk",
                "inputs": {
                    "spec": args.spec.display().to_string(),
                    "support": support.points().map(|p| p.to_vec()).collect::<Vec<_>>(),
                    "weights": weights.iter().map(|(a, c)| json!([a.to_vec(), c])).collect::<Vec<_>>(),
                    "tol": settings.tol,
                },
                "value": combinatorial,
                "error": 0.0,
                "method": "polytope",
                "integral": EstimateRecord::from(&integral),
                "discrepancy": discrepancy,
                "agrees": agrees,
                "diagnostics": { "budget_exhausted": integral.budget_exhausted },
            }));
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn grid_points(axis: &GridAxis) -> (Vec<f64>, Vec<f64>) {
    let lin = |lo: f64, hi: f64, steps: usize| -> Vec<f64> {
        if steps == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..steps)
                .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
                .collect()
        }
    };
    (lin(axis.re_min, axis.re_max, axis.re_steps), lin(axis.im_min, axis.im_max, axis.im_steps))
}

fn run_grid(doc: &SpecDocument) -> rkzero::Result<()> {
    let space = match &doc.task {
        Some(TaskSpec::Grid(s)) => s.clone(),
        _ => single_space(doc, None)?,
    };
    let axes = doc
        .grid
        .clone()
        .ok_or_else(|| Error::Document("grid task needs a `grid = rect(...)` line".into()))?;
    let n = space.nvars();
    if axes.len() != n {
        return Err(Error::Document(format!(
            "grid has {} axes for a {n}-variable space",
            axes.len()
        )));
    }
    let query = MixedDensityQuery::unmixed(space)?;
    let mut header = Vec::new();
    for j in 1..=n {
        header.push(format!("re_{j}"));
        header.push(format!("im_{j}"));
    }
    header.push("density".into());
    println!("{}", header.join(","));
    // cartesian product over the per-coordinate grids, last axis fastest
    let per_coord: Vec<(Vec<f64>, Vec<f64>)> = axes.iter().map(grid_points).collect();
    let mut idx = vec![0usize; 2 * n];
    let sizes: Vec<usize> = per_coord
        .iter()
        .flat_map(|(re, im)| [re.len(), im.len()])
        .collect();
    loop {
        let mut coords = Vec::with_capacity(n);
        let mut row = Vec::with_capacity(2 * n + 1);
        for j in 0..n {
            let re = per_coord[j].0[idx[2 * j]];
            let im = per_coord[j].1[idx[2 * j + 1]];
            coords.push(Complex64::new(re, im));
            row.push(re.to_string());
            row.push(im.to_string());
        }
        let rho = density_at(&query, &ComplexPoint::new(coords)?)?;
        row.push(rho.to_string());
        println!("{}", row.join(","));
        let mut d = 2 * n;
        loop {
            if d == 0 {
                return Ok(());
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < sizes[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

fn run_weights(doc: &SpecDocument, settings: &Settings) -> rkzero::Result<()> {
    let space = match &doc.task {
        Some(TaskSpec::Weights(s)) => s.clone(),
        _ => single_space(doc, None)?,
    };
    match space.monomial_weights() {
        Ok(w) => {
            let n = w.nvars();
            let header: Vec<String> = (1..=n).map(|j| format!("a_{j}")).chain(["weight".into()]).collect();
            println!("{}", header.join(","));
            for (a, c) in w.iter() {
                let mut row: Vec<String> = a.iter().map(|v| v.to_string()).collect();
                row.push(c.to_string());
                println!("{}", row.join(","));
            }
            Ok(())
        }
        // univariate spaces with exponential parts expand to the
        // generalized (exponent, frequency, weight) basis instead
        Err(_) if space.nvars() == 1 => {
            let terms = expand_basis(&space, settings.truncation)?;
            println!("a_1,freq_re,freq_im,weight");
            for t in terms {
                println!("{},{},{},{}", t.exponent, t.frequency.re, t.frequency.im, t.weight);
            }
            Ok(())
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_promotion_replicates_single_multivariate_space() {
        let t = SpaceExpr::tensor(vec![SpaceExpr::weyl(1, 1).unwrap(); 2]).unwrap();
        let q = query_from_spaces(vec![t]).unwrap();
        assert_eq!(q.nvars(), 2);
        assert_eq!(q.spaces().len(), 2);
    }

    #[test]
    fn grid_points_cover_endpoints() {
        let axis = GridAxis { re_min: -1.0, re_max: 1.0, re_steps: 5, im_min: 0.0, im_max: 2.0, im_steps: 3 };
        let (re, im) = grid_points(&axis);
        assert_eq!(re, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(im, vec![0.0, 1.0, 2.0]);
    }
}
