use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use harvestplan::formulations::{Diversification, PriorityTriple, TimeConstraint};
use harvestplan::harness::{summarize, write_csv};
use harvestplan::{
    decide_leasing, generate_instance, plan, render_plan, run_benchmark, AgronomicConstraints,
    BenchConfig, Error, GenParams, HarvestPlan, Instance, PlanOptions,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "harvestplan",
    version,
    about = "Crop assignment and harvester routing planner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Generate(GenerateArgs),
    /// Plan crop assignment and harvester tours for one variant.
    Plan(PlanArgs),
    /// Decide which fields to rent out and which to take on lease.
    Lease(LeaseArgs),
    /// Run the benchmark sweep and write one CSV row per run.
    Bench(BenchArgs),
    /// Draw an instance and optionally a plan as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    fields: usize,
    #[arg(long, default_value_t = 3)]
    depots: usize,
    #[arg(long, default_value_t = 3)]
    crops: usize,
    /// 1: revenue proportional to field size; 2: independent draw per field and crop.
    #[arg(long, default_value_t = 2)]
    setting: u8,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// IP variant, 1 to 8.
    #[arg(long = "ip")]
    variant: u8,
    /// Number of clusters k̃.
    #[arg(long = "clusters")]
    k_tilde: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-sec-iter", default_value_t = 200)]
    max_sec_iter: usize,
    /// Designated depot of variants 1 and 5.
    #[arg(long)]
    depot: Option<usize>,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// JSON list of forbidden `[field, crop]` pairs.
    #[arg(long)]
    rotation: Option<PathBuf>,
    /// JSON object with `weights` (`[field][crop]`) and `bounds` (`[crop, limit]` pairs).
    #[arg(long)]
    diversify: Option<PathBuf>,
    /// JSON object with `field_field_h`, `depot_field_h`, `window_h` and `harvest_h`.
    #[arg(long)]
    time: Option<PathBuf>,
    /// JSON list of `{crop, c, a, b}` triples.
    #[arg(long)]
    priority: Option<PathBuf>,
    /// Fields that may be left unserved, e.g. `3,5-7`.
    #[arg(long)]
    leasable: Option<String>,
}

#[derive(Args)]
struct LeaseArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Own fields.
    #[arg(long)]
    own: String,
    /// Own fields that may be rented out.
    #[arg(long, default_value = "")]
    pro: String,
    /// Fields that may be taken on lease.
    #[arg(long, default_value = "")]
    ptl: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Seeds, e.g. `1..10` or `1,4,7`.
    #[arg(long, default_value = "1..10")]
    seeds: String,
    /// Variants, e.g. `1-8`.
    #[arg(long, default_value = "1-8")]
    ips: String,
    /// Cluster counts, e.g. `10,20`.
    #[arg(long, default_value = "10,20")]
    clusters: String,
    #[arg(long, default_value_t = 50)]
    fields: usize,
    #[arg(long, default_value_t = 3)]
    depots: usize,
    #[arg(long = "max-sec-iter", default_value_t = 200)]
    max_sec_iter: usize,
    /// Designated depot of variants 1 and 5.
    #[arg(long, default_value_t = 0)]
    depot: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    plan: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

/// Parses `1,3,5-7` or `1..10` into a sorted, de-duplicated list.
fn parse_ids(text: &str) -> Result<Vec<usize>, Error> {
    let mut out = BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::Validation(format!("cannot read id list entry {part:?}"));
        let range = part.split_once("..").or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(part.parse().map_err(|_| bad())?);
            }
        }
    }
    Ok(out.into_iter().collect())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Instance::from_json_str(&text)?)
}

fn base_options(args: &SolveArgs) -> PlanOptions {
    PlanOptions {
        depot: args.depot,
        max_sec_iterations: args.max_sec_iter,
        ..Default::default()
    }
}

fn generate(args: &GenerateArgs) -> anyhow::Result<ExitCode> {
    let params = GenParams {
        seed: args.seed,
        fields: args.fields,
        depots: args.depots,
        crops: args.crops,
        revenue_setting: args.setting,
        ..GenParams::default()
    };
    let inst = generate_instance(&params)?;
    write(&args.output, &inst.to_json_string()?)?;
    Ok(ExitCode::SUCCESS)
}

fn run_plan(args: &PlanArgs) -> anyhow::Result<ExitCode> {
    let inst = read_instance(&args.solve.input)?;
    let mut constraints = AgronomicConstraints::default();
    if let Some(p) = &args.rotation {
        constraints.rotation_forbidden = read_json::<Vec<(usize, usize)>>(p)?;
    }
    if let Some(p) = &args.diversify {
        constraints.diversification = Some(read_json::<Diversification>(p)?);
    }
    if let Some(p) = &args.time {
        constraints.time = Some(read_json::<TimeConstraint>(p)?);
    }
    if let Some(p) = &args.priority {
        constraints.priority = read_json::<Vec<PriorityTriple>>(p)?;
    }
    let options = PlanOptions {
        constraints,
        leasable: args
            .leasable
            .as_deref()
            .map(parse_ids)
            .transpose()?
            .unwrap_or_default(),
        ..base_options(&args.solve)
    };
    let s = &args.solve;
    let p = plan(&inst, s.variant, s.k_tilde, s.seed, &options)?;
    write(&s.output, &p.to_json_string()?)?;
    println!(
        "{}: J = {:.2} EUR, converged = {}",
        p.method(),
        p.profit_eur,
        p.converged
    );
    if p.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        log::warn!(
            "SEC loop stopped after {} iterations without convergence",
            p.metrics.iter_sec
        );
        Ok(ExitCode::from(EXIT_NOT_CONVERGED))
    }
}

fn run_lease(args: &LeaseArgs) -> anyhow::Result<ExitCode> {
    let inst = read_instance(&args.solve.input)?;
    let set =
        |t: &str| -> Result<BTreeSet<usize>, Error> { Ok(parse_ids(t)?.into_iter().collect()) };
    let (own, pro, ptl) = (set(&args.own)?, set(&args.pro)?, set(&args.ptl)?);
    let s = &args.solve;
    let d = decide_leasing(
        &own,
        &pro,
        &ptl,
        &inst,
        s.variant,
        s.k_tilde,
        s.seed,
        &base_options(s),
    )?;
    write(&s.output, &serde_json::to_string_pretty(&d.to_json())?)?;
    println!(
        "farm {:?}; rent out {:?}; decline {:?}; delta J = {:.2} EUR{}",
        d.l1,
        d.ro,
        d.ntl,
        d.delta_j,
        if d.advisory {
            " (advisory: consider other lease candidates)"
        } else {
            ""
        }
    );
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: &BenchArgs) -> anyhow::Result<ExitCode> {
    let variants = parse_ids(&args.ips)?
        .into_iter()
        .map(|n| {
            u8::try_from(n).map_err(|_| Error::Validation(format!("variant {n} out of range")))
        })
        .collect::<Result<Vec<u8>, Error>>()?;
    let config = BenchConfig {
        seeds: parse_ids(&args.seeds)?
            .into_iter()
            .map(|s| s as u64)
            .collect(),
        variants,
        k_tildes: parse_ids(&args.clusters)?,
        max_sec_iterations: args.max_sec_iter,
        gen: GenParams {
            fields: args.fields,
            depots: args.depots,
            ..GenParams::default()
        },
        depot: args.depot,
        ..BenchConfig::default()
    };
    let rows = run_benchmark(&config)?;
    let file = fs::File::create(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    write_csv(&rows, file)?;
    println!("n\tk_tilde\truns\tN_z\titer_sec\tcpu_s\tP_conv\tJ_eur");
    for r in summarize(&rows) {
        println!(
            "{}\t{}\t{}\t{:.0}\t{:.1}\t{:.3}\t{:.0}\t{:.1}",
            r.n, r.k_tilde, r.runs, r.n_z, r.iter_sec, r.cpu_s, r.p_conv, r.j_eur
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run_render(args: &RenderArgs) -> anyhow::Result<ExitCode> {
    let inst = read_instance(&args.input)?;
    let plan = match &args.plan {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(HarvestPlan::from_json_str(&text)?)
        }
        None => None,
    };
    write(&args.output, &render_plan(plan.as_ref(), &inst))?;
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> ExitCode {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() || matches!(e, Error::Infeasible(_)) => {
            ExitCode::from(EXIT_VALIDATION)
        }
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Plan(a) => run_plan(a),
        Command::Lease(a) => run_lease(a),
        Command::Bench(a) => run_bench(a),
        Command::Render(a) => run_render(a),
    };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        exit_code(&err)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_lists() {
        assert_eq!(parse_ids("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_ids("3, 1,5-6").unwrap(), vec![1, 3, 5, 6]);
        assert_eq!(parse_ids("").unwrap(), Vec::<usize>::new());
        assert!(parse_ids("4-2").is_err());
        assert!(parse_ids("x").is_err());
    }
}
