//! Configuration-driven CLI: table-of-marks inspection, Fuller index
//! computation, parameter sweeps and admissibility/criterion checks for the
//! builtin systems.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use equifuller::config::{Config, NondegConfig, Scenario, TOOL_VERSION};
use equifuller::error::EquifullerError;
use equifuller::fuller::{fuller_index, FullerIndexResult};
use equifuller::group::enumerate_subgroup_classes;
use equifuller::nondeg::{s1_nondegenerate, z2_nondegenerate};
use equifuller::sweep::{branch_records, sweep_family, verify_invariance, SweepResult};
use equifuller::Result;

#[derive(Parser)]
#[command(name = "equifuller", version, about = "Equivariant Fuller indices of symmetric vector fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report and CSV artifacts (stdout always gets the report).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap (reserved; recorded in reports).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override of the orbit-search RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the isotropy lattice and table of marks of the configured group.
    Marks,
    /// Compute the equivariant Fuller index of the configured system.
    Index,
    /// Trace the index across a one-parameter family and classify events.
    Sweep,
    /// Equivariance and non-degeneracy criterion checks.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &EquifullerError) -> u8 {
    use EquifullerError::*;
    match e {
        Config(_) | InvalidGroup(_) | InvalidAction(_) | GroupTooLarge(..) => 2,
        // a degenerate field makes the index indeterminate at this exact
        // configuration, which is a scenario problem rather than a solver one
        DegenerateField | DegenerateFixedPoint(_) => 2,
        _ => 3,
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let path = cli.config.as_deref().ok_or_else(|| {
        EquifullerError::Config("--config PATH is required".into())
    })?;
    let cfg = Config::from_path(path)?;
    match cli.command {
        Command::Marks => cmd_marks(cli, &cfg),
        Command::Index => cmd_index(cli, &cfg),
        Command::Sweep => cmd_sweep(cli, &cfg),
        Command::Check => cmd_check(cli, &cfg),
    }
}

fn report_head(cli: &Cli, cfg: &Config) -> Value {
    json!({
        "tool": "equifuller",
        "version": TOOL_VERSION,
        "seed": cli.seed,
        "threads": cli.threads,
        "config": cfg.echo(),
    })
}

/// Write atomically: temp file in the same directory, then rename.
fn write_artifact(out: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    let Some(dir) = out else { return Ok(()) };
    let io = |e: std::io::Error| EquifullerError::Config(format!("--out {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, dir.join(name)).map_err(io)?;
    Ok(())
}

fn emit(cli: &Cli, name: &str, report: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    println!("{text}");
    write_artifact(cli.out.as_deref(), name, &text)
}

fn cmd_marks(cli: &Cli, cfg: &Config) -> Result<u8> {
    let group = cfg.build_group()?;
    let lattice = enumerate_subgroup_classes(&group)?;
    let classes: Vec<Value> = lattice
        .classes()
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "subgroup_order": c.subgroup_order,
                "weyl_order": c.weyl_order,
                "class_size": c.members.len(),
            })
        })
        .collect();
    let mut report = report_head(cli, cfg);
    report["group_order"] = json!(group.order());
    report["classes"] = Value::Array(classes);
    report["marks"] = json!(lattice.marks());
    // human-readable table on stderr so stdout stays machine-parseable
    let width = lattice
        .classes()
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(4)
        .max(4);
    for (k, class) in lattice.classes().iter().enumerate() {
        let row: Vec<String> = lattice.marks()[k].iter().map(|m| format!("{m:>4}")).collect();
        eprintln!("{:>width$}  {}", class.name, row.join(" "));
    }
    emit(cli, "marks.json", &report)?;
    Ok(0)
}

fn orbit_csv(result: &FullerIndexResult, scenario: &Scenario) -> String {
    let lattice = &scenario.builtin.lattice;
    let dim = scenario.builtin.system.dim();
    let coords: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let mut out = format!(
        "{},period,multiplicity,isotropy,multipliers,stratum_indices,residual\n",
        coords.join(",")
    );
    for rec in branch_records(result, lattice) {
        // closure residual of the k-fold covered orbit
        let anchor = nalgebra::DVector::from_vec(rec.anchor.clone());
        let residual = scenario
            .builtin
            .system
            .flow(
                &anchor,
                rec.period * rec.multiplicity as f64,
                &scenario.lambda,
                equifuller::dynamics::Tolerances::default(),
            )
            .map(|x| (x - &anchor).norm())
            .unwrap_or(f64::NAN);
        let mults = rec
            .multipliers
            .iter()
            .map(|(re, im)| format!("{re:.12e}{im:+.12e}i"))
            .collect::<Vec<_>>()
            .join(";");
        let strata = rec
            .stratum_indices
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let xs = rec
            .anchor
            .iter()
            .map(|x| format!("{x:.12e}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "{xs},{:.12e},{},{},{mults},{strata},{residual:.3e}\n",
            rec.period, rec.multiplicity, rec.isotropy
        ));
    }
    out
}

fn cmd_index(cli: &Cli, cfg: &Config) -> Result<u8> {
    let scenario = cfg.resolve_scenario()?;
    let opts = cfg.fuller_options(cli.seed)?;
    let result = fuller_index(
        &scenario.builtin.system,
        &scenario.builtin.lattice,
        &scenario.region,
        scenario.window,
        &scenario.lambda,
        scenario.builtin.seed_radius,
        &opts,
    )?;
    let mut report = report_head(cli, cfg);
    report["system"] = json!(scenario.builtin.system.name());
    report["window"] = json!(scenario.window);
    report["lambda"] = json!(scenario.lambda);
    report["rng_seed"] = json!(opts.search.rng_seed);
    let body = result.to_json(&scenario.builtin.lattice);
    report["index"] = body["index"].clone();
    report["contributions"] = body["contributions"].clone();
    emit(cli, "index.json", &report)?;
    write_artifact(cli.out.as_deref(), "orbits.csv", &orbit_csv(&result, &scenario))?;
    Ok(0)
}

fn branches_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "lambda,admissible,anchor,period,multiplicity,isotropy,multipliers,stratum_indices\n",
    );
    for p in &result.points {
        for b in &p.branches {
            let xs = b
                .anchor
                .iter()
                .map(|x| format!("{x:.12e}"))
                .collect::<Vec<_>>()
                .join(";");
            let mults = b
                .multipliers
                .iter()
                .map(|(re, im)| format!("{re:.12e}{im:+.12e}i"))
                .collect::<Vec<_>>()
                .join(";");
            let strata = b
                .stratum_indices
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{:.12e},{},{xs},{:.12e},{},{},{mults},{strata}\n",
                p.lambda, p.admissible, b.period, b.multiplicity, b.isotropy
            ));
        }
    }
    out
}

fn cmd_sweep(cli: &Cli, cfg: &Config) -> Result<u8> {
    let scenario = cfg.resolve_scenario()?;
    let (opts, range) = cfg.sweep_options(cli.seed)?;
    if scenario.builtin.system.param_dim() == 0 {
        return Err(EquifullerError::Config(format!(
            "system \"{}\" has no parameter to sweep",
            scenario.builtin.system.name()
        )));
    }
    let result = sweep_family(
        &scenario.builtin.system,
        &scenario.builtin.lattice,
        &scenario.region,
        scenario.window,
        range,
        scenario.builtin.seed_radius,
        &opts,
    )?;
    let lattice = &scenario.builtin.lattice;
    let mut report = report_head(cli, cfg);
    report["system"] = json!(scenario.builtin.system.name());
    report["range"] = json!(range);
    report["rng_seed"] = json!(opts.fuller.search.rng_seed);
    let body = result.to_json(lattice);
    report["invariant"] = body["invariant"].clone();
    report["events"] = body["events"].clone();
    report["trace"] = body["trace"].clone();
    let verdict = if !result.points.iter().all(|p| p.admissible) {
        "inadmissible"
    } else if result.invariant {
        "invariant"
    } else {
        "violated"
    };
    report["verdict"] = json!(verdict);
    emit(cli, "sweep.json", &report)?;
    write_artifact(cli.out.as_deref(), "branches.csv", &branches_csv(&result))?;
    write_artifact(
        cli.out.as_deref(),
        "events.json",
        &serde_json::to_string_pretty(&result.events).expect("events serialize"),
    )?;
    match verdict {
        "invariant" => Ok(0),
        "violated" => verify_invariance(&result).map(|_| 0),
        _ => Ok(4),
    }
}

fn nondeg_json(nd: &NondegConfig) -> Value {
    let mut out = serde_json::Map::new();
    if let Some(fam) = &nd.z2 {
        let h = fam.h.clone();
        let verdict = z2_nondegenerate(
            move |_v, lam| h.eval(lam),
            &fam.lambda0,
            nd.fd_step,
        );
        out.insert(
            "z2".into(),
            serde_json::to_value(verdict).expect("verdict serializes"),
        );
    }
    if let Some(fam) = &nd.s1 {
        let (a, b) = (fam.a.clone(), fam.b.clone());
        let verdict = s1_nondegenerate(
            move |_v, _w, lam| a.eval(lam),
            move |_v, _w, lam| b.eval(lam),
            &fam.lambda0,
            fam.lambda0.len(),
            nd.fd_step,
        );
        out.insert(
            "s1".into(),
            serde_json::to_value(verdict).expect("verdict serializes"),
        );
    }
    Value::Object(out)
}

fn cmd_check(cli: &Cli, cfg: &Config) -> Result<u8> {
    let mut report = report_head(cli, cfg);
    if cfg.system.is_some() {
        let scenario = cfg.resolve_scenario()?;
        let residual = scenario.builtin.system.check_equivariance(&scenario.lambda, 16);
        report["system"] = json!(scenario.builtin.system.name());
        report["equivariance_residual"] = json!(residual);
        report["equivariant"] = json!(residual < 1e-8);
        report["region_invariant"] =
            json!(scenario.region.is_invariant_under(scenario.builtin.system.action()));
    }
    if let Some(nd) = &cfg.nondeg {
        report["nondeg"] = nondeg_json(nd);
    }
    emit(cli, "check.json", &report)?;
    Ok(0)
}
