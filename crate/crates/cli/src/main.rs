use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mfmfe::io::{read_config, stats_table, write_manifest, write_vtk, Table};
use mfmfe::mesh::{generate_mesh, MeshFamily, MeshFamilyParams};
use mfmfe::physics::FiveSpotPermeability;
use mfmfe::quadrature::QuadratureVariant;
use mfmfe::random_field::{sample_log_normal_field, MaternParams};
use mfmfe::verification::{convergence_study_with, fivespot_run, StudySpec};
use mfmfe::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "mfmfe", version, about = "MFMFE solver for slightly compressible Darcy flow")]
struct Cli {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spatial convergence study of the manufactured solution.
    Convergence(ConvergenceArgs),
    /// Quarter five-spot run to steady state.
    Fivespot(FiveSpotArgs),
    /// Sample a log-normal Matérn permeability field.
    Randfield(FieldArgs),
    /// Generate a mesh and write it as VTK.
    Mesh(MeshArgs),
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// uniform, smooth, kershaw or random [default: smooth]
    #[arg(long)]
    family: Option<String>,
    /// Number of refinement levels [default: 5]
    #[arg(long)]
    levels: Option<usize>,
    /// symmetric or nonsymmetric [default: symmetric]
    #[arg(long)]
    variant: Option<String>,
    /// Cells per direction on the coarsest level [default: 16]
    #[arg(long)]
    n0: Option<usize>,
    /// Seed of the random mesh family [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Time step [default: 0.1]
    #[arg(long)]
    tau: Option<f64>,
    /// Final time [default: 2.0]
    #[arg(long)]
    final_time: Option<f64>,
}

#[derive(Args, Debug)]
struct FiveSpotArgs {
    /// constant-full, piecewise-full or random [default: constant-full]
    #[arg(long)]
    perm: Option<String>,
    /// Cells per direction [default: 128]
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    matern: MaternArgs,
}

#[derive(Args, Debug)]
struct MaternArgs {
    /// Matérn smoothness, 0.5 or 1.5 [default: 0.5]
    #[arg(long)]
    nu: Option<f64>,
    /// Correlation range [default: 0.3]
    #[arg(long)]
    range: Option<f64>,
    /// Variance of log k [default: 1.0]
    #[arg(long = "var")]
    variance: Option<f64>,
    /// Random seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct FieldArgs {
    /// Cells per direction [default: 128]
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    matern: MaternArgs,
}

#[derive(Args, Debug)]
struct MeshArgs {
    /// uniform, smooth, kershaw or random [default: uniform]
    #[arg(long)]
    family: Option<String>,
    /// Cells per direction [default: 16]
    #[arg(long)]
    n: Option<usize>,
    /// Seed of the random family [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

const CONFIG_KEYS: &[&str] = &[
    "out",
    "family",
    "levels",
    "variant",
    "n0",
    "seed",
    "tau",
    "final_time",
    "perm",
    "n",
    "nu",
    "range",
    "var",
];

/// Resolved settings: flag, then config file, then default. Every value
/// looked up is recorded for the manifest.
struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + ToString,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(s) => s
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid value '{s}' for '{key}'")))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }
}

fn parse_family(s: &str) -> Result<MeshFamily> {
    MeshFamily::parse(s).map_err(|e| Error::Config(e.to_string()))
}

fn output_dir(settings: &mut Settings, flag: Option<PathBuf>) -> Result<PathBuf> {
    let out = settings.get("out", flag.map(|p| p.to_string_lossy().into_owned()), "out".to_string())?;
    let dir = PathBuf::from(out);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn matern(settings: &mut Settings, args: &MaternArgs) -> Result<(MaternParams, u64)> {
    let nu = settings.get("nu", args.nu, 0.5)?;
    let range = settings.get("range", args.range, 0.3)?;
    let var = settings.get("var", args.variance, 1.0)?;
    let seed = settings.get("seed", args.seed, 42)?;
    let params = MaternParams::new(nu, range, var).map_err(|e| Error::Config(e.to_string()))?;
    Ok((params, seed))
}

fn table_name(family: MeshFamily, variant: QuadratureVariant) -> String {
    match (family, variant) {
        (MeshFamily::Smooth, QuadratureVariant::Symmetric) => "table1.csv".into(),
        (MeshFamily::Kershaw, QuadratureVariant::Symmetric) => "table2.csv".into(),
        (MeshFamily::RandomPerturbed, QuadratureVariant::Symmetric) => "table3.csv".into(),
        (MeshFamily::RandomPerturbed, QuadratureVariant::NonSymmetric) => "table4.csv".into(),
        _ => format!("convergence_{}_{}.csv", family.name(), variant.name()),
    }
}

fn convergence(settings: &mut Settings, out: &Path, args: &ConvergenceArgs) -> Result<()> {
    let family = parse_family(&settings.get("family", args.family.clone(), "smooth".into())?)?;
    let levels = settings.get("levels", args.levels, 5)?;
    let variant = QuadratureVariant::parse(&settings.get("variant", args.variant.clone(), "symmetric".into())?)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut study = StudySpec::new(family, levels, variant);
    study.n0 = settings.get("n0", args.n0, 16)?;
    study.time_step = settings.get("tau", args.tau, 0.1)?;
    study.final_time = settings.get("final_time", args.final_time, 2.0)?;
    if family == MeshFamily::RandomPerturbed {
        study.seed = Some(settings.get("seed", args.seed, 0)?);
    }
    study.validate().map_err(|e| Error::Config(e.to_string()))?;

    let mut table = Table::new([
        "level",
        "h",
        "E_p",
        "rate_E_p",
        "E_p_centers",
        "rate_E_p_centers",
        "E_u",
        "rate_E_u",
        "E_u_face",
        "rate_E_u_face",
    ]);
    let rows = convergence_study_with(&study, |row| {
        let e = row.errors.values();
        let r = row.rates.unwrap_or([f64::NAN; 4]);
        eprintln!(
            "level {} (n = {}): E_p {:.3e}  Ê_p {:.3e}  E_u {:.3e}  Ê_u {:.3e}  rates {:.3} {:.3} {:.3} {:.3}",
            row.level, row.n, e[0], e[1], e[2], e[3], r[0], r[1], r[2], r[3]
        );
    })?;
    for row in &rows {
        let e = row.errors.values();
        let r = row.rates.unwrap_or([f64::NAN; 4]);
        table.push(vec![
            row.level as f64,
            row.h,
            e[0],
            r[0],
            e[1],
            r[1],
            e[2],
            r[2],
            e[3],
            r[3],
        ])?;
    }
    let name = table_name(family, variant);
    let path = out.join(&name);
    table.write(&path)?;
    write_manifest(&out.join(format!("{name}.manifest")), &settings.resolved)?;
    println!("{}", path.display());
    Ok(())
}

fn fivespot(settings: &mut Settings, out: &Path, args: &FiveSpotArgs) -> Result<()> {
    let perm = settings.get("perm", args.perm.clone(), "constant-full".into())?;
    let n = settings.get("n", args.n, 128)?;
    let case = match perm.as_str() {
        "constant-full" => FiveSpotPermeability::ConstantFull,
        "piecewise-full" => FiveSpotPermeability::PiecewiseFull,
        "random" => {
            let (p, seed) = matern(settings, &args.matern)?;
            FiveSpotPermeability::Random {
                nu: p.nu,
                range: p.range,
                variance: p.variance,
                seed,
            }
        }
        other => return Err(Error::Config(format!("unknown permeability case '{other}'"))),
    };
    let res = fivespot_run(&case, n)?;
    let stem = format!("fivespot_{}", case.name());
    let vtk = out.join(format!("{stem}.vtk"));
    write_vtk(
        res.disc.mesh(),
        &[
            ("pressure", res.pressure()),
            ("speed", &res.speed),
            ("log10_speed", &res.log_speed),
            ("permeability", &res.permeability),
        ],
        &vtk,
    )?;
    stats_table(&res.steps).write(&out.join(format!("{stem}_stats.csv")))?;
    settings
        .resolved
        .insert("steady_reached".into(), res.steady_reached.to_string());
    settings.resolved.insert(
        "diagonal_asymmetry".into(),
        format!("{:.16e}", res.diagonal_asymmetry()),
    );
    write_manifest(&out.join(format!("{stem}.manifest")), &settings.resolved)?;
    eprintln!(
        "{} steps, steady state {}, diagonal asymmetry {:.3e}",
        res.steps.len(),
        if res.steady_reached { "reached" } else { "not reached" },
        res.diagonal_asymmetry()
    );
    println!("{}", vtk.display());
    Ok(())
}

fn randfield(settings: &mut Settings, out: &Path, args: &FieldArgs) -> Result<()> {
    let n = settings.get("n", args.n, 128)?;
    let (params, seed) = matern(settings, &args.matern)?;
    let sample = sample_log_normal_field(n, &params, seed)?;
    let h = 1.0 / n as f64;
    let mut table = Table::new(["i", "j", "x", "y", "log_k"]);
    for (k, v) in sample.values.iter().enumerate() {
        let (i, j) = (k % n, k / n);
        table.push(vec![i as f64, j as f64, (i as f64 + 0.5) * h, (j as f64 + 0.5) * h, *v])?;
    }
    let path = out.join("randfield.csv");
    table.write(&path)?;
    let mesh = generate_mesh(&MeshFamilyParams::new(MeshFamily::Uniform, n))?;
    write_vtk(&mesh, &[("log_k", &sample.values)], &out.join("randfield.vtk"))?;
    write_manifest(&out.join("randfield.manifest"), &settings.resolved)?;
    println!("{}", path.display());
    Ok(())
}

fn mesh(settings: &mut Settings, out: &Path, args: &MeshArgs) -> Result<()> {
    let family = parse_family(&settings.get("family", args.family.clone(), "uniform".into())?)?;
    let n = settings.get("n", args.n, 16)?;
    let seed = if family == MeshFamily::RandomPerturbed {
        Some(settings.get("seed", args.seed, 0)?)
    } else {
        None
    };
    let params = MeshFamilyParams { family, n, seed };
    params.validate().map_err(|e| Error::Config(e.to_string()))?;
    let m = generate_mesh(&params)?;
    let path = out.join(format!("mesh_{}_{n}.vtk", family.name()));
    write_vtk(&m, &[], &path)?;
    write_manifest(
        &out.join(format!("mesh_{}_{n}.manifest", family.name())),
        &settings.resolved,
    )?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => read_config(p, CONFIG_KEYS)?,
        None => BTreeMap::new(),
    };
    let mut settings = Settings {
        file,
        resolved: BTreeMap::new(),
    };
    settings.resolved.insert(
        "command".into(),
        format!("{:?}", cli.command)
            .split('(')
            .next()
            .unwrap_or("")
            .to_lowercase(),
    );
    let out = output_dir(&mut settings, cli.out)?;
    match &cli.command {
        Command::Convergence(a) => convergence(&mut settings, &out, a),
        Command::Fivespot(a) => fivespot(&mut settings, &out, a),
        Command::Randfield(a) => randfield(&mut settings, &out, a),
        Command::Mesh(a) => mesh(&mut settings, &out, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({:?}): {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
