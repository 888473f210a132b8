//! Command-line front end: simulate reciprocal-backcross endosperm datasets,
//! scan them for imprinted QTL, estimate permutation thresholds, compare
//! designs by power, and test single positions.
//!
//! Exit codes: 0 on success, 2 on input or usage errors, 3 when a fit or
//! other numerical step breaks down.

mod svg;

use clap::{Args, Parser, Subcommand, ValueEnum};
use iqtl::genmap::{FamilyDataset, LinkageMap};
use iqtl::ibd::family_matrices;
use iqtl::inference::{permutation_thresholds, qtl_test, run_battery, ImprintingBattery, TestResult};
use iqtl::report::{
    calls_csv, fmt_f64, fmt_opt, parse_thresholds, profile_csv, study_csv, thresholds_tsv,
};
use iqtl::scan::{call_peaks, multi_scan, single_scan, QtlCall, ScanMode, ScanOptions, ScanProfile};
use iqtl::sim::{run_study, simulate, StudyOptions, StudyPlan, TruthSpec};
use iqtl::vc::{fit_reml, FamilyData, FitOptions, ModelFit, ModelSpec};
use std::fmt;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
enum CliError {
    Lib(iqtl::Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn is_numerical(&self) -> bool {
        match self {
            CliError::Lib(e) => e.is_numerical(),
            CliError::Io { .. } => false,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<iqtl::Error> for CliError {
    fn from(e: iqtl::Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn invalid(msg: String) -> CliError {
    CliError::Lib(iqtl::Error::InvalidOptions(msg))
}

fn failure_code(e: &CliError) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

/// Removes every file it wrote unless committed, so failed runs leave no
/// partial outputs behind.
struct OutputGuard {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    fn new() -> OutputGuard {
        OutputGuard { written: Vec::new(), committed: false }
    }

    fn write(&mut self, path: &Path, content: &str) -> CliResult {
        // Register before writing: a half-written file must also be removed.
        self.written.push(path.to_path_buf());
        std::fs::write(path, content)
            .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.written {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Maps imprinted QTL in triploid endosperm from reciprocal backcross
/// families.
#[derive(Parser)]
#[command(name = "iqtl", version, propagate_version = true)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<NonZeroUsize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate genotype and phenotype files under a truth description.
    Simulate(SimulateArgs),
    /// Scan the genome and write an LR profile, QTL calls and an SVG plot.
    Scan(ScanArgs),
    /// Estimate significance thresholds by within-family permutation.
    Permute(PermuteArgs),
    /// Compare family designs by simulated detection power.
    Power(PowerArgs),
    /// Fit the model at one position and run the imprinting battery.
    Test(TestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// One variance-component QTL at the scan position.
    Single,
    /// Adds flanking-marker absorbers against linked QTL.
    Multi,
}

impl ModeArg {
    fn mode(self) -> ScanMode {
        match self {
            ModeArg::Single => ScanMode::Single,
            ModeArg::Multi => ScanMode::Multi,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PowerModeArg {
    Single,
    Multi,
    /// Run both scan modes over the same simulated replicates.
    Both,
}

#[derive(Args)]
struct DataInputs {
    /// Linkage map TSV (chrom, marker, pos_cM).
    #[arg(long)]
    map: PathBuf,
    /// Genotype TSV (family, cross, individual, one column per marker).
    #[arg(long)]
    genotypes: PathBuf,
    /// Phenotype TSV (family, individual, trait=value list).
    #[arg(long)]
    phenotypes: PathBuf,
    /// Trait to analyze; optional when the dataset carries exactly one.
    #[arg(long = "trait")]
    trait_name: Option<String>,
}

impl DataInputs {
    fn load(&self) -> CliResult<(LinkageMap, FamilyDataset, String)> {
        let map = LinkageMap::parse(&read_text(&self.map)?)?;
        let genotypes = read_text(&self.genotypes)?;
        let phenotypes = read_text(&self.phenotypes)?;
        let dataset = FamilyDataset::parse(&map, &genotypes, &phenotypes)?;
        let trait_name = resolve_trait(&dataset, self.trait_name.as_deref())?;
        Ok((map, dataset, trait_name))
    }
}

fn resolve_trait(dataset: &FamilyDataset, requested: Option<&str>) -> CliResult<String> {
    let names = dataset.trait_names();
    if let Some(name) = requested {
        if names.contains(name) {
            return Ok(name.to_string());
        }
        return Err(iqtl::Error::UnknownTrait(name.to_string()).into());
    }
    match names.len() {
        1 => Ok(names.into_iter().next().unwrap()),
        0 => Err(iqtl::Error::UnknownTrait("dataset has no phenotypes".into()).into()),
        _ => Err(iqtl::Error::UnknownTrait(format!(
            "dataset has {} traits ({}); pick one with --trait",
            names.len(),
            names.into_iter().collect::<Vec<_>>().join(", ")
        ))
        .into()),
    }
}

#[derive(Args)]
struct FitFlags {
    /// Fisher-scoring convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap per fit.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

impl FitFlags {
    fn options(&self) -> FitOptions {
        FitOptions { tol: self.tol, max_iter: self.max_iter }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Linkage map TSV (chrom, marker, pos_cM).
    #[arg(long)]
    map: PathBuf,
    /// Truth description TOML (class means, variances, QTL, design).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output genotype TSV.
    #[arg(long)]
    out_genotypes: PathBuf,
    /// Output phenotype TSV.
    #[arg(long)]
    out_phenotypes: PathBuf,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    inputs: DataInputs,
    #[arg(long, value_enum, default_value = "single")]
    mode: ModeArg,
    /// Evaluate positions every `step` centimorgans.
    #[arg(long, default_value_t = 2.0)]
    step: f64,
    #[command(flatten)]
    fit: FitFlags,
    /// Thresholds TSV from `permute`; enables QTL calling.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Level for the imprinting battery on called peaks.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out_profile: PathBuf,
    #[arg(long)]
    out_calls: PathBuf,
    #[arg(long)]
    out_svg: PathBuf,
}

#[derive(Args)]
struct PermuteArgs {
    #[command(flatten)]
    inputs: DataInputs,
    #[arg(long, value_enum, default_value = "single")]
    mode: ModeArg,
    /// Evaluate positions every `step` centimorgans.
    #[arg(long, default_value_t = 2.0)]
    step: f64,
    #[command(flatten)]
    fit: FitFlags,
    #[arg(long, default_value_t = 1000)]
    n_perm: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output thresholds TSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PowerArgs {
    /// Linkage map TSV (chrom, marker, pos_cM).
    #[arg(long)]
    map: PathBuf,
    /// Study plan TOML: shared truth plus one [[design]] per arm.
    #[arg(long)]
    designs: PathBuf,
    #[arg(long, value_enum, default_value = "single")]
    mode: PowerModeArg,
    /// Evaluate positions every `step` centimorgans.
    #[arg(long, default_value_t = 2.0)]
    step: f64,
    #[command(flatten)]
    fit: FitFlags,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Simulated replicates per design.
    #[arg(long, default_value_t = 100)]
    n_rep: usize,
    /// Null replicates used to calibrate each design's threshold.
    #[arg(long, default_value_t = 200)]
    n_threshold: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output study report CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    inputs: DataInputs,
    /// Chromosome holding the test position.
    #[arg(long)]
    chrom: String,
    /// Test position in centimorgans.
    #[arg(long)]
    position: f64,
    #[command(flatten)]
    fit: FitFlags,
    /// Level for the imprinting call.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output TSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_scan(
    mode: ScanMode,
    dataset: &FamilyDataset,
    map: &LinkageMap,
    trait_name: &str,
    opts: &ScanOptions,
) -> iqtl::Result<ScanProfile> {
    match mode {
        ScanMode::Single => single_scan(dataset, map, trait_name, opts),
        ScanMode::Multi => multi_scan(dataset, map, trait_name, opts),
    }
}

fn cmd_simulate(args: SimulateArgs) -> CliResult {
    let map = LinkageMap::parse(&read_text(&args.map)?)?;
    let truth = TruthSpec::parse(&read_text(&args.truth)?)?;
    let dataset = simulate(&map, &truth, args.seed)?;
    let mut guard = OutputGuard::new();
    guard.write(&args.out_genotypes, &dataset.genotype_tsv(&map))?;
    guard.write(&args.out_phenotypes, &dataset.phenotype_tsv())?;
    guard.commit();
    Ok(())
}

fn cmd_scan(args: ScanArgs) -> CliResult {
    let (map, dataset, trait_name) = args.inputs.load()?;
    let opts = ScanOptions { step_cm: args.step, fit: args.fit.options() };
    let profile = run_scan(args.mode.mode(), &dataset, &map, &trait_name, &opts)?;
    let thresholds = match &args.thresholds {
        Some(path) => Some(parse_thresholds(&read_text(path)?)?),
        None => None,
    };
    let calls: Vec<QtlCall> = match &thresholds {
        Some(t) => call_peaks(&dataset, &map, &profile, t, args.alpha, &opts.fit)?,
        None => Vec::new(),
    };
    let mut guard = OutputGuard::new();
    guard.write(&args.out_profile, &profile_csv(&profile))?;
    guard.write(&args.out_calls, &calls_csv(&calls))?;
    guard.write(&args.out_svg, &svg::profile_svg(&profile, thresholds.as_ref()))?;
    guard.commit();
    Ok(())
}

fn cmd_permute(args: PermuteArgs) -> CliResult {
    let (map, dataset, trait_name) = args.inputs.load()?;
    let opts = ScanOptions { step_cm: args.step, fit: args.fit.options() };
    let mode = args.mode.mode();
    let scan_max = |permuted: &FamilyDataset| -> iqtl::Result<Vec<(String, f64)>> {
        Ok(run_scan(mode, permuted, &map, &trait_name, &opts)?.chromosome_maxima())
    };
    let thresholds = permutation_thresholds(&dataset, scan_max, args.n_perm, args.alpha, args.seed)?;
    let mut guard = OutputGuard::new();
    guard.write(&args.out, &thresholds_tsv(&thresholds))?;
    guard.commit();
    Ok(())
}

fn cmd_power(args: PowerArgs) -> CliResult {
    let map = LinkageMap::parse(&read_text(&args.map)?)?;
    let plan = StudyPlan::parse(&read_text(&args.designs)?)?;
    let modes: &[ScanMode] = match args.mode {
        PowerModeArg::Single => &[ScanMode::Single],
        PowerModeArg::Multi => &[ScanMode::Multi],
        PowerModeArg::Both => &[ScanMode::Single, ScanMode::Multi],
    };
    let mut reports = Vec::with_capacity(modes.len());
    for &mode in modes {
        let opts = StudyOptions {
            scan: ScanOptions { step_cm: args.step, fit: args.fit.options() },
            mode,
            alpha: args.alpha,
            n_rep: args.n_rep,
            n_threshold: args.n_threshold,
        };
        reports.push(run_study(&map, &plan, &opts, args.seed)?);
    }
    let mut guard = OutputGuard::new();
    guard.write(&args.out, &study_csv(&reports))?;
    guard.commit();
    Ok(())
}

fn cmd_test(args: TestArgs) -> CliResult {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let (map, dataset, trait_name) = args.inputs.load()?;
    let (chrom_idx, _) = map.chromosome(&args.chrom)?;
    let ys = dataset.trait_vectors(&trait_name)?;
    let mut data = Vec::with_capacity(dataset.families.len());
    for (family, y) in dataset.families.iter().zip(ys) {
        let ibd = family_matrices(family, &map, chrom_idx, args.position)?;
        data.push(FamilyData::new(family.id.clone(), family.cross.maternal_class(), y, ibd)?);
    }
    let opts = args.fit.options();
    let full = fit_reml(&data, &ModelSpec::full(), &opts)?;
    let null = fit_reml(&data, &ModelSpec::null(), &opts)?;
    let qtl = qtl_test(&full, &null);
    let battery = run_battery(&data, &full, &opts, args.alpha)?;
    let report = test_report(&args, &trait_name, &qtl, &battery, &full);
    match &args.out {
        Some(path) => {
            let mut guard = OutputGuard::new();
            guard.write(path, &report)?;
            guard.commit();
        }
        None => print!("{report}"),
    }
    Ok(())
}

fn test_report(
    args: &TestArgs,
    trait_name: &str,
    qtl: &TestResult,
    battery: &ImprintingBattery,
    full: &ModelFit,
) -> String {
    let follow_up = |t: &Option<TestResult>| t.as_ref().and_then(|t| t.p_value);
    let mut out = String::new();
    let mut row = |key: &str, value: String| {
        out.push_str(key);
        out.push('\t');
        out.push_str(&value);
        out.push('\n');
    };
    row("chrom", args.chrom.clone());
    row("pos_cM", fmt_f64(args.position));
    row("trait", trait_name.to_string());
    row("LR", fmt_f64(qtl.statistic));
    row("p", fmt_opt(qtl.p_value));
    row("p_M", fmt_opt(follow_up(&battery.mean_effect)));
    row("p_imp", fmt_opt(battery.imprinting.p_value));
    row("p_m", fmt_opt(follow_up(&battery.maternal_zero)));
    row("p_f", fmt_opt(follow_up(&battery.paternal_zero)));
    row("imprinting", battery.call.label().to_string());
    for (i, mu) in full.beta.mu.iter().enumerate() {
        row(&format!("mu{}", i + 1), fmt_opt(*mu));
    }
    row("sigma_m2", fmt_f64(full.omega.sigma_m2));
    row("sigma_f2", fmt_f64(full.omega.sigma_f2));
    row("sigma_mf2", fmt_f64(full.omega.sigma_mf2));
    row("sigma_g2", fmt_f64(full.omega.sigma_g2));
    row("sigma_e2", fmt_f64(full.omega.sigma_e2));
    row("converged", full.converged.to_string());
    row("reliable", qtl.reliable.to_string());
    out
}

fn run(cli: Cli) -> CliResult {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.get())
            .build_global()
            .map_err(|e| invalid(format!("workers: {e}")))?;
    }
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Permute(args) => cmd_permute(args),
        Command::Power(args) => cmd_power(args),
        Command::Test(args) => cmd_test(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn numerical_errors_map_to_exit_3_others_to_2() {
        let num = CliError::Lib(iqtl::Error::Numerical("overflow".into()));
        assert_eq!(failure_code(&num), 3);
        let sing = CliError::Lib(iqtl::Error::SingularCovariance { family: "f1".into() });
        assert_eq!(failure_code(&sing), 3);
        let parse = CliError::Lib(iqtl::Error::InvalidMap("bad".into()));
        assert_eq!(failure_code(&parse), 2);
        let io = CliError::Io {
            path: PathBuf::from("x"),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing"),
        };
        assert_eq!(failure_code(&io), 2);
    }

    #[test]
    fn output_guard_removes_files_unless_committed() {
        let dir = std::env::temp_dir().join(format!("iqtl-guard-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let kept = dir.join("kept.txt");
        let dropped = dir.join("dropped.txt");

        let mut guard = OutputGuard::new();
        guard.write(&kept, "stay").unwrap();
        guard.commit();
        assert!(kept.exists());

        let mut guard = OutputGuard::new();
        guard.write(&dropped, "go").unwrap();
        assert!(dropped.exists());
        drop(guard);
        assert!(!dropped.exists());

        std::fs::remove_dir_all(&dir).unwrap();
    }
}
