use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::example1::{example1_demo, write_example1_csv};
use super::experiment::{run_pair_family, ExperimentSpec};
use super::ratefit::{fit_rate, RateFit};
use crate::error::{LabError, Result};
use crate::far_field_operator::{
    compute_all_coefficients, continue_far_field, make_direction_pair, minimal_imag_scale, DEFAULT_L_TRUNC,
};
use crate::forward_solver::{
    assemble_far_field_matrix, mie_far_field_matrix, DirectionGrid, FarFieldMatrix, ForwardConfig,
};
use crate::geometry::{HausdorffConfig, StarSurface};
use crate::reconstruction::{
    ball_transform, volume_identity_check, invert_to_indicator, spectrum_scan, DataPath, IdentityQuadrature,
    InversionConfig, OracleSetup, ReconstructionConfig, ScanConfig,
};

#[derive(Debug, Parser)]
#[command(name = "scatterlab", version, about = "Fixed-frequency inverse obstacle scattering laboratory")]
struct Cli {
    /// Job configuration (TOML, or JSON when the extension is .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the random start points of Hausdorff refinement.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver residual tolerance (forward, stability), single density tolerance
    /// (reconstruct) or identity threshold (check).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Surface JSON → far-field matrix file.
    Forward { surface: PathBuf },
    /// Far-field file and a frequency λ → far field continued to the pair (θ, θ′).
    Continue {
        far_field: PathBuf,
        /// λ as `x,y,z`.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// Imaginary scale of the pair (default: minimal feasible).
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_L_TRUNC)]
        l_trunc: usize,
    },
    /// Surface JSON (optionally with far-field data) → spectrum CSV, voxels, surface estimate.
    Reconstruct {
        surface: PathBuf,
        /// Far-field file used for the continuation data path.
        #[arg(long)]
        far_field: Option<PathBuf>,
    },
    /// Experiment spec (via --config) → records CSV and rate fit.
    Stability,
    /// Hankel-ratio counterexample report.
    Example1 {
        #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
        ells: Vec<usize>,
        #[arg(long, default_value_t = 1.5)]
        a2: f64,
        #[arg(long, default_value_t = 3.0)]
        b: f64,
    },
    /// Identity and series-agreement self-tests.
    Check,
}

/// Configuration of the `forward` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForwardJob {
    /// Observation rule exactness degree (0 selects the 26-direction cube grid).
    pub out_degree: usize,
    /// Incidence rule exactness degree (0 selects the 26-direction cube grid).
    pub in_degree: usize,
    pub forward: ForwardConfig,
}

impl Default for ForwardJob {
    fn default() -> Self {
        Self { out_degree: 2 * DEFAULT_L_TRUNC, in_degree: 0, forward: ForwardConfig::default() }
    }
}

/// Configuration of the `reconstruct` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ReconstructJob {
    pub reconstruction: ReconstructionConfig,
    pub scan: ScanConfig,
    pub inversion: InversionConfig,
    /// Also evaluate the continuation data path with a synthesized far-field matrix.
    pub data_path: bool,
}

fn grid(degree: usize) -> Result<DirectionGrid> {
    if degree == 0 {
        Ok(DirectionGrid::cube26())
    } else {
        DirectionGrid::quadrature(degree)
    }
}

/// Reads TOML, or JSON when the extension is `.json`.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| LabError::Validation(format!("{}: {e}", path.display())))
    }
}

fn config_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    path.as_deref().map(read_config).unwrap_or_else(|| Ok(T::default()))
}

fn read_surface(path: &Path) -> Result<StarSurface> {
    StarSurface::from_json(&fs::read_to_string(path)?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn parse_vector(text: &str) -> Result<Vector3<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| LabError::Validation(format!("cannot parse vector '{text}': {e}")))?;
    if parts.len() != 3 {
        return Err(LabError::Validation(format!("expected three components, got '{text}'")));
    }
    Ok(Vector3::new(parts[0], parts[1], parts[2]))
}

/// Parses `args`, runs the subcommand and returns the process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Forward { surface } => forward(cli, surface),
        Command::Continue { far_field, lambda, t, l_trunc } => continue_cmd(cli, far_field, lambda, *t, *l_trunc),
        Command::Reconstruct { surface, far_field } => reconstruct(cli, surface, far_field.as_deref()),
        Command::Stability => stability(cli),
        Command::Example1 { ells, a2, b } => {
            let rows = example1_demo(ells, *a2, *b)?;
            let mut w = create(&cli.out, "example1.csv")?;
            write_example1_csv(&rows, &mut w)?;
            w.flush()?;
            for r in &rows {
                println!(
                    "l = {:3}  boundary {:.15}  annulus {:.6e}  scaled {:.6}",
                    r.ell, r.boundary_norm, r.annulus_norm, r.scaled_product
                );
            }
            Ok(0)
        }
        Command::Check => check(cli),
    }
}

fn forward(cli: &Cli, path: &Path) -> Result<i32> {
    let mut job: ForwardJob = config_or_default(&cli.config)?;
    if let Some(t) = cli.tolerance {
        job.forward.tolerance = t;
    }
    let surface = read_surface(path)?;
    let report = surface.admissibility_check();
    println!("{report}");
    if !report.passed() {
        eprintln!("error: surface is not admissible");
        return Ok(1);
    }
    let m = assemble_far_field_matrix(&surface, &grid(job.out_degree)?, &grid(job.in_degree)?, &job.forward)?;
    let mut w = create(&cli.out, "farfield.csv")?;
    m.write_to(&mut w)?;
    w.flush()?;
    println!(
        "far field {}x{} written; solver residual {:.3e}, optical residual {:.3e}, reciprocity {}",
        m.values.nrows(),
        m.values.ncols(),
        m.diagnostics.max_solver_residual,
        m.diagnostics.optical_residual,
        m.diagnostics.reciprocity_residual.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "n/a".into())
    );
    Ok(0)
}

fn continue_cmd(cli: &Cli, path: &Path, lambda: &str, t: Option<f64>, l_trunc: usize) -> Result<i32> {
    let m = FarFieldMatrix::load(path)?;
    let lambda = parse_vector(lambda)?;
    let pair = make_direction_pair(&lambda, t.unwrap_or_else(|| minimal_imag_scale(&lambda)))?;
    let coeffs = compute_all_coefficients(&m, l_trunc)?;
    let mut w = create(&cli.out, "continued.csv")?;
    writeln!(w, "alpha_index,alpha1,alpha2,alpha3,point,re,im,bound,warning")?;
    let mut warnings = 0;
    for (q, c) in coeffs.iter().enumerate() {
        for (name, theta) in [("theta", &pair.theta), ("theta_prime", &pair.theta_prime)] {
            let v = continue_far_field(c, theta)?;
            warnings += usize::from(v.warning);
            writeln!(
                w,
                "{q},{:e},{:e},{:e},{name},{:e},{:e},{:e},{}",
                c.alpha[0], c.alpha[1], c.alpha[2], v.value.re, v.value.im, v.bound, v.warning
            )?;
        }
    }
    w.flush()?;
    println!(
        "continued {} incident directions to λ = ({}, {}, {}), t = {}; {warnings} values flagged",
        coeffs.len(),
        pair.lambda[0],
        pair.lambda[1],
        pair.lambda[2],
        pair.t
    );
    Ok(0)
}

#[derive(Serialize)]
struct ReconstructSummary<'a> {
    surface_hash: String,
    volume_quadrature: f64,
    spectrum_points: usize,
    spectrum_failures: usize,
    max_hermitian_residual: f64,
    inversion: &'a crate::reconstruction::InversionReport,
}

fn reconstruct(cli: &Cli, path: &Path, far_field: Option<&Path>) -> Result<i32> {
    let mut job: ReconstructJob = config_or_default(&cli.config)?;
    if let Some(t) = cli.tolerance {
        job.scan.epsilons = vec![t];
    }
    job.scan.validate()?;
    let surface = read_surface(path)?;
    let data = match far_field {
        Some(p) => DataPath::Matrix(Box::new(FarFieldMatrix::load(p)?)),
        None if job.data_path => DataPath::Synthesize,
        None => DataPath::None,
    };
    let setup = OracleSetup::new(&surface, &job.reconstruction, data)?;
    let grid = spectrum_scan(&setup, &job.scan)?;
    let mut w = create(&cli.out, "spectrum.csv")?;
    grid.write_csv(&mut w)?;
    w.flush()?;
    let hausdorff = HausdorffConfig { seed: cli.seed, ..HausdorffConfig::default() };
    let rec = invert_to_indicator(&grid, &job.inversion, Some(&surface), &hausdorff)?;
    rec.voxels.save(&cli.out.join("voxels.bin"))?;
    if let Some(s) = &rec.surface {
        let mut w = create(&cli.out, "surface_estimate.json")?;
        writeln!(w, "{}", s.to_json())?;
        w.flush()?;
    }
    let summary = ReconstructSummary {
        surface_hash: surface.content_hash(),
        volume_quadrature: setup.volume,
        spectrum_points: grid.points.len(),
        spectrum_failures: grid.failures(),
        max_hermitian_residual: grid.points.iter().map(|p| p.hermitian_residual).fold(0.0, f64::max),
        inversion: &rec.report,
    };
    write_json(&cli.out, "reconstruction.json", &summary)?;
    let r = &rec.report;
    println!(
        "spectrum: {} points ({} failed); volume {:.6}",
        summary.spectrum_points, summary.spectrum_failures, setup.volume
    );
    println!(
        "inversion: thresholded volume {:.4}, integrated volume {:.4}, radius [{:.4}, {:.4}], diffraction bound {:.4}",
        r.thresholded_volume, r.integrated_volume, r.min_radius, r.max_radius, r.diffraction_bound
    );
    if let Some(h) = &r.hausdorff {
        println!("hausdorff distance to truth {:.4} (± {:.1e})", h.distance, h.error_bound);
    }
    if let Some(f) = &r.failure {
        eprintln!("{f}");
        return Ok(2);
    }
    Ok(0)
}

fn stability(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| LabError::Validation("stability needs --config <experiment spec>".into()))?;
    let mut spec: ExperimentSpec = read_config(path)?;
    spec.hausdorff.seed = cli.seed;
    if let Some(t) = cli.tolerance {
        spec.forward.tolerance = t;
    }
    let exp = run_pair_family(&spec)?;
    let mut w = create(&cli.out, "records.csv")?;
    exp.write_records_csv(&mut w)?;
    w.flush()?;
    let fit = fit_rate(&exp.records)?;
    write_json(&cli.out, "ratefit.json", &fit)?;
    let mut w = create(&cli.out, "ratefit.csv")?;
    write_ratefit_csv(&fit, &mut w)?;
    w.flush()?;
    println!(
        "{} records, {} used; c2_hat = {:.6}, c1_hat = {:.6}, residual {:.3e}{}",
        exp.records.len(),
        fit.records_used,
        fit.c2_hat,
        fit.c1_hat,
        fit.residual,
        if fit.low_confidence { " (low confidence)" } else { "" }
    );
    Ok(0)
}

/// CSV `c1_hat,c2_hat,residual,delta_min,delta_max,decades,low_confidence,records_used`.
pub fn write_ratefit_csv<W: Write>(fit: &RateFit, mut w: W) -> Result<()> {
    writeln!(w, "c1_hat,c2_hat,residual,delta_min,delta_max,decades,low_confidence,records_used")?;
    writeln!(
        w,
        "{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
        fit.c1_hat, fit.c2_hat, fit.residual, fit.delta_min, fit.delta_max, fit.decades, fit.low_confidence, fit.records_used
    )?;
    Ok(())
}

fn check(cli: &Cli) -> Result<i32> {
    let threshold = cli.tolerance.unwrap_or(1e-7);
    let mut ok = true;
    let lambdas = [Vector3::new(0.6, -0.9, 0.9), Vector3::new(2.0, 1.0, -1.5), Vector3::new(0.0, 0.0, 3.0)];
    let surfaces = [
        ("unit ball", StarSurface::sphere(1.0)),
        ("perturbed sphere", StarSurface::perturbed_sphere(1.0, &[(2, 0, 0.1), (3, 1, 0.05)])?),
    ];
    for (name, s) in &surfaces {
        for lam in &lambdas {
            let pair = make_direction_pair(lam, minimal_imag_scale(lam))?;
            let rep = volume_identity_check(s, &pair, &IdentityQuadrature::default())?;
            let pass = rep.discrepancy <= threshold;
            ok &= pass;
            println!(
                "identity  {name:16} λ = ({:5.2}, {:5.2}, {:5.2})  discrepancy {:.3e}  {}",
                lam[0],
                lam[1],
                lam[2],
                rep.discrepancy,
                if pass { "pass" } else { "FAIL" }
            );
            if s.sphere_radius().is_some() {
                let closed = Complex64::new(-lam.norm_squared() / 2.0 * ball_transform(1.0, lam.norm()), 0.0);
                let err = (rep.rhs - closed).norm() / closed.norm();
                let pass = err <= threshold;
                ok &= pass;
                println!("          closed form relative error {:.3e}  {}", err, if pass { "pass" } else { "FAIL" });
            }
        }
    }
    let cube = DirectionGrid::cube26();
    for a in [0.5, 1.0] {
        let surface = StarSurface::sphere(a);
        let bie = assemble_far_field_matrix(&surface, &cube, &cube, &ForwardConfig::default())?;
        let mie = mie_far_field_matrix(a, &cube, &cube)?;
        let scale = mie.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = (&bie.values - &mie.values).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale;
        let pass = err <= 1e-6;
        ok &= pass;
        println!("series    sphere a = {a:3}  max relative far-field error {err:.3e}  {}", if pass { "pass" } else { "FAIL" });
    }
    Ok(if ok { 0 } else { 2 })
}
