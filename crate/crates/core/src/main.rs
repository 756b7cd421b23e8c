use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use nanophon::config::RunConfig;
use nanophon::experiment::{self, io as xio, HeightOptions, LineFitOptions};
use nanophon::fem::modefile::{read_modes, write_modes};
use nanophon::fem::{assemble, check_modes, solve_modes};
use nanophon::mesh::{build_scene, contact_patch, read_mesh, write_mesh, Region};
use nanophon::rates::{lifetime_ratio, t1_bulk_analytic, t1_map};
use nanophon::spectrum::{dos, fit_power_law, uniform_grid};
use nanophon::units::{GHZ, NM, NS};
use nanophon::{Error, Result, VERSION};

#[derive(Parser)]
#[command(name = "nanophon", version, about = "Phonon-limited SiV orbital relaxation in nanodiamonds")]
struct Cli {
    /// JSON run configuration; built-in desk defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for assembly, factorization and maps.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Format of the summary written next to the data files and to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize the nanodiamond-on-substrate scene into mesh.json.
    Scene,
    /// Solve the elastic eigenmodes in band_GHz and write modes.bin.
    Solve {
        /// Mesh file; the scene is built from the config when absent.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Density of states and its power-law exponent.
    Dos {
        /// modes.bin written by solve.
        #[arg(long)]
        modes: PathBuf,
        /// Fit band "lo,hi" in GHz.
        #[arg(long, value_parser = parse_pair)]
        band: (f64, f64),
        /// Kernel width in GHz (config value when absent).
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Map of T₁⁰ relative to the substrate bulk on the configured grid.
    Map {
        /// modes.bin written by solve.
        #[arg(long)]
        modes: PathBuf,
        /// The mesh the modes were solved on.
        #[arg(long)]
        mesh: PathBuf,
        /// Also write an SVG heat map.
        #[arg(long)]
        svg: bool,
    },
    /// Analytic bulk relaxation time.
    Bulk {
        /// Ground-state splitting in GHz (config value when absent).
        #[arg(long)]
        delta_gs_ghz: Option<f64>,
        /// Temperature in K (config value when absent).
        #[arg(long)]
        temperature_k: Option<f64>,
    },
    /// Fit a four-line PL spectrum: splittings and temperature.
    AnalyzeSpectrum {
        /// CSV with frequency and counts columns.
        spectrum: PathBuf,
        /// Initial line centers "a,b,c,d" in GHz.
        #[arg(long, value_parser = parse_four)]
        guesses: Option<[f64; 4]>,
    },
    /// Peak heights and T₁ from a saturation-recovery trace.
    AnalyzeT1 {
        /// CSV with time and counts columns.
        trace: PathBuf,
        /// JSON pulse schedule: pulse length, delays and start.
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Lifetime ratios from pairs of analyze-spectrum and analyze-t1 outputs.
    Report {
        /// spectrum.json files, repeated; paired in order with --t1.
        #[arg(long, required = true)]
        spectrum: Vec<PathBuf>,
        /// t1.json files, repeated.
        #[arg(long, required = true)]
        t1: Vec<PathBuf>,
    },
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect()
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_floats(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err("expected two comma-separated numbers".into()),
    }
}

fn parse_four(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_floats(s)?.try_into().map_err(|_| "expected four comma-separated numbers".to_string())
}

struct Ctx {
    config: RunConfig,
    digest: String,
    out: PathBuf,
    threads: usize,
    format: Format,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn csv_header(&self) -> String {
        format!("# nanophon {VERSION} config_digest {}\n", self.digest)
    }

    fn write_csv(&self, name: &str, body: &str) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, format!("{}{body}", self.csv_header()))?;
        Ok(p)
    }

    /// Writes `<stem>.json|csv` and echoes it on stdout.
    fn summary(&self, command: &str, stem: &str, payload: Value) -> Result<()> {
        let mut v = Map::new();
        v.insert("tool".into(), json!("nanophon"));
        v.insert("version".into(), json!(VERSION));
        v.insert("config_digest".into(), json!(self.digest));
        v.insert("command".into(), json!(command));
        if let Value::Object(m) = payload {
            v.extend(m);
        }
        let v = Value::Object(v);
        let text = match self.format {
            Format::Json => serde_json::to_string_pretty(&v).expect("json") + "\n",
            Format::Csv => to_csv_rows(&v),
        };
        let ext = if self.format == Format::Json { "json" } else { "csv" };
        fs::write(self.path(&format!("{stem}.{ext}")), &text)?;
        print!("{text}");
        Ok(())
    }
}

/// Flattens nested JSON to `key,value` rows; a top-level `rows` array of
/// objects becomes a table instead.
fn to_csv_rows(v: &Value) -> String {
    if let Some(Value::Array(rows)) = v.get("rows") {
        if let Some(Value::Object(first)) = rows.first() {
            let keys: Vec<&String> = first.keys().collect();
            let mut s = format!(
                "# nanophon {} config_digest {}\n",
                v["version"].as_str().unwrap_or(""),
                v["config_digest"].as_str().unwrap_or("")
            );
            s += &keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",");
            s.push('\n');
            for r in rows {
                let cells: Vec<String> = keys.iter().map(|k| scalar(&r[k.as_str()])).collect();
                s += &cells.join(",");
                s.push('\n');
            }
            return s;
        }
    }
    let mut s = String::from("key,value\n");
    flatten("", v, &mut s);
    s
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(x) => x.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        other => {
            out.push_str(&format!("{prefix},{}\n", scalar(other)));
        }
    }
}

fn cmd_scene(ctx: &Ctx) -> Result<()> {
    let spec = &ctx.config.scene;
    let mesh = build_scene(spec)?;
    let path = ctx.path("mesh.json");
    write_mesh(&mesh, &path)?;
    let (a, b) = contact_patch(spec)?;
    ctx.summary(
        "scene",
        "scene",
        json!({
            "mesh_file": path,
            "mesh_digest": mesh.digest(),
            "nodes": mesh.n_nodes(),
            "elements": mesh.n_elements(),
            "nanodiamond_elements": mesh.count_region(Region::Nanodiamond),
            "dofs": mesh.n_dofs(),
            "contact_semi_axes_nm": [a / NM, b / NM],
        }),
    )
}

fn cmd_solve(ctx: &Ctx, mesh_path: Option<&Path>) -> Result<()> {
    let mesh = match mesh_path {
        Some(p) => read_mesh(p)?,
        None => build_scene(&ctx.config.scene)?,
    };
    mesh.validate()?;
    let sys = assemble(&mesh, &ctx.config.materials)?;
    let [lo, hi] = ctx.config.band_ghz;
    let opts = ctx.config.solver.eigen_options(ctx.threads);
    let modes = solve_modes(&mesh, &sys, lo * GHZ, hi * GHZ, ctx.config.solver.max_modes, &opts)?;
    let path = ctx.path("modes.bin");
    write_modes(&modes, &path, Some(&ctx.digest))?;
    let checks = check_modes(&modes, &sys);
    let localized: Vec<Value> = (0..modes.len())
        .filter(|&n| !modes.rigid[n] && modes.energy_fraction_nd(n) > 0.5)
        .map(|n| json!({"index": n, "frequency_GHz": modes.frequencies[n] / GHZ, "f_ND": modes.energy_fraction_nd(n)}))
        .collect();
    ctx.summary(
        "solve",
        "solve",
        json!({
            "mode_file": path,
            "mesh_digest": modes.mesh_digest,
            "band_GHz": [lo, hi],
            "n_modes": modes.len(),
            "n_rigid": modes.rigid_count(),
            "free_dofs": sys.n_free(),
            "frequencies_GHz": modes.frequencies.iter().map(|f| f / GHZ).collect::<Vec<_>>(),
            "max_residual": modes.residuals.iter().copied().fold(0.0, f64::max),
            "max_rayleigh_error": checks.max_rayleigh_error,
            "max_orthogonality_error": checks.max_orthogonality_error,
            "nd_localized": localized,
        }),
    )
}

fn cmd_dos(ctx: &Ctx, modes: &Path, band: (f64, f64), sigma: Option<f64>) -> Result<()> {
    let (set, _) = read_modes(modes)?;
    let elastic = set.elastic();
    let sigma = sigma.unwrap_or(ctx.config.dos.sigma_ghz) * GHZ;
    let [lo, hi] = ctx.config.band_ghz;
    let grid = uniform_grid(lo * GHZ, hi * GHZ, ctx.config.dos.step_ghz * GHZ)?;
    let curve = dos(&elastic.frequencies, sigma, &grid)?;
    let fit = fit_power_law(&curve, (band.0 * GHZ, band.1 * GHZ))?;
    let csv = ctx.write_csv("dos.csv", &curve.to_csv())?;
    ctx.summary(
        "dos",
        "dos",
        json!({
            "dos_file": csv,
            "n_modes": elastic.len(),
            "sigma_GHz": sigma / GHZ,
            "p": fit.p,
            "c": fit.c,
            "rmse": fit.rmse,
            "band_GHz": [band.0, band.1],
            "samples": fit.samples,
            "integral": curve.integral(),
        }),
    )
}

fn cmd_map(ctx: &Ctx, modes: &Path, mesh: &Path, svg: bool) -> Result<()> {
    let cfg = &ctx.config;
    cfg.check_map_band()?;
    let (set, _) = read_modes(modes)?;
    let mesh = read_mesh(mesh)?;
    if mesh.digest() != set.mesh_digest {
        return Err(Error::Invalid("mode file was computed on a different mesh".into()));
    }
    let points = cfg.grid().points_in(&mesh);
    let delta = cfg.delta_gs_hz()?;
    let p = cfg.siv.params()?;
    let map =
        t1_map(&set, &mesh, &points, &p, delta, cfg.temperature_k, &cfg.q_model, cfg.convention, cfg.reference())?;
    let csv = ctx.write_csv("map.csv", &map.to_csv())?;
    if svg {
        fs::write(ctx.path("map.svg"), map.to_svg())?;
    }
    let analytic = t1_bulk_analytic(&cfg.materials, &p, delta, 0.0)?;
    let point = |r: Option<&nanophon::rates::RatePoint>| {
        r.map(|r| json!({"ratio": r.ratio, "position_nm": r.position.map(|x| x / NM), "region": r.region}))
    };
    ctx.summary(
        "map",
        "map",
        json!({
            "map_file": csv,
            "points": map.points.len(),
            "meta": map.meta,
            "analytic_T1_0_bulk_s": analytic,
            "simulated_over_analytic_bulk": map.meta.bulk_reference / analytic,
            "min": point(map.min_ratio()),
            "max": point(map.max_ratio()),
            "capped_points": map.points.iter().filter(|p| p.capped).count(),
        }),
    )
}

fn cmd_bulk(ctx: &Ctx, delta_ghz: Option<f64>, t_k: Option<f64>) -> Result<()> {
    let cfg = &ctx.config;
    let delta = match delta_ghz {
        Some(d) => d * GHZ,
        None => cfg.delta_gs_hz()?,
    };
    let t = t_k.unwrap_or(cfg.temperature_k);
    let p = cfg.siv.params()?;
    ctx.summary(
        "bulk",
        "bulk",
        json!({
            "delta_GS_GHz": delta / GHZ,
            "temperature_K": t,
            "T1_bulk_s": t1_bulk_analytic(&cfg.materials, &p, delta, t)?,
            "T1_0_bulk_s": t1_bulk_analytic(&cfg.materials, &p, delta, 0.0)?,
        }),
    )
}

fn cmd_spectrum(ctx: &Ctx, path: &Path, guesses: Option<[f64; 4]>) -> Result<()> {
    let s = xio::read_spectrum(path)?;
    let opts = LineFitOptions { guesses: guesses.map(|g| g.map(|x| x * GHZ)), ..LineFitOptions::new() };
    let lines = experiment::fit_four_lines(&s, &opts)?;
    let sp = experiment::splittings(&lines)?;
    let t = experiment::temperature(&lines, sp.delta_es, &ctx.config.thermometry)?;
    let line_json: Vec<Value> = lines
        .lines
        .iter()
        .zip(&lines.errors)
        .zip(["A", "B", "C", "D"])
        .map(|((l, e), name)| {
            json!({
                "label": name,
                "center_GHz": l.center / GHZ, "sigma_center_GHz": e.center / GHZ,
                "fwhm_GHz": l.fwhm / GHZ, "sigma_fwhm_GHz": e.fwhm / GHZ,
                "area": l.area, "sigma_area": e.area,
            })
        })
        .collect();
    ctx.summary(
        "analyze-spectrum",
        "spectrum",
        json!({
            "source": path,
            "delta_ES_GHz": sp.delta_es / GHZ,
            "delta_GS_GHz": sp.delta_gs / GHZ,
            "sigma_delta_GS_GHz": sp.sigma_gs / GHZ,
            "consistency_residual_GHz": sp.residual / GHZ,
            "T_K": t,
            "thermometry": ctx.config.thermometry,
            "baseline": lines.baseline,
            "chi2_reduced": lines.chi2_reduced,
            "lines": line_json,
        }),
    )
}

fn cmd_t1(ctx: &Ctx, trace: &Path, schedule: &Path) -> Result<()> {
    let sched = xio::read_schedule(schedule)?;
    let tr = xio::read_trace(trace, sched)?;
    let hopts = HeightOptions { baseline_window: ctx.config.trace.baseline_window() };
    let heights = experiment::peak_heights(&tr, &hopts)?;
    let fit = experiment::fit_t1(&heights)?;
    let pts: Vec<Value> = heights
        .iter()
        .map(|h| json!({"tau_ns": h.tau / NS, "h": h.h, "sigma_h": h.sigma, "low_statistics": h.low_statistics}))
        .collect();
    ctx.summary(
        "analyze-t1",
        "t1",
        json!({
            "source": trace,
            "T1_ns": fit.t1 / NS,
            "sigma_T1_ns": fit.sigma_t1 / NS,
            "amplitude": fit.amplitude,
            "sigma_amplitude": fit.sigma_amplitude,
            "chi2_reduced": fit.chi2_reduced,
            "baseline_window_ns": ctx.config.trace.baseline_window_ns,
            "peak_heights": pts,
        }),
    )
}

fn read_json(path: &Path, section: &str) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse { section: section.into(), message: format!("{}: {e}", path.display()) })
}

fn field(v: &Value, key: &str, path: &Path) -> Result<f64> {
    v.get(key).and_then(Value::as_f64).ok_or_else(|| Error::Parse {
        section: key.into(),
        message: format!("{} has no numeric {key}", path.display()),
    })
}

fn cmd_report(ctx: &Ctx, spectra: &[PathBuf], t1s: &[PathBuf]) -> Result<()> {
    if spectra.len() != t1s.len() {
        return Err(Error::Invalid(format!("{} spectrum files but {} T1 files", spectra.len(), t1s.len())));
    }
    let cfg = &ctx.config;
    let p = cfg.siv.params()?;
    let mut rows = Vec::new();
    for (sp, tp) in spectra.iter().zip(t1s) {
        let s = read_json(sp, "spectrum summary")?;
        let t = read_json(tp, "T1 summary")?;
        let d = field(&s, "delta_GS_GHz", sp)?;
        let temp = field(&s, "T_K", sp)?;
        let t1 = field(&t, "T1_ns", tp)?;
        let sig = field(&t, "sigma_T1_ns", tp)?;
        let bulk = t1_bulk_analytic(&cfg.materials, &p, d * GHZ, temp)?;
        let ratio = lifetime_ratio(t1 * NS, d * GHZ, temp, &cfg.materials, &p)?;
        rows.push(json!({
            "spectrum": sp, "t1": tp,
            "delta_ES_GHz": s.get("delta_ES_GHz").cloned().unwrap_or(Value::Null),
            "delta_GS_GHz": d, "T_K": temp,
            "T1_ns": t1, "sigma_T1_ns": sig,
            "T1_bulk_ns": bulk / NS,
            "ratio_to_bulk": ratio,
            "sigma_ratio": ratio * sig / t1,
        }));
    }
    ctx.summary("report", "report", json!({ "rows": rows }))
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if cli.threads == 0 {
        return Err(Error::Invalid("--threads must be at least 1".into()));
    }
    // A second initialization only happens in tests; ignore it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx { digest: config.digest(), config, out: cli.out, threads: cli.threads, format: cli.format };
    match &cli.command {
        Command::Scene => cmd_scene(&ctx),
        Command::Solve { mesh } => cmd_solve(&ctx, mesh.as_deref()),
        Command::Dos { modes, band, sigma } => cmd_dos(&ctx, modes, *band, *sigma),
        Command::Map { modes, mesh, svg } => cmd_map(&ctx, modes, mesh, *svg),
        Command::Bulk { delta_gs_ghz, temperature_k } => cmd_bulk(&ctx, *delta_gs_ghz, *temperature_k),
        Command::AnalyzeSpectrum { spectrum, guesses } => cmd_spectrum(&ctx, spectrum, *guesses),
        Command::AnalyzeT1 { trace, schedule } => cmd_t1(&ctx, trace, schedule),
        Command::Report { spectrum, t1 } => cmd_report(&ctx, spectrum, t1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({
                "error": {"kind": e.kind(), "message": e.to_string()},
                "exit_code": e.exit_code(),
                "version": VERSION,
            });
            eprintln!("{}", serde_json::to_string(&body).expect("json"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
