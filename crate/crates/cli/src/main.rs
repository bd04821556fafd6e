use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use uwa_qdchan::arrivals::{parse_arrival_file, to_drays, to_drays_multi, ArrivalFile};
use uwa_qdchan::dray::write_rays_csv;
use uwa_qdchan::export::{
    ctf_header_json, summary_json, write_correlation_csv, write_ctf_csv, write_psd_csv, ConditionResult,
    RunManifest,
};
use uwa_qdchan::pipeline::{repro, ConditionAnalysis, Simulator, REPRO_CARRIERS_HZ};
use uwa_qdchan::{ConfigFile64, CorrelationCurve64, DRay64, DopplerSpectrum64, Simulator64, ValidatedConfig64};

#[derive(Parser)]
#[command(name = "uwa-qdchan", version, about = "Shallow-water acoustic channel simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace deterministic eigenrays and write the ray table.
    Trace(Common),
    /// Convert arrival files into a ray table.
    Ingest(Common),
    /// Synthesize channel transfer functions for each realization.
    Synth(Common),
    /// Ensemble statistics at the configured anchors.
    Stats(Common),
    /// Carrier sweep over 20, 30 and 50 kHz at the configured anchors.
    Repro(Common),
}

#[derive(Args)]
struct Common {
    /// TOML or JSON scenario file; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    realizations: Option<usize>,
    /// Worker threads; 0 or unset picks the core count.
    #[arg(long, value_name = "N", env = "UWA_QDCHAN_THREADS")]
    threads: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Arrival file replacing the traced eigenrays. Repeat for a
    /// multi-frequency set.
    #[arg(long = "arrival-file", value_name = "PATH")]
    arrival_files: Vec<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error: {line}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": ").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Trace(c) => trace(&c),
        Command::Ingest(c) => ingest(&c),
        Command::Synth(c) => synth(&c),
        Command::Stats(c) => stats(&c),
        Command::Repro(c) => repro_cmd(&c),
    }
}

fn load_config(c: &Common) -> Result<ValidatedConfig64> {
    let file = match &c.config {
        Some(path) => ConfigFile64::load(path)?,
        None => ConfigFile64::default(),
    };
    let mut cfg = file.validate().context("invalid config")?;
    if let Some(seed) = c.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(n) = c.realizations {
        cfg = cfg.with_realizations(n).context("invalid --realizations")?;
    }
    Ok(cfg)
}

fn threads(c: &Common) -> Option<usize> {
    c.threads.filter(|&n| n > 0)
}

fn read_arrivals(paths: &[PathBuf]) -> Result<Vec<ArrivalFile<f64>>> {
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            parse_arrival_file(&text).with_context(|| p.display().to_string())
        })
        .collect()
}

fn ingested_rays(cfg: &ValidatedConfig64, paths: &[PathBuf]) -> Result<Vec<DRay64>> {
    let files = read_arrivals(paths)?;
    let ingested = if files.len() == 1 {
        to_drays(&files[0], cfg.env())?
    } else {
        to_drays_multi(&files, cfg.env())?
    };
    Ok(ingested.rays)
}

fn simulator(c: &Common, cfg: ValidatedConfig64) -> Result<Simulator64> {
    if c.arrival_files.is_empty() {
        Ok(Simulator::new_traced(cfg))
    } else {
        let rays = ingested_rays(&cfg, &c.arrival_files)?;
        Ok(Simulator::with_drays(cfg, rays))
    }
}

/// Output directory plus the manifest of everything written into it.
struct Output {
    root: PathBuf,
    manifest: RunManifest,
}

impl Output {
    fn new(c: &Common, subcommand: &str, cfg: &ValidatedConfig64) -> Result<Self> {
        fs::create_dir_all(&c.out).with_context(|| format!("cannot create {}", c.out.display()))?;
        Ok(Self {
            root: c.out.clone(),
            manifest: RunManifest::new(subcommand, cfg.digest(), cfg.grid().seed, cfg.grid().n_realizations),
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .with_context(|| format!("cannot write {}", path.display()))?;
        drop(w);
        self.manifest.record(&self.root, &path)?;
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    fn finish(self) -> Result<()> {
        let path = self.root.join("manifest.json");
        fs::write(&path, self.manifest.to_json()).with_context(|| format!("cannot write {}", path.display()))
    }
}

fn rays_json(rays: &[DRay64]) -> Value {
    let xy = |p: Option<[f64; 2]>| p.map(|p| json!(p)).unwrap_or(Value::Null);
    Value::Array(
        rays.iter()
            .map(|r| {
                json!({
                    "index": r.index,
                    "delay_s": r.delay_s,
                    "s_i": r.surface_bounces,
                    "b_i": r.bottom_bounces,
                    "theta_rad": r.theta_rad,
                    "path_len_m": r.path_len_m,
                    "first_refl_xy_m": xy(r.first_refl_xy_m),
                    "last_refl_xy_m": xy(r.last_refl_xy_m),
                })
            })
            .collect(),
    )
}

fn write_rays(out: &mut Output, format: Format, rays: &[DRay64]) -> Result<()> {
    match format {
        Format::Csv => out.write("rays.csv", |w| write_rays_csv(rays, w)),
        Format::Json => out.write_json("rays.json", &rays_json(rays)),
    }
}

fn trace(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let sim = simulator(c, cfg)?;
    let mut out = Output::new(c, "trace", sim.config())?;
    write_rays(&mut out, c.format, sim.drays())?;
    out.finish()
}

fn ingest(c: &Common) -> Result<()> {
    if c.arrival_files.is_empty() {
        bail!("ingest needs at least one --arrival-file");
    }
    let cfg = load_config(c)?;
    let rays = ingested_rays(&cfg, &c.arrival_files)?;
    let mut out = Output::new(c, "ingest", &cfg)?;
    write_rays(&mut out, c.format, &rays)?;
    out.finish()
}

fn synth(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let sim = simulator(c, cfg)?;
    let ensemble = sim.ensemble(threads(c))?;
    let digest = sim.config().digest();
    let mut out = Output::new(c, "synth", sim.config())?;
    write_rays(&mut out, c.format, sim.drays())?;
    for (i, grid) in ensemble.iter().enumerate() {
        let header = ctf_header_json(grid, &digest, i);
        match c.format {
            Format::Csv => {
                out.write_json(&format!("ctf/ctf_{i:04}.json"), &header)?;
                out.write(&format!("ctf/ctf_{i:04}.csv"), |w| write_ctf_csv(grid, w))?;
            }
            Format::Json => {
                let mut doc = header;
                for (name, h) in [("d", &grid.h_d), ("r", &grid.h_r), ("f", &grid.h_f), ("total", &grid.h_total)] {
                    let rows: Vec<Value> = h
                        .outer_iter()
                        .map(|row| Value::Array(row.iter().map(|z| json!([z.re, z.im])).collect()))
                        .collect();
                    doc[name] = Value::Array(rows);
                }
                out.write_json(&format!("ctf/ctf_{i:04}.json"), &doc)?;
            }
        }
    }
    out.finish()
}

/// Labelled ACF and spectrum of each condition, in output order.
struct Tables<'a> {
    acf: Vec<(String, &'a CorrelationCurve64)>,
    psd: Vec<(String, &'a DopplerSpectrum64)>,
    results: Vec<ConditionResult<f64>>,
}

impl<'a> Tables<'a> {
    fn collect<I: IntoIterator<Item = &'a ConditionAnalysis<f64>>>(conditions: I) -> Self {
        let mut t = Tables {
            acf: Vec::new(),
            psd: Vec::new(),
            results: Vec::new(),
        };
        for c in conditions {
            let label = c.result.label();
            t.acf.push((label.clone(), c.acf()));
            t.psd.push((label, &c.spectrum));
            t.results.push(c.result.clone());
        }
        t
    }

    fn write(&self, out: &mut Output, format: Format, cfg: &ValidatedConfig64) -> Result<()> {
        match format {
            Format::Csv => {
                out.write("acf.csv", |w| write_correlation_csv(&self.acf, w))?;
                out.write("psd.csv", |w| write_psd_csv(&self.psd, w))?;
            }
            Format::Json => {
                out.write_json("acf.json", &acf_json(&self.acf)?)?;
                out.write_json("psd.json", &psd_json(&self.psd))?;
            }
        }
        out.write_json("summary.json", &summary_json(cfg, &self.results))
    }
}

fn acf_json(curves: &[(String, &CorrelationCurve64)]) -> Result<Value> {
    let rows = curves
        .iter()
        .map(|(label, c)| {
            let slice = c.time_slice()?;
            Ok(json!({
                "condition": label,
                "anchor_t_s": c.anchor_t_s,
                "anchor_f_hz": c.anchor_f_hz,
                "dt_s": slice.iter().map(|s| s.0).collect::<Vec<_>>(),
                "re": slice.iter().map(|s| s.1.re).collect::<Vec<_>>(),
                "im": slice.iter().map(|s| s.1.im).collect::<Vec<_>>(),
                "std_err": slice.iter().map(|s| s.2).collect::<Vec<_>>(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Value::Array(rows))
}

fn psd_json(spectra: &[(String, &DopplerSpectrum64)]) -> Value {
    Value::Array(
        spectra
            .iter()
            .map(|(label, s)| {
                json!({
                    "condition": label,
                    "nu_hz": s.nu_hz,
                    "psd": s.psd,
                    "bin_width_hz": s.bin_width_hz,
                })
            })
            .collect(),
    )
}

fn stats(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let sim = simulator(c, cfg)?;
    let ensemble = sim.ensemble(threads(c))?;
    let conditions = sim.analyze(&ensemble)?;
    let mut out = Output::new(c, "stats", sim.config())?;
    Tables::collect(&conditions).write(&mut out, c.format, sim.config())?;
    out.finish()
}

fn repro_cmd(c: &Common) -> Result<()> {
    if !c.arrival_files.is_empty() {
        bail!("repro traces its own eigenrays; --arrival-file is not accepted");
    }
    let cfg = load_config(c)?;
    let runs = repro(&cfg, &REPRO_CARRIERS_HZ, threads(c))?;
    // Condition order follows the results table: time first, then carrier.
    let mut conditions: Vec<&ConditionAnalysis<f64>> = runs.iter().flat_map(|r| &r.conditions).collect();
    conditions.sort_by(|a, b| {
        (a.result.time_s, a.result.carrier_freq_hz)
            .partial_cmp(&(b.result.time_s, b.result.carrier_freq_hz))
            .expect("finite condition keys")
    });
    let mut out = Output::new(c, "repro", &cfg)?;
    write_rays(&mut out, c.format, &uwa_qdchan::trace_eigenrays(cfg.env(), cfg.env().max_total_bounces))?;
    Tables::collect(conditions).write(&mut out, c.format, &cfg)?;
    out.finish()
}
