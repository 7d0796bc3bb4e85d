use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use soc_market::analysis::{
    activity_histogram, avalanches as avalanche_record, fit_power_law, integrate_count,
    size_histogram, EntropySampler, GapTracker,
};
use soc_market::dist::{
    apply_overlay, ensemble_fields, ensemble_gains, fit_gaussian, tail_mass, GaussianFit,
    GaussianRegion,
};
use soc_market::garch::{fit_values, ComparisonTable, FitReport};
use soc_market::io::{
    historical_returns, ingest_minutes, ingest_minutes_lenient, write_avalanches, write_bars,
    write_entropy, write_gains_histogram, write_gap, write_series, write_size_histogram, Artifact,
    CsvHitRecorder, CsvSignalRecorder, Manifest, RunConfig, Snapshot,
};
use soc_market::lattice::{Recorder, Simulation};
use soc_market::seeds::{run_seed, run_seeds};
use soc_market::series::{prices, rescale, volatility, Boundary, Provenance, ReturnsSeries};
use soc_market::{Error, Result};

const CONFIG_FILE: &str = "config.toml";
const MANIFEST_FILE: &str = "manifest.json";

/// The artifact directory of one invocation.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn write<F>(&self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let mut w = self.file(name)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn text(&self, name: &str, text: &str) -> Result<()> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Record the resolved configuration next to the artifacts.
    fn config(&self, config: &RunConfig) -> Result<()> {
        self.text(CONFIG_FILE, &config.to_toml())
    }
}

pub fn simulate(config: &RunConfig, out: &Output) -> Result<()> {
    out.config(config)?;
    let lattice = config.lattice_config()?;
    let mut sim = Simulation::new(&lattice)?;
    let initial = Snapshot::of(sim.state());
    out.write("snapshot_initial.csv", |w| initial.write_csv(w))?;
    out.write("snapshot_initial.bin", |w| initial.write_binary(w))?;

    let mut signal = CsvSignalRecorder::new(out.file("signal.csv")?);
    let mut entropy = EntropySampler::new(config.run.entropy_cadence);
    let mut hits = if config.run.hit_log {
        Some(CsvHitRecorder::new(out.file("hits.csv")?)?)
    } else {
        None
    };
    {
        let mut recorders: Vec<&mut dyn Recorder> = vec![&mut signal, &mut entropy];
        if let Some(h) = hits.as_mut() {
            recorders.push(h);
        }
        sim.run(config.run.steps, &mut recorders);
    }
    signal.finish()?;
    if let Some(h) = hits {
        h.finish()?;
    }
    out.write("entropy.csv", |w| write_entropy(w, entropy.samples()))?;
    let activity = activity_histogram(sim.state());
    out.write("activity.csv", |w| {
        writeln!(w, "j,hits")?;
        for (j, h) in activity.iter().enumerate() {
            writeln!(w, "{j},{h}")?;
        }
        Ok(())
    })?;

    let last = Snapshot::of(sim.state());
    out.write("snapshot_final.csv", |w| last.write_csv(w))?;
    out.write("snapshot_final.bin", |w| last.write_binary(w))?;
    Ok(())
}

#[derive(Serialize)]
struct AvalancheSummary {
    runs: usize,
    steps: u64,
    mean_avalanches_per_run: f64,
    /// Mean count per run beyond the last bin.
    overflow: f64,
    /// Count implied by the fitted law over `[1, ∞)`.
    integrated_count: Option<f64>,
}

pub fn avalanches(config: &RunConfig, out: &Output) -> Result<()> {
    out.config(config)?;
    let lattice = config.lattice_config()?;
    let runs = config.run.ensemble_runs;
    let steps = config.run.steps;
    let per_run: Vec<_> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = lattice.clone().with_seed(run_seed(lattice.seed, i));
            let mut sim = Simulation::new(&cfg)?;
            let mut gap = GapTracker::default();
            sim.run(steps, &mut [&mut gap]);
            let len = gap.len();
            let gap = gap
                .finish()
                .ok_or_else(|| Error::Computation("empty signal trace".into()))?;
            let record = avalanche_record(&gap, len);
            Ok((if i == 0 { Some(gap) } else { None }, record))
        })
        .collect::<Result<_>>()?;

    if let Some((Some(gap), first)) = per_run.first() {
        out.write("gap.csv", |w| write_gap(w, gap))?;
        out.write("avalanches.csv", |w| write_avalanches(w, first))?;
    }
    let records: Vec<_> = per_run.into_iter().map(|(_, r)| r).collect();
    let a = &config.avalanches;
    let hist = size_histogram(&records, a.bin_width, a.n_bins)?;
    out.write("size_histogram.csv", |w| write_size_histogram(w, &hist))?;
    let fit = fit_power_law(&hist, (a.fit_min, a.fit_max));
    if let Ok(fit) = &fit {
        out.json("power_law_fit.json", fit)?;
    }
    let total: usize = records.iter().map(|r| r.len()).sum();
    out.json(
        "avalanche_summary.json",
        &AvalancheSummary {
            runs,
            steps,
            mean_avalanches_per_run: total as f64 / runs as f64,
            overflow: hist.overflow,
            integrated_count: fit
                .as_ref()
                .ok()
                .map(|f| integrate_count(f, (1.0, f64::INFINITY)))
                .filter(|x| x.is_finite()),
        },
    )?;
    fit.map(|_| ())
}

#[derive(Serialize)]
struct GainsSummary {
    runs: usize,
    equilibration_steps: u64,
    tail_threshold: Option<f64>,
    observed_tail_mass: Option<f64>,
    predicted_tail_mass: Option<f64>,
    failed_fits: Vec<String>,
}

pub fn gains(config: &RunConfig, out: &Output) -> Result<()> {
    out.config(config)?;
    let lattice = config.lattice_config()?;
    let binning = config.gains.binning()?;
    let runs = config.run.ensemble_runs;
    let equilibration = config.run.equilibration_steps;
    let hist = ensemble_gains(&lattice, runs, equilibration, &binning)?;
    out.write("gains_histogram.csv", |w| write_gains_histogram(w, &hist))?;
    let overlay = apply_overlay(&hist, &config.gains.overlay()?);
    out.write("gains_overlay.csv", |w| write_gains_histogram(w, &overlay))?;

    let mut fits: Vec<GaussianFit> = Vec::new();
    let mut failed = Vec::new();
    for region in [
        GaussianRegion::Center(config.gains.center_points),
        GaussianRegion::Tails(config.gains.tail_points),
    ] {
        match fit_gaussian(&hist, region) {
            Ok(f) => fits.push(f),
            Err(e) => failed.push(format!("{region:?}: {e}")),
        }
    }
    out.json("gaussian_fits.json", &fits)?;
    let center = fits
        .iter()
        .find(|f| matches!(f.region, GaussianRegion::Center(_)));
    let tail = center.map(|f| (3.0 * f.sigma, tail_mass(&hist, f, 3.0 * f.sigma)));
    out.json(
        "gains_summary.json",
        &GainsSummary {
            runs,
            equilibration_steps: equilibration,
            tail_threshold: tail.map(|t| t.0),
            observed_tail_mass: tail.map(|t| t.1 .0),
            predicted_tail_mass: tail.map(|t| t.1 .1),
            failed_fits: failed,
        },
    )
}

/// Lattice series `L1..` and historical windows `N1..`.
struct SeriesSet {
    lattice: Vec<ReturnsSeries>,
    historical: Vec<ReturnsSeries>,
}

fn load_series(config: &RunConfig, sets: usize, bars: Option<&Path>) -> Result<SeriesSet> {
    let lattice_cfg = config.lattice_config()?;
    let equilibration = config.run.equilibration_steps;
    let fields = ensemble_fields(&lattice_cfg, sets, equilibration)?;
    let lattice = fields
        .into_iter()
        .enumerate()
        .map(|(i, values)| {
            let raw = ReturnsSeries {
                values,
                provenance: Provenance::Simulated {
                    seed: run_seed(lattice_cfg.seed, i as u64),
                    steps: equilibration,
                    w: lattice_cfg.variance_w,
                },
                boundary: Boundary::Periodic,
                lambda: 1.0,
            };
            rescale(&raw, config.series.lambda)
        })
        .collect::<Result<Vec<_>>>()?;

    let s = &config.series;
    let historical = match bars {
        None if !s.offsets.is_empty() => {
            return Err(Error::Input(
                "historical offsets given without --bars".into(),
            ))
        }
        None => Vec::new(),
        Some(path) => {
            let bars = ingest_minutes(path, &s.columns)?;
            s.offsets
                .iter()
                .map(|&off| historical_returns(&bars, off, s.window, s.gap_policy))
                .collect::<Result<_>>()?
        }
    };
    Ok(SeriesSet {
        lattice,
        historical,
    })
}

pub fn series(config: &RunConfig, out: &Output, sets: usize, bars: Option<&Path>) -> Result<()> {
    out.config(config)?;
    let all = load_series(config, sets, bars)?;
    for (tag, list) in [("L", &all.lattice), ("N", &all.historical)] {
        for (k, r) in list.iter().enumerate() {
            let p = prices(r, config.series.p0)?;
            let v = volatility(r)?;
            out.write(&format!("series_{tag}{}.csv", k + 1), |w| {
                write_series(w, r, &p, &v)
            })?;
        }
    }
    Ok(())
}

pub fn garch_fit(config: &RunConfig, out: &Output, sets: usize, bars: Option<&Path>) -> Result<()> {
    out.config(config)?;
    let all = load_series(config, sets, bars)?;
    let fit_all = |tag: &str, list: &[ReturnsSeries]| -> Result<Vec<FitReport>> {
        list.par_iter()
            .enumerate()
            .map(|(k, r)| {
                let id = format!("{tag}{}", k + 1);
                Ok(FitReport::new(id, &fit_values(&r.values, &config.garch)?))
            })
            .collect()
    };
    let lattice = fit_all("L", &all.lattice)?;
    let historical = fit_all("N", &all.historical)?;
    for report in lattice.iter().chain(&historical) {
        out.json(&format!("garch_{}.json", report.series_id), report)?;
    }
    for (k, (l, n)) in lattice.iter().zip(&historical).enumerate() {
        let table = ComparisonTable::new(format!("Set {}", k + 1), l.clone(), n.clone());
        out.text(&format!("garch_table_{}.txt", k + 1), &format!("{table}\n"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary {
    source: PathBuf,
    rows: usize,
    bars: usize,
    errors: Vec<String>,
}

pub fn ingest(config: &RunConfig, out: &Output, input: &Path, lenient: bool) -> Result<()> {
    out.config(config)?;
    let columns = &config.series.columns;
    let (bars, rows, errors) = if lenient {
        let report = ingest_minutes_lenient(input, columns)?;
        let errors = report.errors.iter().map(|e| e.to_string()).collect();
        (report.bars, report.rows, errors)
    } else {
        let bars = ingest_minutes(input, columns)?;
        let rows = bars.len();
        (bars, rows, Vec::new())
    };
    out.write("bars.csv", |w| write_bars(w, &bars))?;
    out.json(
        "ingest_summary.json",
        &IngestSummary {
            source: input.to_path_buf(),
            rows,
            bars: bars.len(),
            errors,
        },
    )
}

fn artifact_kind(name: &str) -> String {
    let stem = name.split('.').next().unwrap_or(name);
    stem.trim_end_matches(|c: char| c.is_ascii_digit())
        .trim_end_matches(['_', 'L', 'N'])
        .to_string()
}

pub fn report(config: &RunConfig, out: &Output) -> Result<()> {
    // artifacts were produced under the configuration recorded beside them
    let recorded = out.path(CONFIG_FILE);
    let config = if recorded.exists() {
        RunConfig::load(&recorded)?
    } else {
        config.clone()
    };
    let seeds = run_seeds(config.lattice.seed, config.run.ensemble_runs);
    let mut manifest = Manifest::new(&config, seeds);
    let mut names: Vec<String> = fs::read_dir(&out.dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n != MANIFEST_FILE)
        .collect();
    names.sort();
    for name in names {
        manifest.artifacts.push(Artifact::from_file(
            artifact_kind(&name),
            out.path(&name),
            &out.dir,
        )?);
    }
    out.text(MANIFEST_FILE, &(manifest.to_json()? + "\n"))
}
