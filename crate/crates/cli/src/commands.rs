//! Subcommand implementations. Every artifact embeds a [`Provenance`] block
//! with the tool version, config hash, and input hashes.

use std::path::{Path, PathBuf};

use serde::Serialize;

use goreg_core::basis::BSplineBasis;
use goreg_core::empdist::{build_empirical_distribution, BuildOptions, Grid};
use goreg_core::error::{Error, Result};
use goreg_core::evalcv::{cross_validate, CVConfig, CVReport, ModelKind};
use goreg_core::features::{assemble_design, compute_features, IndexOrder};
use goreg_core::ingest::{
    attach_outcomes, ingest_series, read_minute_csv, read_outcomes_csv, read_subjects_file,
    write_subjects_file, CsvFormat, ObservationSet,
};
use goreg_core::io::{read_design, write_design};
use goreg_core::odds::OddsEvaluator;
use goreg_core::penreg::{fit, FitOptions, FitResult, GlmSpec};
use goreg_core::synth::{generate_synthetic, SyntheticScenario};

use crate::config::PipelineConfig;
use crate::provenance::Provenance;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Sidecar provenance path for binary artifacts: `<out>.provenance.json`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    path.with_file_name(name)
}

pub fn run_ingest(
    config: &PipelineConfig,
    input: &Path,
    format: CsvFormat,
    outcomes: &Path,
    out: &Path,
) -> Result<()> {
    if !outcomes.exists() {
        return Err(Error::Config(format!(
            "outcomes file {} does not exist",
            outcomes.display()
        )));
    }
    if !input.exists() {
        return Err(Error::Config(format!("input file {} does not exist", input.display())));
    }
    let mut series = read_minute_csv(input, format)?;
    let outcome_records = read_outcomes_csv(outcomes)?;
    attach_outcomes(&mut series, &outcome_records);
    let (accepted, rejected) = ingest_series(&series);
    for (id, reason) in &rejected {
        eprintln!("rejected {id}: {reason}");
    }
    if accepted.is_empty() {
        return Err(Error::Degenerate("no subjects passed quality control".into()));
    }
    write_subjects_file(out, &accepted)?;
    let prov = Provenance::new(config, &[input, outcomes])?;
    write_json(&sidecar(out), &prov)?;
    eprintln!("wrote {} subjects to {} ({} rejected)", accepted.len(), out.display(), rejected.len());
    Ok(())
}

pub fn run_synth(
    config: &PipelineConfig,
    scenario_path: Option<&Path>,
    seed: u64,
    out: &Path,
    truth_out: Option<&Path>,
) -> Result<()> {
    let scenario = match scenario_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str::<SyntheticScenario>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SyntheticScenario::default(),
    };
    let (subjects, truths) = generate_synthetic(&scenario, seed)?;
    write_subjects_file(out, &subjects)?;
    if let Some(tp) = truth_out {
        write_json(tp, &truths)?;
    }
    let mut stamped = config.clone();
    stamped.seed = seed;
    let inputs: Vec<&Path> = scenario_path.into_iter().collect();
    let prov = Provenance::new(&stamped, &inputs)?;
    write_json(&sidecar(out), &prov)?;
    eprintln!("wrote {} synthetic subjects to {}", subjects.len(), out.display());
    Ok(())
}

/// Long-format CSV export of gridded odds objects for one or all subjects.
pub fn run_odds(
    config: &PipelineConfig,
    subjects_path: &Path,
    index: usize,
    subject_id: Option<&str>,
    out: &Path,
) -> Result<()> {
    let subjects = load_subjects(subjects_path, subject_id)?;
    let grid = Grid::new(config.grid_points, config.d_max)?;
    let policy = config.policy()?;
    let build = BuildOptions { drop_zeros: config.drop_zeros };

    let mut w = csv::Writer::from_path(out)?;
    match index {
        1 => {
            w.write_record(["subject_id", "u", "value"])?;
            for s in &subjects {
                let dist = build_empirical_distribution(s, &grid, build)?;
                let mut ev = OddsEvaluator::new(&dist, policy);
                for (g, v) in ev.odds1_vector().into_iter().enumerate() {
                    w.write_record([
                        s.subject_id.as_str(),
                        &format!("{}", grid.point(g)),
                        &format!("{v}"),
                    ])?;
                }
            }
        }
        2 => {
            w.write_record(["subject_id", "u1", "u2", "value"])?;
            for s in &subjects {
                let dist = build_empirical_distribution(s, &grid, build)?;
                let mut ev = OddsEvaluator::new(&dist, policy);
                let surf = ev.odds2_surface();
                for g1 in 0..grid.len() {
                    for g2 in 0..grid.len() {
                        w.write_record([
                            s.subject_id.as_str(),
                            &format!("{}", grid.point(g1)),
                            &format!("{}", grid.point(g2)),
                            &format!("{}", surf[(g1, g2)]),
                        ])?;
                    }
                }
            }
        }
        4 => {
            // the full 4-index object is G^4 entries; export its two rank-1
            // factor matrices instead
            w.write_record(["subject_id", "factor", "u1", "u2", "value"])?;
            for s in &subjects {
                let dist = build_empirical_distribution(s, &grid, build)?;
                let mut ev = OddsEvaluator::new(&dist, policy);
                let (a, c) = ev.factor_odds4();
                for (name, m) in [("a", &a), ("c", &c)] {
                    for g1 in 0..grid.len() {
                        for g2 in 0..grid.len() {
                            w.write_record([
                                s.subject_id.as_str(),
                                name,
                                &format!("{}", grid.point(g1)),
                                &format!("{}", grid.point(g2)),
                                &format!("{}", m[(g1, g2)]),
                            ])?;
                        }
                    }
                }
            }
        }
        other => return Err(Error::Config(format!("index must be 1, 2 or 4, got {other}"))),
    }
    w.flush()?;
    Ok(())
}

pub fn run_features(
    config: &PipelineConfig,
    subjects_path: &Path,
    index: usize,
    out: &Path,
) -> Result<()> {
    let order = match index {
        1 => IndexOrder::One,
        2 => IndexOrder::Two,
        4 => IndexOrder::Four,
        other => return Err(Error::Config(format!("index must be 1, 2 or 4, got {other}"))),
    };
    let mut subjects = read_subjects_file(subjects_path)?;
    subjects.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    let grid = Grid::new(config.grid_points, config.d_max)?;
    let basis = BSplineBasis::from_config(&config.basis())?;
    let policy = config.policy()?;
    let build = BuildOptions { drop_zeros: config.drop_zeros };

    let mut tensors = Vec::with_capacity(subjects.len());
    let mut outcomes = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let dist = build_empirical_distribution(s, &grid, build)?;
        tensors.push(compute_features(&dist, &s.subject_id, &basis, policy, order)?);
        outcomes.push(s.outcome);
    }
    let design = assemble_design(&tensors, &outcomes)?;
    write_design(&design, out)?;
    let prov = Provenance::new(config, &[subjects_path])?;
    write_json(&sidecar(out), &prov)?;
    eprintln!(
        "wrote {} x {} design to {} ({} capped evaluations)",
        design.n(),
        design.p(),
        out.display(),
        design.total_cap_count
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitArtifact {
    fit: FitResult,
    provenance: Provenance,
}

pub fn run_fit(config: &PipelineConfig, design_path: &Path, out: &Path) -> Result<()> {
    let design = read_design(design_path)?;
    let penalty = config.penalty_spec()?;
    let result = fit(&design, GlmSpec::gaussian(), &penalty, &FitOptions::default())?;
    let artifact = FitArtifact {
        fit: result,
        provenance: Provenance::new(config, &[design_path])?,
    };
    write_json(out, &artifact)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct CvArtifact {
    report: CVReport,
    provenance: Provenance,
}

pub fn run_cv(
    config: &PipelineConfig,
    subjects_path: &Path,
    model: ModelKind,
    out: &Path,
) -> Result<()> {
    let subjects = read_subjects_file(subjects_path)?;
    let mut cv = CVConfig::new(model, config.penalty_spec()?, config.seed);
    cv.n_folds = config.folds;
    cv.inner_folds = config.inner_folds;
    cv.n_replications = config.replications;
    cv.grid_points = config.grid_points;
    cv.d_max = config.d_max;
    cv.basis = config.basis();
    cv.policy = config.policy()?;
    cv.n_lambda = config.n_lambda;
    cv.lambda_ratio = config.lambda_ratio;
    cv.drop_zeros = config.drop_zeros;
    let report = cross_validate(&subjects, &cv)?;
    let artifact = CvArtifact {
        report,
        provenance: Provenance::new(config, &[subjects_path])?,
    };
    write_json(out, &artifact)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Density,
    Odds1,
    Odds2,
    ResidualLife,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density" => Ok(PlotKind::Density),
            "odds1" => Ok(PlotKind::Odds1),
            "odds2" => Ok(PlotKind::Odds2),
            "residual_life" => Ok(PlotKind::ResidualLife),
            other => Err(Error::Config(format!("unknown plot kind `{other}`"))),
        }
    }
}

pub fn run_plotdata(
    config: &PipelineConfig,
    subjects_path: &Path,
    kind: PlotKind,
    subject_id: Option<&str>,
    out: &Path,
) -> Result<()> {
    match kind {
        PlotKind::Odds1 => return run_odds(config, subjects_path, 1, subject_id, out),
        PlotKind::Odds2 => return run_odds(config, subjects_path, 2, subject_id, out),
        PlotKind::Density | PlotKind::ResidualLife => {}
    }
    let subjects = load_subjects(subjects_path, subject_id)?;
    let grid = Grid::new(config.grid_points, config.d_max)?;
    let policy = config.policy()?;
    let build = BuildOptions { drop_zeros: config.drop_zeros };
    let mut w = csv::Writer::from_path(out)?;
    match kind {
        PlotKind::Density => {
            w.write_record(["subject_id", "u", "value"])?;
            for s in &subjects {
                let dist = build_empirical_distribution(s, &grid, build)?;
                for g in 0..grid.len() {
                    w.write_record([
                        s.subject_id.as_str(),
                        &format!("{}", grid.point(g)),
                        &format!("{}", dist.pmf[g]),
                    ])?;
                }
            }
        }
        PlotKind::ResidualLife => {
            // t is the conditioning point (0 = unconditional), u the offset
            w.write_record(["subject_id", "t", "u", "value"])?;
            for s in &subjects {
                let dist = build_empirical_distribution(s, &grid, build)?;
                let mut ev = OddsEvaluator::new(&dist, policy);
                let surf = ev.residual_life_surface();
                for t in 0..=grid.len() {
                    let t_value = if t == 0 { 0.0 } else { grid.point(t - 1) };
                    for u in 0..=grid.len() {
                        let u_value = u as f64 * grid.cell_width();
                        w.write_record([
                            s.subject_id.as_str(),
                            &format!("{t_value}"),
                            &format!("{u_value}"),
                            &format!("{}", surf[(t, u)]),
                        ])?;
                    }
                }
            }
        }
        PlotKind::Odds1 | PlotKind::Odds2 => unreachable!(),
    }
    w.flush()?;
    Ok(())
}

fn load_subjects(path: &Path, subject_id: Option<&str>) -> Result<Vec<ObservationSet>> {
    let subjects = read_subjects_file(path)?;
    match subject_id {
        None => Ok(subjects),
        Some(id) => {
            let filtered: Vec<ObservationSet> =
                subjects.into_iter().filter(|s| s.subject_id == id).collect();
            if filtered.is_empty() {
                return Err(Error::Config(format!("subject `{id}` not found in {}", path.display())));
            }
            Ok(filtered)
        }
    }
}
