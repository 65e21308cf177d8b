//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use instability_core::analysis::{self, BootstrapConfig};
use instability_core::prediction::prediction_report;
use instability_core::representation::representation_profile;
use instability_core::synth::{generate_ensemble, SynthConfig};
use instability_core::validity::{self, SubsampleConfig};
use instability_core::{EnsembleBundle, Measure, MetricKind, OpVariant, RepresentationOptions};
use serde_json::json;

use crate::bundle_io::{load_bundle, save_bundle};
use crate::digest::bundle_digest;
use crate::report::{Cell, Input, ReportDocument, Scale, Table};

#[derive(Debug, Clone, Parser)]
#[command(name = "instab", version, about = "Instability measures for seed ensembles of fine-tuned models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// Comma-separated measures: sd, pwd, kappa, jsd, svcca, op, cka.
    #[arg(long, global = true, value_delimiter = ',')]
    pub measures: Option<Vec<Measure>>,
    /// Layers for representation measures: `all`, `top`, or indices like `0,3`.
    #[arg(long, global = true)]
    pub layers: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Report file (json) or directory (csv); bundle directory for `synth`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report prediction measures unscaled instead of multiplied by 100.
    #[arg(long, global = true)]
    pub raw: bool,
    #[arg(long, global = true, value_enum, default_value_t = OpArg::Corrected)]
    pub op_variant: OpArg,
    /// Share of variance kept by SVCCA's truncation.
    #[arg(long, global = true, default_value_t = instability_core::representation::DEFAULT_SVCCA_THRESHOLD)]
    pub svcca_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpArg {
    Corrected,
    Literal,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Prediction measures and per-layer representation profiles.
    Measure { bundle: PathBuf },
    /// Validity tests.
    #[command(subcommand)]
    Validity(ValidityCommand),
    /// Kendall τ between group rankings under each pair of measures.
    Rank {
        #[arg(required = true, num_args = 1..)]
        bundles: Vec<PathBuf>,
    },
    /// Correlations between measures over resampled run groups.
    Bootstrap {
        bundle: PathBuf,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        /// Layer for representation measures: `top` or an index.
        #[arg(long, default_value = "top")]
        layer: String,
        /// Include the per-iteration score table.
        #[arg(long)]
        emit_scores: bool,
    },
    /// Write a synthetic bundle to `--out`.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Subcommand)]
pub enum ValidityCommand {
    /// Correlations between representation measures' layer profiles.
    Convergent { bundle: PathBuf },
    /// Dispersion of every measure across test-set subsamples.
    Subsample {
        bundle: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
    /// Profiles of successful versus failed runs.
    Runs { bundle: PathBuf },
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Layer widths, bottom first.
    #[arg(long, value_delimiter = ',', default_value = "16,16")]
    pub e: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub failed_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub failed_update_scale: f64,
    #[arg(long, default_value_t = 0.9)]
    pub failed_blend: f64,
    #[arg(long, default_value = "accuracy")]
    pub metric: MetricKind,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
}

const DEFAULT_REPRESENTATION: [Measure; 3] = [Measure::Svcca, Measure::Op, Measure::Cka];
const DEFAULT_ANALYSIS: [Measure; 6] = [
    Measure::Sd,
    Measure::Pwd,
    Measure::Kappa,
    Measure::Jsd,
    Measure::Op,
    Measure::Cka,
];

impl Shared {
    fn scale(&self) -> Scale {
        if self.raw {
            Scale::Raw
        } else {
            Scale::Percent
        }
    }

    fn options(&self) -> RepresentationOptions {
        RepresentationOptions {
            svcca_threshold: self.svcca_threshold,
            op_variant: match self.op_variant {
                OpArg::Corrected => OpVariant::Corrected,
                OpArg::Literal => OpVariant::Literal,
            },
        }
    }

    fn measures_or(&self, default: &[Measure]) -> Vec<Measure> {
        let mut m = self.measures.clone().unwrap_or_else(|| default.to_vec());
        m.sort();
        m.dedup();
        m
    }
}

fn measure_names(measures: &[Measure]) -> serde_json::Value {
    json!(measures.iter().map(|m| m.name()).collect::<Vec<_>>())
}

/// Records a bundle as an input and loads it; failures land in `doc.errors`.
fn open(doc: &mut ReportDocument, path: &Path) -> Option<EnsembleBundle> {
    let bundle = match load_bundle(path) {
        Ok(b) => b,
        Err(e) => {
            doc.errors.push(format!("loading bundle: {e}"));
            return None;
        }
    };
    match bundle_digest(path) {
        Ok(sha256) => doc.inputs.push(Input {
            path: path.display().to_string(),
            sha256,
        }),
        Err(e) => {
            doc.errors.push(format!("hashing bundle: {e}"));
            return None;
        }
    }
    Some(bundle)
}

fn common_params(doc: &mut ReportDocument, shared: &Shared, measures: &[Measure]) {
    doc.param("measures", measure_names(measures));
    if measures.iter().any(|m| m.is_representation()) {
        doc.param("op_variant", if shared.op_variant == OpArg::Literal { "literal" } else { "corrected" });
        doc.param("svcca_threshold", shared.svcca_threshold);
    }
}

fn parse_layers(spec: &str, layer_count: usize) -> Result<Vec<usize>, String> {
    match spec.trim() {
        "all" => Ok((0..layer_count).collect()),
        "top" if layer_count > 0 => Ok(vec![layer_count - 1]),
        "top" => Err("bundle has no layers".into()),
        list => list
            .split(',')
            .map(|s| {
                let l: usize = s.trim().parse().map_err(|_| format!("bad layer {s:?}"))?;
                if l >= layer_count {
                    return Err(format!("layer {l} out of range (bundle has {layer_count} layers)"));
                }
                Ok(l)
            })
            .collect(),
    }
}

/// Undefined or unavailable quantities; reported, not fatal.
fn is_soft(e: &instability_core::Error) -> bool {
    use instability_core::Error::*;
    matches!(
        e,
        MissingCapability { .. } | DegenerateMarginals | UndefinedCorrelation(_)
    )
}

fn correlation_table(name: &str, matrix: &analysis::CorrelationMatrix) -> Table {
    let mut columns = vec!["measure"];
    columns.extend(matrix.measures.iter().map(|m| m.name()));
    let mut t = Table::new(name, &columns);
    for (m, row) in matrix.measures.iter().zip(&matrix.values) {
        let mut cells = vec![Cell::from(*m)];
        cells.extend(row.iter().map(|&v| Cell::from(v)));
        t.push(cells);
    }
    t
}

pub fn cmd_measure(shared: &Shared, path: &Path) -> ReportDocument {
    let scale = shared.scale();
    let mut doc = ReportDocument::new("measure", scale);
    let measures = shared.measures_or(&Measure::ALL);
    common_params(&mut doc, shared, &measures);
    let layer_spec = shared.layers.clone().unwrap_or_else(|| "all".into());
    doc.param("layers", layer_spec.clone());
    let Some(bundle) = open(&mut doc, path) else {
        return doc;
    };

    let prediction: Vec<Measure> = measures.iter().copied().filter(|m| m.is_prediction()).collect();
    if !prediction.is_empty() {
        match prediction_report(&bundle) {
            Ok(report) => {
                let mut t = Table::new("prediction", &["measure", "value"]);
                for &m in &prediction {
                    t.push(vec![m.into(), report.get(m).map(|v| scale.measure(m, v)).into()]);
                }
                doc.results.push(t);
                let mut perf = Table::new("performance", &["run_id", "score"]);
                for (run, &s) in bundle.runs().iter().zip(&report.scores) {
                    perf.push(vec![run.run_id.clone().into(), scale.score(s).into()]);
                }
                perf.push(vec!["mean".into(), scale.score(report.mean_score).into()]);
                doc.results.push(perf);
                for (m, note) in report.notes {
                    if prediction.contains(&m) {
                        doc.annotations.push(format!("{m}: {note}"));
                    }
                }
            }
            Err(e) => doc.errors.push(format!("prediction measures: {e}")),
        }
    }

    let representation: Vec<Measure> = measures.iter().copied().filter(|m| m.is_representation()).collect();
    if !representation.is_empty() {
        let layers = match parse_layers(&layer_spec, bundle.layer_count()) {
            Ok(l) => l,
            Err(e) => {
                doc.errors.push(format!("--layers: {e}"));
                return doc;
            }
        };
        match representation_profile(&bundle, &representation, Some(&layers), &shared.options()) {
            Ok(profiles) => {
                let mut columns = vec!["layer"];
                columns.extend(profiles.iter().map(|p| p.measure.name()));
                let mut t = Table::new("representation", &columns);
                for (row, &layer) in layers.iter().enumerate() {
                    let mut cells = vec![Cell::from(layer)];
                    cells.extend(profiles.iter().map(|p| Cell::from(p.scores[row])));
                    t.push(cells);
                }
                doc.results.push(t);
            }
            Err(e) => doc.errors.push(format!("representation measures: {e}")),
        }
    }
    doc
}

pub fn cmd_convergent(shared: &Shared, path: &Path) -> ReportDocument {
    let mut doc = ReportDocument::new("validity convergent", shared.scale());
    let measures = shared.measures_or(&DEFAULT_REPRESENTATION);
    common_params(&mut doc, shared, &measures);
    let Some(bundle) = open(&mut doc, path) else {
        return doc;
    };
    match validity::convergent_validity(&bundle, &measures, &shared.options()) {
        Ok(r) => {
            let mut columns = vec!["layer"];
            columns.extend(r.measures.iter().map(|m| m.name()));
            let mut t = Table::new("profiles", &columns);
            for l in 0..bundle.layer_count() {
                let mut cells = vec![Cell::from(l)];
                cells.extend(r.profiles.iter().map(|p| Cell::from(p.scores[l])));
                t.push(cells);
            }
            doc.results.push(t);
            let matrix = analysis::CorrelationMatrix {
                measures: r.measures.clone(),
                values: r.matrix.iter().map(|row| row.iter().map(|&v| Some(v)).collect()).collect(),
            };
            doc.results.push(correlation_table("correlation", &matrix));
        }
        Err(e) => doc.errors.push(format!("convergent validity: {e}")),
    }
    doc
}

pub fn cmd_subsample(shared: &Shared, path: &Path, rate: f64, count: usize) -> ReportDocument {
    let scale = shared.scale();
    let mut doc = ReportDocument::new("validity subsample", scale);
    let measures = shared.measures_or(&Measure::ALL);
    common_params(&mut doc, shared, &measures);
    doc.param("rate", rate);
    doc.param("count", count);
    doc.param("seed", shared.seed);
    let Some(bundle) = open(&mut doc, path) else {
        return doc;
    };
    let config = SubsampleConfig {
        rate,
        count,
        seed: shared.seed,
        measures,
        options: shared.options(),
    };
    match validity::subsample_consistency(&bundle, &config) {
        Ok(r) => {
            let mut scores = Table::new("subsample_scores", &["subsample", "measure", "layer", "value"]);
            let mut dispersion = Table::new("dispersion", &["measure", "layer", "coefficient_of_variation"]);
            let mut summary = Table::new("summary", &["measure", "max_coefficient_of_variation"]);
            for sm in &r.measures {
                let layer_cell = |i: usize| sm.layers.get(i).map_or(Cell::Null, |&l| Cell::from(l));
                for (s, row) in sm.scores.iter().enumerate() {
                    for (i, &v) in row.iter().enumerate() {
                        scores.push(vec![s.into(), sm.measure.into(), layer_cell(i), scale.measure(sm.measure, v).into()]);
                    }
                }
                for (i, &cv) in sm.coefficient_of_variation.iter().enumerate() {
                    dispersion.push(vec![sm.measure.into(), layer_cell(i), cv.into()]);
                }
                summary.push(vec![sm.measure.into(), sm.max_coefficient_of_variation().into()]);
            }
            let mut sizes = Table::new("subsamples", &["subsample", "size", "first_index", "last_index"]);
            for (s, idx) in r.indices.iter().enumerate() {
                sizes.push(vec![s.into(), idx.len().into(), idx[0].into(), idx[idx.len() - 1].into()]);
            }
            doc.results.extend([summary, dispersion, scores, sizes]);
            for (m, note) in r.notes {
                doc.annotations.push(format!("{m}: {note}"));
            }
        }
        Err(e) => doc.errors.push(format!("subsample validity: {e}")),
    }
    doc
}

pub fn cmd_runs(shared: &Shared, path: &Path) -> ReportDocument {
    let scale = shared.scale();
    let mut doc = ReportDocument::new("validity runs", scale);
    let measures = shared.measures_or(&DEFAULT_REPRESENTATION);
    common_params(&mut doc, shared, &measures);
    let Some(bundle) = open(&mut doc, path) else {
        return doc;
    };
    let split = validity::split_runs(&bundle);
    let mut runs = Table::new("runs", &["run_id", "accuracy", "group"]);
    for (i, run) in bundle.runs().iter().enumerate() {
        let group = if split.failed_indices.contains(&i) { "failed" } else { "successful" };
        runs.push(vec![run.run_id.clone().into(), scale.score(split.accuracies[i]).into(), group.into()]);
    }
    let mut summary = Table::new("summary", &["key", "value"]);
    summary.push(vec!["majority_baseline".into(), scale.score(split.majority_baseline).into()]);
    summary.push(vec!["successful_count".into(), split.successful.len().into()]);
    summary.push(vec!["failed_count".into(), split.failed.len().into()]);
    doc.results.extend([summary, runs]);

    match validity::run_split_comparison(&bundle, &measures, &shared.options()) {
        Ok(cmp) => {
            let mut t = Table::new("profiles", &["measure", "layer", "successful", "failed"]);
            for p in &cmp.profiles {
                for (i, &l) in p.layers.iter().enumerate() {
                    t.push(vec![p.measure.into(), l.into(), p.successful[i].into(), p.failed[i].into()]);
                }
            }
            doc.results.push(t);
        }
        Err(e) => doc.errors.push(format!("run split comparison: {e}")),
    }
    doc
}

fn same_shape(a: &EnsembleBundle, b: &EnsembleBundle) -> bool {
    a.n() == b.n() && a.num_classes() == b.num_classes() && a.layer_widths() == b.layer_widths()
}

pub fn cmd_rank(shared: &Shared, paths: &[PathBuf]) -> ReportDocument {
    let scale = shared.scale();
    let mut doc = ReportDocument::new("rank", scale);
    let requested = shared.measures_or(&DEFAULT_ANALYSIS);
    common_params(&mut doc, shared, &requested);
    if paths.len() < 3 {
        doc.errors.push(format!("rank needs at least 3 bundles, got {}", paths.len()));
        return doc;
    }
    let mut bundles = Vec::with_capacity(paths.len());
    for p in paths {
        match open(&mut doc, p) {
            Some(b) => bundles.push(b),
            None => return doc,
        }
    }
    for (p, b) in paths.iter().zip(&bundles).skip(1) {
        if !same_shape(&bundles[0], b) {
            doc.errors.push(format!(
                "{}: dataset shape differs from {} (n, classes or layer widths)",
                p.display(),
                paths[0].display()
            ));
            return doc;
        }
    }

    // score measure by measure so one unavailable measure only drops itself
    let options = shared.options();
    let mut kept = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    'measures: for &m in &requested {
        let mut column = Vec::with_capacity(bundles.len());
        for (p, b) in paths.iter().zip(&bundles) {
            match analysis::group_scores(b, p.display().to_string(), &[m], &options) {
                Ok(g) => column.push(g.scores[&m]),
                Err(e) if is_soft(&e) => {
                    doc.annotations.push(format!("{m} dropped: {}: {e}", p.display()));
                    continue 'measures;
                }
                Err(e) => {
                    doc.errors.push(format!("{}: {m}: {e}", p.display()));
                    return doc;
                }
            }
        }
        kept.push(m);
        columns.push(column);
    }
    let groups: Vec<analysis::GroupScores> = paths
        .iter()
        .enumerate()
        .map(|(g, p)| analysis::GroupScores {
            group_id: p.display().to_string(),
            scores: kept.iter().zip(&columns).map(|(&m, c)| (m, c[g])).collect(),
        })
        .collect();

    let mut header = vec!["group"];
    header.extend(kept.iter().map(|m| m.name()));
    let mut t = Table::new("scores", &header);
    for g in &groups {
        let mut cells = vec![Cell::from(g.group_id.clone())];
        cells.extend(kept.iter().map(|&m| Cell::from(scale.measure(m, g.scores[&m]))));
        t.push(cells);
    }
    doc.results.push(t);
    if kept.is_empty() {
        return doc;
    }
    match analysis::rank_groups(&groups) {
        Ok(tau) => {
            for (a, b) in tau.undefined_pairs() {
                doc.annotations.push(format!("kendall tau undefined for {a} vs {b}: tied scores"));
            }
            doc.results.push(correlation_table("kendall_tau", &tau));
        }
        Err(e) => doc.errors.push(format!("ranking: {e}")),
    }
    doc
}

pub fn cmd_bootstrap(shared: &Shared, path: &Path, iters: usize, layer: &str, emit_scores: bool) -> ReportDocument {
    let scale = shared.scale();
    let mut doc = ReportDocument::new("bootstrap", scale);
    let mut measures = shared.measures_or(&DEFAULT_ANALYSIS);
    common_params(&mut doc, shared, &measures);
    doc.param("iters", iters);
    doc.param("layer", layer);
    doc.param("seed", shared.seed);
    doc.param("emit_scores", emit_scores);
    let Some(bundle) = open(&mut doc, path) else {
        return doc;
    };
    if measures.contains(&Measure::Jsd) && !bundle.has_probabilities() {
        doc.annotations.push("jsd dropped: bundle has no class probabilities".into());
        measures.retain(|&m| m != Measure::Jsd);
    }
    let layer_index = if measures.iter().any(|m| m.is_representation()) {
        match parse_layers(layer, bundle.layer_count()) {
            Ok(l) if l.len() == 1 => Some(l[0]),
            Ok(_) => {
                doc.errors.push("--layer takes a single layer".into());
                return doc;
            }
            Err(e) => {
                doc.errors.push(format!("--layer: {e}"));
                return doc;
            }
        }
    } else {
        None
    };
    let config = BootstrapConfig {
        iterations: iters,
        seed: shared.seed,
        measures,
        layer: layer_index,
        options: shared.options(),
    };
    match analysis::bootstrap_correlations(&bundle, &config) {
        Ok(r) => {
            for (a, b) in r.correlation.undefined_pairs() {
                doc.annotations.push(format!("correlation undefined for {a} vs {b}: constant scores"));
            }
            doc.results.push(correlation_table("correlation", &r.correlation));
            if emit_scores {
                let mut header = vec!["iteration"];
                header.extend(r.measures.iter().map(|m| m.name()));
                let mut t = Table::new("scores", &header);
                for (b, row) in r.scores.iter().enumerate() {
                    let mut cells = vec![Cell::from(b)];
                    cells.extend(r.measures.iter().zip(row).map(|(&m, &v)| Cell::from(scale.measure(m, v))));
                    t.push(cells);
                }
                doc.results.push(t);
            }
        }
        Err(e) => doc.errors.push(format!("bootstrap: {e}")),
    }
    doc
}

pub fn synth_config(shared: &Shared, args: &SynthArgs) -> SynthConfig {
    SynthConfig {
        dataset_name: args.name.clone(),
        n: args.n,
        k: args.k,
        layer_widths: args.e.clone(),
        m: args.m,
        noise_scale: args.noise,
        failed_fraction: args.failed_fraction,
        failed_update_scale: args.failed_update_scale,
        failed_blend: args.failed_blend,
        metric: args.metric,
        seed: shared.seed,
        ..SynthConfig::default()
    }
}

/// Result of running one command.
pub enum Outcome {
    Report(ReportDocument),
    Synth(Result<PathBuf, String>),
}

pub fn execute(cli: &Cli) -> Outcome {
    let s = &cli.shared;
    let report = match &cli.command {
        Command::Measure { bundle } => cmd_measure(s, bundle),
        Command::Validity(ValidityCommand::Convergent { bundle }) => cmd_convergent(s, bundle),
        Command::Validity(ValidityCommand::Subsample { bundle, rate, count }) => cmd_subsample(s, bundle, *rate, *count),
        Command::Validity(ValidityCommand::Runs { bundle }) => cmd_runs(s, bundle),
        Command::Rank { bundles } => cmd_rank(s, bundles),
        Command::Bootstrap {
            bundle,
            iters,
            layer,
            emit_scores,
        } => cmd_bootstrap(s, bundle, *iters, layer, *emit_scores),
        Command::Synth(args) => {
            let Some(out) = &s.out else {
                return Outcome::Synth(Err("synth requires --out <dir>".into()));
            };
            let result = generate_ensemble(&synth_config(s, args))
                .map_err(|e| e.to_string())
                .and_then(|b| save_bundle(&b, out).map_err(|e| e.to_string()))
                .map(|()| out.clone());
            return Outcome::Synth(result);
        }
    };
    Outcome::Report(report)
}

fn emit(doc: &ReportDocument, shared: &Shared) -> Result<(), String> {
    match (shared.format, &shared.out) {
        (Format::Json, None) => std::io::stdout()
            .write_all(doc.to_json().as_bytes())
            .map_err(|e| e.to_string()),
        (Format::Json, Some(path)) => std::fs::write(path, doc.to_json()).map_err(|e| format!("{}: {e}", path.display())),
        (Format::Csv, Some(dir)) => doc.write_csv(dir).map_err(|e| format!("{}: {e}", dir.display())),
        (Format::Csv, None) => Err("--format csv requires --out <dir>".into()),
    }
}

pub fn run(cli: Cli) -> ExitCode {
    if let Some(threads) = cli.shared.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("instab: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Outcome::Synth(Ok(_)) => ExitCode::SUCCESS,
        Outcome::Synth(Err(e)) => {
            eprintln!("instab: {e}");
            ExitCode::FAILURE
        }
        Outcome::Report(doc) => {
            if let Err(e) = emit(&doc, &cli.shared) {
                eprintln!("instab: {e}");
                return ExitCode::from(2);
            }
            for e in &doc.errors {
                eprintln!("instab: error: {e}");
            }
            if doc.has_errors() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
