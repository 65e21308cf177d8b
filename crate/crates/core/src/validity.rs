//! Validity tests for instability measures.
//!
//! * Convergent validity: representation measures that track the same
//!   concept should correlate across layers.
//! * Concurrent validity, two ways: measures should barely move between
//!   i.i.d. subsamples of the test set, and should separate successful from
//!   failed runs (failed runs move less, so they score lower).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bundle::EnsembleBundle;
use crate::error::{Error, Result};
use crate::math;
use crate::measure::{self, Measure};
use crate::prediction;
use crate::representation::{LayerInstabilityProfile, PairDistanceSet, RepresentationOptions};
use crate::rng;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergentReport {
    pub measures: Vec<Measure>,
    pub profiles: Vec<LayerInstabilityProfile>,
    /// Pearson r between the measures' layer profiles; symmetric with a
    /// unit diagonal.
    pub matrix: Vec<Vec<f64>>,
}

pub fn convergent_validity(
    bundle: &EnsembleBundle,
    measures: &[Measure],
    options: &RepresentationOptions,
) -> Result<ConvergentReport> {
    if bundle.layer_count() < 3 {
        return Err(Error::InvalidParameter {
            name: "layers",
            reason: format!(
                "convergent validity needs at least 3 layers, bundle has {}",
                bundle.layer_count()
            ),
        });
    }
    let layers: Vec<usize> = (0..bundle.layer_count()).collect();
    let profiles = PairDistanceSet::compute(bundle, measures, &layers, options)?.profiles(None)?;
    for p in &profiles {
        if p.scores.iter().all(|&s| s == p.scores[0]) {
            return Err(Error::UndefinedCorrelation(format!(
                "{} profile is constant across layers",
                p.measure
            )));
        }
    }
    let size = profiles.len();
    let mut matrix = vec![vec![1.0; size]; size];
    for i in 0..size {
        for j in i + 1..size {
            let r = stats::pearson_r(&profiles[i].scores, &profiles[j].scores).map_err(|e| match e {
                Error::UndefinedCorrelation(why) => Error::UndefinedCorrelation(format!(
                    "{} vs {}: {why}",
                    profiles[i].measure, profiles[j].measure
                )),
                other => other,
            })?;
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    Ok(ConvergentReport {
        measures: profiles.iter().map(|p| p.measure).collect(),
        profiles,
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleConfig {
    /// Fraction of test samples per subsample.
    pub rate: f64,
    pub count: usize,
    pub seed: u64,
    pub measures: Vec<Measure>,
    pub options: RepresentationOptions,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        SubsampleConfig {
            rate: 0.5,
            count: 4,
            seed: 0,
            measures: Measure::ALL.to_vec(),
            options: RepresentationOptions::default(),
        }
    }
}

/// One measure's scores across subsamples.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubsampleMeasure {
    pub measure: Measure,
    /// Layer indices for representation measures; empty for scalar
    /// prediction measures.
    pub layers: Vec<usize>,
    /// `[subsample][layer]` (a single column for prediction measures).
    pub scores: Vec<Vec<f64>>,
    /// Coefficient of variation (sample SD / |mean|) across subsamples, per
    /// layer. Zero when every subsample agrees exactly.
    pub coefficient_of_variation: Vec<f64>,
}

impl SubsampleMeasure {
    pub fn max_coefficient_of_variation(&self) -> f64 {
        self.coefficient_of_variation.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubsampleReport {
    pub rate: f64,
    pub subsample_count: usize,
    pub subsample_size: usize,
    pub seed: u64,
    /// Test rows in each subsample, ascending.
    pub indices: Vec<Vec<usize>>,
    pub measures: Vec<SubsampleMeasure>,
    /// Measures skipped for lack of inputs.
    pub notes: Vec<(Measure, String)>,
}

fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    let sd = stats::sd_of_scores(values)?;
    if sd == 0.0 {
        return Ok(0.0);
    }
    Ok(sd / stats::mean(values).abs())
}

/// Scores of every requested measure on one (sub)bundle, in `measures` order.
fn scores_on(
    bundle: &EnsembleBundle,
    measures: &[Measure],
    options: &RepresentationOptions,
) -> Result<Vec<Vec<f64>>> {
    let rep: Vec<Measure> = measures.iter().copied().filter(|m| m.is_representation()).collect();
    let profiles = if rep.is_empty() {
        Vec::new()
    } else {
        let layers: Vec<usize> = (0..bundle.layer_count()).collect();
        PairDistanceSet::compute(bundle, &rep, &layers, options)?.profiles(None)?
    };
    let preds = bundle.prediction_set();
    measures
        .iter()
        .map(|&m| {
            Ok(match m {
                Measure::Sd => vec![stats::sd_of_scores(&bundle.performance_scores()?)?],
                Measure::Pwd => vec![prediction::pairwise_disagreement(&preds)?],
                Measure::Kappa => vec![prediction::fleiss_kappa_instability(&preds)?],
                Measure::Jsd => vec![prediction::pairwise_jsd(&bundle.probability_set()?)?],
                rep => profiles
                    .iter()
                    .find(|p| p.measure == rep)
                    .map(|p| p.scores.clone())
                    .expect("profile computed for every representation measure"),
            })
        })
        .collect()
}

/// Recomputes each measure on `count` subsamples of `floor(rate · n)` test
/// rows drawn without replacement. Representations are re-centered within
/// each subsample.
pub fn subsample_consistency(bundle: &EnsembleBundle, config: &SubsampleConfig) -> Result<SubsampleReport> {
    if !(config.rate > 0.0 && config.rate <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "rate",
            reason: format!("{} is not in (0, 1]", config.rate),
        });
    }
    if config.count < 2 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "need at least 2 subsamples to measure dispersion".into(),
        });
    }
    let size = math::floor(config.rate * bundle.n() as f64) as usize;
    if size < 2 {
        return Err(Error::InvalidParameter {
            name: "rate",
            reason: format!("subsample size {size} is below 2"),
        });
    }

    let mut measures = measure::canonical(&config.measures);
    let mut notes = Vec::new();
    if measures.contains(&Measure::Jsd) {
        if let Err(e) = bundle.probability_set() {
            notes.push((Measure::Jsd, format!("{e}")));
            measures.retain(|&m| m != Measure::Jsd);
        }
    }

    let indices: Vec<Vec<usize>> = (0..config.count)
        .map(|s| rng::subsample_indices(config.seed, s as u64, bundle.n(), size))
        .collect();
    let mut per_subsample = Vec::with_capacity(config.count);
    for rows in &indices {
        let sub = bundle.select_items(rows)?;
        per_subsample.push(scores_on(&sub, &measures, &config.options)?);
    }

    let layer_count = bundle.layer_count();
    let results = measures
        .iter()
        .enumerate()
        .map(|(mi, &measure)| {
            let scores: Vec<Vec<f64>> = per_subsample.iter().map(|s| s[mi].clone()).collect();
            let width = scores[0].len();
            let coefficient_of_variation = (0..width)
                .map(|col| {
                    let column: Vec<f64> = scores.iter().map(|row| row[col]).collect();
                    coefficient_of_variation(&column)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SubsampleMeasure {
                measure,
                layers: if measure.is_representation() {
                    (0..layer_count).collect()
                } else {
                    Vec::new()
                },
                scores,
                coefficient_of_variation,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SubsampleReport {
        rate: config.rate,
        subsample_count: config.count,
        subsample_size: size,
        seed: config.seed,
        indices,
        measures: results,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSplit {
    pub successful: Vec<String>,
    pub failed: Vec<String>,
    pub successful_indices: Vec<usize>,
    pub failed_indices: Vec<usize>,
    /// Accuracy of always predicting the most frequent gold label.
    pub majority_baseline: f64,
    /// Per-run accuracy, in run order.
    pub accuracies: Vec<f64>,
}

/// A run fails when its accuracy is at most the majority baseline.
pub fn split_runs(bundle: &EnsembleBundle) -> RunSplit {
    let gold = bundle.gold();
    let n = gold.len();
    let mut counts = vec![0usize; bundle.num_classes()];
    for &g in gold {
        counts[g as usize] += 1;
    }
    let majority = counts.iter().copied().max().unwrap_or(0);

    let mut split = RunSplit {
        successful: Vec::new(),
        failed: Vec::new(),
        successful_indices: Vec::new(),
        failed_indices: Vec::new(),
        majority_baseline: majority as f64 / n as f64,
        accuracies: Vec::with_capacity(bundle.m()),
    };
    for (i, run) in bundle.runs().iter().enumerate() {
        let correct = run.predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
        split.accuracies.push(correct as f64 / n as f64);
        // compare counts, not rounded fractions
        if correct <= majority {
            split.failed.push(run.run_id.clone());
            split.failed_indices.push(i);
        } else {
            split.successful.push(run.run_id.clone());
            split.successful_indices.push(i);
        }
    }
    split
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitProfile {
    pub measure: Measure,
    pub layers: Vec<usize>,
    pub successful: Vec<f64>,
    pub failed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSplitComparison {
    pub split: RunSplit,
    pub successful_count: usize,
    pub failed_count: usize,
    pub profiles: Vec<SplitProfile>,
}

/// Representation profiles computed within each group of [`split_runs`].
pub fn run_split_comparison(
    bundle: &EnsembleBundle,
    measures: &[Measure],
    options: &RepresentationOptions,
) -> Result<RunSplitComparison> {
    let split = split_runs(bundle);
    for (group, members) in [
        ("successful", &split.successful_indices),
        ("failed", &split.failed_indices),
    ] {
        if members.len() < 2 {
            return Err(Error::InsufficientGroup {
                group,
                size: members.len(),
            });
        }
    }
    let layers: Vec<usize> = (0..bundle.layer_count()).collect();
    let distances = PairDistanceSet::compute(bundle, measures, &layers, options)?;
    let ok = distances.profiles(Some(&split.successful_indices))?;
    let bad = distances.profiles(Some(&split.failed_indices))?;
    let profiles = ok
        .into_iter()
        .zip(bad)
        .map(|(s, f)| SplitProfile {
            measure: s.measure,
            layers: s.layers,
            successful: s.scores,
            failed: f.scores,
        })
        .collect();
    Ok(RunSplitComparison {
        successful_count: split.successful_indices.len(),
        failed_count: split.failed_indices.len(),
        split,
        profiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_ensemble, SynthConfig};
    use crate::{MetricKind, RunRecord};
    use alloc::collections::BTreeMap;

    fn label_bundle(gold: Vec<u32>, runs: &[&[u32]]) -> EnsembleBundle {
        let runs = runs
            .iter()
            .enumerate()
            .map(|(i, p)| RunRecord {
                run_id: format!("r{i}"),
                seed: i as u64,
                predictions: p.to_vec(),
                probabilities: None,
                layers: Vec::new(),
                tags: BTreeMap::new(),
            })
            .collect();
        EnsembleBundle::new("t", MetricKind::Accuracy, 2, 0, gold, runs).unwrap()
    }

    #[test]
    fn split_threshold_is_inclusive() {
        // baseline 3/5 = 0.6
        let b = label_bundle(
            vec![1, 1, 1, 0, 0],
            &[&[1, 1, 1, 0, 0], &[1, 1, 1, 1, 1], &[0, 0, 0, 0, 0]],
        );
        let s = split_runs(&b);
        assert_eq!(s.majority_baseline, 0.6);
        assert_eq!(s.successful, ["r0"]);
        assert_eq!(s.failed, ["r1", "r2"]);
    }

    #[test]
    fn synthetic_failures_are_recovered_and_less_unstable() {
        let cfg = SynthConfig {
            n: 80,
            layer_widths: vec![8, 8, 8],
            m: 20,
            noise_scale: 0.3,
            failed_fraction: 0.45,
            ..Default::default()
        };
        let b = generate_ensemble(&cfg).unwrap();
        let cmp = run_split_comparison(&b, &[Measure::Cka, Measure::Op], &Default::default()).unwrap();
        assert_eq!(cmp.failed_count, 9);
        assert!(cmp.split.failed.iter().all(|id| b.runs().iter().any(|r| &r.run_id == id && r.tags["kind"] == "failed")));
        for p in &cmp.profiles {
            for (s, f) in p.successful.iter().zip(&p.failed) {
                assert!(f < s, "{}: failed {f} !< successful {s}", p.measure);
            }
        }
    }

    #[test]
    fn insufficient_group() {
        let cfg = SynthConfig::default();
        let b = generate_ensemble(&cfg).unwrap();
        assert!(matches!(
            run_split_comparison(&b, &[Measure::Cka], &Default::default()),
            Err(Error::InsufficientGroup { group: "failed", size: 0 })
        ));
    }

    #[test]
    fn full_rate_subsamples_have_zero_dispersion() {
        let b = generate_ensemble(&SynthConfig::default()).unwrap();
        let cfg = SubsampleConfig {
            rate: 1.0,
            count: 3,
            seed: 7,
            ..Default::default()
        };
        let r = subsample_consistency(&b, &cfg).unwrap();
        for m in &r.measures {
            assert_eq!(m.max_coefficient_of_variation(), 0.0, "{}", m.measure);
        }
        assert_eq!(r, subsample_consistency(&b, &cfg).unwrap());
    }

    #[test]
    fn convergent_needs_three_layers() {
        let b = generate_ensemble(&SynthConfig::default()).unwrap();
        assert!(convergent_validity(&b, &[Measure::Cka, Measure::Op], &Default::default()).is_err());
        let b = generate_ensemble(&SynthConfig {
            layer_widths: vec![6, 6, 6, 6],
            ..Default::default()
        })
        .unwrap();
        let r = convergent_validity(&b, &[Measure::Op, Measure::Cka, Measure::Svcca], &Default::default()).unwrap();
        assert_eq!(r.measures, [Measure::Svcca, Measure::Op, Measure::Cka]);
        for i in 0..3 {
            assert_eq!(r.matrix[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(r.matrix[i][j], r.matrix[j][i]);
            }
        }
    }
}
