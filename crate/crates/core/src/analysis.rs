//! Cross-group rankings and bootstrap correlations between measures.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bundle::EnsembleBundle;
use crate::error::{Error, Result};
use crate::measure::{self, Measure};
use crate::par;
use crate::prediction;
use crate::representation::{PairDistanceSet, RepresentationOptions};
use crate::rng;
use crate::stats;

/// Scalar instability scores of one group (e.g. one mitigation method).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupScores {
    pub group_id: String,
    pub scores: BTreeMap<Measure, f64>,
}

/// Scores every measure on `bundle`; representation measures use the top
/// layer.
pub fn group_scores(
    bundle: &EnsembleBundle,
    group_id: impl Into<String>,
    measures: &[Measure],
    options: &RepresentationOptions,
) -> Result<GroupScores> {
    let measures = measure::canonical(measures);
    let rep: Vec<Measure> = measures.iter().copied().filter(|m| m.is_representation()).collect();
    let mut scores = BTreeMap::new();
    if !rep.is_empty() {
        let top = top_layer(bundle)?;
        let distances = PairDistanceSet::compute(bundle, &rep, &[top], options)?;
        for p in distances.profiles(None)? {
            scores.insert(p.measure, p.scores[0]);
        }
    }
    let preds = bundle.prediction_set();
    for &m in measures.iter().filter(|m| m.is_prediction()) {
        let v = match m {
            Measure::Sd => stats::sd_of_scores(&bundle.performance_scores()?)?,
            Measure::Pwd => prediction::pairwise_disagreement(&preds)?,
            Measure::Kappa => prediction::fleiss_kappa_instability(&preds)?,
            _ => prediction::pairwise_jsd(&bundle.probability_set()?)?,
        };
        scores.insert(m, v);
    }
    Ok(GroupScores {
        group_id: group_id.into(),
        scores,
    })
}

fn top_layer(bundle: &EnsembleBundle) -> Result<usize> {
    match bundle.layer_count() {
        0 => Err(Error::LayerOutOfRange {
            layer: 0,
            layer_count: 0,
        }),
        l => Ok(l - 1),
    }
}

/// Pairwise correlations between measures. `None` marks an undefined
/// coefficient (a constant score vector).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationMatrix {
    pub measures: Vec<Measure>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    fn from_columns(measures: Vec<Measure>, columns: &[Vec<f64>], corr: fn(&[f64], &[f64]) -> Result<f64>) -> Self {
        let size = measures.len();
        let mut values = vec![vec![None; size]; size];
        for i in 0..size {
            let defined = columns[i].iter().any(|&v| v != columns[i][0]);
            if defined {
                values[i][i] = Some(1.0);
            }
            for j in i + 1..size {
                let r = corr(&columns[i], &columns[j]).ok();
                values[i][j] = r;
                values[j][i] = r;
            }
        }
        CorrelationMatrix { measures, values }
    }

    pub fn get(&self, a: Measure, b: Measure) -> Option<f64> {
        let i = self.measures.iter().position(|&m| m == a)?;
        let j = self.measures.iter().position(|&m| m == b)?;
        self.values[i][j]
    }

    /// Measure pairs whose coefficient is undefined, `a < b`.
    pub fn undefined_pairs(&self) -> Vec<(Measure, Measure)> {
        let mut out = Vec::new();
        for i in 0..self.measures.len() {
            for j in i + 1..self.measures.len() {
                if self.values[i][j].is_none() {
                    out.push((self.measures[i], self.measures[j]));
                }
            }
        }
        out
    }
}

/// Kendall τ-b between the groups' rankings under each pair of measures.
pub fn rank_groups(groups: &[GroupScores]) -> Result<CorrelationMatrix> {
    if groups.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "groups",
            reason: format!("ranking needs at least 3 groups, got {}", groups.len()),
        });
    }
    let measures: Vec<Measure> = groups[0].scores.keys().copied().collect();
    for g in &groups[1..] {
        if !g.scores.keys().copied().eq(measures.iter().copied()) {
            return Err(Error::InvalidParameter {
                name: "groups",
                reason: format!(
                    "group {} has a different measure set from group {}",
                    g.group_id, groups[0].group_id
                ),
            });
        }
    }
    let columns: Vec<Vec<f64>> = measures
        .iter()
        .map(|m| groups.iter().map(|g| g.scores[m]).collect())
        .collect();
    Ok(CorrelationMatrix::from_columns(measures, &columns, stats::kendall_tau))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub seed: u64,
    pub measures: Vec<Measure>,
    /// Layer for representation measures; the top layer when `None`.
    pub layer: Option<usize>,
    pub options: RepresentationOptions,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            iterations: 1000,
            seed: 0,
            measures: vec![
                Measure::Sd,
                Measure::Pwd,
                Measure::Kappa,
                Measure::Jsd,
                Measure::Op,
                Measure::Cka,
            ],
            layer: None,
            options: RepresentationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapResult {
    pub iterations: usize,
    pub seed: u64,
    /// Layer used for representation measures.
    pub layer: Option<usize>,
    pub measures: Vec<Measure>,
    /// Resampled run indices per iteration.
    pub samples: Vec<Vec<usize>>,
    /// `[iteration][measure]`
    pub scores: Vec<Vec<f64>>,
    /// Pearson r between the measures' score columns.
    pub correlation: CorrelationMatrix,
}

impl BootstrapResult {
    pub fn column(&self, measure: Measure) -> Option<Vec<f64>> {
        let i = self.measures.iter().position(|&m| m == measure)?;
        Some(self.scores.iter().map(|row| row[i]).collect())
    }
}

/// Resamples `m` runs with replacement `iterations` times and scores every
/// measure on each multiset. Pairwise terms run over all position pairs, so a
/// run drawn twice contributes a zero-distance pair.
pub fn bootstrap_correlations(bundle: &EnsembleBundle, config: &BootstrapConfig) -> Result<BootstrapResult> {
    if config.iterations < 2 {
        return Err(Error::InvalidParameter {
            name: "iterations",
            reason: format!("need at least 2 iterations, got {}", config.iterations),
        });
    }
    let m = bundle.m();
    let measures = measure::canonical(&config.measures);
    if measures.is_empty() {
        return Err(Error::InvalidParameter {
            name: "measures",
            reason: "no measures requested".into(),
        });
    }
    let rep: Vec<Measure> = measures.iter().copied().filter(|m| m.is_representation()).collect();
    let layer = if rep.is_empty() {
        None
    } else {
        let layer = match config.layer {
            Some(l) => l,
            None => top_layer(bundle)?,
        };
        Some(layer)
    };
    let distances = match layer {
        Some(l) => Some(PairDistanceSet::compute(bundle, &rep, &[l], &config.options)?),
        None => None,
    };

    let needs_scores = measures.contains(&Measure::Sd);
    let performance = if needs_scores {
        bundle.performance_scores()?
    } else {
        Vec::new()
    };
    let preds = bundle.prediction_set();
    let jsd_pairs = if measures.contains(&Measure::Jsd) {
        Some(bundle.probability_set()?.pair_means())
    } else {
        None
    };

    let samples: Vec<Vec<usize>> = (0..config.iterations)
        .map(|b| rng::resample_indices(config.seed, b as u64, m))
        .collect();

    let rows = par::map_indexed(config.iterations, |b| -> Result<Vec<f64>> {
        let members = &samples[b];
        let resampled = if measures.iter().any(|m| matches!(m, Measure::Pwd | Measure::Kappa)) {
            Some(preds.select_runs(members))
        } else {
            None
        };
        measures
            .iter()
            .map(|&measure| match measure {
                Measure::Sd => {
                    let picked: Vec<f64> = members.iter().map(|&i| performance[i]).collect();
                    stats::sd_of_scores(&picked)
                }
                Measure::Pwd => prediction::pairwise_disagreement(resampled.as_ref().expect("resampled")),
                Measure::Kappa => prediction::fleiss_kappa_instability(resampled.as_ref().expect("resampled")),
                Measure::Jsd => Ok(jsd_pairs.as_ref().expect("jsd pairs").mean_over(members)),
                rep => {
                    let set = distances.as_ref().expect("distances");
                    let l = set.layers()[0];
                    Ok(set.matrix(rep, l).expect("matrix computed").mean_over(members))
                }
            })
            .collect()
    });
    let scores = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let columns: Vec<Vec<f64>> = (0..measures.len())
        .map(|i| scores.iter().map(|row| row[i]).collect())
        .collect();
    let correlation = CorrelationMatrix::from_columns(measures.clone(), &columns, stats::pearson_r);
    Ok(BootstrapResult {
        iterations: config.iterations,
        seed: config.seed,
        layer,
        measures,
        samples,
        scores,
        correlation,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConsistencyRegression {
    pub measures: Vec<Measure>,
    /// Per combination, the mean over measures of each measure's
    /// standardized average correlation with the other measures.
    pub mean_standardized: Vec<f64>,
    pub sd_values: Vec<f64>,
    /// Pearson r between `mean_standardized` and `sd_values`.
    pub r: f64,
}

/// Relates how consistent the measures are with one another (per
/// combination of dataset and method) to that combination's SD.
pub fn stability_consistency_regression(results: &[(BootstrapResult, f64)]) -> Result<ConsistencyRegression> {
    if results.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "results",
            reason: format!("need at least 3 combinations, got {}", results.len()),
        });
    }
    let measures = results[0].0.measures.clone();
    if measures.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "measures",
            reason: "need at least 2 measures to correlate".into(),
        });
    }
    // averages[measure][combination]
    let mut averages = vec![Vec::with_capacity(results.len()); measures.len()];
    for (result, _) in results {
        if result.measures != measures {
            return Err(Error::InvalidParameter {
                name: "results",
                reason: "bootstrap results use different measure sets".into(),
            });
        }
        let values = &result.correlation.values;
        for (i, avg) in averages.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (j, v) in values[i].iter().enumerate() {
                if j == i {
                    continue;
                }
                sum += v.ok_or_else(|| {
                    Error::UndefinedCorrelation(format!(
                        "{} vs {} is undefined in a bootstrap result",
                        measures[i], measures[j]
                    ))
                })?;
            }
            avg.push(sum / (measures.len() - 1) as f64);
        }
    }
    let standardized = averages
        .iter()
        .map(|a| stats::zscore_standardize(a))
        .collect::<Result<Vec<_>>>()?;
    let mean_standardized: Vec<f64> = (0..results.len())
        .map(|c| standardized.iter().map(|s| s[c]).sum::<f64>() / measures.len() as f64)
        .collect();
    let sd_values: Vec<f64> = results.iter().map(|(_, sd)| *sd).collect();
    let r = stats::pearson_r(&mean_standardized, &sd_values)?;
    Ok(ConsistencyRegression {
        measures,
        mean_standardized,
        sd_values,
        r,
    })
}
