use core::fmt;
use core::str::FromStr;

/// The seven instability measures.
///
/// The declaration order (coarse to fine granularity) is the canonical
/// order used for every report and correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Measure {
    /// Standard deviation of per-run performance scores.
    Sd,
    /// Pairwise disagreement of discrete predictions.
    Pwd,
    /// One minus Fleiss' Kappa over run predictions.
    Kappa,
    /// Pairwise Jensen-Shannon divergence of class probabilities.
    Jsd,
    Svcca,
    /// Orthogonal Procrustes distance.
    Op,
    /// Linear centered kernel alignment distance.
    Cka,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::Sd,
        Measure::Pwd,
        Measure::Kappa,
        Measure::Jsd,
        Measure::Svcca,
        Measure::Op,
        Measure::Cka,
    ];

    pub const PREDICTION: [Measure; 4] = [Measure::Sd, Measure::Pwd, Measure::Kappa, Measure::Jsd];

    pub const REPRESENTATION: [Measure; 3] = [Measure::Svcca, Measure::Op, Measure::Cka];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Sd => "sd",
            Measure::Pwd => "pwd",
            Measure::Kappa => "kappa",
            Measure::Jsd => "jsd",
            Measure::Svcca => "svcca",
            Measure::Op => "op",
            Measure::Cka => "cka",
        }
    }

    pub fn is_prediction(self) -> bool {
        !self.is_representation()
    }

    pub fn is_representation(self) -> bool {
        matches!(self, Measure::Svcca | Measure::Op | Measure::Cka)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseMeasureError(pub alloc::string::String);

impl fmt::Display for ParseMeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown measure {:?} (expected one of sd, pwd, kappa, jsd, svcca, op, cka)",
            self.0
        )
    }
}

impl core::error::Error for ParseMeasureError {}

impl FromStr for Measure {
    type Err = ParseMeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_ascii_lowercase();
        Ok(match lowered.as_str() {
            "sd" => Measure::Sd,
            "pwd" => Measure::Pwd,
            "kappa" => Measure::Kappa,
            "jsd" => Measure::Jsd,
            "svcca" => Measure::Svcca,
            "op" => Measure::Op,
            "cka" => Measure::Cka,
            _ => return Err(ParseMeasureError(lowered)),
        })
    }
}

/// Sorts and deduplicates a requested measure list into canonical order.
pub(crate) fn canonical(measures: &[Measure]) -> alloc::vec::Vec<Measure> {
    let mut out = measures.to_vec();
    out.sort_unstable();
    out.dedup();
    out
}
