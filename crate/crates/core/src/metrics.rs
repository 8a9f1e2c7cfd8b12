//! Scalar journal indicators for one evaluation year.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::curves::AccrualCurve;
use crate::ledger::{CitationProfile, JournalId, PublicationCounts};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{journal}: no citeable-item count for {missing:?} (numerator was {numerator})")]
    MissingDenominator {
        journal: JournalId,
        missing: Vec<i32>,
        numerator: u64,
    },
    #[error("no citations over ages 0..={horizon}")]
    ZeroWindowCitations { horizon: u32 },
    #[error("mean curve covers ages 0..={available}, horizon needs 0..={horizon}")]
    ShortCurve { available: usize, horizon: u32 },
    #[error("coverage {0} is outside (0, 1]")]
    InvalidCoverage(f64),
    #[error("quantile {0} is outside (0, 1]")]
    InvalidQuantile(f64),
    #[error("citation window must name at least one age")]
    EmptyWindow,
    #[error("horizon {horizon} is shorter than the window's last age {max_age}")]
    HorizonTooShort { horizon: u32, max_age: u32 },
    #[error("field `{0}` has a zero mean")]
    ZeroFieldMean(String),
    #[error("journal {0} has no field assignment")]
    Unassigned(JournalId),
}

/// Which ages count toward the impact factor and how coverage is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPolicy {
    window_ages: BTreeSet<u32>,
    horizon: u32,
    target_quantile: f64,
}

impl WindowPolicy {
    pub fn new<I>(window_ages: I, horizon: u32, target_quantile: f64) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = u32>,
    {
        let window_ages: BTreeSet<u32> = window_ages.into_iter().collect();
        let Some(&max_age) = window_ages.last() else {
            return Err(MetricsError::EmptyWindow);
        };
        if horizon < max_age {
            return Err(MetricsError::HorizonTooShort { horizon, max_age });
        }
        check_quantile(target_quantile)?;
        Ok(WindowPolicy {
            window_ages,
            horizon,
            target_quantile,
        })
    }

    pub fn window_ages(&self) -> &BTreeSet<u32> {
        &self.window_ages
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn target_quantile(&self) -> f64 {
        self.target_quantile
    }
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy {
            window_ages: BTreeSet::from([1, 2]),
            horizon: 20,
            target_quantile: 0.5,
        }
    }
}

fn check_quantile(q: f64) -> Result<(), MetricsError> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidQuantile(q))
    }
}

/// Citations received in `eval_year`, indexed by age of the cited volume.
/// The vector runs to the oldest age with a recorded cell.
pub fn citations_by_age(profile: &CitationProfile, eval_year: i32) -> Vec<u64> {
    let mut by_age: Vec<u64> = Vec::new();
    for ((cited, citing), cell) in profile.cells() {
        if citing != eval_year {
            continue;
        }
        let age = (citing - cited) as usize;
        if by_age.len() <= age {
            by_age.resize(age + 1, 0);
        }
        by_age[age] += cell.total;
    }
    by_age
}

/// Citations in `eval_year` to the items published `age` years earlier, for
/// each age in `ages`, divided by those volumes' citeable items.
pub fn windowed_impact_factor(
    profile: &CitationProfile,
    pubs: &PublicationCounts,
    eval_year: i32,
    ages: &BTreeSet<u32>,
) -> Result<f64, MetricsError> {
    let journal = profile.journal();
    let mut numerator = 0u64;
    let mut denominator = 0u64;
    let mut missing = Vec::new();
    for &age in ages {
        let year = eval_year - age as i32;
        numerator += profile.cell(year, eval_year).total;
        match pubs.get(journal, year) {
            Some(n) => denominator += n,
            None => missing.push(year),
        }
    }
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(MetricsError::MissingDenominator {
            journal: journal.clone(),
            missing,
            numerator,
        });
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Two-year impact factor: citations in `eval_year` to the two preceding
/// volumes per citeable item in them. Self-citations count unless the
/// profile has been stripped.
pub fn impact_factor(profile: &CitationProfile, pubs: &PublicationCounts, eval_year: i32) -> Result<f64, MetricsError> {
    windowed_impact_factor(profile, pubs, eval_year, WindowPolicy::default().window_ages())
}

/// Same-year citations per same-year citeable item.
pub fn immediacy_index(
    profile: &CitationProfile,
    pubs: &PublicationCounts,
    eval_year: i32,
) -> Result<f64, MetricsError> {
    windowed_impact_factor(profile, pubs, eval_year, &BTreeSet::from([0]))
}

/// Age by which fraction `quantile` of the given per-age counts has accrued,
/// spreading each age's citations evenly over `[age, age + 1)`.
///
/// `None` when there are no citations.
///
/// # Panics
/// If `quantile` is outside `(0, 1]`.
pub fn quantile_age(counts: &[u64], quantile: f64) -> Option<f64> {
    assert!(quantile > 0.0 && quantile <= 1.0, "quantile {quantile} outside (0, 1]");
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let target = quantile * total as f64;
    let mut before = 0u64;
    for (age, &c) in counts.iter().enumerate() {
        let through = before + c;
        if through as f64 >= target {
            return Some(age as f64 + (target - before as f64) / c as f64);
        }
        before = through;
    }
    // Only reachable through rounding in `quantile * total` for quantile = 1.
    Some(counts.iter().rposition(|&c| c > 0).map_or(0.0, |a| a as f64 + 1.0))
}

/// Interpolated cited half-life (or other quantile) of the citations a
/// journal received in `eval_year`, without the 10-year cap.
pub fn cited_half_life(profile: &CitationProfile, eval_year: i32, quantile: f64) -> Option<f64> {
    quantile_age(&citations_by_age(profile, eval_year), quantile)
}

/// Half-life as printed in citation reports: capped at 10 years.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfLifeJcr {
    Years(f64),
    OverTen,
}

impl fmt::Display for HalfLifeJcr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HalfLifeJcr::Years(y) => write!(f, "{y}"),
            HalfLifeJcr::OverTen => f.write_str(">10"),
        }
    }
}

impl Serialize for HalfLifeJcr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            HalfLifeJcr::Years(y) => serializer.serialize_f64(*y),
            HalfLifeJcr::OverTen => serializer.serialize_str(">10"),
        }
    }
}

pub fn jcr_truncate(half_life: f64) -> HalfLifeJcr {
    if half_life > 10.0 {
        HalfLifeJcr::OverTen
    } else {
        HalfLifeJcr::Years(half_life)
    }
}

/// Fraction of the citations over ages `0..=horizon` that fall in the
/// impact-factor window.
pub fn window_coverage(mean_curve: &AccrualCurve, policy: &WindowPolicy) -> Result<f64, MetricsError> {
    let horizon = policy.horizon as usize;
    if mean_curve.values.len() <= horizon {
        return Err(MetricsError::ShortCurve {
            available: mean_curve.values.len().saturating_sub(1),
            horizon: policy.horizon,
        });
    }
    let total: f64 = mean_curve.values[..=horizon].iter().sum();
    if total <= 0.0 {
        return Err(MetricsError::ZeroWindowCitations {
            horizon: policy.horizon,
        });
    }
    let in_window: f64 = policy.window_ages.iter().map(|&a| mean_curve.values[a as usize]).sum();
    Ok(in_window / total)
}

/// Multiplier taking a window that captures `coverage` of citations to one
/// that captures `target_quantile` of them.
pub fn scaling_factor(coverage: f64, target_quantile: f64) -> Result<f64, MetricsError> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(MetricsError::InvalidCoverage(coverage));
    }
    check_quantile(target_quantile)?;
    Ok(target_quantile / coverage)
}

pub fn adjusted_impact(jif: f64, scaling_factor: f64) -> f64 {
    jif * scaling_factor
}

/// Divides each journal's value by the mean value of its field.
pub fn normalize_within_field(
    values: &BTreeMap<JournalId, f64>,
    fields: &BTreeMap<JournalId, String>,
) -> Result<BTreeMap<JournalId, f64>, MetricsError> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (journal, value) in values {
        let field = fields
            .get(journal)
            .ok_or_else(|| MetricsError::Unassigned(journal.clone()))?;
        let entry = sums.entry(field.as_str()).or_insert((0.0, 0));
        entry.0 += value;
        entry.1 += 1;
    }
    if let Some((field, _)) = sums.iter().find(|(_, (sum, n))| sum / *n as f64 == 0.0) {
        return Err(MetricsError::ZeroFieldMean(field.to_string()));
    }
    Ok(values
        .iter()
        .map(|(journal, value)| {
            let (sum, n) = sums[fields[journal].as_str()];
            (journal.clone(), value / (sum / n as f64))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Flag {
    HalfLifeUnreliable,
    MissingDenominator,
    ZeroWindowCitations,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::HalfLifeUnreliable => "HalfLifeUnreliable",
            Flag::MissingDenominator => "MissingDenominator",
            Flag::ZeroWindowCitations => "ZeroWindowCitations",
        })
    }
}

/// Years from the earliest volume in the profile through `eval_year`,
/// inclusive.
pub fn journal_age(profile: &CitationProfile, eval_year: i32) -> Option<i32> {
    profile.first_cited_year().map(|first| eval_year - first + 1)
}

/// A half-life is unreliable when the journal is younger than twice that
/// half-life: older citations cannot exist yet, which biases it short.
pub fn reliability_flags(profile: &CitationProfile, eval_year: i32, half_life: Option<f64>) -> BTreeSet<Flag> {
    let mut flags = BTreeSet::new();
    if let (Some(age), Some(h)) = (journal_age(profile, eval_year), half_life) {
        if (age as f64) < 2.0 * h {
            flags.insert(Flag::HalfLifeUnreliable);
        }
    }
    flags
}

/// Rounds to `decimals` places, halves away from zero.
pub fn round_to(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round() / scale
}

/// One decimal place, the precision citation reports print.
pub fn round1(x: f64) -> f64 {
    round_to(x, 1)
}
