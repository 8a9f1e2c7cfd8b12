//! Per-journal indicator reports and their JSON/CSV forms.

use std::collections::BTreeSet;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::curves::{
    classify_journal, mean_accrual_curve, observed_volumes, ClassThresholds, CountBasis, JournalClass,
};
use crate::ledger::{CitationProfile, JournalId, PublicationCounts};
use crate::metrics::{
    adjusted_impact, cited_half_life, immediacy_index, jcr_truncate, reliability_flags, round_to, scaling_factor,
    window_coverage, windowed_impact_factor, Flag, HalfLifeJcr, MetricsError, WindowPolicy,
};

/// Column order shared by the CSV header and the JSON object.
pub const REPORT_COLUMNS: [&str; 10] = [
    "journal",
    "eval_year",
    "jif",
    "immediacy",
    "half_life_exact",
    "half_life_jcr",
    "coverage",
    "scaling_factor",
    "adjusted_jif",
    "flags",
];

/// Every indicator for one journal and evaluation year. Values that could
/// not be computed are `None`; the reason is in `flags` or in the warnings
/// returned alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorReport {
    pub journal: JournalId,
    pub eval_year: i32,
    pub jif: Option<f64>,
    pub immediacy: Option<f64>,
    pub half_life_exact: Option<f64>,
    pub half_life_jcr: Option<HalfLifeJcr>,
    pub coverage: Option<f64>,
    pub scaling_factor: Option<f64>,
    pub adjusted_jif: Option<f64>,
    pub flags: BTreeSet<Flag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalReport {
    pub indicators: IndicatorReport,
    pub class: Option<JournalClass>,
    pub warnings: Vec<String>,
}

/// Computes all indicators for `profile` as of `eval_year`.
///
/// Only citations made up to `eval_year` enter the coverage estimate. The
/// half-life is the median (quantile 0.5); the policy's target quantile only
/// drives the scaling factor.
pub fn compute_report(
    profile: &CitationProfile,
    pubs: &PublicationCounts,
    eval_year: i32,
    policy: &WindowPolicy,
    classes: &ClassThresholds,
) -> JournalReport {
    let journal = profile.journal().clone();
    let mut flags = BTreeSet::new();
    let mut warnings = Vec::new();

    let jif = match windowed_impact_factor(profile, pubs, eval_year, policy.window_ages()) {
        Ok(v) => Some(v),
        Err(MetricsError::MissingDenominator { missing, numerator, .. }) => {
            flags.insert(Flag::MissingDenominator);
            warnings.push(format!(
                "{journal}: no citeable items for {missing:?}; impact factor numerator is {numerator}"
            ));
            None
        }
        Err(e) => unreachable!("impact factor only fails on denominators: {e}"),
    };
    let immediacy = match immediacy_index(profile, pubs, eval_year) {
        Ok(v) => Some(v),
        Err(_) => {
            flags.insert(Flag::MissingDenominator);
            None
        }
    };

    let half_life_exact = cited_half_life(profile, eval_year, 0.5);
    flags.extend(reliability_flags(profile, eval_year, half_life_exact));

    let volumes = observed_volumes(profile, eval_year, CountBasis::Total);
    let coverage = match mean_accrual_curve(&volumes, policy.horizon() as usize) {
        Ok(mean) => match window_coverage(&mean, policy) {
            Ok(c) => Some(c),
            Err(e) => {
                flags.insert(Flag::ZeroWindowCitations);
                warnings.push(format!("{journal}: {e}"));
                None
            }
        },
        Err(e) => {
            warnings.push(format!("{journal}: coverage unavailable: {e}"));
            None
        }
    };

    let scaling = match coverage {
        Some(c) if c > 0.0 => scaling_factor(c, policy.target_quantile()).ok(),
        Some(_) => {
            flags.insert(Flag::ZeroWindowCitations);
            None
        }
        None => None,
    };
    let adjusted = match (jif, scaling) {
        (Some(j), Some(s)) => Some(adjusted_impact(j, s)),
        _ => None,
    };

    JournalReport {
        indicators: IndicatorReport {
            journal,
            eval_year,
            jif,
            immediacy,
            half_life_exact,
            half_life_jcr: half_life_exact.map(jcr_truncate),
            coverage,
            scaling_factor: scaling,
            adjusted_jif: adjusted,
            flags,
        },
        class: coverage.map(|c| classify_journal(c, classes)),
        warnings,
    }
}

impl IndicatorReport {
    /// Copy with every numeric field rounded to `decimals` places. The
    /// `>10` token and the flags are unaffected.
    pub fn rounded(&self, decimals: u32) -> IndicatorReport {
        let r = |v: Option<f64>| v.map(|x| round_to(x, decimals));
        IndicatorReport {
            jif: r(self.jif),
            immediacy: r(self.immediacy),
            half_life_exact: r(self.half_life_exact),
            half_life_jcr: self.half_life_jcr.map(|h| match h {
                HalfLifeJcr::Years(y) => HalfLifeJcr::Years(round_to(y, decimals)),
                HalfLifeJcr::OverTen => HalfLifeJcr::OverTen,
            }),
            coverage: r(self.coverage),
            scaling_factor: r(self.scaling_factor),
            adjusted_jif: r(self.adjusted_jif),
            ..self.clone()
        }
    }

    pub fn flags_joined(&self) -> String {
        self.flags.iter().map(Flag::to_string).collect::<Vec<_>>().join(";")
    }

    /// CSV cells in [`REPORT_COLUMNS`] order. Numbers use the same text as
    /// the JSON form; undefined values are empty.
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.journal.to_string(),
            self.eval_year.to_string(),
            number_text(self.jif),
            number_text(self.immediacy),
            number_text(self.half_life_exact),
            match self.half_life_jcr {
                Some(HalfLifeJcr::Years(y)) => number_text(Some(y)),
                Some(HalfLifeJcr::OverTen) => ">10".to_string(),
                None => String::new(),
            },
            number_text(self.coverage),
            number_text(self.scaling_factor),
            number_text(self.adjusted_jif),
            self.flags_joined(),
        ]
    }
}

/// Number formatting shared by the CSV and JSON writers.
pub fn number_text(v: Option<f64>) -> String {
    match v {
        Some(x) => serde_json::to_string(&x).expect("finite float"),
        None => String::new(),
    }
}

impl Serialize for IndicatorReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(REPORT_COLUMNS.len()))?;
        map.serialize_entry("journal", &self.journal)?;
        map.serialize_entry("eval_year", &self.eval_year)?;
        map.serialize_entry("jif", &self.jif)?;
        map.serialize_entry("immediacy", &self.immediacy)?;
        map.serialize_entry("half_life_exact", &self.half_life_exact)?;
        map.serialize_entry("half_life_jcr", &self.half_life_jcr)?;
        map.serialize_entry("coverage", &self.coverage)?;
        map.serialize_entry("scaling_factor", &self.scaling_factor)?;
        map.serialize_entry("adjusted_jif", &self.adjusted_jif)?;
        map.serialize_entry("flags", &self.flags)?;
        map.end()
    }
}
