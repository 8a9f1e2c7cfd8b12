//! Per-volume citation accrual curves.
//!
//! A volume is everything a journal published in one year. Its raw curve
//! holds the citations it received at each age (citing year minus
//! publication year); the cumulative curve is the running total, and the
//! standardized curve rescales the cumulative one so that the count through
//! age 2 reads 100. Standardized curves from different volumes are directly
//! comparable regardless of volume size.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ledger::{self_reference_rate, CitationProfile, JournalId};

/// Age whose cumulative count anchors standardization.
pub const ANCHOR_AGE: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("expected a {expected} curve, got {found}")]
    WrongKind { expected: CurveKind, found: CurveKind },
    #[error("curve for {journal} {pub_year:?} has {len} ages; standardizing needs at least {}", ANCHOR_AGE + 1)]
    TooShort {
        journal: JournalId,
        pub_year: Option<i32>,
        len: usize,
    },
    #[error("volume {journal} {pub_year:?} has no citations through age {ANCHOR_AGE}")]
    DegenerateVolume { journal: JournalId, pub_year: Option<i32> },
    #[error("no volume is old enough to observe age {age}")]
    NoObservations { age: usize },
    #[error("volume {0} appears more than once")]
    DuplicateVolume(i32),
    #[error("anomaly detection needs at least 3 volumes, got {0}")]
    TooFewVolumes(usize),
    #[error("hare threshold {hare} must exceed tortoise threshold {tortoise}")]
    InvalidClassThresholds { hare: f64, tortoise: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Raw,
    Cumulative,
    Standardized,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::Raw => "raw",
            CurveKind::Cumulative => "cumulative",
            CurveKind::Standardized => "standardized",
        })
    }
}

/// Which part of each cell a curve counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountBasis {
    #[default]
    Total,
    NonSelf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccrualCurve {
    pub journal: JournalId,
    /// `None` for curves averaged over several volumes.
    pub pub_year: Option<i32>,
    pub kind: CurveKind,
    /// Indexed by age, starting at 0.
    pub values: Vec<f64>,
    /// Per-age number of contributing volumes, set on averaged curves.
    pub observations: Option<Vec<usize>>,
}

impl AccrualCurve {
    pub fn max_age(&self) -> Option<usize> {
        self.values.len().checked_sub(1)
    }

    fn expect_kind(&self, expected: CurveKind) -> Result<(), CurveError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(CurveError::WrongKind {
                expected,
                found: self.kind,
            })
        }
    }
}

/// Raw accrual curve of the `pub_year` volume for ages `0..=max_age`.
pub fn accrual_curve(profile: &CitationProfile, pub_year: i32, max_age: u32, basis: CountBasis) -> AccrualCurve {
    let values = (0..=max_age as i32)
        .map(|age| {
            let cell = profile.cell(pub_year, pub_year + age);
            let count = match basis {
                CountBasis::Total => cell.total,
                CountBasis::NonSelf => cell.non_self(),
            };
            count as f64
        })
        .collect();
    AccrualCurve {
        journal: profile.journal().clone(),
        pub_year: Some(pub_year),
        kind: CurveKind::Raw,
        values,
        observations: None,
    }
}

/// Raw curves for every volume cited by `through_year`, each truncated at
/// the last age observable by then.
pub fn observed_volumes(profile: &CitationProfile, through_year: i32, basis: CountBasis) -> Vec<AccrualCurve> {
    let mut years: Vec<i32> = profile
        .cells()
        .filter(|((_, citing), _)| *citing <= through_year)
        .map(|((cited, _), _)| cited)
        .collect();
    years.dedup();
    years
        .into_iter()
        .map(|year| accrual_curve(profile, year, (through_year - year) as u32, basis))
        .collect()
}

pub fn cumulative(curve: &AccrualCurve) -> Result<AccrualCurve, CurveError> {
    curve.expect_kind(CurveKind::Raw)?;
    let values = curve
        .values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    Ok(AccrualCurve {
        kind: CurveKind::Cumulative,
        values,
        ..curve.clone()
    })
}

/// Cumulative count through the anchor age, ages 0 to 2 inclusive.
fn anchor_count(cumulative: &[f64]) -> f64 {
    cumulative[ANCHOR_AGE]
}

pub fn standardize_to_age2(curve: &AccrualCurve) -> Result<AccrualCurve, CurveError> {
    curve.expect_kind(CurveKind::Cumulative)?;
    if curve.values.len() <= ANCHOR_AGE {
        return Err(CurveError::TooShort {
            journal: curve.journal.clone(),
            pub_year: curve.pub_year,
            len: curve.values.len(),
        });
    }
    let anchor = anchor_count(&curve.values);
    if anchor <= 0.0 {
        return Err(CurveError::DegenerateVolume {
            journal: curve.journal.clone(),
            pub_year: curve.pub_year,
        });
    }
    let mut values: Vec<f64> = curve.values.iter().map(|v| v * 100.0 / anchor).collect();
    values[ANCHOR_AGE] = 100.0;
    Ok(AccrualCurve {
        kind: CurveKind::Standardized,
        values,
        ..curve.clone()
    })
}

/// Ragged per-age mean of raw volume curves over ages `0..=horizon`.
///
/// Each age is averaged only over the volumes whose curve reaches it, so the
/// early ages rest on many volumes and the late ones on few. The per-age
/// counts are kept in `observations`.
pub fn mean_accrual_curve(curves: &[AccrualCurve], horizon: usize) -> Result<AccrualCurve, CurveError> {
    let mut seen = std::collections::BTreeSet::new();
    for curve in curves {
        curve.expect_kind(CurveKind::Raw)?;
        if let Some(year) = curve.pub_year {
            if !seen.insert(year) {
                return Err(CurveError::DuplicateVolume(year));
            }
        }
    }
    let journal = match curves.first() {
        Some(c) => c.journal.clone(),
        None => return Err(CurveError::NoObservations { age: 0 }),
    };

    let mut values = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon + 1);
    for age in 0..=horizon {
        let (sum, n) = curves
            .iter()
            .filter_map(|c| c.values.get(age))
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            return Err(CurveError::NoObservations { age });
        }
        values.push(sum / n as f64);
        observations.push(n);
    }
    Ok(AccrualCurve {
        journal,
        pub_year: None,
        kind: CurveKind::Raw,
        values,
        observations: Some(observations),
    })
}

/// Standardized curves for every volume that can be standardized. Volumes
/// that cannot (too young, or nothing through age 2) come back as errors
/// alongside so callers can warn about them.
pub fn standardized_volumes(raw: &[AccrualCurve]) -> (Vec<AccrualCurve>, Vec<CurveError>) {
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for curve in raw {
        match cumulative(curve).and_then(|c| standardize_to_age2(&c)) {
            Ok(s) => ok.push(s),
            Err(e) => skipped.push(e),
        }
    }
    (ok, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AnomalyReason {
    SelfCitationSpike,
    AccrualDeviation,
}

impl fmt::Display for AnomalyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnomalyReason::SelfCitationSpike => "SelfCitationSpike",
            AnomalyReason::AccrualDeviation => "AccrualDeviation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyFinding {
    pub journal: JournalId,
    pub pub_year: i32,
    pub age: usize,
    /// Percentage points: the self-citation rate for self-citation spikes,
    /// the signed distance from the median standardized curve otherwise.
    pub deviation: f64,
    pub reason: AnomalyReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyThresholds {
    /// Self-citation share in one citing year, as a fraction.
    pub self_rate: f64,
    /// Distance from the median standardized curve, in percentage points.
    pub deviation_pp: f64,
}

impl Default for AnomalyThresholds {
    fn default() -> Self {
        AnomalyThresholds {
            self_rate: 0.5,
            deviation_pp: 25.0,
        }
    }
}

/// Self-citation rate of each volume in each citing year that cited it,
/// keyed by publication year. Years with no citations are left out.
pub fn volume_self_rates(profile: &CitationProfile) -> BTreeMap<i32, Vec<(i32, f64)>> {
    let mut rates: BTreeMap<i32, Vec<(i32, f64)>> = BTreeMap::new();
    for ((cited, citing), _) in profile.cells() {
        if let Ok(rate) = self_reference_rate(profile, citing, [cited]) {
            rates.entry(cited).or_default().push((citing, rate));
        }
    }
    rates
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Pointwise median over the volumes that reach each age, or `None` where
/// fewer than three do.
pub fn median_curve(standardized: &[AccrualCurve]) -> Vec<Option<f64>> {
    let longest = standardized.iter().map(|c| c.values.len()).max().unwrap_or(0);
    (0..longest)
        .map(|age| {
            let mut at_age: Vec<f64> = standardized.iter().filter_map(|c| c.values.get(age).copied()).collect();
            (at_age.len() >= 3).then(|| median(&mut at_age))
        })
        .collect()
}

/// Flags volumes whose self-citation rate or standardized accrual departs
/// from the journal's norm.
///
/// At most one finding per volume and reason is emitted, at the age of the
/// largest departure (earliest on ties). Accrual is compared against the
/// pointwise median of all volumes, only at ages observed by at least three.
pub fn detect_anomalous_volumes(
    standardized: &[AccrualCurve],
    self_rates: &BTreeMap<i32, Vec<(i32, f64)>>,
    thresholds: &AnomalyThresholds,
) -> Result<Vec<AnomalyFinding>, CurveError> {
    if standardized.len() < 3 {
        return Err(CurveError::TooFewVolumes(standardized.len()));
    }
    for curve in standardized {
        curve.expect_kind(CurveKind::Standardized)?;
    }
    let journal = standardized[0].journal.clone();
    let reference = median_curve(standardized);

    let mut findings = Vec::new();
    for curve in standardized {
        let Some(pub_year) = curve.pub_year else { continue };

        if let Some(rates) = self_rates.get(&pub_year) {
            let worst =
                rates
                    .iter()
                    .filter(|(_, r)| *r >= thresholds.self_rate)
                    .fold(None::<(i32, f64)>, |best, &(y, r)| match best {
                        Some((_, br)) if br >= r => best,
                        _ => Some((y, r)),
                    });
            if let Some((citing, rate)) = worst {
                findings.push(AnomalyFinding {
                    journal: journal.clone(),
                    pub_year,
                    age: (citing - pub_year) as usize,
                    deviation: rate * 100.0,
                    reason: AnomalyReason::SelfCitationSpike,
                });
            }
        }

        let worst = curve
            .values
            .iter()
            .zip(&reference)
            .enumerate()
            .filter_map(|(age, (v, r))| r.map(|r| (age, v - r)))
            .filter(|(_, d)| d.abs() >= thresholds.deviation_pp)
            .fold(None::<(usize, f64)>, |best, (age, d)| match best {
                Some((_, bd)) if bd.abs() >= d.abs() => best,
                _ => Some((age, d)),
            });
        if let Some((age, deviation)) = worst {
            findings.push(AnomalyFinding {
                journal: journal.clone(),
                pub_year,
                age,
                deviation,
                reason: AnomalyReason::AccrualDeviation,
            });
        }
    }
    Ok(findings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JournalClass {
    Hare,
    Tortoise,
    Intermediate,
}

impl fmt::Display for JournalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JournalClass::Hare => "Hare",
            JournalClass::Tortoise => "Tortoise",
            JournalClass::Intermediate => "Intermediate",
        })
    }
}

/// Window-coverage cut-offs separating fast- from slow-accruing journals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassThresholds {
    hare: f64,
    tortoise: f64,
}

impl ClassThresholds {
    pub fn new(hare: f64, tortoise: f64) -> Result<Self, CurveError> {
        if hare.is_nan() || tortoise.is_nan() || hare <= tortoise {
            return Err(CurveError::InvalidClassThresholds { hare, tortoise });
        }
        Ok(ClassThresholds { hare, tortoise })
    }

    pub fn hare(&self) -> f64 {
        self.hare
    }

    pub fn tortoise(&self) -> f64 {
        self.tortoise
    }
}

impl Default for ClassThresholds {
    fn default() -> Self {
        ClassThresholds {
            hare: 0.25,
            tortoise: 0.15,
        }
    }
}

pub fn classify_journal(coverage: f64, thresholds: &ClassThresholds) -> JournalClass {
    if coverage >= thresholds.hare {
        JournalClass::Hare
    } else if coverage <= thresholds.tortoise {
        JournalClass::Tortoise
    } else {
        JournalClass::Intermediate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j() -> JournalId {
        JournalId::new("T").unwrap()
    }

    fn raw(year: i32, values: &[f64]) -> AccrualCurve {
        AccrualCurve {
            journal: j(),
            pub_year: Some(year),
            kind: CurveKind::Raw,
            values: values.to_vec(),
            observations: None,
        }
    }

    fn std_curve(year: i32, raw_values: &[f64]) -> AccrualCurve {
        standardize_to_age2(&cumulative(&raw(year, raw_values)).unwrap()).unwrap()
    }

    #[test]
    fn accrual_curve_reads_cells() {
        let mut p = CitationProfile::new(j());
        p.add(1996, 1996, 2, 0);
        p.add(1996, 1998, 7, 0);
        let c = accrual_curve(&p, 1996, 3, CountBasis::Total);
        assert_eq!(c.values, vec![2.0, 0.0, 7.0, 0.0]);
        assert_eq!(accrual_curve(&p, 1990, 2, CountBasis::Total).values, vec![0.0; 3]);

        let mut h = CitationProfile::new(j());
        h.add(1993, 1993, 44, 38);
        assert_eq!(accrual_curve(&h, 1993, 0, CountBasis::NonSelf).values, vec![6.0]);
    }

    #[test]
    fn cumulative_sums() {
        assert_eq!(
            cumulative(&raw(1, &[2.0, 0.0, 7.0, 0.0])).unwrap().values,
            vec![2.0, 2.0, 9.0, 9.0]
        );
        assert_eq!(cumulative(&raw(1, &[0.0; 4])).unwrap().values, vec![0.0; 4]);
        assert_eq!(cumulative(&raw(1, &[5.0])).unwrap().values, vec![5.0]);
        let c = cumulative(&raw(1, &[5.0])).unwrap();
        assert!(matches!(cumulative(&c), Err(CurveError::WrongKind { .. })));
    }

    #[test]
    fn standardize_pins_age_two() {
        let mut c = raw(1, &[5.0, 15.0, 25.0, 40.0, 60.0]);
        c.kind = CurveKind::Cumulative;
        let s = standardize_to_age2(&c).unwrap();
        assert_eq!(s.values, vec![20.0, 60.0, 100.0, 160.0, 240.0]);

        let mut z = raw(1, &[0.0, 0.0, 0.0, 4.0]);
        z.kind = CurveKind::Cumulative;
        assert!(matches!(
            standardize_to_age2(&z),
            Err(CurveError::DegenerateVolume { .. })
        ));

        let mut short = raw(1, &[1.0, 2.0]);
        short.kind = CurveKind::Cumulative;
        assert!(matches!(standardize_to_age2(&short), Err(CurveError::TooShort { .. })));
    }

    #[test]
    fn ragged_mean() {
        let m = mean_accrual_curve(&[raw(1990, &[1.0, 2.0, 3.0]), raw(1991, &[2.0, 4.0])], 2).unwrap();
        assert_eq!(m.values, vec![1.5, 3.0, 3.0]);
        assert_eq!(m.observations, Some(vec![2, 2, 1]));
        assert_eq!(m.pub_year, None);

        let single = mean_accrual_curve(&[raw(1990, &[1.0, 2.0, 3.0])], 2).unwrap();
        assert_eq!(single.values, vec![1.0, 2.0, 3.0]);

        let err = mean_accrual_curve(&[raw(1990, &[1.0, 2.0])], 3).unwrap_err();
        assert_eq!(err, CurveError::NoObservations { age: 2 });
        assert!(mean_accrual_curve(&[raw(1990, &[1.0]), raw(1990, &[1.0])], 0).is_err());
    }

    #[test]
    fn fourteen_volumes_thin_out_to_one() {
        // Volumes 1986..=1999 observed through 2006: 14 at age 0, 1 at age 20.
        let curves: Vec<_> = (1986..=1999)
            .map(|y| raw(y, &vec![1.0; (2006 - y + 1) as usize]))
            .collect();
        let m = mean_accrual_curve(&curves, 20).unwrap();
        let obs = m.observations.unwrap();
        assert_eq!(obs[0], 14);
        assert_eq!(obs[20], 1);
        assert!(obs.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn identical_volumes_have_no_anomalies() {
        let curves: Vec<_> = (0..5)
            .map(|i| std_curve(2000 + i, &[3.0, 5.0, 4.0, 2.0, 1.0]))
            .collect();
        let rates = BTreeMap::new();
        assert!(detect_anomalous_volumes(&curves, &rates, &AnomalyThresholds::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn self_citation_spike_is_reported() {
        let curves: Vec<_> = (0..4).map(|i| std_curve(1990 + i, &[3.0, 5.0, 4.0, 2.0])).collect();
        let mut rates = BTreeMap::new();
        rates.insert(1993, vec![(1993, 38.0 / 44.0), (1994, 0.1)]);
        rates.insert(1992, vec![(1993, 0.2)]);
        let found = detect_anomalous_volumes(&curves, &rates, &AnomalyThresholds::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].reason, AnomalyReason::SelfCitationSpike);
        assert_eq!(found[0].pub_year, 1993);
        assert_eq!(found[0].age, 0);
        assert_eq!(found[0].deviation, 100.0 * 38.0 / 44.0);
    }

    #[test]
    fn doubled_age_four_is_an_accrual_deviation_at_four() {
        let flat = [10.0; 8];
        let mut spiked = flat;
        spiked[4] = 20.0;
        let mut curves: Vec<_> = (0..4).map(|i| std_curve(2000 + i, &flat)).collect();
        curves.push(std_curve(2010, &spiked));
        let found = detect_anomalous_volumes(&curves, &BTreeMap::new(), &AnomalyThresholds::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].reason, AnomalyReason::AccrualDeviation);
        assert_eq!(found[0].pub_year, 2010);
        assert_eq!(found[0].age, 4);
        // 60/30 - 50/30, in percentage points.
        assert!((found[0].deviation - 100.0 / 3.0).abs() < 1e-9);
        assert!(found.iter().all(|f| f.deviation.abs() >= 25.0));
    }

    #[test]
    fn anomaly_detection_needs_three_volumes() {
        let curves: Vec<_> = (0..2).map(|i| std_curve(2000 + i, &[1.0, 1.0, 1.0])).collect();
        assert_eq!(
            detect_anomalous_volumes(&curves, &BTreeMap::new(), &AnomalyThresholds::default()),
            Err(CurveError::TooFewVolumes(2))
        );
    }

    #[test]
    fn median_of_even_count_averages_middle_pair() {
        let curves: Vec<_> = [1.0, 2.0, 3.0, 10.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut c = raw(2000 + i as i32, &[x]);
                c.kind = CurveKind::Standardized;
                c
            })
            .collect();
        assert_eq!(median_curve(&curves), vec![Some(2.5)]);
        assert_eq!(median_curve(&curves[..2]), vec![None]);
    }

    #[test]
    fn classification() {
        let t = ClassThresholds::default();
        assert_eq!(classify_journal(0.38, &t), JournalClass::Hare);
        assert_eq!(classify_journal(0.06, &t), JournalClass::Tortoise);
        assert_eq!(classify_journal(0.20, &t), JournalClass::Intermediate);
        assert_eq!(classify_journal(0.25, &t), JournalClass::Hare);
        assert_eq!(classify_journal(0.15, &t), JournalClass::Tortoise);
        assert!(ClassThresholds::new(0.1, 0.2).is_err());
        assert!(ClassThresholds::new(0.2, 0.2).is_err());
    }

    #[test]
    fn observed_volumes_skip_uncited_years() {
        let mut p = CitationProfile::new(j());
        p.add(2000, 2000, 2, 0);
        p.add(2000, 2002, 3, 1);
        p.add(2003, 2005, 4, 0);
        let vols = observed_volumes(&p, 2004, CountBasis::Total);
        assert_eq!(vols.len(), 1);
        assert_eq!(vols[0].pub_year, Some(2000));
        assert_eq!(vols[0].values, vec![2.0, 0.0, 3.0, 0.0, 0.0]);
        let non_self = observed_volumes(&p, 2005, CountBasis::NonSelf);
        assert_eq!(non_self.len(), 2);
        assert_eq!(non_self[0].values[2], 2.0);
        assert_eq!(non_self[1].values, vec![0.0, 0.0, 4.0]);
    }
}
