//! Deterministic synthetic citation profiles.
//!
//! A [`SynthSpec`] describes a journal by an accrual kernel (relative
//! citations per age), a citation scale, per-volume size multipliers,
//! self-citation shares and explicit spikes. Generation is a pure function
//! of the spec: every cell is a rounded expected value, never a sample.
//!
//! Specs are stored as `key = value` text:
//!
//! ```text
//! journal = Tortoise
//! pub_years = 1980-2006
//! kernel = risedecay:3:1:1:21
//! base_citations = 52
//! items_per_year = 25
//! observation_end = 2006
//! spike = 1996,0,6
//! ```
//!
//! Repeatable keys: `scale = YEAR[-YEAR],FACTOR`, `self = YEAR,AGE,FRACTION`
//! and `spike = YEAR,AGE,COUNT`. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ledger::{CitationProfile, JournalId, PublicationCounts};
use crate::metrics::WindowPolicy;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("closed-form metrics unavailable: {0}")]
    OracleRefused(String),
}

fn invalid(reason: impl Into<String>) -> SynthError {
    SynthError::Invalid(reason.into())
}

/// Relative citations per age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// Weight 1 at every age below `length`.
    Flat { length: u32 },
    /// `rate^age`.
    Geometric { rate: f64, length: u32 },
    /// `((age + 1) / (peak + 1))^rise` up to the peak, then
    /// `decay^(age - peak)`. The peak has weight 1.
    RiseDecay {
        peak_age: u32,
        rise: f64,
        decay: f64,
        length: u32,
    },
}

impl Kernel {
    pub fn length(&self) -> u32 {
        match *self {
            Kernel::Flat { length } | Kernel::Geometric { length, .. } | Kernel::RiseDecay { length, .. } => length,
        }
    }

    /// Weight at `age`; zero at and beyond the kernel length.
    pub fn weight(&self, age: u32) -> f64 {
        if age >= self.length() {
            return 0.0;
        }
        match *self {
            Kernel::Flat { .. } => 1.0,
            Kernel::Geometric { rate, .. } => rate.powi(age as i32),
            Kernel::RiseDecay {
                peak_age, rise, decay, ..
            } => {
                if age <= peak_age {
                    ((age + 1) as f64 / (peak_age + 1) as f64).powf(rise)
                } else {
                    decay.powi((age - peak_age) as i32)
                }
            }
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.length()).map(|a| self.weight(a)).collect()
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.length() == 0 {
            return Err(invalid("kernel length must be positive"));
        }
        match *self {
            Kernel::Flat { .. } => {}
            Kernel::Geometric { rate, .. } => {
                if !(rate > 0.0 && rate < 1.0) {
                    return Err(invalid(format!("geometric rate {rate} outside (0, 1)")));
                }
            }
            Kernel::RiseDecay {
                peak_age,
                rise,
                decay,
                length,
            } => {
                if peak_age >= length {
                    return Err(invalid(format!("peak age {peak_age} beyond kernel length {length}")));
                }
                if !(rise >= 0.0 && rise.is_finite()) {
                    return Err(invalid(format!("rise {rise} must be non-negative")));
                }
                if !(decay > 0.0 && decay <= 1.0) {
                    return Err(invalid(format!("decay {decay} outside (0, 1]")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Kernel::Flat { length } => write!(f, "flat:{length}"),
            Kernel::Geometric { rate, length } => write!(f, "geometric:{rate}:{length}"),
            Kernel::RiseDecay {
                peak_age,
                rise,
                decay,
                length,
            } => write!(f, "risedecay:{peak_age}:{rise}:{decay}:{length}"),
        }
    }
}

impl FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let int = |v: &str| {
            v.parse::<u32>()
                .map_err(|_| format!("`{v}` is not a non-negative integer"))
        };
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
        match parts.as_slice() {
            ["flat", length] => Ok(Kernel::Flat { length: int(length)? }),
            ["geometric", rate, length] => Ok(Kernel::Geometric {
                rate: num(rate)?,
                length: int(length)?,
            }),
            ["risedecay", peak, rise, decay, length] => Ok(Kernel::RiseDecay {
                peak_age: int(peak)?,
                rise: num(rise)?,
                decay: num(decay)?,
                length: int(length)?,
            }),
            _ => Err(format!(
                "unknown kernel `{s}` (expected flat:L, geometric:P:L or risedecay:PEAK:RISE:DECAY:L)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spike {
    pub pub_year: i32,
    pub age: u32,
    pub extra: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub journal: String,
    pub first_year: i32,
    pub last_year: i32,
    pub kernel: Kernel,
    pub base_citations: f64,
    /// Volume size multiplier for years without an override.
    pub volume_scale: f64,
    pub scale_overrides: BTreeMap<i32, f64>,
    /// Self-citation share for cells without an override.
    pub self_fraction: f64,
    pub self_overrides: BTreeMap<(i32, u32), f64>,
    pub spikes: Vec<Spike>,
    pub items_per_year: u64,
    pub observation_end: i32,
}

impl SynthSpec {
    /// A spec with unit volume scale, no self-citations and no spikes,
    /// observed through its last publication year.
    pub fn new(journal: &str, years: std::ops::RangeInclusive<i32>, kernel: Kernel, base_citations: f64) -> Self {
        SynthSpec {
            journal: journal.to_string(),
            first_year: *years.start(),
            last_year: *years.end(),
            kernel,
            base_citations,
            volume_scale: 1.0,
            scale_overrides: BTreeMap::new(),
            self_fraction: 0.0,
            self_overrides: BTreeMap::new(),
            spikes: Vec::new(),
            items_per_year: 100,
            observation_end: *years.end(),
        }
    }

    pub fn scale_for(&self, year: i32) -> f64 {
        self.scale_overrides.get(&year).copied().unwrap_or(self.volume_scale)
    }

    pub fn self_fraction_for(&self, year: i32, age: u32) -> f64 {
        self.self_overrides
            .get(&(year, age))
            .copied()
            .unwrap_or(self.self_fraction)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if JournalId::new(&self.journal).is_none() {
            return Err(invalid("journal name is empty"));
        }
        if self.journal.contains(',') {
            return Err(invalid("journal name may not contain commas"));
        }
        if self.first_year > self.last_year {
            return Err(invalid(format!(
                "pub_years {}-{} is empty",
                self.first_year, self.last_year
            )));
        }
        if !(1000..=9999).contains(&self.first_year) || !(1000..=9999).contains(&self.observation_end) {
            return Err(invalid("years must have 4 digits"));
        }
        if self.observation_end < self.last_year {
            return Err(invalid(format!(
                "observation_end {} precedes last publication year {}",
                self.observation_end, self.last_year
            )));
        }
        self.kernel.validate()?;
        if !self.kernel.weights().iter().any(|&w| w > 0.0) {
            return Err(invalid("kernel has no positive weight"));
        }
        if !(self.base_citations > 0.0 && self.base_citations.is_finite()) {
            return Err(invalid("base_citations must be positive"));
        }
        let scales = std::iter::once(&self.volume_scale).chain(self.scale_overrides.values());
        for &s in scales {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("volume scale {s} must be positive")));
            }
        }
        let fractions = std::iter::once(&self.self_fraction).chain(self.self_overrides.values());
        for &f in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(invalid(format!("self fraction {f} outside [0, 1]")));
            }
        }
        if self.items_per_year == 0 {
            return Err(invalid("items_per_year must be positive"));
        }
        Ok(())
    }
}

fn round_half_away(x: f64) -> u64 {
    x.round() as u64
}

/// Expands a spec into the citation profile and citeable-item counts it
/// describes. Cells after `observation_end` and cells with no citations are
/// omitted.
pub fn generate_profile(spec: &SynthSpec) -> Result<(CitationProfile, PublicationCounts), SynthError> {
    spec.validate()?;
    let journal = JournalId::new(&spec.journal).expect("validated");

    let mut extra: BTreeMap<(i32, u32), u64> = BTreeMap::new();
    for spike in &spec.spikes {
        *extra.entry((spike.pub_year, spike.age)).or_insert(0) += spike.extra;
    }

    let mut profile = CitationProfile::new(journal.clone());
    let mut pubs = PublicationCounts::new();
    for year in spec.first_year..=spec.last_year {
        pubs.add(journal.clone(), year, spec.items_per_year);
        let max_spike_age = extra
            .range((year, 0)..=(year, u32::MAX))
            .map(|((_, a), _)| *a + 1)
            .max()
            .unwrap_or(0);
        let ages = spec.kernel.length().max(max_spike_age);
        for age in 0..ages {
            let citing = year + age as i32;
            if citing > spec.observation_end {
                break;
            }
            let expected = spec.base_citations * spec.scale_for(year) * spec.kernel.weight(age);
            let total = round_half_away(expected) + extra.get(&(year, age)).copied().unwrap_or(0);
            if total == 0 {
                continue;
            }
            let self_cites = round_half_away(total as f64 * spec.self_fraction_for(year, age)).min(total);
            profile.add(year, citing, total, self_cites);
        }
    }
    Ok((profile, pubs))
}

/// Indicators implied by a spec's kernel alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedMetrics {
    /// Year at which the generated profile exhibits these values.
    pub eval_year: i32,
    pub coverage: f64,
    pub half_life_exact: f64,
    pub scaling_factor: f64,
}

/// Closed-form coverage, half-life and scaling factor for specs whose
/// volumes are identical and fully observed at `eval_year`.
///
/// Refuses specs with spikes or per-year scale overrides, and specs whose
/// publication span is too short for every kernel age (and the coverage
/// horizon) to be observed in the last publication year.
pub fn expected_metrics(spec: &SynthSpec, policy: &WindowPolicy) -> Result<ExpectedMetrics, SynthError> {
    spec.validate()?;
    let refuse = |r: String| Err(SynthError::OracleRefused(r));
    if !spec.spikes.is_empty() {
        return refuse("spec has spikes".into());
    }
    if spec.scale_overrides.values().any(|&s| s != spec.volume_scale) {
        return refuse("volume scale is not uniform".into());
    }
    let span = (spec.last_year - spec.first_year) as u32;
    let needed = (spec.kernel.length() - 1).max(policy.horizon());
    if span < needed {
        return refuse(format!(
            "publication span {span} years is shorter than the {needed} needed"
        ));
    }

    let weights: Vec<f64> = (0..=needed).map(|a| spec.kernel.weight(a)).collect();
    let horizon_total: f64 = weights[..=policy.horizon() as usize].iter().sum();
    if horizon_total <= 0.0 {
        return refuse("kernel has no weight within the horizon".into());
    }
    let window: f64 = policy.window_ages().iter().map(|&a| spec.kernel.weight(a)).sum();
    let coverage = window / horizon_total;
    if coverage <= 0.0 {
        return refuse("kernel has no weight inside the citation window".into());
    }

    // Invert the piecewise-linear cumulative weight at half the total.
    let total: f64 = weights.iter().sum();
    let target = 0.5 * total;
    let mut below = 0.0;
    let mut half_life = weights.len() as f64;
    for (age, &w) in weights.iter().enumerate() {
        if w > 0.0 && below + w >= target {
            half_life = age as f64 + (target - below) / w;
            break;
        }
        below += w;
    }

    Ok(ExpectedMetrics {
        eval_year: spec.last_year,
        coverage,
        half_life_exact: half_life,
        scaling_factor: policy.target_quantile() / coverage,
    })
}

fn parse_err(line: usize, reason: impl Into<String>) -> SynthError {
    SynthError::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_num<T: FromStr>(v: &str, line: usize, what: &str) -> Result<T, SynthError> {
    v.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{what}: cannot parse `{}`", v.trim())))
}

fn parse_year_range(v: &str, line: usize) -> Result<(i32, i32), SynthError> {
    match v.split_once('-') {
        Some((a, b)) => Ok((parse_num(a, line, "year")?, parse_num(b, line, "year")?)),
        None => {
            let y = parse_num(v, line, "year")?;
            Ok((y, y))
        }
    }
}

fn parse_fields<'a, const N: usize>(v: &'a str, line: usize, key: &str) -> Result<[&'a str; N], SynthError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    parts.try_into().map_err(|p: Vec<&str>| {
        parse_err(
            line,
            format!("{key} expects {N} comma-separated values, got {}", p.len()),
        )
    })
}

impl FromStr for SynthSpec {
    type Err = SynthError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut journal = None;
        let mut years = None;
        let mut kernel = None;
        let mut base = None;
        let mut items = None;
        let mut observation_end = None;
        let mut volume_scale = 1.0;
        let mut self_fraction = 0.0;
        let mut scale_overrides = BTreeMap::new();
        let mut self_overrides = BTreeMap::new();
        let mut spikes = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, "expected `key = value`"))?;
            let value = value.trim();
            match key.trim() {
                "journal" => journal = Some(value.to_string()),
                "pub_years" => years = Some(parse_year_range(value, line)?),
                "kernel" => kernel = Some(value.parse::<Kernel>().map_err(|e| parse_err(line, e))?),
                "base_citations" => base = Some(parse_num(value, line, "base_citations")?),
                "items_per_year" => items = Some(parse_num(value, line, "items_per_year")?),
                "observation_end" => observation_end = Some(parse_num(value, line, "observation_end")?),
                "volume_scale" => volume_scale = parse_num(value, line, "volume_scale")?,
                "self_fraction" => self_fraction = parse_num(value, line, "self_fraction")?,
                "scale" => {
                    let [range, factor] = parse_fields::<2>(value, line, "scale")?;
                    let (from, to) = parse_year_range(range, line)?;
                    let factor: f64 = parse_num(factor, line, "scale factor")?;
                    for year in from..=to {
                        scale_overrides.insert(year, factor);
                    }
                }
                "self" => {
                    let [year, age, frac] = parse_fields::<3>(value, line, "self")?;
                    self_overrides.insert(
                        (parse_num(year, line, "year")?, parse_num(age, line, "age")?),
                        parse_num(frac, line, "fraction")?,
                    );
                }
                "spike" => {
                    let [year, age, extra] = parse_fields::<3>(value, line, "spike")?;
                    spikes.push(Spike {
                        pub_year: parse_num(year, line, "year")?,
                        age: parse_num(age, line, "age")?,
                        extra: parse_num(extra, line, "count")?,
                    });
                }
                other => return Err(parse_err(line, format!("unknown key `{other}`"))),
            }
        }

        let missing = |k: &str| SynthError::Invalid(format!("missing `{k}`"));
        let (first_year, last_year) = years.ok_or_else(|| missing("pub_years"))?;
        let spec = SynthSpec {
            journal: journal.ok_or_else(|| missing("journal"))?,
            first_year,
            last_year,
            kernel: kernel.ok_or_else(|| missing("kernel"))?,
            base_citations: base.ok_or_else(|| missing("base_citations"))?,
            volume_scale,
            scale_overrides,
            self_fraction,
            self_overrides,
            spikes,
            items_per_year: items.ok_or_else(|| missing("items_per_year"))?,
            observation_end: observation_end.unwrap_or(last_year),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "journal = {}", self.journal)?;
        writeln!(f, "pub_years = {}-{}", self.first_year, self.last_year)?;
        writeln!(f, "kernel = {}", self.kernel)?;
        writeln!(f, "base_citations = {}", self.base_citations)?;
        writeln!(f, "volume_scale = {}", self.volume_scale)?;
        writeln!(f, "self_fraction = {}", self.self_fraction)?;
        writeln!(f, "items_per_year = {}", self.items_per_year)?;
        writeln!(f, "observation_end = {}", self.observation_end)?;
        for (year, factor) in &self.scale_overrides {
            writeln!(f, "scale = {year},{factor}")?;
        }
        for ((year, age), frac) in &self.self_overrides {
            writeln!(f, "self = {year},{age},{frac}")?;
        }
        for s in &self.spikes {
            writeln!(f, "spike = {},{},{}", s.pub_year, s.age, s.extra)?;
        }
        Ok(())
    }
}

/// Bundled calibration fixtures.
pub mod fixtures {
    use super::SynthSpec;

    pub const HARE: &str = include_str!("../fixtures/hare.synth");
    pub const TORTOISE: &str = include_str!("../fixtures/tortoise.synth");

    /// Year the fixtures are calibrated for.
    pub const EVAL_YEAR: i32 = 2004;

    pub const NAMES: [&str; 2] = ["hare", "tortoise"];

    pub fn source(name: &str) -> Option<&'static str> {
        match name.to_ascii_lowercase().as_str() {
            "hare" => Some(HARE),
            "tortoise" => Some(TORTOISE),
            _ => None,
        }
    }

    pub fn load(name: &str) -> Option<SynthSpec> {
        source(name).map(|text| text.parse().expect("bundled fixture parses"))
    }
}
