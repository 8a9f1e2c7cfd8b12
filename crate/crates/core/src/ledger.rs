//! Citation ledger ingestion.
//!
//! Reads journal-to-journal citation rows, canonicalizes journal names through
//! an alias table, and folds the rows into per-journal [`CitationProfile`]s: a
//! sparse matrix of (cited year, citing year) cells holding total and
//! self-citation counts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::BufRead;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub const CITATION_HEADER: &str = "citing_journal,citing_year,cited_journal,cited_year,count";
pub const PUBLICATION_HEADER: &str = "journal,year,citeable_items";
pub const ALIAS_HEADER: &str = "alias,canonical";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

impl LedgerError {
    fn at(line: usize, reason: impl Into<String>) -> Self {
        LedgerError::Parse {
            line,
            reason: reason.into(),
        }
    }

    /// 1-based line number for parse errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            LedgerError::Parse { line, .. } => Some(*line),
            LedgerError::Io(_) => None,
        }
    }
}

/// A journal identifier.
///
/// Surrounding whitespace is dropped and comparison ignores case, so
/// `" Opt Mater"` and `"opt mater"` name the same journal. The spelling that
/// was first constructed is the one displayed.
#[derive(Clone)]
pub struct JournalId {
    name: Arc<str>,
    folded: Arc<str>,
}

impl JournalId {
    /// Returns `None` when the trimmed name is empty.
    pub fn new(raw: &str) -> Option<Self> {
        let name = raw.trim();
        if name.is_empty() {
            return None;
        }
        Some(JournalId {
            name: name.into(),
            folded: name.to_lowercase().into(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.name
    }
}

impl PartialEq for JournalId {
    fn eq(&self, other: &Self) -> bool {
        self.folded == other.folded
    }
}

impl Eq for JournalId {}

impl Hash for JournalId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.folded.hash(state);
    }
}

impl PartialOrd for JournalId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for JournalId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.folded.cmp(&other.folded)
    }
}

impl fmt::Debug for JournalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.name)
    }
}

impl fmt::Display for JournalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl Serialize for JournalId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name)
    }
}

/// One ledger row: `count` citations from `citing_journal` in `citing_year`
/// to items `cited_journal` published in `cited_year`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationRecord {
    pub citing_journal: JournalId,
    pub citing_year: i32,
    pub cited_journal: JournalId,
    pub cited_year: i32,
    pub count: u64,
}

impl CitationRecord {
    pub fn is_self_reference(&self) -> bool {
        self.citing_journal == self.cited_journal
    }
}

/// Single-step alias resolution for renamed or merged journals.
///
/// Canonical names are displayed as first spelled in the alias file, both
/// for aliases and for the canonical name itself.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasMap {
    entries: HashMap<JournalId, JournalId>,
    canonical: HashMap<JournalId, JournalId>,
}

impl AliasMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Canonical name for `id`; unmapped names resolve to themselves.
    pub fn resolve(&self, id: JournalId) -> JournalId {
        match self.entries.get(&id).or_else(|| self.canonical.get(&id)) {
            Some(canonical) => canonical.clone(),
            None => id,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&JournalId, &JournalId)> {
        self.entries.iter()
    }
}

/// Citeable item counts per (journal, publication year).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PublicationCounts {
    items: BTreeMap<JournalId, BTreeMap<i32, u64>>,
}

impl PublicationCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `items` to the entry, creating it if needed. Zero is ignored.
    pub fn add(&mut self, journal: JournalId, year: i32, items: u64) {
        if items > 0 {
            *self.items.entry(journal).or_default().entry(year).or_insert(0) += items;
        }
    }

    pub fn get(&self, journal: &JournalId, year: i32) -> Option<u64> {
        self.items.get(journal)?.get(&year).copied()
    }

    pub fn len(&self) -> usize {
        self.items.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&JournalId, i32, u64)> {
        self.items
            .iter()
            .flat_map(|(j, years)| years.iter().map(move |(y, n)| (j, *y, *n)))
    }

    /// Rewrites journal names through `aliases`. Entries that collide after
    /// resolution (a merger) are summed.
    pub fn with_aliases(&self, aliases: &AliasMap) -> PublicationCounts {
        let mut out = PublicationCounts::new();
        for (journal, year, n) in self.iter() {
            out.add(aliases.resolve(journal.clone()), year, n);
        }
        out
    }

    /// Serializes to `publications.csv` form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(PUBLICATION_HEADER);
        out.push('\n');
        for (journal, year, n) in self.iter() {
            out.push_str(&format!("{journal},{year},{n}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cell {
    pub total: u64,
    pub self_cites: u64,
}

impl Cell {
    pub fn non_self(&self) -> u64 {
        self.total - self.self_cites
    }
}

/// Every citation received by one journal, keyed by (cited year, citing year).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationProfile {
    journal: JournalId,
    cells: BTreeMap<(i32, i32), Cell>,
}

impl CitationProfile {
    pub fn new(journal: JournalId) -> Self {
        CitationProfile {
            journal,
            cells: BTreeMap::new(),
        }
    }

    pub fn journal(&self) -> &JournalId {
        &self.journal
    }

    /// Accumulates citations into a cell.
    ///
    /// # Panics
    /// If `self_cites > total` or `citing_year < cited_year`.
    pub fn add(&mut self, cited_year: i32, citing_year: i32, total: u64, self_cites: u64) {
        assert!(self_cites <= total, "self citations exceed total");
        assert!(citing_year >= cited_year, "citing year precedes cited year");
        let cell = self.cells.entry((cited_year, citing_year)).or_default();
        cell.total += total;
        cell.self_cites += self_cites;
    }

    /// The cell for (cited, citing); absent cells read as zero.
    pub fn cell(&self, cited_year: i32, citing_year: i32) -> Cell {
        self.cells.get(&(cited_year, citing_year)).copied().unwrap_or_default()
    }

    /// Cells as `((cited_year, citing_year), cell)` in ascending key order.
    pub fn cells(&self) -> impl Iterator<Item = ((i32, i32), Cell)> + '_ {
        self.cells.iter().map(|(k, c)| (*k, *c))
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn total_citations(&self) -> u64 {
        self.cells.values().map(|c| c.total).sum()
    }

    /// Earliest publication year with any recorded cell.
    pub fn first_cited_year(&self) -> Option<i32> {
        self.cells.keys().map(|(cited, _)| *cited).min()
    }

    pub fn last_citing_year(&self) -> Option<i32> {
        self.cells.keys().map(|(_, citing)| *citing).max()
    }

    /// Distinct publication years present, ascending.
    pub fn cited_years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.cells.keys().map(|(cited, _)| *cited).collect();
        years.dedup();
        years
    }

    /// Same matrix with every entry multiplied by `k`.
    pub fn scaled(&self, k: u64) -> CitationProfile {
        CitationProfile {
            journal: self.journal.clone(),
            cells: self
                .cells
                .iter()
                .map(|(key, c)| {
                    (
                        *key,
                        Cell {
                            total: c.total * k,
                            self_cites: c.self_cites * k,
                        },
                    )
                })
                .collect(),
        }
    }
}

pub type Profiles = BTreeMap<JournalId, CitationProfile>;

fn strip_bom(line: &str) -> &str {
    line.strip_prefix('\u{feff}').unwrap_or(line)
}

/// Iterates over non-blank lines of `reader`, yielding (1-based line number,
/// line without its terminator). The header is checked against `header`.
fn for_each_row<R, F>(mut reader: R, header: &str, mut f: F) -> Result<(), LedgerError>
where
    R: BufRead,
    F: FnMut(usize, &str) -> Result<(), LedgerError>,
{
    let mut buf = String::new();
    let mut line_no = 0usize;
    let mut saw_header = false;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = buf.trim_end_matches(['\n', '\r']);
        if !saw_header {
            let found = strip_bom(line).trim();
            if found != header {
                return Err(LedgerError::at(
                    line_no,
                    format!("expected header `{header}`, found `{found}`"),
                ));
            }
            saw_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        f(line_no, line)?;
    }
    Ok(())
}

fn parse_journal(field: &str, line: usize, column: &str) -> Result<JournalId, LedgerError> {
    JournalId::new(field).ok_or_else(|| LedgerError::at(line, format!("empty {column}")))
}

fn parse_year(field: &str, line: usize, column: &str) -> Result<i32, LedgerError> {
    let field = field.trim();
    let year: i32 = field
        .parse()
        .map_err(|_| LedgerError::at(line, format!("{column} `{field}` is not an integer")))?;
    if !(1000..=9999).contains(&year) {
        return Err(LedgerError::at(
            line,
            format!("{column} `{field}` is not a 4-digit year"),
        ));
    }
    Ok(year)
}

fn parse_count(field: &str, line: usize, column: &str) -> Result<u64, LedgerError> {
    let field = field.trim();
    if let Ok(v) = field.parse::<i64>() {
        if v < 0 {
            return Err(LedgerError::at(line, format!("negative {column} {v}")));
        }
    }
    field
        .parse()
        .map_err(|_| LedgerError::at(line, format!("{column} `{field}` is not an integer")))
}

fn split_fields<const N: usize>(line: &str, line_no: usize) -> Result<[&str; N], LedgerError> {
    let mut fields = [""; N];
    let mut n = 0;
    for field in line.split(',') {
        if n < N {
            fields[n] = field;
        }
        n += 1;
    }
    if n != N {
        return Err(LedgerError::at(line_no, format!("expected {N} columns, found {n}")));
    }
    Ok(fields)
}

/// Resolves raw journal fields, reusing the result for repeated spellings.
struct Interner<'a> {
    aliases: &'a AliasMap,
    seen: HashMap<String, JournalId>,
}

impl<'a> Interner<'a> {
    fn new(aliases: &'a AliasMap) -> Self {
        Interner {
            aliases,
            seen: HashMap::new(),
        }
    }

    fn journal(&mut self, field: &str, line: usize, column: &str) -> Result<JournalId, LedgerError> {
        if let Some(id) = self.seen.get(field) {
            return Ok(id.clone());
        }
        let id = self.aliases.resolve(parse_journal(field, line, column)?);
        self.seen.insert(field.to_string(), id.clone());
        Ok(id)
    }
}

fn parse_citation_row(line: &str, line_no: usize, names: &mut Interner) -> Result<CitationRecord, LedgerError> {
    let [citing, citing_year, cited, cited_year, count] = split_fields::<5>(line, line_no)?;
    let citing_journal = names.journal(citing, line_no, "citing_journal")?;
    let citing_year = parse_year(citing_year, line_no, "citing_year")?;
    let cited_journal = names.journal(cited, line_no, "cited_journal")?;
    let cited_year = parse_year(cited_year, line_no, "cited_year")?;
    let count = parse_count(count, line_no, "count")?;
    if citing_year < cited_year {
        return Err(LedgerError::at(
            line_no,
            format!("citing precedes cited ({citing_year} < {cited_year})"),
        ));
    }
    Ok(CitationRecord {
        citing_journal,
        citing_year,
        cited_journal,
        cited_year,
        count,
    })
}

/// Parses `citations.csv`, canonicalizing both journal columns.
pub fn parse_citation_csv<R: BufRead>(reader: R, aliases: &AliasMap) -> Result<Vec<CitationRecord>, LedgerError> {
    let mut names = Interner::new(aliases);
    let mut records = Vec::new();
    for_each_row(reader, CITATION_HEADER, |line_no, line| {
        records.push(parse_citation_row(line, line_no, &mut names)?);
        Ok(())
    })?;
    Ok(records)
}

/// Parses `citations.csv` straight into profiles without materializing the
/// record list. Equivalent to `build_profiles(&parse_citation_csv(..)?)`.
pub fn ingest_citation_csv<R: BufRead>(reader: R, aliases: &AliasMap) -> Result<Profiles, LedgerError> {
    let mut names = Interner::new(aliases);
    let mut profiles = Profiles::new();
    for_each_row(reader, CITATION_HEADER, |line_no, line| {
        let record = parse_citation_row(line, line_no, &mut names)?;
        accumulate(&mut profiles, record);
        Ok(())
    })?;
    Ok(profiles)
}

/// Parses `aliases.csv`.
pub fn parse_alias_csv<R: BufRead>(reader: R) -> Result<AliasMap, LedgerError> {
    let mut entries: HashMap<JournalId, (JournalId, usize)> = HashMap::new();
    let mut spelling: HashMap<JournalId, JournalId> = HashMap::new();
    for_each_row(reader, ALIAS_HEADER, |line_no, line| {
        let [alias, canonical] = split_fields::<2>(line, line_no)?;
        let alias = parse_journal(alias, line_no, "alias")?;
        let canonical = parse_journal(canonical, line_no, "canonical")?;
        if alias == canonical {
            return Err(LedgerError::at(line_no, format!("alias `{alias}` maps to itself")));
        }
        if let Some((existing, first_line)) = entries.get(&alias) {
            if *existing != canonical {
                return Err(LedgerError::at(
                    line_no,
                    format!("alias `{alias}` maps to `{canonical}` but line {first_line} maps it to `{existing}`"),
                ));
            }
            return Ok(());
        }
        spelling.entry(canonical.clone()).or_insert_with(|| canonical.clone());
        entries.insert(alias, (canonical, line_no));
        Ok(())
    })?;

    // Resolution is single-step, so a canonical name may not itself be an alias.
    let mut chained: Vec<(usize, &JournalId, &JournalId)> = entries
        .iter()
        .filter(|(_, (canonical, _))| entries.contains_key(canonical))
        .map(|(alias, (canonical, line))| (*line, alias, canonical))
        .collect();
    chained.sort_by_key(|(line, _, _)| *line);
    if let Some((line, alias, canonical)) = chained.first() {
        return Err(LedgerError::at(
            *line,
            format!("alias chain: `{alias}` -> `{canonical}`, which is itself an alias"),
        ));
    }

    Ok(AliasMap {
        entries: entries
            .into_iter()
            .map(|(a, (c, _))| (a, spelling[&c].clone()))
            .collect(),
        canonical: spelling,
    })
}

/// Parses `publications.csv`.
pub fn parse_publication_csv<R: BufRead>(reader: R) -> Result<PublicationCounts, LedgerError> {
    let mut counts = PublicationCounts::new();
    let mut first_seen: HashMap<(JournalId, i32), usize> = HashMap::new();
    for_each_row(reader, PUBLICATION_HEADER, |line_no, line| {
        let [journal, year, items] = split_fields::<3>(line, line_no)?;
        let journal = parse_journal(journal, line_no, "journal")?;
        let year = parse_year(year, line_no, "year")?;
        let items = parse_count(items, line_no, "citeable_items")?;
        if items == 0 {
            return Err(LedgerError::at(line_no, "citeable_items must be positive"));
        }
        if let Some(first) = first_seen.get(&(journal.clone(), year)) {
            return Err(LedgerError::at(
                line_no,
                format!("duplicate entry for ({journal}, {year}); first at line {first}"),
            ));
        }
        first_seen.insert((journal.clone(), year), line_no);
        counts.add(journal, year, items);
        Ok(())
    })?;
    Ok(counts)
}

fn accumulate(profiles: &mut Profiles, record: CitationRecord) {
    let self_cites = if record.is_self_reference() { record.count } else { 0 };
    profiles
        .entry(record.cited_journal)
        .or_insert_with_key(|j| CitationProfile::new(j.clone()))
        .add(record.cited_year, record.citing_year, record.count, self_cites);
}

/// Folds records into one profile per cited journal.
pub fn build_profiles<'a, I>(records: I) -> Profiles
where
    I: IntoIterator<Item = &'a CitationRecord>,
{
    let mut profiles = Profiles::new();
    for record in records {
        accumulate(&mut profiles, record.clone());
    }
    profiles
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("self-reference rate undefined for {journal} in {citing_year}: no citations in the selected cells")]
pub struct UndefinedRate {
    pub journal: JournalId,
    pub citing_year: i32,
}

/// Share of citations made in `citing_year` to the given publication years
/// that come from the journal itself.
pub fn self_reference_rate<I>(profile: &CitationProfile, citing_year: i32, cited_years: I) -> Result<f64, UndefinedRate>
where
    I: IntoIterator<Item = i32>,
{
    let mut years: Vec<i32> = cited_years.into_iter().collect();
    years.sort_unstable();
    years.dedup();
    let (self_sum, total) = years
        .iter()
        .map(|&y| profile.cell(y, citing_year))
        .fold((0u64, 0u64), |(s, t), c| (s + c.self_cites, t + c.total));
    if total == 0 {
        return Err(UndefinedRate {
            journal: profile.journal.clone(),
            citing_year,
        });
    }
    Ok(self_sum as f64 / total as f64)
}

/// Drops self-citations from every cell.
pub fn strip_self_references(profile: &CitationProfile) -> CitationProfile {
    CitationProfile {
        journal: profile.journal.clone(),
        cells: profile
            .cells
            .iter()
            .map(|(k, c)| {
                (
                    *k,
                    Cell {
                        total: c.non_self(),
                        self_cites: 0,
                    },
                )
            })
            .collect(),
    }
}

/// Label used for the citing side of non-self rows when profiles are written
/// back out as a ledger.
pub fn external_citer(journal: &JournalId) -> String {
    format!("{journal} (external)")
}

/// Serializes profiles as `citations.csv`: per cell, one row for the self
/// citations and one row (cited by [`external_citer`]) for the rest.
/// Re-parsing the output rebuilds identical profiles.
pub fn profiles_to_csv<'a, I>(profiles: I) -> String
where
    I: IntoIterator<Item = &'a CitationProfile>,
{
    let mut out = String::from(CITATION_HEADER);
    out.push('\n');
    for profile in profiles {
        let journal = &profile.journal;
        let external = external_citer(journal);
        for ((cited, citing), cell) in profile.cells() {
            if cell.self_cites > 0 {
                out.push_str(&format!("{journal},{citing},{journal},{cited},{}\n", cell.self_cites));
            }
            if cell.non_self() > 0 || cell.total == 0 {
                out.push_str(&format!("{external},{citing},{journal},{cited},{}\n", cell.non_self()));
            }
        }
    }
    out
}
