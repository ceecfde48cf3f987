//! Efficiency metrics for converged form systems and ingestion of historical
//! and modern frequency tables.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::competition::{CompetitionState, Regime};
use crate::error::{Error, Result};

/// Surprisal in bits: log₂(1/p).
pub fn informativeness(probability_in_context: f64) -> Result<f64> {
    let p = probability_in_context;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("probability {p} is outside (0, 1]")));
    }
    Ok(-p.log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormProfile {
    pub form: String,
    pub morpheme_count: u32,
    #[serde(default)]
    pub segment_count: Option<u32>,
}

impl FormProfile {
    pub fn new(form: impl Into<String>, morpheme_count: u32) -> Result<Self> {
        if morpheme_count == 0 {
            return Err(Error::Usage("morpheme_count must be at least 1".into()));
        }
        Ok(Self {
            form: form.into(),
            morpheme_count,
            segment_count: None,
        })
    }
}

/// A form together with the probability of its use in context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormUsage {
    pub profile: FormProfile,
    pub probability_in_context: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Efficiency {
    Efficient,
    Inefficient,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormRow {
    pub form: String,
    pub morpheme_count: u32,
    pub probability_in_context: f64,
    pub informativeness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub forms: Vec<FormRow>,
    /// Rank correlation of complexity with informativeness; `None` when
    /// either side has no variation.
    pub spearman: Option<f64>,
    pub verdict: Efficiency,
}

/// Efficient when more complex forms carry more information (positive rank
/// correlation), inefficient when the correlation is negative.
pub fn efficiency_report(usages: &[FormUsage]) -> Result<EfficiencyReport> {
    if usages.len() < 2 {
        return Err(Error::Usage("efficiency needs at least two forms".into()));
    }
    let mut forms = Vec::with_capacity(usages.len());
    for u in usages {
        if u.profile.morpheme_count == 0 {
            return Err(Error::Usage(format!("form `{}` has no morphemes", u.profile.form)));
        }
        forms.push(FormRow {
            form: u.profile.form.clone(),
            morpheme_count: u.profile.morpheme_count,
            probability_in_context: u.probability_in_context,
            informativeness: informativeness(u.probability_in_context)?,
        });
    }
    let complexity: Vec<f64> = forms.iter().map(|f| f64::from(f.morpheme_count)).collect();
    let info: Vec<f64> = forms.iter().map(|f| f.informativeness).collect();
    let spearman = spearman(&complexity, &info);
    let verdict = match spearman {
        Some(r) if r > 0.0 => Efficiency::Efficient,
        Some(r) if r < 0.0 => Efficiency::Inefficient,
        _ => Efficiency::Neutral,
    };
    Ok(EfficiencyReport {
        forms,
        spearman,
        verdict,
    })
}

/// Usage probabilities of f^u and f^a implied by a competition state:
/// f^u covers every subject and the unmarked share of objects.
pub fn competition_usages(
    state: &CompetitionState,
    unmarked: FormProfile,
    marked: FormProfile,
) -> Vec<FormUsage> {
    let p = state.p_subj;
    let x = state.unmarked_given_obj();
    vec![
        FormUsage {
            profile: unmarked,
            probability_in_context: p + (1.0 - p) * x,
        },
        FormUsage {
            profile: marked,
            probability_in_context: (1.0 - p) * (1.0 - x),
        },
    ]
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let average = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = average;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of the tie-averaged ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

pub const CASE_TABLE_HEADER: [&str; 4] = ["period", "context", "unmarked_count", "marked_count"];
pub const PRIORS_HEADER: [&str; 4] = ["category", "unmarked_count", "marked_count", "total"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRow {
    pub period: String,
    pub context: String,
    pub unmarked_count: u64,
    pub marked_count: u64,
}

impl CaseRow {
    pub fn marked_share(&self) -> Option<f64> {
        let total = self.unmarked_count + self.marked_count;
        (total > 0).then(|| self.marked_count as f64 / total as f64)
    }
}

/// Historical counts of the unmarked and marked form, per period and context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseTable {
    pub rows: Vec<CaseRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorRow {
    pub category: String,
    pub unmarked_count: u64,
    pub marked_count: u64,
    pub total: u64,
}

/// Modern counts where forms line up with meanings, used to estimate how
/// often the unmarked meaning occurs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PriorTable {
    pub rows: Vec<PriorRow>,
}

impl PriorTable {
    /// Pooled share of the unmarked meaning across all categories.
    pub fn p_unmarked(&self) -> f64 {
        let unmarked: u64 = self.rows.iter().map(|r| r.unmarked_count).sum();
        let total: u64 = self.rows.iter().map(|r| r.total).sum();
        unmarked as f64 / total as f64
    }
}

fn read_rows<T, R>(reader: R, path: &Path, header: &[&str]) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = csv.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Ingestion {
            path: path.to_path_buf(),
            row: 0,
            reason: format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in csv.deserialize().enumerate() {
        let row = record.map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            row: i + 1,
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Ingestion {
            path: path.to_path_buf(),
            row: 0,
            reason: "table has no rows".into(),
        });
    }
    Ok(rows)
}

/// Parses a case table; `path` is used only in error messages.
pub fn read_case_table<R: Read>(reader: R, path: &Path) -> Result<CaseTable> {
    Ok(CaseTable {
        rows: read_rows(reader, path, &CASE_TABLE_HEADER)?,
    })
}

fn open_input(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        row: 0,
        reason: format!("cannot open: {e}"),
    })
}

pub fn ingest_case_table(path: impl AsRef<Path>) -> Result<CaseTable> {
    let path = path.as_ref();
    let file = open_input(path)?;
    read_case_table(file, path)
}

pub fn write_case_table<W: Write>(table: &CaseTable, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for row in &table.rows {
        csv.serialize(row)?;
    }
    csv.flush().map_err(|e| Error::io("<case table>", e))?;
    Ok(())
}

pub fn read_prior_table<R: Read>(reader: R, path: &Path) -> Result<PriorTable> {
    let rows: Vec<PriorRow> = read_rows(reader, path, &PRIORS_HEADER)?;
    for (i, r) in rows.iter().enumerate() {
        if r.unmarked_count + r.marked_count != r.total {
            return Err(Error::Ingestion {
                path: path.to_path_buf(),
                row: i + 1,
                reason: format!(
                    "total {} differs from {} + {}",
                    r.total, r.unmarked_count, r.marked_count
                ),
            });
        }
        if r.total == 0 {
            return Err(Error::Ingestion {
                path: path.to_path_buf(),
                row: i + 1,
                reason: "total is zero".into(),
            });
        }
    }
    Ok(PriorTable { rows })
}

pub fn ingest_prior_table(path: impl AsRef<Path>) -> Result<PriorTable> {
    let path = path.as_ref();
    let file = open_input(path)?;
    read_prior_table(file, path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodShare {
    pub period: String,
    pub context: String,
    pub marked_share: Option<f64>,
    /// Marked share as a whole percentage.
    pub marked_percent: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextTrend {
    pub context: String,
    pub first_share: f64,
    pub last_share: f64,
    pub rising: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyReport {
    pub p_unmarked: f64,
    pub regime: Regime,
    pub regime_label: String,
    pub periods: Vec<PeriodShare>,
    pub trends: Vec<ContextTrend>,
    /// Whether every context moved the way the regime predicts: marked share
    /// rising under categoricalization, staying short of categorical under
    /// stable variation. `None` without a historical table.
    pub consistent: Option<bool>,
}

/// Classifies the expected regime from the modern priors and checks the
/// historical marked-form shares against it.
pub fn case_study_report(table: Option<&CaseTable>, priors: &PriorTable) -> Result<CaseStudyReport> {
    let p_unmarked = priors.p_unmarked();
    let regime = Regime::classify(p_unmarked)?;
    let mut periods = Vec::new();
    let mut trends = Vec::new();
    if let Some(table) = table {
        let mut contexts: Vec<&str> = Vec::new();
        for row in &table.rows {
            let share = row.marked_share();
            periods.push(PeriodShare {
                period: row.period.clone(),
                context: row.context.clone(),
                marked_share: share,
                marked_percent: share.map(|s| (s * 100.0).round() as u32),
            });
            if !contexts.contains(&row.context.as_str()) {
                contexts.push(&row.context);
            }
        }
        for context in contexts {
            let shares: Vec<f64> = table
                .rows
                .iter()
                .filter(|r| r.context == context)
                .filter_map(CaseRow::marked_share)
                .collect();
            if let (Some(&first), Some(&last)) = (shares.first(), shares.last()) {
                trends.push(ContextTrend {
                    context: context.to_string(),
                    first_share: first,
                    last_share: last,
                    rising: last > first,
                });
            }
        }
    }
    let consistent = table.map(|_| match regime {
        Regime::Categoricalization => trends.iter().all(|t| t.rising),
        Regime::StableVariation => trends.iter().all(|t| t.last_share < 0.99),
    });
    Ok(CaseStudyReport {
        p_unmarked,
        regime,
        regime_label: regime.to_string(),
        periods,
        trends,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn usage(form: &str, morphemes: u32, p: f64) -> FormUsage {
        FormUsage {
            profile: FormProfile::new(form, morphemes).unwrap(),
            probability_in_context: p,
        }
    }

    #[test]
    fn informativeness_examples() {
        assert_eq!(informativeness(0.5).unwrap(), 1.0);
        assert_eq!(informativeness(1.0).unwrap(), 0.0);
        assert!(matches!(informativeness(0.0), Err(Error::Domain(_))));
        assert!(informativeness(-0.1).is_err());
        assert!(informativeness(1.5).is_err());
    }

    #[test]
    fn reflexive_system_is_efficient() {
        let r = efficiency_report(&[usage("her", 1, 0.9), usage("herself", 2, 0.1)]).unwrap();
        assert_eq!(r.verdict, Efficiency::Efficient);
        assert!(r.forms[1].informativeness > r.forms[0].informativeness);
    }

    #[test]
    fn marked_common_meaning_is_inefficient() {
        let r = efficiency_report(&[usage("her", 1, 0.1), usage("her-other", 2, 0.9)]).unwrap();
        assert_eq!(r.verdict, Efficiency::Inefficient);
    }

    #[test]
    fn equal_probabilities_are_neutral() {
        let r = efficiency_report(&[usage("a", 1, 0.5), usage("ab", 2, 0.5)]).unwrap();
        assert_eq!(r.verdict, Efficiency::Neutral);
        assert_eq!(r.forms[0].informativeness, r.forms[1].informativeness);
    }

    #[test]
    fn single_form_is_usage_error() {
        assert!(matches!(efficiency_report(&[usage("a", 1, 1.0)]), Err(Error::Usage(_))));
        assert!(FormProfile::new("a", 0).is_err());
    }

    #[test]
    fn competition_usage_probabilities_sum_to_one() {
        let s = CompetitionState::new(0.9, 9.0, 1.0, 5.0).unwrap();
        let u = competition_usages(&s, FormProfile::new("her", 1).unwrap(), FormProfile::new("herself", 2).unwrap());
        assert_relative_eq!(u[0].probability_in_context + u[1].probability_in_context, 1.0, epsilon = 1e-15);
        assert_eq!(efficiency_report(&u).unwrap().verdict, Efficiency::Efficient);
    }

    #[test]
    fn spearman_basics() {
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    const TABLE: &str = "period,context,unmarked_count,marked_count\n\
        c750-1154,Object of V,419,89\n\
        1722-1777,Object of V,3,335\n";

    #[test]
    fn case_table_shares_and_round_trip() {
        let table = read_case_table(TABLE.as_bytes(), Path::new("t.csv")).unwrap();
        assert_eq!(table.rows[1].marked_share().map(|s| (s * 100.0).round()), Some(99.0));
        let mut buf = Vec::new();
        write_case_table(&table, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), TABLE);
    }

    #[test]
    fn malformed_rows_name_the_row() {
        let bad = "period,context,unmarked_count,marked_count\na,b,1,2\nc,d,x,2\n";
        match read_case_table(bad.as_bytes(), Path::new("bad.csv")) {
            Err(Error::Ingestion { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected ingestion error, got {other:?}"),
        }
        let wrong_header = "a,b,c,d\n1,2,3,4\n";
        assert!(read_case_table(wrong_header.as_bytes(), Path::new("h.csv")).is_err());
        let empty = "period,context,unmarked_count,marked_count\n";
        assert!(read_case_table(empty.as_bytes(), Path::new("e.csv")).is_err());
    }

    #[test]
    fn prior_totals_checked() {
        let bad = "category,unmarked_count,marked_count,total\n3fsg,10,1,12\n";
        assert!(matches!(
            read_prior_table(bad.as_bytes(), Path::new("p.csv")),
            Err(Error::Ingestion { row: 1, .. })
        ));
    }

    #[test]
    fn regime_from_priors() {
        let priors = "category,unmarked_count,marked_count,total\nfiction,985346,63722,1049068\n";
        let priors = read_prior_table(priors.as_bytes(), Path::new("p.csv")).unwrap();
        let report = case_study_report(None, &priors).unwrap();
        assert_eq!(report.regime, Regime::Categoricalization);
        assert_eq!(report.consistent, None);
        let table = read_case_table(TABLE.as_bytes(), Path::new("t.csv")).unwrap();
        let report = case_study_report(Some(&table), &priors).unwrap();
        assert_eq!(report.consistent, Some(true));
        assert_eq!(report.regime_label, "categoricalization (Theorem 4)");
    }

    proptest! {
        #[test]
        fn informativeness_is_additive(p in 1e-6f64..=1.0, q in 1e-6f64..=1.0) {
            let lhs = informativeness(p * q).unwrap();
            let rhs = informativeness(p).unwrap() + informativeness(q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn informativeness_is_decreasing(p in 1e-6f64..1.0, d in 1e-9f64..1.0) {
            let q = (p + d).min(1.0);
            prop_assume!(q > p);
            prop_assert!(informativeness(q).unwrap() < informativeness(p).unwrap());
        }
    }
}
