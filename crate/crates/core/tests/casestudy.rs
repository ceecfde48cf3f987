use std::path::{Path, PathBuf};

use syntax_emergence::analysis::{
    case_study_report, ingest_case_table, ingest_prior_table, read_case_table, write_case_table,
};
use syntax_emergence::competition::Regime;
use syntax_emergence::Error;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn keenan_percentages_match_published_column() {
    let table = ingest_case_table(data("keenan.csv")).unwrap();
    let priors = ingest_prior_table(data("coca_pronouns.csv")).unwrap();
    let report = case_study_report(Some(&table), &priors).unwrap();
    let percent = |ctx: &str| -> Vec<u32> {
        report
            .periods
            .iter()
            .filter(|p| p.context == ctx)
            .map(|p| p.marked_percent.unwrap())
            .collect()
    };
    assert_eq!(percent("Object of V"), vec![18, 19, 20, 18, 81, 87, 99]);
    assert_eq!(percent("Object of P"), vec![18, 39, 48, 31, 64, 67, 72]);
    let last = report.periods.iter().find(|p| p.period == "1722-1777" && p.context == "Object of V").unwrap();
    assert_eq!(last.marked_share, Some(335.0 / 338.0));
    assert_eq!(report.consistent, Some(true));
}

#[test]
fn modern_priors_point_to_categoricalization() {
    for (file, unmarked, total) in [
        ("coca_pronouns.csv", 4_932_323.0, 5_350_599.0),
        ("coca_aspect.csv", 2_057_765.0, 2_346_111.0),
    ] {
        let priors = ingest_prior_table(data(file)).unwrap();
        assert!((priors.p_unmarked() - unmarked / total).abs() < 1e-15, "{file}");
        let report = case_study_report(None, &priors).unwrap();
        assert_eq!(report.regime, Regime::Categoricalization);
        assert_eq!(report.regime_label, "categoricalization (Theorem 4)");
        assert_eq!(report.consistent, None);
    }
}

#[test]
fn case_table_round_trips() {
    let table = ingest_case_table(data("keenan.csv")).unwrap();
    let mut bytes = Vec::new();
    write_case_table(&table, &mut bytes).unwrap();
    assert_eq!(String::from_utf8(bytes.clone()).unwrap(), std::fs::read_to_string(data("keenan.csv")).unwrap());
    assert_eq!(read_case_table(bytes.as_slice(), Path::new("mem")).unwrap(), table);
}

#[test]
fn ingestion_errors_name_the_row() {
    let text = "period,context,unmarked_count,marked_count\na,V,1,2\nb,V,x,3\n";
    match read_case_table(text.as_bytes(), Path::new("t.csv")) {
        Err(Error::Ingestion { row, .. }) => assert_eq!(row, 2),
        other => panic!("{other:?}"),
    }
    let wrong_header = "when,context,unmarked_count,marked_count\na,V,1,2\n";
    match read_case_table(wrong_header.as_bytes(), Path::new("t.csv")) {
        Err(Error::Ingestion { row, .. }) => assert_eq!(row, 0),
        other => panic!("{other:?}"),
    }
    assert!(matches!(ingest_case_table(data("absent.csv")), Err(Error::Ingestion { row: 0, .. })));
}
