use langflow::corpus::{self, PreprocessConfig, StopWords};
use langflow::provenance::Provenance;

const RECORDS: &str = r#"{"id":"t1","year":1985,"title":"Running rivers","abstract":"The rivers were running and flooding.","subjects":["geo.1"]}
{"id":"t2","year":1986,"title":"Flooding","abstract":"Rivers flooding the plains; running water.","subjects":["geo.1","hyd.2"],"author":"ignored"}
{"id":"t3","year":1990,"title":"","abstract":"Running experiments on water chemistry.","subjects":["chem.3"]}
this line is not json
{"id":"t4","year":1979,"title":"Too early","abstract":"rivers rivers rivers","subjects":["geo.1"]}
{"id":"t5","year":1995,"title":"No subjects","abstract":"rivers","subjects":[]}
{"id":"t6","year":2001,"title":"Water","abstract":"Water chemistry of rivers.","subjects":["chem.3","chem.3"]}
{"id":"t2","year":2002,"title":"Duplicate","abstract":"rivers","subjects":["geo.1"]}
{"id":"t7","year":2003,"title":"Of the","abstract":"and the of","subjects":["geo.1"]}
{"id":"t8","year":2010,"title":"Plains","abstract":"Flooding plains and water","subjects":["hyd.2"]}
"#;

fn stopwords() -> StopWords {
    StopWords::from_reader("# common\nthe\nand\nof\non\nwere\n".as_bytes()).unwrap()
}

#[test]
fn fixture_builds_the_expected_corpus() {
    let (records, unreadable) = corpus::read_records(RECORDS.as_bytes()).unwrap();
    assert_eq!(records.len(), 9);
    assert_eq!(unreadable.len(), 1);
    assert_eq!(unreadable[0].record, "line 4");

    let config = PreprocessConfig {
        min_df: 2,
        ..PreprocessConfig::default()
    };
    let (corpus, report) = corpus::preprocess(&records, &stopwords(), &config).unwrap();
    let skipped: Vec<&str> = report.skipped.iter().map(|d| d.record.as_str()).collect();
    assert_eq!(skipped, ["t4", "t5", "t2"]);
    // t7 is nothing but stopwords.
    assert_eq!(report.dropped, ["t7"]);

    let ids: Vec<&str> = corpus.documents.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["t1", "t2", "t3", "t6", "t8"]);
    // Terms in at least two documents, stemmed, in lexicographic order.
    assert_eq!(corpus.vocabulary.terms(), ["chemistri", "flood", "plain", "river", "run", "water"]);
    assert_eq!(corpus.vocabulary.doc_freq(corpus.vocabulary.index_of("river").unwrap()), 3);
    assert_eq!(corpus.documents[3].labels, ["chem.3"], "repeated subject codes collapse");

    let t1: Vec<&str> = corpus.documents[0].tokens.iter().map(|&t| corpus.vocabulary.term(t)).collect();
    assert_eq!(t1, ["run", "river", "river", "run", "flood"]);

    let without_title = PreprocessConfig {
        min_df: 2,
        include_title: false,
        ..PreprocessConfig::default()
    };
    let (abstracts, _) = corpus::preprocess(&records, &stopwords(), &without_title).unwrap();
    let t1: Vec<&str> = abstracts.documents[0].tokens.iter().map(|&t| abstracts.vocabulary.term(t)).collect();
    assert_eq!(t1, ["river", "run", "flood"]);
}

#[test]
fn bundle_round_trips() {
    let (records, _) = corpus::read_records(RECORDS.as_bytes()).unwrap();
    let (corpus, _) = corpus::preprocess(&records, &stopwords(), &PreprocessConfig { min_df: 1, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let prov = Provenance::new("preprocess").config("min-df", 1);
    corpus::write_bundle(dir.path(), &corpus, &prov).unwrap();
    assert_eq!(corpus::read_bundle(dir.path()).unwrap(), corpus);
    let read_back = Provenance::read_from(&dir.path().join(corpus::DOCS_FILE)).unwrap();
    assert_eq!(read_back, Some(prov));
}

#[test]
fn reference_stems_are_mostly_fixed_points() {
    // Stemming is not idempotent in general, but re-stemming the reference
    // outputs changes only a small minority of them.
    let out = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/porter_output.txt")).unwrap();
    let stems: Vec<&str> = out.lines().collect();
    let moved = stems.iter().filter(|s| corpus::porter::stem(s) != **s).count();
    assert!((moved as f64) < 0.1 * stems.len() as f64, "{moved} of {} stems move", stems.len());
}
