mod common;

use common::{index, oracle};
use spagent_core::retrieval::{HopContext, Retriever};

#[test]
fn five_document_ranking_matches_oracle() {
    let hits = index().retrieve("radar clutter", 5).unwrap();
    let expected = oracle("radar clutter", &[]);
    assert_eq!(hits.iter().map(|h| h.doc_id.as_str()).collect::<Vec<_>>(), ["d1", "d3", "d5", "d2", "d4"]);
    for (h, (id, s)) in hits.iter().zip(&expected) {
        assert_eq!(&h.doc_id, id);
        assert!((h.score - s).abs() < 1e-12);
    }
    assert!((hits[0].score - 3.0 / 10f64.sqrt()).abs() < 1e-12);
    assert!((hits[1].score - 0.5).abs() < 1e-12);
}

#[test]
fn top_k_truncates() {
    let hits = index().retrieve("doppler", 2).unwrap();
    assert_eq!(hits.iter().map(|h| h.doc_id.as_str()).collect::<Vec<_>>(), ["d2", "d3"]);
}

#[test]
fn two_hop_accumulation() {
    let idx = index();
    let query = "radar clutter";
    let hop1 = idx.retrieve_with_context(query, &HopContext::default(), 1).unwrap();
    assert_eq!(hop1[0].doc_id, "d1");

    let ctx = HopContext {
        documents: vec![(hop1[0].doc_id.clone(), hop1[0].text.clone())],
        answers: vec!["look at the doppler".into()],
    };
    // second query: radar x3, clutter x2, doppler x1; d1 is excluded
    let hop2 = idx.retrieve_with_context(query, &ctx, 4).unwrap();
    let expected = oracle(&format!("{query}\n\n{}", ctx.render()), &["d1"]);
    assert_eq!(hop2.len(), 4);
    assert_eq!(hop2.iter().map(|h| h.doc_id.as_str()).collect::<Vec<_>>(), ["d3", "d5", "d2", "d4"]);
    for (h, (id, s)) in hop2.iter().zip(&expected) {
        assert_eq!(&h.doc_id, id);
        assert!((h.score - s).abs() < 1e-12);
    }
    assert!((hop2[0].score - 4.0 / 28f64.sqrt()).abs() < 1e-12);
}
