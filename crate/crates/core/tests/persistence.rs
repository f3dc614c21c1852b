use mrq_core::synth::SpectralGaussian;
use mrq_core::*;

fn build(seed: u64) -> (Matrix, IvfIndex) {
    let g = SpectralGaussian::power_law(64, 1.2, 8);
    let data = g.sample(4_000, 1);
    let cfg = IndexConfig {
        k: Some(32),
        seed,
        ..IndexConfig::new(16)
    };
    (data.clone(), IvfIndex::build(&data, &cfg).unwrap())
}

#[test]
fn fixed_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = build(3);
    let (_, b) = build(3);
    a.save(dir.path().join("a.mrq")).unwrap();
    b.save(dir.path().join("b.mrq")).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("a.mrq")).unwrap(),
        std::fs::read(dir.path().join("b.mrq")).unwrap()
    );
    let (_, c) = build(4);
    assert_ne!(a.to_bytes().unwrap(), c.to_bytes().unwrap());
}

#[test]
fn reloaded_index_answers_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("idx.mrq");
    let (_, index) = build(5);
    index.save(&path).unwrap();
    let back = IvfIndex::load(&path).unwrap();
    let queries = SpectralGaussian::power_law(64, 1.2, 8).sample(100, 9);
    for mode in [
        SearchMode::Full,
        SearchMode::NoCorrection,
        SearchMode::ExactOnly,
    ] {
        let params = SearchParams::for_index(&index, 10, 6).with_mode(mode);
        let a = batch_search(&queries, &index, &params, 1).unwrap();
        let b = batch_search(&queries, &back, &params, 1).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.stats.exact_computed, b.stats.exact_computed);
    }
}

#[test]
fn truncated_and_foreign_files_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("idx.mrq");
    let (_, index) = build(6);
    let bytes = index.to_bytes().unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    assert!(matches!(
        IvfIndex::load(&path),
        Err(MrqError::Format { .. })
    ));
    let pca = index.pca().to_bytes();
    std::fs::write(&path, &pca).unwrap();
    assert!(matches!(
        IvfIndex::load(&path),
        Err(MrqError::VersionMismatch { .. })
    ));
    assert!(matches!(
        IvfIndex::load(dir.path().join("missing.mrq")),
        Err(MrqError::Io(_))
    ));
}

#[test]
fn corpus_survives_fvecs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = build(7);
    let p = dir.path().join("base.fvecs");
    write_vecs(&p, &data, ElementKind::F32).unwrap();
    let info = DatasetFile::inspect(&p, ElementKind::F32).unwrap();
    assert_eq!((info.count, info.dim), (4_000, 64));
    assert_eq!(read_vecs(&p, ElementKind::F32).unwrap(), data);
}
