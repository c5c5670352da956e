use super::*;
use std::collections::BTreeMap;

fn plate_params(t_left: f64, t_right: f64, ratio: f64, notch: f64) -> PlateParams {
    PlateParams { t_left, t_right, conductivity_ratio: ratio, notch_size: notch }
}

#[test]
fn constant_dirichlet_gives_constant_field_and_zero_flux() {
    let p = plate_params(300.0, 300.0, 1.7, 0.3);
    let s = solve_plate_heat(&p, 12, 5).unwrap();
    for i in 0..s.n_nodes() {
        assert!((s.fields.get(i, 0) - 300.0).abs() < 1e-9, "temperature {}", s.fields.get(i, 0));
        assert!(s.fields.get(i, 1).abs() < 1e-9);
        assert!(s.fields.get(i, 2).abs() < 1e-9);
    }
}

#[test]
fn plate_interior_respects_dirichlet_bounds() {
    for seed in 0..20u64 {
        let p = plate_params(
            280.0 + (seed as f64 % 5.0) * 4.0,
            380.0 + (seed as f64 % 7.0) * 2.0,
            0.5 + 0.07 * seed as f64,
            0.1 + 0.02 * seed as f64,
        );
        let s = solve_plate_heat(&p, 16, seed).unwrap();
        let (lo, hi) = (p.t_left.min(p.t_right), p.t_left.max(p.t_right));
        let eps = 1e-9 * (hi - lo).max(1.0);
        for i in 0..s.n_nodes() {
            let t = s.fields.get(i, 0);
            assert!(t >= lo - eps && t <= hi + eps, "node {i}: {t} outside [{lo}, {hi}] (seed {seed})");
        }
    }
}

#[test]
fn plate_residual_is_small() {
    let p = plate_params(285.0, 395.0, 1.3, 0.25);
    let s = solve_plate_heat(&p, 24, 11).unwrap();
    let res = plate_system_residual(&s).unwrap();
    assert!(res < 1e-10, "relative residual {res}");
}

#[test]
fn plate_mesh_varies_with_seed_and_notch() {
    let a = solve_plate_heat(&plate_params(285.0, 395.0, 1.0, 0.2), 12, 1).unwrap();
    let b = solve_plate_heat(&plate_params(285.0, 395.0, 1.0, 0.2), 12, 2).unwrap();
    assert_ne!(a.coords.data(), b.coords.data());
    let c = solve_plate_heat(&plate_params(285.0, 395.0, 1.0, 0.45), 12, 1).unwrap();
    assert!(c.n_nodes() < a.n_nodes(), "bigger notch removes more nodes");
}

#[test]
fn rod_unloaded_is_identically_zero() {
    let p = RodParams { length: 1.0, thickness: 0.03, load: 0.0, modulus: 2e9 };
    let s = solve_rod_bending(&p, 64).unwrap();
    assert!(s.fields.data().iter().all(|&v| v == 0.0));

    // negative load is rejected
    let bad = RodParams { load: -1.0, ..p };
    assert!(matches!(solve_rod_bending(&bad, 64), Err(DataError::ParamOutOfRange { .. })));
}

#[test]
fn rod_tip_matches_closed_form_within_one_percent() {
    let mut rng_state = 123u64;
    let mut next = || {
        rng_state = derive_seed(rng_state, 1);
        (rng_state % 10_000) as f64 / 10_000.0
    };
    for _ in 0..50 {
        let p = RodParams {
            length: 0.9 + 0.2 * next(),
            thickness: 0.02 + 0.04 * next(),
            load: 90.0 + 20.0 * next(),
            modulus: 1.8e9 + 0.4e9 * next(),
        };
        let s = solve_rod_bending(&p, 200).unwrap();
        let tip = s.fields.get(s.n_nodes() - 1, 0);
        let exact = rod_tip_deflection_closed_form(&p);
        let rel = (tip - exact).abs() / exact;
        assert!(rel < 0.01, "tip {tip} vs closed form {exact} (rel {rel})");
    }
}

#[test]
fn rod_deflection_is_monotone_from_clamp_to_tip() {
    let p = RodParams { length: 1.0, thickness: 0.04, load: 100.0, modulus: 2e9 };
    let s = solve_rod_bending(&p, 200).unwrap();
    let mut prev = -1.0;
    for i in 0..s.n_nodes() {
        let w = s.fields.get(i, 0).abs();
        assert!(w >= prev - 1e-15, "deflection magnitude dips at node {i}");
        prev = w;
    }
}

#[test]
fn corpus_is_deterministic_and_stratified() {
    let task = TaskSpec::plate_heat();
    let a = build_corpus(&task, 40, 9).unwrap();
    let b = build_corpus(&task, 40, 9).unwrap();
    assert_eq!(a.len(), 40);
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert_eq!(x.params, y.params);
        assert_eq!(x.coords.data(), y.coords.data());
        assert_eq!(x.fields.data(), y.fields.data());
    }

    // dominant-parameter decile coverage on a bigger draw
    let task = TaskSpec::rod_bending();
    let c = build_corpus(&task, 120, 3).unwrap();
    let dom = task.dominant_param();
    let values = c.dominant_values();
    let mut decile_counts = [0usize; 10];
    for v in &values {
        let d = (((v - dom.min) / (dom.max - dom.min) * 10.0) as usize).min(9);
        decile_counts[d] += 1;
    }
    for (d, &count) in decile_counts.iter().enumerate() {
        assert!(count >= 120 / 20, "decile {d} has {count} samples");
    }
}

#[test]
fn single_sample_corpus_works() {
    let task = TaskSpec::rod_bending();
    let c = build_corpus(&task, 1, 0).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c.samples[0].sample_id, "rod-bending-000000");
}

#[test]
fn split_partitions_are_exhaustive_and_disjoint() {
    let task = TaskSpec::rod_bending();
    let corpus = build_corpus(&task, 80, 4).unwrap();
    let split = split_domains(&corpus, &task, Difficulty::Medium, &task.boundaries, 7).unwrap();
    split.check_partition(corpus.len()).unwrap();

    let total = split.partitions().iter().map(|(_, p)| p.len()).sum::<usize>();
    assert_eq!(total, corpus.len());

    // fractions round toward train
    let n_s = split.source_indices().len();
    assert_eq!(split.src_val.len(), n_s / 4);
    assert_eq!(split.src_test.len(), n_s / 4);
    assert_eq!(split.src_train.len(), n_s - 2 * (n_s / 4));
    let n_t = split.target_indices().len();
    assert_eq!(split.tgt_test.len(), n_t / 2);
    assert_eq!(split.tgt_train.len(), n_t - n_t / 2);

    // assignment respects the boundary
    let dom = task.dominant_index();
    for &i in &split.source_indices() {
        assert!(corpus.samples[i].params[dom] < split.boundary);
    }
    for &i in &split.target_indices() {
        assert!(corpus.samples[i].params[dom] >= split.boundary);
    }
}

#[test]
fn split_is_reproducible_and_nested_across_difficulties() {
    let task = TaskSpec::plate_heat();
    let corpus = build_corpus(&task, 60, 2).unwrap();
    let a = split_domains(&corpus, &task, Difficulty::Medium, &task.boundaries, 5).unwrap();
    let b = split_domains(&corpus, &task, Difficulty::Medium, &task.boundaries, 5).unwrap();
    assert_eq!(a, b);

    let easy = split_domains(&corpus, &task, Difficulty::Easy, &task.boundaries, 5).unwrap();
    let medium = split_domains(&corpus, &task, Difficulty::Medium, &task.boundaries, 5).unwrap();
    let hard = split_domains(&corpus, &task, Difficulty::Hard, &task.boundaries, 5).unwrap();
    let sets: Vec<std::collections::BTreeSet<usize>> = [&easy, &medium, &hard]
        .iter()
        .map(|s| s.source_indices().into_iter().collect())
        .collect();
    assert!(sets[1].is_subset(&sets[0]), "medium source nests in easy source");
    assert!(sets[2].is_subset(&sets[1]), "hard source nests in medium source");
}

#[test]
fn split_with_empty_target_errors() {
    let task = TaskSpec::rod_bending();
    let mut corpus = build_corpus(&task, 20, 1).unwrap();
    // force every dominant value below the boundary
    let dom = task.dominant_index();
    for s in &mut corpus.samples {
        s.params[dom] = 0.021;
    }
    let err = split_domains(&corpus, &task, Difficulty::Medium, &task.boundaries, 0).unwrap_err();
    assert!(matches!(err, DataError::InsufficientData { .. }));
}

#[test]
fn reference_shift_ranges_match_table_shape() {
    // rolling-style medium row: source [0.01, 0.115), target [0.115, 0.15]
    let mut task = TaskSpec::plate_heat();
    task.params[3] = ParamDescriptor { name: "reduction".into(), unit: "-".into(), min: 0.01, max: 0.15, dominant: true };
    task.boundaries = ShiftBoundaries { easy: 0.13, medium: 0.115, hard: 0.10 };
    task.validate().unwrap();
    assert_eq!(task.boundary(Difficulty::Medium), 0.115);

    let mut corpus = build_corpus(&TaskSpec::plate_heat(), 40, 0).unwrap();
    corpus.task = task.clone();
    // remap dominant values into the new range
    for (i, s) in corpus.samples.iter_mut().enumerate() {
        s.params[3] = 0.01 + 0.14 * (i as f64 + 0.5) / 40.0;
    }
    let split = split_domains(&corpus, &task, Difficulty::Medium, &task.boundaries, 1).unwrap();
    assert_eq!(split.source_range, (0.01, 0.115));
    assert_eq!(split.target_range, (0.115, 0.15));
}

#[test]
fn dataset_roundtrip_is_byte_identical() {
    let task = TaskSpec::rod_bending();
    let corpus = build_corpus(&task, 48, 6).unwrap();
    let mut splits = BTreeMap::new();
    for d in Difficulty::ALL {
        splits.insert(
            d.as_str().to_string(),
            split_domains(&corpus, &task, d, &task.boundaries, 6).unwrap(),
        );
    }

    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &corpus, &splits).unwrap();
    let first_manifest = std::fs::read(dir.path().join("manifest.json")).unwrap();
    let first_sample = std::fs::read(dir.path().join("samples/rod-bending-000003.bin")).unwrap();

    let ds = read_dataset(dir.path()).unwrap();
    assert_eq!(ds.samples.len(), 48);
    for (a, b) in ds.samples.iter().zip(&corpus.samples) {
        assert_eq!(a, b);
    }

    let dir2 = tempfile::tempdir().unwrap();
    let reloaded = Corpus { task: ds.manifest.task.clone(), seed: ds.manifest.seed, samples: ds.samples.clone() };
    write_dataset(dir2.path(), &reloaded, &ds.manifest.splits).unwrap();
    assert_eq!(first_manifest, std::fs::read(dir2.path().join("manifest.json")).unwrap());
    assert_eq!(first_sample, std::fs::read(dir2.path().join("samples/rod-bending-000003.bin")).unwrap());
}

#[test]
fn truncated_sample_reports_offset() {
    let task = TaskSpec::rod_bending();
    let corpus = build_corpus(&task, 1, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    write_sample(&path, &corpus.samples[0]).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let err = read_sample(&path, "s", 4).unwrap_err();
    match err {
        DataError::Format { offset, .. } => assert_eq!(offset as usize, bytes.len() / 2),
        other => panic!("expected format error, got {other}"),
    }
}

#[test]
fn corrupted_magic_reports_offset_zero() {
    let task = TaskSpec::rod_bending();
    let corpus = build_corpus(&task, 1, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    write_sample(&path, &corpus.samples[0]).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xFF;
    std::fs::write(&path, &bytes).unwrap();
    let err = read_sample(&path, "s", 4).unwrap_err();
    assert!(matches!(err, DataError::Format { offset: 0, .. }));
}
