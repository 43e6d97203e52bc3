use gaitauth::classifiers::{
    decide_score, train, Decision, Family, ForestParams, ModelSpec, RbfParams, Scorer, TrainedAuthModel,
};
use gaitauth::seed;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

fn blobs(n: usize, centre: [f64; 3], spread: f64, seed_value: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed_value);
    Array2::from_shape_fn((n, 3), |(_, j)| (centre[j] + spread * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0))
}

/// Points away from the quadrant boundaries, split by the XOR of the two halves.
fn xor_points(n: usize, seed_value: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = seed::rng(seed_value);
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    while pos.len() / 2 + neg.len() / 2 < n {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        if (x - 0.5).abs() < 0.05 || (y - 0.5).abs() < 0.05 {
            continue;
        }
        if (x > 0.5) != (y > 0.5) { pos.extend([x, y]) } else { neg.extend([x, y]) }
    }
    (Array2::from_shape_vec((pos.len() / 2, 2), pos).unwrap(), Array2::from_shape_vec((neg.len() / 2, 2), neg).unwrap())
}

fn accuracy(model: &dyn Scorer, genuine: ArrayView2<f64>, impostor: ArrayView2<f64>) -> f64 {
    let g = model.score_rows(genuine).iter().filter(|&&s| s >= 0.5).count();
    let i = model.score_rows(impostor).iter().filter(|&&s| s < 0.5).count();
    (g + i) as f64 / (genuine.nrows() + impostor.nrows()) as f64
}

/// Best single axis-aligned split by exhaustive search.
fn stump_accuracy(genuine: ArrayView2<f64>, impostor: ArrayView2<f64>) -> f64 {
    let n = (genuine.nrows() + impostor.nrows()) as f64;
    let mut best: f64 = 0.0;
    for j in 0..genuine.ncols() {
        for t in genuine.column(j).iter().chain(impostor.column(j).iter()) {
            let g_hi = genuine.column(j).iter().filter(|&&v| v >= *t).count();
            let i_hi = impostor.column(j).iter().filter(|&&v| v >= *t).count();
            let hi_is_genuine = (g_hi + impostor.nrows() - i_hi) as f64 / n;
            best = best.max(hi_is_genuine).max(1.0 - hi_is_genuine);
        }
    }
    best
}

#[test]
fn linear_svm_separates_blobs() {
    let g = blobs(100, [0.2, 0.2, 0.2], 0.03, 1);
    let i = blobs(100, [0.8, 0.8, 0.8], 0.03, 2);
    let m = train(&ModelSpec::default_for(Family::Linsvm), g.view(), i.view(), 3).unwrap();
    assert_eq!(accuracy(&m, g.view(), i.view()), 1.0);
    assert!(m.score(&[0.2, 0.2, 0.2]).unwrap() > 0.5);
    assert!(m.score(&[0.8, 0.8, 0.8]).unwrap() < 0.5);
}

#[test]
fn rbf_svm_learns_xor() {
    let (g, i) = xor_points(200, 4);
    let (tg, ti) = xor_points(200, 5);
    let spec = ModelSpec::Rbfsvm(RbfParams { c: 1.0, gamma: Some(10.0), ..RbfParams::default() });
    let m = train(&spec, g.view(), i.view(), 6).unwrap();
    assert!(accuracy(&m, tg.view(), ti.view()) >= 0.95);
    // No linear cut does much better than chance on XOR.
    assert!(stump_accuracy(tg.view(), ti.view()) < 0.75);
}

#[test]
fn forest_matches_single_split_oracle() {
    let mut rng = seed::rng(7);
    let x = Array2::from_shape_fn((600, 4), |_| rng.random::<f64>());
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..600).partition(|i| i % 3 != 0);
    let split = |idx: &[usize], genuine: bool| {
        let rows: Vec<usize> = idx.iter().copied().filter(|&r| (x[[r, 2]] > 0.37) == genuine).collect();
        x.select(ndarray::Axis(0), &rows)
    };
    let (g, i) = (split(&train_idx, true), split(&train_idx, false));
    let (tg, ti) = (split(&test_idx, true), split(&test_idx, false));
    let spec = ModelSpec::Rndf(ForestParams { n_trees: 50, ..ForestParams::default() });
    let m = train(&spec, g.view(), i.view(), 8).unwrap();
    let acc = accuracy(&m, tg.view(), ti.view());
    assert!(acc >= 0.98, "held-out accuracy {acc}");
    assert!(acc >= stump_accuracy(tg.view(), ti.view()) - 0.02);
}

fn trained_all(seed_value: u64) -> Vec<TrainedAuthModel> {
    let g = blobs(40, [0.3, 0.4, 0.5], 0.1, 10);
    let i = blobs(60, [0.6, 0.5, 0.4], 0.1, 11);
    [Family::Linsvm, Family::Rbfsvm, Family::Rndf, Family::Ffnn]
        .into_iter()
        .map(|f| train(&ModelSpec::default_for(f), g.view(), i.view(), seed_value).unwrap().with_user("u1"))
        .collect()
}

#[test]
fn json_round_trip_is_byte_exact() {
    let probes = blobs(50, [0.5, 0.5, 0.5], 0.3, 12);
    for m in trained_all(13) {
        let json = m.to_json().unwrap();
        let back = TrainedAuthModel::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json, "{}", m.family);
        for r in probes.outer_iter() {
            let r = r.to_vec();
            assert_eq!(m.score(&r).unwrap().to_bits(), back.score(&r).unwrap().to_bits());
        }
    }
}

#[test]
fn save_and_load_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for m in trained_all(14) {
        let path = dir.path().join(format!("{}.json", m.family));
        m.save(&path).unwrap();
        assert_eq!(TrainedAuthModel::load(&path).unwrap().to_json().unwrap(), m.to_json().unwrap());
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let a: Vec<String> = trained_all(15).iter().map(|m| m.to_json().unwrap()).collect();
    let b: Vec<String> = trained_all(15).iter().map(|m| m.to_json().unwrap()).collect();
    assert_eq!(a, b);
}

#[test]
fn raising_threshold_never_turns_reject_into_accept() {
    let probes = blobs(200, [0.5, 0.5, 0.5], 0.3, 16);
    for m in trained_all(17) {
        for r in probes.outer_iter() {
            let s = m.score(&r.to_vec()).unwrap();
            assert!((0.0..=1.0).contains(&s));
            let mut accepted = true;
            for k in 0..=20 {
                let d = decide_score(s, k as f64 / 20.0);
                if !accepted {
                    assert_eq!(d, Decision::Impostor);
                }
                accepted = d == Decision::Genuine;
            }
        }
    }
}
