use lorentz_fgg::io::{load_model, save_model, Encoding, Model, StoredLayer};
use lorentz_fgg::layers::{Activation, ActivationBase, FggLinear};
use lorentz_fgg::sampling::{gaussian_vector, random_batch};
use lorentz_fgg::{Curvature, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model() -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let k = Curvature::new(1.5).unwrap();
    let mut l1 = FggLinear::init(&mut rng, 3, 5, Activation::default(), k);
    l1.bias = gaussian_vector(&mut rng, 5, 1.0);
    let mut l2 = FggLinear::init(&mut rng, 5, 2, Activation::lorentzian(ActivationBase::Tanh), k);
    l2.bias = gaussian_vector(&mut rng, 2, 1.0);
    Model::new(
        k,
        vec![
            StoredLayer::Fgg { layer: l1, bn_running_mean: None },
            StoredLayer::Fgg { layer: l2, bn_running_mean: None },
        ],
    )
    .unwrap()
}

#[test]
fn save_load_gives_identical_forward() {
    let dir = tempfile::tempdir().unwrap();
    let m = model();
    let x = random_batch(&mut ChaCha8Rng::seed_from_u64(1), 10, 3, m.k, 2.0);
    let y = m.forward(x.view()).unwrap();
    for enc in [Encoding::Text, Encoding::Binary] {
        let path = dir.path().join("m.json");
        save_model(&path, &m, enc).unwrap();
        assert_eq!(load_model(&path).unwrap().forward(x.view()).unwrap(), y);
    }
}

#[test]
fn cache_file_round_trip_and_inversion() {
    let dir = tempfile::tempdir().unwrap();
    let m = model();
    let path = dir.path().join("cache.json");
    save_model(&path, &m.to_cached().unwrap(), Encoding::Binary).unwrap();
    let loaded = load_model(&path).unwrap();
    assert!(loaded.is_inference_only());
    let x = random_batch(&mut ChaCha8Rng::seed_from_u64(2), 6, 3, m.k, 2.0);
    assert_eq!(loaded.forward(x.view()).unwrap(), m.forward(x.view()).unwrap());
    let inverted = loaded.invert_caches().unwrap();
    assert!(!inverted.is_inference_only());
    for (a, b) in inverted.layers.iter().zip(m.layers.iter()) {
        let (StoredLayer::Fgg { layer: la, .. }, StoredLayer::Fgg { layer: lb, .. }) = (a, b) else { panic!() };
        let (wa, wb) = (la.effective_weights().unwrap(), lb.effective_weights().unwrap());
        for (p, q) in wa.iter().chain(la.bias.iter()).zip(wb.iter().chain(lb.bias.iter())) {
            assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_model("/nonexistent/model.json"), Err(Error::Io(_))));
}
