use lorentz_fgg::grad::{finite_difference_gradient, Trainable, TrainableChen, TrainableFgg, DEFAULT_STEP};
use lorentz_fgg::layers::{Activation, ActivationBase, ActivationMode, ChenLinear, FggLinear};
use lorentz_fgg::sampling::{gaussian_matrix, gaussian_vector, random_batch};
use lorentz_fgg::{Curvature, Error};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linear_loss(y: ArrayView2<f64>, c: &Array2<f64>) -> f64 {
    (&y * c).sum()
}

/// Worst per-coordinate relative error with denominator `max(1e-8, |analytic|)`.
fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1e-8))
        .fold(0.0, f64::max)
}

fn check<T: Trainable + Clone>(layer: &T, x: &Array2<f64>, c: &Array2<f64>, training: bool) -> (f64, f64) {
    let mut l = layer.clone();
    l.forward(x.view(), training).unwrap();
    let (g, dx) = l.backward(c.view()).unwrap();
    let p0 = l.params();
    let numeric = finite_difference_gradient(
        |p| {
            let mut m = layer.clone();
            m.set_params(p).unwrap();
            linear_loss(m.forward(x.view(), training).unwrap().view(), c)
        },
        &p0,
        DEFAULT_STEP,
    );
    // Input gradient along a random ambient direction.
    let dir = Array2::from_shape_fn(x.dim(), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let f = |t: f64| {
        let mut m = layer.clone();
        linear_loss(m.forward((x + &(&dir * t)).view(), training).unwrap().view(), c)
    };
    let numeric_dx = (f(DEFAULT_STEP) - f(-DEFAULT_STEP)) / (2.0 * DEFAULT_STEP);
    let analytic_dx = (&dx * &dir).sum();
    (max_rel_err(&g, &numeric), (analytic_dx - numeric_dx).abs() / analytic_dx.abs().max(1e-8))
}

/// Gains with `|g| ∈ [0.25, 2]` and random sign.
fn random_gains<R: Rng>(rng: &mut R, n: usize) -> ndarray::Array1<f64> {
    ndarray::Array1::from_shape_simple_fn(n, || {
        let m = rng.random_range(0.25..2.0);
        if rng.random::<bool>() { m } else { -m }
    })
}

const BASES: [ActivationBase; 4] =
    [ActivationBase::Identity, ActivationBase::Relu, ActivationBase::LeakyRelu(0.01), ActivationBase::Tanh];

#[test]
fn fgg_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let k = Curvature::new(rng.random_range(0.25..4.0)).unwrap();
        let (d_in, d_out, n) = (rng.random_range(2..5), rng.random_range(1..4), rng.random_range(2..6));
        let mode = if trial % 2 == 0 { ActivationMode::Lorentzian } else { ActivationMode::Plain };
        let act = Activation::new(BASES[trial % 4], mode);
        let mut layer = FggLinear::init(&mut rng, d_in, d_out, act, k);
        layer.weights.g = random_gains(&mut rng, d_out);
        layer.bias = gaussian_vector(&mut rng, d_out, 0.5);
        let x = random_batch(&mut rng, n, d_in, k, 1.5 / k.sqrt());
        let c = gaussian_matrix(&mut rng, n, d_out + 1, 1.0);
        let bn = trial % 3 == 0;
        let t = TrainableFgg::new(layer, bn);
        let (ep, ex) = check(&t, &x, &c, trial % 6 != 3);
        worst = worst.max(ep).max(ex);
        assert!(ep <= 1e-5 && ex <= 1e-5, "trial {trial}: param {ep:e}, input {ex:e}");
    }
    eprintln!("fgg worst relative gradient error {worst:e}");
}

#[test]
fn chen_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..100 {
        let k = Curvature::new(rng.random_range(0.25..4.0)).unwrap();
        let (d_in, d_out, n) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(2..6));
        let layer = ChenLinear::init(&mut rng, d_in, d_out, k);
        let x = random_batch(&mut rng, n, d_in, k, 1.5 / k.sqrt());
        let c = gaussian_matrix(&mut rng, n, d_out + 1, 1.0);
        let t = TrainableChen::new(layer, trial % 2 == 0, BASES[trial % 4]);
        let (ep, ex) = check(&t, &x, &c, true);
        assert!(ep <= 1e-5 && ex <= 1e-5, "trial {trial}: param {ep:e}, input {ex:e}");
    }
}

#[test]
fn one_dimensional_directions_have_zero_gradient() {
    // With a single input coordinate the weight direction is fixed up to sign.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let k = Curvature::new(1.3).unwrap();
    let mut layer = FggLinear::init(&mut rng, 1, 3, Activation::default(), k);
    layer.bias = gaussian_vector(&mut rng, 3, 0.5);
    let mut t = TrainableFgg::new(layer, false);
    let x = random_batch(&mut rng, 5, 1, k, 1.0);
    t.forward(x.view(), true).unwrap();
    let (g, _) = t.backward_params(gaussian_matrix(&mut rng, 5, 4, 1.0).view()).unwrap();
    assert!(g.d_a.iter().all(|&v| v == 0.0));
}

#[test]
fn identity_configuration_bias_gradient() {
    let k = Curvature::UNIT;
    let layer = FggLinear::from_weights(ndarray::array![[1.0, 0.0], [0.0, 1.0]].view(), ndarray::array![0.0, 0.0], Activation::identity(), k).unwrap();
    let x = ndarray::array![[1f64.cosh(), 1f64.sinh(), 0.0]];
    let mut c = Array2::zeros((1, 3));
    c[[0, 2]] = 1.0;
    let (ep, _) = check(&TrainableFgg::new(layer, false), &x, &c, false);
    assert!(ep <= 1e-5);
}

#[test]
fn constant_loss_has_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = Curvature::UNIT;
    let mut t = TrainableFgg::new(FggLinear::init(&mut rng, 2, 3, Activation::default(), k), false);
    let x = random_batch(&mut rng, 4, 2, k, 1.0);
    t.forward(x.view(), true).unwrap();
    let (g, dx) = t.backward(Array2::zeros((4, 4)).view()).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
    assert!(dx.iter().all(|&v| v == 0.0));
}

#[test]
fn backward_requires_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = TrainableFgg::new(FggLinear::init(&mut rng, 2, 2, Activation::default(), Curvature::UNIT), false);
    assert_eq!(t.backward(Array2::zeros((1, 3)).view()).unwrap_err(), Error::MissingForward);
    let c = TrainableChen::new(ChenLinear::init(&mut rng, 2, 2, Curvature::UNIT), false, ActivationBase::Identity);
    assert_eq!(c.backward(Array2::zeros((1, 3)).view()).unwrap_err(), Error::MissingForward);
}
