//! Perturbation specifications and their reduction to box verification
//! queries.
//!
//! Noise is a per-pixel l-infinity ball and needs no encoding. Brightness
//! and contrast become box queries over a modified input space by prepending
//! an affine input layer to the network:
//!
//! - brightness: inputs `(z_1..z_n, b)`, prepended layer computes
//!   `x_i = z_i + b` (weights 1, biases 0). Bounding the pixel inputs to an
//!   epsilon-ball gives combined two-dimensional noise+brightness queries.
//! - contrast: a single input `c`, prepended layer computes
//!   `x_i = (x'_i - mu) * c + mu` (anchor-specific weights, biases `mu`).
//!
//! Perturbed pixels are NOT clipped to `[0, 1]`: the perturbation formulas
//! are pure affine shifts/scalings and clipping would break the affine
//! encodings. Output metadata records this choice.

use crate::ingest::Image;
use crate::nn::{InputBox, Matrix, Network, NetworkError, OutputProperty, PropertyError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("invalid perturbation parameter: {0}")]
    InvalidParameter(String),
    #[error("anchor is classified as {predicted}, not the stated class {expected}")]
    AnchorMisclassified { expected: usize, predicted: usize },
    #[error("anchor classification ties with another class; strictly classified anchors required")]
    AnchorTied,
    #[error("anchor has {anchor} pixels but the network expects {network} inputs")]
    AnchorDimension { network: usize, anchor: usize },
    #[error(
        "simultaneous noise and contrast cannot be encoded: the contrast construction fixes \
         the anchor pixels as constants, leaving no affine way to bound them in a noise ball"
    )]
    NoiseContrastUnsupported,
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Which perturbation family a query covers, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PerturbationKind {
    Noise { epsilon: f64 },
    Brightness { beta: f64 },
    NoiseAndBrightness { epsilon: f64, beta: f64 },
    Contrast { gamma: f64, mu: f64 },
}

/// A perturbation around a concrete anchor image.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub anchor: Image,
    pub true_class: usize,
}

fn require(cond: bool, msg: &str) -> Result<(), EncodeError> {
    if cond {
        Ok(())
    } else {
        Err(EncodeError::InvalidParameter(msg.to_string()))
    }
}

impl PerturbationSpec {
    pub fn noise(anchor: Image, true_class: usize, epsilon: f64) -> Result<Self, EncodeError> {
        require(epsilon >= 0.0 && epsilon.is_finite(), "epsilon must be >= 0")?;
        Ok(PerturbationSpec {
            kind: PerturbationKind::Noise { epsilon },
            anchor,
            true_class,
        })
    }

    pub fn brightness(anchor: Image, true_class: usize, beta: f64) -> Result<Self, EncodeError> {
        require(beta >= 0.0 && beta.is_finite(), "beta must be >= 0")?;
        Ok(PerturbationSpec {
            kind: PerturbationKind::Brightness { beta },
            anchor,
            true_class,
        })
    }

    pub fn noise_brightness(
        anchor: Image,
        true_class: usize,
        epsilon: f64,
        beta: f64,
    ) -> Result<Self, EncodeError> {
        require(epsilon >= 0.0 && epsilon.is_finite(), "epsilon must be >= 0")?;
        require(beta >= 0.0 && beta.is_finite(), "beta must be >= 0")?;
        Ok(PerturbationSpec {
            kind: PerturbationKind::NoiseAndBrightness { epsilon, beta },
            anchor,
            true_class,
        })
    }

    pub fn contrast(
        anchor: Image,
        true_class: usize,
        gamma: f64,
        mu: f64,
    ) -> Result<Self, EncodeError> {
        require((0.0..=1.0).contains(&gamma), "gamma must be in [0, 1]")?;
        require((0.0..=1.0).contains(&mu), "mu must be in [0, 1]")?;
        Ok(PerturbationSpec {
            kind: PerturbationKind::Contrast { gamma, mu },
            anchor,
            true_class,
        })
    }

    /// Always fails: there is no affine encoding for simultaneous noise and
    /// contrast perturbations (the contrast layer hard-codes the anchor).
    pub fn noise_contrast(
        _anchor: Image,
        _true_class: usize,
        _epsilon: f64,
        _gamma: f64,
        _mu: f64,
    ) -> Result<Self, EncodeError> {
        Err(EncodeError::NoiseContrastUnsupported)
    }
}

/// A concrete box query for the verifier: decide whether some input in
/// `input_box` drives `network` into `property`.
#[derive(Debug, Clone)]
pub struct VerificationQuery {
    pub network: Network,
    pub input_box: InputBox,
    pub property: OutputProperty,
    /// The perturbation this query encodes; `None` for ad-hoc queries built
    /// directly from a box (test harnesses, FFI callers).
    pub provenance: Option<PerturbationSpec>,
}

impl VerificationQuery {
    /// Builds a raw query from parts; no anchor/classification checks.
    pub fn from_parts(network: Network, input_box: InputBox, property: OutputProperty) -> Self {
        debug_assert_eq!(network.input_dim(), input_box.dim());
        VerificationQuery {
            network,
            input_box,
            property,
            provenance: None,
        }
    }
}

/// Misclassification output property for `k` classes with the stated true
/// class; satisfied by `y` iff some `j != c` has `y_j >= y_c`.
pub fn misclass_property(true_class: usize, num_classes: usize) -> Result<OutputProperty, PropertyError> {
    OutputProperty::misclassification(true_class, num_classes)
}

/// True iff the network strictly classifies `input` as `class`
/// (`y_class > y_j` for every other `j`). Ties are rejected because under
/// the closed misclassification inequality a tied anchor is already a
/// counterexample at zero perturbation.
pub fn strictly_classified(
    net: &Network,
    input: &[f64],
    class: usize,
) -> Result<bool, NetworkError> {
    let out = net.evaluate(input)?;
    Ok(out
        .iter()
        .enumerate()
        .all(|(j, yj)| j == class || out[class] > *yj))
}

fn check_anchor(net: &Network, spec: &PerturbationSpec) -> Result<OutputProperty, EncodeError> {
    if spec.anchor.pixels().len() != net.input_dim() {
        return Err(EncodeError::AnchorDimension {
            network: net.input_dim(),
            anchor: spec.anchor.pixels().len(),
        });
    }
    let property = misclass_property(spec.true_class, net.output_dim())?;
    let predicted = net.classify(spec.anchor.pixels())?;
    if predicted != spec.true_class {
        return Err(EncodeError::AnchorMisclassified {
            expected: spec.true_class,
            predicted,
        });
    }
    if !strictly_classified(net, spec.anchor.pixels(), spec.true_class)? {
        return Err(EncodeError::AnchorTied);
    }
    Ok(property)
}

/// Noise query: the box is the epsilon-ball around the anchor, the network
/// is unchanged.
pub fn noise_query(net: &Network, spec: &PerturbationSpec) -> Result<VerificationQuery, EncodeError> {
    let PerturbationKind::Noise { epsilon } = spec.kind else {
        return Err(EncodeError::InvalidParameter(
            "noise_query requires a Noise spec".into(),
        ));
    };
    let property = check_anchor(net, spec)?;
    let x = spec.anchor.pixels();
    let input_box = InputBox::new(
        x.iter().map(|v| v - epsilon).collect(),
        x.iter().map(|v| v + epsilon).collect(),
    )
    .expect("epsilon-ball bounds are ordered");
    Ok(VerificationQuery {
        network: net.clone(),
        input_box,
        property,
        provenance: Some(spec.clone()),
    })
}

/// Brightness (optionally combined with noise) query over an augmented
/// network with one extra input.
///
/// The prepended layer computes `x_i = z_i + b` where inputs `1..n` are the
/// (possibly noise-perturbed) pixels and input `n+1` is the brightness
/// shift. For every `(z, b)` in the box,
/// `evaluate(aug, (z, b)) == evaluate(net, z + b)` exactly: the dot product
/// accumulates zeros, then `z_i`, then `1 * b`, which is the same single
/// rounding as the direct shift.
pub fn brightness_query(
    net: &Network,
    spec: &PerturbationSpec,
) -> Result<VerificationQuery, EncodeError> {
    let (epsilon, beta) = match spec.kind {
        PerturbationKind::Brightness { beta } => (0.0, beta),
        PerturbationKind::NoiseAndBrightness { epsilon, beta } => (epsilon, beta),
        _ => {
            return Err(EncodeError::InvalidParameter(
                "brightness_query requires a Brightness or NoiseAndBrightness spec".into(),
            ))
        }
    };
    let property = check_anchor(net, spec)?;
    let n = net.input_dim();
    let mut weights = vec![0.0; n * (n + 1)];
    for i in 0..n {
        weights[i * (n + 1) + i] = 1.0;
        weights[i * (n + 1) + n] = 1.0;
    }
    let augmented = net.prepend_layer(Matrix::new(n, n + 1, weights), vec![0.0; n])?;
    let x = spec.anchor.pixels();
    let mut lower: Vec<f64> = x.iter().map(|v| v - epsilon).collect();
    let mut upper: Vec<f64> = x.iter().map(|v| v + epsilon).collect();
    lower.push(-beta);
    upper.push(beta);
    let input_box = InputBox::new(lower, upper).expect("brightness bounds are ordered");
    Ok(VerificationQuery {
        network: augmented,
        input_box,
        property,
        provenance: Some(spec.clone()),
    })
}

/// Contrast query over a single-input network specific to this anchor.
///
/// The prepended layer has weights `x'_i - mu` and biases `mu`, so the sole
/// input `c` produces pixels `(x'_i - mu) * c + mu`; the box is
/// `[1 - gamma, 1 + gamma]`.
pub fn contrast_query(
    net: &Network,
    spec: &PerturbationSpec,
) -> Result<VerificationQuery, EncodeError> {
    let PerturbationKind::Contrast { gamma, mu } = spec.kind else {
        return Err(EncodeError::InvalidParameter(
            "contrast_query requires a Contrast spec".into(),
        ));
    };
    let property = check_anchor(net, spec)?;
    let x = spec.anchor.pixels();
    let weights: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let n = net.input_dim();
    let augmented = net.prepend_layer(Matrix::new(n, 1, weights), vec![mu; n])?;
    let input_box =
        InputBox::new(vec![1.0 - gamma], vec![1.0 + gamma]).expect("contrast bounds are ordered");
    Ok(VerificationQuery {
        network: augmented,
        input_box,
        property,
        provenance: Some(spec.clone()),
    })
}

/// Dispatches a spec to the matching encoder.
pub fn encode(net: &Network, spec: &PerturbationSpec) -> Result<VerificationQuery, EncodeError> {
    match spec.kind {
        PerturbationKind::Noise { .. } => noise_query(net, spec),
        PerturbationKind::Brightness { .. } | PerturbationKind::NoiseAndBrightness { .. } => {
            brightness_query(net, spec)
        }
        PerturbationKind::Contrast { .. } => contrast_query(net, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Image;
    use crate::nn::{Activation, Layer};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// 2-input, 2-class network that strictly classifies bright images as
    /// class 0: y0 = x0 + x1, y1 = 1 - x0.
    fn small_net() -> Network {
        let out = Layer::new(
            Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, 0.0]]),
            vec![0.0, 1.0],
            Activation::Identity,
        );
        Network::new(2, vec![out], None).unwrap()
    }

    fn anchor(px: &[f64]) -> Image {
        Image::new(px.len(), 1, px.to_vec()).unwrap()
    }

    fn random_relu_net(rng: &mut ChaCha8Rng, input_dim: usize) -> Network {
        let h = rng.gen_range(2..=5);
        let l1 = Layer::new(
            Matrix::new(
                h,
                input_dim,
                (0..h * input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            ),
            (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            Activation::Relu,
        );
        let k = rng.gen_range(2..=4);
        let l2 = Layer::new(
            Matrix::new(k, h, (0..k * h).map(|_| rng.gen_range(-2.0..2.0)).collect()),
            (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            Activation::Identity,
        );
        Network::new(input_dim, vec![l1, l2], None).unwrap()
    }

    #[test]
    fn noise_box_construction() {
        let net = small_net();
        let spec = PerturbationSpec::noise(anchor(&[0.5, 0.9]), 0, 0.1).unwrap();
        let q = noise_query(&net, &spec).unwrap();
        assert_eq!(q.input_box.lower(), &[0.4, 0.8]);
        assert_eq!(q.input_box.upper(), &[0.6, 1.0]);
        assert_eq!(q.network, net);
    }

    #[test]
    fn noise_epsilon_zero_is_point_box() {
        let net = small_net();
        let spec = PerturbationSpec::noise(anchor(&[0.5, 0.9]), 0, 0.0).unwrap();
        let q = noise_query(&net, &spec).unwrap();
        assert_eq!(q.input_box.lower(), q.input_box.upper());
        assert!(!q.property.satisfied_by(&net.evaluate(&[0.5, 0.9]).unwrap()));
    }

    #[test]
    fn misclassified_anchor_rejected() {
        let net = small_net();
        // (0.1, 0.1): y0 = 0.2, y1 = 0.9 -> class 1, so claiming class 0 fails.
        let spec = PerturbationSpec::noise(anchor(&[0.1, 0.1]), 0, 0.1).unwrap();
        assert!(matches!(
            noise_query(&net, &spec),
            Err(EncodeError::AnchorMisclassified {
                expected: 0,
                predicted: 1
            })
        ));
    }

    #[test]
    fn tied_anchor_rejected() {
        // y0 = x0, y1 = x0 ties everywhere.
        let net = Network::new(
            1,
            vec![Layer::new(
                Matrix::from_rows(&[vec![1.0], vec![1.0]]),
                vec![0.0, 0.0],
                Activation::Identity,
            )],
            None,
        )
        .unwrap();
        let spec = PerturbationSpec::noise(anchor(&[0.5]), 0, 0.0).unwrap();
        assert!(matches!(noise_query(&net, &spec), Err(EncodeError::AnchorTied)));
    }

    #[test]
    fn brightness_identity_case() {
        let net = small_net();
        let x = [0.5, 0.9];
        let spec = PerturbationSpec::noise_brightness(anchor(&x), 0, 0.0, 0.0).unwrap();
        let q = brightness_query(&net, &spec).unwrap();
        assert_eq!(q.network.input_dim(), 3);
        // Point box (x', 0).
        assert_eq!(q.input_box.lower(), &[0.5, 0.9, 0.0]);
        assert_eq!(q.input_box.upper(), &[0.5, 0.9, 0.0]);
        let aug = q.network.evaluate(&[0.5, 0.9, 0.0]).unwrap();
        assert_eq!(aug, net.evaluate(&x).unwrap());
    }

    #[test]
    fn brightness_shift_matches_direct_evaluation() {
        let net = small_net();
        let spec = PerturbationSpec::noise_brightness(anchor(&[0.2, 0.7]), 0, 0.0, 0.2).unwrap();
        let q = brightness_query(&net, &spec).unwrap();
        let aug = q.network.evaluate(&[0.2, 0.7, 0.1]).unwrap();
        let direct = net.evaluate(&[0.2 + 0.1, 0.7 + 0.1]).unwrap();
        assert_eq!(aug, direct);
    }

    #[test]
    fn brightness_encoding_exact_on_random_tuples() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut done = 0;
        while done < 1000 {
            let n = rng.gen_range(1..=6);
            let net = random_relu_net(&mut rng, n);
            let px: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let class = net.classify(&px).unwrap();
            let spec =
                PerturbationSpec::noise_brightness(anchor(&px), class, 0.1, 0.3).unwrap();
            let Ok(q) = brightness_query(&net, &spec) else {
                continue; // tied anchor; try another draw
            };
            let b = rng.gen_range(-0.3..0.3);
            let z: Vec<f64> = px.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
            let mut input = z.clone();
            input.push(b);
            let aug = q.network.evaluate(&input).unwrap();
            let shifted: Vec<f64> = z.iter().map(|v| v + b).collect();
            let direct = net.evaluate(&shifted).unwrap();
            assert_eq!(aug, direct, "brightness encoding must be bit-exact");
            done += 1;
        }
    }

    #[test]
    fn contrast_one_is_identity() {
        let net = small_net();
        let x = [0.5, 0.9];
        let spec = PerturbationSpec::contrast(anchor(&x), 0, 0.5, 0.25).unwrap();
        let q = contrast_query(&net, &spec).unwrap();
        assert_eq!(q.network.input_dim(), 1);
        assert_eq!(q.input_box.lower(), &[0.5]);
        assert_eq!(q.input_box.upper(), &[1.5]);
        assert_eq!(q.network.evaluate(&[1.0]).unwrap(), net.evaluate(&x).unwrap());
    }

    #[test]
    fn contrast_encoded_pixels_follow_the_formula() {
        let net = small_net();
        let x = [0.3, 0.9];
        let spec = PerturbationSpec::contrast(anchor(&x), 0, 1.0, 0.5).unwrap();
        let q = contrast_query(&net, &spec).unwrap();
        let first = &q.network.layers()[0];
        let encoded = first.weights().affine(&[2.0], first.biases());
        let expected: Vec<f64> = x.iter().map(|v| 0.5 + (v - 0.5) * 2.0).collect();
        assert_eq!(encoded, expected);
        assert!((encoded[0] - 0.1).abs() < 1e-15);
        assert!((encoded[1] - 1.3).abs() < 1e-15);
        // No clipping: 1.3 stays out of pixel range by design.
        assert!(encoded[1] > 1.0);
    }

    #[test]
    fn contrast_encoding_exact_on_random_tuples() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut done = 0;
        while done < 500 {
            let n = rng.gen_range(1..=6);
            let net = random_relu_net(&mut rng, n);
            let px: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let class = net.classify(&px).unwrap();
            let mu = rng.gen_range(0.0..=1.0);
            let spec = PerturbationSpec::contrast(anchor(&px), class, 0.9, mu).unwrap();
            let Ok(q) = contrast_query(&net, &spec) else {
                continue;
            };
            let c = rng.gen_range(0.1..1.9);
            let aug = q.network.evaluate(&[c]).unwrap();
            let scaled: Vec<f64> = px.iter().map(|v| mu + (v - mu) * c).collect();
            let direct = net.evaluate(&scaled).unwrap();
            assert_eq!(aug, direct, "contrast encoding must be bit-exact");
            done += 1;
        }
    }

    #[test]
    fn box_inclusion_is_monotone_in_parameters() {
        let net = small_net();
        let a = anchor(&[0.5, 0.9]);
        let small = noise_query(&net, &PerturbationSpec::noise(a.clone(), 0, 0.05).unwrap())
            .unwrap();
        let large =
            noise_query(&net, &PerturbationSpec::noise(a.clone(), 0, 0.2).unwrap()).unwrap();
        assert!(large.input_box.contains_box(&small.input_box));

        let bs = brightness_query(
            &net,
            &PerturbationSpec::noise_brightness(a.clone(), 0, 0.05, 0.1).unwrap(),
        )
        .unwrap();
        let bl = brightness_query(
            &net,
            &PerturbationSpec::noise_brightness(a.clone(), 0, 0.1, 0.3).unwrap(),
        )
        .unwrap();
        assert!(bl.input_box.contains_box(&bs.input_box));

        let cs =
            contrast_query(&net, &PerturbationSpec::contrast(a.clone(), 0, 0.2, 0.5).unwrap())
                .unwrap();
        let cl =
            contrast_query(&net, &PerturbationSpec::contrast(a, 0, 0.7, 0.5).unwrap()).unwrap();
        assert!(cl.input_box.contains_box(&cs.input_box));
    }

    #[test]
    fn simultaneous_noise_contrast_rejected() {
        let err = PerturbationSpec::noise_contrast(anchor(&[0.5, 0.9]), 0, 0.1, 0.2, 0.5);
        assert!(matches!(err, Err(EncodeError::NoiseContrastUnsupported)));
    }

    #[test]
    fn parameter_ranges_validated() {
        let a = anchor(&[0.5]);
        assert!(PerturbationSpec::noise(a.clone(), 0, -0.1).is_err());
        assert!(PerturbationSpec::contrast(a.clone(), 0, 1.5, 0.5).is_err());
        assert!(PerturbationSpec::contrast(a.clone(), 0, 0.5, -0.1).is_err());
        assert!(PerturbationSpec::brightness(a, 0, f64::NAN).is_err());
    }

    #[test]
    fn anchor_dimension_checked() {
        let net = small_net();
        let spec = PerturbationSpec::noise(anchor(&[0.5]), 0, 0.1).unwrap();
        assert!(matches!(
            noise_query(&net, &spec),
            Err(EncodeError::AnchorDimension { network: 2, anchor: 1 })
        ));
    }
}
