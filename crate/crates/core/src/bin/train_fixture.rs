//! Offline trainer for the checked-in fixture network.
//!
//! Trains a two-hidden-layer MLP on the synthetic dataset and writes the
//! network JSON document. Training applies random global brightness shifts
//! to each sample (no clipping, matching the verification semantics), which
//! pushes the classifier toward shape/contrast features and away from
//! absolute intensity; the resulting network stays robust to brightness
//! while remaining sensitive to adversarial per-pixel noise.

use clap::Parser;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use relucert::ingest::synth_dataset;
use relucert::nn::{save_network, Activation, Layer, Matrix, Network};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "train-fixture", about = "Train the synthetic fixture classifier")]
struct Args {
    /// Image side length (input dimension = side * side).
    #[arg(long, default_value_t = 8)]
    side: usize,
    /// Hidden layer widths.
    #[arg(long, num_args = 2, default_values_t = [16, 8])]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 600)]
    train_count: usize,
    #[arg(long, default_value_t = 200)]
    test_count: usize,
    /// Training dataset seed (held-out evaluation uses seed + 1).
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 0.08)]
    lr: f64,
    /// Maximum absolute brightness shift used for augmentation.
    #[arg(long, default_value_t = 0.55)]
    brightness_aug: f64,
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    #[arg(long, default_value = "crates/core/fixtures/synth4.json")]
    out: PathBuf,
}

struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>, // row-major per layer
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    fn new(sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / fan_in as f64).sqrt();
            weights.push((0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    /// Forward pass keeping post-activations for backprop.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for l in 0..self.weights.len() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let prev = acts.last().unwrap();
            let mut out = vec![0.0; n_out];
            for r in 0..n_out {
                let mut acc = self.biases[l][r];
                for c in 0..n_in {
                    acc += self.weights[l][r * n_in + c] * prev[c];
                }
                out[r] = if l + 1 < self.weights.len() { acc.max(0.0) } else { acc };
            }
            acts.push(out);
        }
        acts
    }

    fn train_step(
        &mut self,
        batch: &[(Vec<f64>, usize)],
        lr: f64,
        weight_decay: f64,
        grads_w: &mut [Vec<f64>],
        grads_b: &mut [Vec<f64>],
    ) -> f64 {
        for g in grads_w.iter_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for g in grads_b.iter_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut loss = 0.0;
        for (x, label) in batch {
            let acts = self.forward(x);
            let logits = acts.last().unwrap();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            loss -= (exps[*label] / z).ln();

            // delta at the output = softmax - onehot
            let mut delta: Vec<f64> = exps.iter().map(|e| e / z).collect();
            delta[*label] -= 1.0;

            for l in (0..self.weights.len()).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let prev = &acts[l];
                for r in 0..n_out {
                    grads_b[l][r] += delta[r];
                    for c in 0..n_in {
                        grads_w[l][r * n_in + c] += delta[r] * prev[c];
                    }
                }
                if l > 0 {
                    let mut next_delta = vec![0.0; n_in];
                    for c in 0..n_in {
                        if acts[l][c] > 0.0 {
                            let mut acc = 0.0;
                            for r in 0..n_out {
                                acc += self.weights[l][r * n_in + c] * delta[r];
                            }
                            next_delta[c] = acc;
                        }
                    }
                    delta = next_delta;
                }
            }
        }
        let scale = lr / batch.len() as f64;
        for l in 0..self.weights.len() {
            for (w, g) in self.weights[l].iter_mut().zip(&grads_w[l]) {
                *w -= scale * g + lr * weight_decay * *w;
            }
            for (b, g) in self.biases[l].iter_mut().zip(&grads_b[l]) {
                *b -= scale * g;
            }
        }
        loss / batch.len() as f64
    }

    fn predict(&self, x: &[f64]) -> usize {
        let out = self.forward(x);
        let logits = out.last().unwrap();
        let mut best = 0;
        for (i, v) in logits.iter().enumerate().skip(1) {
            if *v > logits[best] {
                best = i;
            }
        }
        best
    }

    fn into_network(self, labels: Vec<String>) -> Network {
        let Mlp {
            sizes,
            weights,
            biases,
        } = self;
        let n_layers = weights.len();
        let layers: Vec<Layer> = weights
            .into_iter()
            .zip(biases)
            .enumerate()
            .map(|(l, (w, b))| {
                let (n_in, n_out) = (sizes[l], sizes[l + 1]);
                let act = if l + 1 < n_layers {
                    Activation::Relu
                } else {
                    Activation::Identity
                };
                Layer::new(Matrix::new(n_out, n_in, w), b, act)
            })
            .collect();
        Network::new(sizes[0], layers, Some(labels)).unwrap()
    }
}

fn accuracy(mlp: &Mlp, data: &[(Vec<f64>, usize)]) -> f64 {
    let correct = data
        .iter()
        .filter(|(x, label)| mlp.predict(x) == *label)
        .count();
    correct as f64 / data.len() as f64
}

fn main() {
    let args = Args::parse();
    assert_eq!(args.hidden.len(), 2, "exactly two hidden layers");

    let to_vecs = |items: Vec<(relucert::ingest::Image, usize)>| -> Vec<(Vec<f64>, usize)> {
        items
            .into_iter()
            .map(|(img, label)| (img.pixels().to_vec(), label))
            .collect()
    };
    let train = to_vecs(synth_dataset(args.seed, args.train_count, args.side, args.classes));
    let test = to_vecs(synth_dataset(args.seed + 1, args.test_count, args.side, args.classes));

    let sizes = vec![
        args.side * args.side,
        args.hidden[0],
        args.hidden[1],
        args.classes,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0xF147);
    let mut mlp = Mlp::new(&sizes, &mut rng);

    let mut grads_w: Vec<Vec<f64>> = mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut grads_b: Vec<Vec<f64>> = mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect();

    let batch_size = 32;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..args.epochs {
        order.shuffle(&mut rng);
        let lr = args.lr / (1.0 + epoch as f64 / 100.0);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(Vec<f64>, usize)> = chunk
                .iter()
                .map(|&i| {
                    let (x, label) = &train[i];
                    let shift = rng.gen_range(-args.brightness_aug..=args.brightness_aug);
                    (x.iter().map(|p| p + shift).collect(), *label)
                })
                .collect();
            epoch_loss +=
                mlp.train_step(&batch, lr, args.weight_decay, &mut grads_w, &mut grads_b);
            batches += 1;
        }
        if (epoch + 1) % 50 == 0 {
            println!(
                "epoch {:3}: loss {:.4}, train acc {:.3}, test acc {:.3}",
                epoch + 1,
                epoch_loss / batches as f64,
                accuracy(&mlp, &train),
                accuracy(&mlp, &test)
            );
        }
    }

    let train_acc = accuracy(&mlp, &train);
    let test_acc = accuracy(&mlp, &test);
    println!("final: train acc {train_acc:.3}, held-out acc {test_acc:.3}");

    let labels = (0..args.classes).map(|i| format!("class-{i}")).collect();
    let net = mlp.into_network(labels);
    save_network(&net, &args.out).expect("write fixture network");
    println!(
        "wrote {} ({} inputs, {} ReLU neurons)",
        args.out.display(),
        net.input_dim(),
        net.relu_count()
    );
}
