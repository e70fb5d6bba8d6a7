//! Softmax regression trained by SGD with step decay, scored by top-k accuracy.
//!
//! ```text
//! cargo run -p webcorpus --example softmax_training
//! ```

use webcorpus::shallow_eval::{lr_schedule, softmax, topk_accuracy, train_softmax, TrainConfig};
use webcorpus::synth::{gaussian_blobs, BlobSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("softmax([ln 2, 0, 0]) = {:?}", softmax(&[2f64.ln(), 0.0, 0.0]));

    let data = gaussian_blobs(&BlobSpec { n_classes: 8, per_class: 80, dim: 16, separation: 0.6, spread: 1.0, seed: 1 });
    let (even, odd): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|i| i % 2 == 0);
    let (train, test) = (data.subset(&even), data.subset(&odd));

    let config = TrainConfig { alpha0: 0.05, ..TrainConfig::default() };
    for epoch in [0, 9, 10, 19, 20, 29] {
        println!("epoch {epoch:>2}  learning rate {:.4}", lr_schedule(&config, epoch));
    }

    let fit = train_softmax(&train, &config)?;
    for (epoch, loss) in fit.epoch_losses.iter().enumerate().step_by(5) {
        println!("epoch {epoch:>2}  loss {loss:.4}");
    }
    let scores: Vec<Vec<f64>> = test.rows().map(|x| fit.model.scores(x)).collect();
    println!("top-1 {:.3}", topk_accuracy(&scores, test.labels(), 1)?);
    println!("top-5 {:.3}", topk_accuracy(&scores, test.labels(), 5)?);
    Ok(())
}
