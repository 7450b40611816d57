//! Finite-difference check of the full model's gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use severity_seq::gradcheck::grad_check;
use severity_seq::model::{Mode, Model, ModelConfig, ScoreSchema};
use severity_seq::tensor::{Tensor, TensorError};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = Model::init(ModelConfig::small(16, ScoreSchema::Mes), 0)?;
    for t in model.params_mut().tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
    }
    let bag = Tensor::matrix(4, 16, (0..64).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let report = grad_check(
        |tape, vars| {
            let out = model
                .forward_on_tape(tape, vars, &bag, &mut Mode::Eval)
                .map_err(|e| TensorError::InvalidArgument(e.to_string()))?;
            out.logits.cross_entropy(&[1], None)
        },
        model.params().tensors(),
        1e-5,
    )?;
    println!("{} coordinates, max relative error {:.3e}", report.coordinates, report.max_relative_error);
    Ok(())
}
