//! Composite content/feature/adversarial objective, Adam, and the
//! alternating discriminator/generator update.

mod adam;
mod losses;
mod step;

pub use adam::{Adam, AdamConfig};
pub use losses::{
    adversarial_grads, adversarial_losses, content_feature_loss, content_feature_loss_grad, AdversarialLosses, ContentFeatureLoss, LossWeights, SCORE_CLAMP,
};
pub use step::{map_to_target, supervised_step, train_step, Batch, StepLosses, TrainState};
