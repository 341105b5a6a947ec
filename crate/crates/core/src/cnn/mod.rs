//! 1-D convolutional denoising network trained from scratch.
//!
//! Each branch is `depth × [conv → batch-norm → relu → maxpool]`; branch
//! outputs are concatenated over channels, flattened, and mapped back to the
//! input length by one fully connected layer.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamState, TrainHyper};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use network::{mse_loss, ForwardCache, Network, NetworkConfig, ParamLayout, Topology};
pub use tensor::Tensor;
pub use train::{denoise, denoise_batch, position_means, train, train_with};
