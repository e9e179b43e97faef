//! Elementary differentiable operations on `[C,H,W]` maps. Each forward has
//! a matching hand-written adjoint.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub(crate) mod gemm;
pub mod pool;
pub mod upsample;

pub use activation::{relu, relu_backward, softmax_channels, softmax_channels_backward};
pub use batchnorm::{batch_norm, batch_norm_backward, BatchNormCache, Mode, RunningStats};
pub use conv::{add_channel_bias, channel_sum, conv2d, conv2d_backward};
pub use pool::{avg_down2, avg_down2_backward, global_max_pool, global_max_pool_backward};
pub use upsample::{bilinear_upsample, bilinear_upsample_backward};
