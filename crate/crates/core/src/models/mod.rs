//! Toy generator policies and their optimizer.

mod ar;
mod encoding;
mod mlp;
mod optim;

pub use ar::{nucleus_sample, ArConfig, ArPolicy};
pub use encoding::{encode_prompt, PromptEncoding};
pub use mlp::{DropoutMask, DropoutNet, MlpConfig, Mode, Trace};
pub use optim::{apply_grad_step, AdamState, LrSchedule};
