//! Task embeddings, annealed hard-attention masks, the AC and MCL phases
//! and the continual-learning loop.

mod continual;
mod forward;
mod mask;
mod model;
mod phases;

pub use continual::{continual_learn, learn_task, ContinualRun, LearnerConfig, ModelKind, Progress, TaskLog};
pub use forward::{ac_forward, kb_states, mcl_forward, soft_mask, Batch, MclOutput};
pub use mask::{anneal_s, compute_mask, retrieve_mask, TaskMask};
pub use model::{KanModel, MaskPolicy};
pub use phases::{ac_gradients, ac_train_task, mcl_gradients, mcl_train_task, AcGrads, AcPhase, MclGrads, MclPhase};
