//! Fine-tuning with frozen lower layers and phoneme-position state extraction.
//!
//! Downstream consumers see one final-layer state per phoneme token; CLS, both
//! SEPs and every grapheme row are dropped. A one-output linear head stands in
//! for the speech decoder so that freezing and gradient flow can be exercised.

mod encoding;
mod finetune;

pub use encoding::{extract_phoneme_states, read_phoneme_encoding, write_phoneme_encoding, PhonemeEncoding};
pub use finetune::{
    finetune, head_mse, load_supervised, parse_supervised, FinetuneOutput, FreezeSpec, SupervisedExample,
    ToyHead, FINETUNE_LR_FACTOR,
};
