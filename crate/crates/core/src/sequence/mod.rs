//! Two-segment input assembly and masking policies.

pub mod batch_io;
pub mod input;
pub mod masking;
pub mod vocab;

pub use input::{build_input, InputSequence, DEFAULT_MAX_LEN};
pub use masking::{
    apply_masking, apply_plain_masking, apply_segment_masking, apply_word_masking, Label,
    MaskCategory, MaskRatios, MaskedInput, MaskingPolicy,
};
pub use vocab::{build_vocab, Vocab, CLS, MSK, PAD, SEP};
