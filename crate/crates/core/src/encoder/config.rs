use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    pub ff_size: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub dropout_rate: f64,
    /// Adds the projected word-position sinusoid to the input embedding.
    #[serde(default = "enabled")]
    pub word_position: bool,
}

fn enabled() -> bool {
    true
}

impl ModelConfig {
    /// Small default that trains in minutes on a laptop CPU.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            num_layers: 4,
            hidden_size: 64,
            num_heads: 4,
            ff_size: 256,
            vocab_size,
            max_positions: 128,
            dropout_rate: 0.1,
            word_position: true,
        }
    }

    /// 6 layers, hidden 512, 8 heads, inputs up to 480 tokens.
    pub fn full(vocab_size: usize) -> Self {
        ModelConfig {
            num_layers: 6,
            hidden_size: 512,
            num_heads: 8,
            ff_size: 2048,
            vocab_size,
            max_positions: 480,
            dropout_rate: 0.1,
            word_position: true,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden_size == 0 || self.num_heads == 0 || self.ff_size == 0 {
            return fail("hidden_size, num_heads and ff_size must be positive");
        }
        if !self.hidden_size.is_multiple_of(self.num_heads) {
            return fail("hidden_size must be divisible by num_heads");
        }
        if self.vocab_size < 5 {
            return fail("vocab_size must cover the four specials and at least one symbol");
        }
        if self.max_positions == 0 {
            return fail("max_positions must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail("dropout_rate must lie in [0, 1)");
        }
        Ok(())
    }
}
