//! Two fixed reference architectures for 120×6 windows, used as golden
//! fixtures for shape and parameter accounting.

use super::descriptor::{Activation, ArchitectureSpec, LayerDescriptor as L, Padding, Pipeline, PoolKind};

fn conv(filters: usize, kernel: usize, stride: usize) -> L {
    L::Conv1d {
        filters,
        kernel,
        stride,
        padding: Padding::Same,
        activation: Activation::Relu,
    }
}

const POOL2: L = L::Pool {
    kind: PoolKind::Max,
    length: 2,
};

/// Three conv blocks; 41 873 parameters of which 1 458 are non-trainable.
pub fn reference_cnn() -> ArchitectureSpec {
    ArchitectureSpec::new(
        Pipeline::Cnn,
        vec![
            L::BatchNorm,
            conv(141, 8, 2),
            L::BatchNorm,
            POOL2,
            conv(31, 1, 2),
            POOL2,
            conv(291, 3, 1),
            L::BatchNorm,
            POOL2,
            L::GlobalAvgPool,
            L::Flatten,
            L::BatchNorm,
            L::OUTPUT,
        ],
    )
}

/// One 30-unit GRU block; 36 021 parameters of which 252 are non-trainable.
pub fn reference_gru() -> ArchitectureSpec {
    ArchitectureSpec::new(
        Pipeline::Gru,
        vec![
            L::BatchNorm,
            L::Gru { units: 30 },
            L::BatchNorm,
            L::GlobalAvgPool,
            L::Flatten,
            L::BatchNorm,
            L::Dropout { rate: 0.2 },
            L::BatchNorm,
            L::Dropout { rate: 0.2 },
            L::BatchNorm,
            L::Dense {
                units: 1003,
                activation: Activation::Relu,
            },
            L::Dropout { rate: 0.2 },
            L::OUTPUT,
        ],
    )
}
