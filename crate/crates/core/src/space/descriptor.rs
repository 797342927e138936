use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Cnn,
    Gru,
}

impl Pipeline {
    /// Inclusive dropout-rate range allowed for this pipeline.
    pub fn dropout_range(self) -> (f64, f64) {
        match self {
            Pipeline::Gru => (0.2, 0.3),
            Pipeline::Cnn => (0.4, 0.5),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Cnn => "cnn",
            Pipeline::Gru => "gru",
        }
    }
}

impl std::str::FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" | "conv" | "1dcnn" => Ok(Pipeline::Cnn),
            "gru" => Ok(Pipeline::Gru),
            other => Err(format!("unknown pipeline `{other}` (expected cnn or gru)")),
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    /// Identity; not part of the searchable set, available for hand-built models.
    Linear,
}

impl Activation {
    pub const SEARCHABLE: [Activation; 3] = [Activation::Relu, Activation::Tanh, Activation::Sigmoid];

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
    Avg,
}

/// One layer of an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerDescriptor {
    BatchNorm,
    Conv1d {
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        activation: Activation,
    },
    Gru {
        units: usize,
    },
    Pool {
        kind: PoolKind,
        length: usize,
    },
    GlobalAvgPool,
    Flatten,
    Dropout {
        rate: f64,
    },
    Dense {
        units: usize,
        activation: Activation,
    },
}

impl LayerDescriptor {
    /// The mandatory single-unit sigmoid output layer.
    pub const OUTPUT: LayerDescriptor = LayerDescriptor::Dense {
        units: 1,
        activation: Activation::Sigmoid,
    };

    pub fn name(&self) -> &'static str {
        match self {
            LayerDescriptor::BatchNorm => "BatchNorm",
            LayerDescriptor::Conv1d { .. } => "Conv1D",
            LayerDescriptor::Gru { .. } => "GRU",
            LayerDescriptor::Pool { .. } => "Pool",
            LayerDescriptor::GlobalAvgPool => "GlobalAvgPool",
            LayerDescriptor::Flatten => "Flatten",
            LayerDescriptor::Dropout { .. } => "Dropout",
            LayerDescriptor::Dense { .. } => "Dense",
        }
    }
}

/// An ordered layer list plus the pipeline it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub pipeline: Pipeline,
    pub layers: Vec<LayerDescriptor>,
}

impl ArchitectureSpec {
    pub fn new(pipeline: Pipeline, layers: Vec<LayerDescriptor>) -> Self {
        Self { pipeline, layers }
    }
}

/// Optimizer hyperparameters drawn alongside an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub lasso_lambda: f64,
}
