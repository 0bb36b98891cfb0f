use super::{ExperimentConfig, HarnessError};

/// A named, embedded experiment config. The JSON sources live in `presets/`.
#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub json: &'static str,
}

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        &[$(Preset { name: $name, json: include_str!(concat!("../../presets/", $name, ".json")) }),*]
    };
}

const PRESETS: &[Preset] = presets![
    "primer-nn-26",
    "primer-pinn-26",
    "primer-lefthalf-nn",
    "primer-lefthalf-pinn",
    "primer-min",
    "primer-nn-50",
    "primer-pinn-1+50",
    "primer-1pt",
    "vdp-eps1",
    "vdp-eps1-noise",
    "vdp-eps3",
    "vdp-eps3-noise",
    "vdp-eps5",
    "vdp-eps5-noise",
    "duffing-noreg",
    "duffing-energyreg",
];

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig::from_json(self.json).unwrap_or_else(|e| panic!("preset {} is invalid: {e}", self.name))
    }

    /// One table row: name, key settings, description.
    pub fn summary(&self) -> String {
        let c = self.config();
        let mut settings = format!("N_data={}, N_c={}", c.data.n, c.collocation.n);
        if c.data.sigma > 0.0 {
            settings += &format!(", sigma={}", c.data.sigma);
        }
        if let Some([a, b]) = c.data.window {
            settings += &format!(", window=[{a}, {b}]");
        }
        settings += &format!(", lambda_g={}", c.weights.lambda_g);
        if c.energy_regularization {
            settings += &format!(", lambda_reg={}", c.weights.lambda_reg);
        }
        settings += &format!(", epochs={}", c.epochs);
        format!("{:<22} {:<70} {}", self.name, settings, c.description)
    }
}

pub fn presets() -> &'static [Preset] {
    PRESETS
}

pub fn preset(name: &str) -> Result<Preset, HarnessError> {
    PRESETS.iter().copied().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        HarnessError::Config(format!("unknown preset {name:?}; known presets: {}", known.join(", ")))
    })
}
