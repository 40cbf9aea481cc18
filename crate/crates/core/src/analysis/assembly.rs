use crate::error::{Error, Result};
use crate::numkernel::{Matrix, NORM_EPS};

use super::labels_to_signs;

/// Per-vertex features a matching assembly may combine.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyInputs<'a> {
    /// Input descriptors `F`.
    pub raw: &'a Matrix,
    pub chi: &'a [f64],
    pub agno: &'a Matrix,
    /// Refined `{0, 1}` labels, when available.
    pub refined: Option<&'a [u8]>,
}

/// Builds the matching descriptor of one shape.
pub trait FeatureAssembly: Send + Sync {
    fn name(&self) -> &'static str;
    fn assemble(&self, inputs: &AssemblyInputs<'_>, alpha: f64) -> Result<Matrix>;
}

#[derive(Clone, Copy)]
enum Base {
    Raw,
    Agno,
}

#[derive(Clone, Copy)]
enum Channel {
    None,
    Chi,
    Refined,
}

struct Concat {
    name: &'static str,
    base: Base,
    channel: Channel,
}

const MODES: [Concat; 5] = [
    Concat {
        name: "raw",
        base: Base::Raw,
        channel: Channel::None,
    },
    Concat {
        name: "raw+chi",
        base: Base::Raw,
        channel: Channel::Chi,
    },
    Concat {
        name: "agno+chi",
        base: Base::Agno,
        channel: Channel::Chi,
    },
    Concat {
        name: "raw+refined",
        base: Base::Raw,
        channel: Channel::Refined,
    },
    Concat {
        name: "agno+refined",
        base: Base::Agno,
        channel: Channel::Refined,
    },
];

impl FeatureAssembly for Concat {
    fn name(&self) -> &'static str {
        self.name
    }

    fn assemble(&self, x: &AssemblyInputs<'_>, alpha: f64) -> Result<Matrix> {
        if !alpha.is_finite() {
            return Err(Error::invalid(format!("assembly weight must be finite, got {alpha}")));
        }
        let base = match self.base {
            Base::Raw => x.raw.row_l2_normalize(NORM_EPS),
            Base::Agno => x.agno.clone(),
        };
        let channel = match self.channel {
            Channel::None => return Ok(base),
            Channel::Chi => x.chi.to_vec(),
            Channel::Refined => {
                let r = x
                    .refined
                    .ok_or_else(|| Error::invalid(format!("assembly `{}` needs refined labels", self.name)))?;
                labels_to_signs(r)
            }
        };
        if channel.len() != base.rows() {
            return Err(Error::shape(
                "assemble",
                format!("{} channel values for {} rows", channel.len(), base.rows()),
            ));
        }
        let scaled: Vec<f64> = channel.iter().map(|c| alpha * c).collect();
        base.concat_cols(&Matrix::column(&scaled))
    }
}

pub fn assembly_names() -> Vec<&'static str> {
    MODES.iter().map(|m| m.name).collect()
}

pub fn assembly_by_name(name: &str) -> Option<Box<dyn FeatureAssembly>> {
    MODES.iter().find(|m| m.name == name).map(|m| {
        Box::new(Concat {
            name: m.name,
            base: m.base,
            channel: m.channel,
        }) as Box<dyn FeatureAssembly>
    })
}
