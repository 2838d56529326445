use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numerics::Matrix;

/// Candidate message-passing operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Linear,
    Gcn,
    Sage,
    /// Single-head graph attention.
    Gat,
    /// ARMA filter with one stack and one recursion.
    Arma,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [OpKind::Linear, OpKind::Gcn, OpKind::Sage, OpKind::Gat, OpKind::Arma];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Linear => "linear",
            OpKind::Gcn => "gcn",
            OpKind::Sage => "sage",
            OpKind::Gat => "gat",
            OpKind::Arma => "arma",
        }
    }

    pub fn reads_graph(self) -> bool {
        self != OpKind::Linear
    }

    /// Shapes of the maskable weight tensors, in storage order.
    pub fn tensor_shapes(self, din: usize, dout: usize) -> Vec<(usize, usize)> {
        match self {
            OpKind::Linear | OpKind::Gcn => vec![(din, dout)],
            OpKind::Sage => vec![(din, dout), (din, dout)],
            OpKind::Gat => vec![(din, dout), (dout, 1), (dout, 1)],
            OpKind::Arma => vec![(din, dout), (dout, dout), (din, dout)],
        }
    }

    pub fn tensor_names(self) -> &'static [&'static str] {
        match self {
            OpKind::Linear | OpKind::Gcn => &["weight"],
            OpKind::Sage => &["weight_self", "weight_neighbor"],
            OpKind::Gat => &["weight", "att_src", "att_dst"],
            OpKind::Arma => &["weight_init", "weight_rec", "weight_skip"],
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(OpKind::Linear),
            "gcn" | "gcnconv" => Ok(OpKind::Gcn),
            "sage" | "sageconv" => Ok(OpKind::Sage),
            "gat" | "gatconv" => Ok(OpKind::Gat),
            "arma" | "armaconv" => Ok(OpKind::Arma),
            other => Err(Error::InvalidArgument(format!("unknown operation {other:?}"))),
        }
    }
}

/// Scalar parameter count of one operation including its bias.
///
/// With `binary_masks`, masked tensors count only their retained (`1`)
/// entries; the bias is never masked.
pub fn count_params(kind: OpKind, din: usize, dout: usize, binary_masks: Option<&[Matrix]>) -> usize {
    let bias = dout;
    match binary_masks {
        None => kind.tensor_shapes(din, dout).iter().map(|(r, c)| r * c).sum::<usize>() + bias,
        Some(masks) => masks.iter().map(|m| m.iter().filter(|&&v| v == 1.0).count()).sum::<usize>() + bias,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcn_four_to_three() {
        assert_eq!(count_params(OpKind::Gcn, 4, 3, None), 15);
    }

    #[test]
    fn masked_counts() {
        for kind in OpKind::ALL {
            let shapes = kind.tensor_shapes(4, 3);
            let zeros: Vec<Matrix> = shapes.iter().map(|&s| Matrix::zeros(s)).collect();
            let ones: Vec<Matrix> = shapes.iter().map(|&s| Matrix::ones(s)).collect();
            assert_eq!(count_params(kind, 4, 3, Some(&zeros)), 3);
            assert_eq!(count_params(kind, 4, 3, Some(&ones)), count_params(kind, 4, 3, None));
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in OpKind::ALL {
            assert_eq!(kind.name().parse::<OpKind>().unwrap(), kind);
            assert_eq!(serde_json::to_string(&kind).unwrap(), format!("\"{}\"", kind.name()));
        }
        assert_eq!("GCNConv".parse::<OpKind>().unwrap(), OpKind::Gcn);
        assert!("gin".parse::<OpKind>().is_err());
    }
}
