//! Topology genome: skip gates, fusion choices and the preference index.
//!
//! Gene layout for depth `K`: the skip gates of backbone block 1 (one gate),
//! block 2 (two gates), ..., block K (K gates), then the output block (K + 1
//! gates); then one fusion gene per backbone block and one for the output
//! block; then the preference index.

use std::fmt;

use blmol_core::{GeneSpec, GenomeSpec, Genotype};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fusion {
    Mean,
    Concat,
    Lstm,
    Max,
    Sum,
    Att,
}

impl Fusion {
    pub const ALL: [Fusion; 6] = [Fusion::Mean, Fusion::Concat, Fusion::Lstm, Fusion::Max, Fusion::Sum, Fusion::Att];

    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_code(code: i64) -> Option<Self> {
        usize::try_from(code).ok().and_then(|i| Self::ALL.get(i).copied())
    }

    pub fn name(self) -> &'static str {
        match self {
            Fusion::Mean => "MEAN",
            Fusion::Concat => "CONCAT",
            Fusion::Lstm => "LSTM",
            Fusion::Max => "MAX",
            Fusion::Sum => "SUM",
            Fusion::Att => "ATT",
        }
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn skip_gene_count(k: usize) -> usize {
    k * (k + 1) / 2 + k + 1
}

pub fn fusion_gene_count(k: usize) -> usize {
    k + 1
}

/// Encoding length including the preference gene.
pub fn encoding_length(k: usize) -> usize {
    skip_gene_count(k) + fusion_gene_count(k) + 1
}

/// Genome spec: binary skip genes, six-way fusion genes, then `index(1, rm)`.
pub fn genome_spec(k: usize, rm: usize) -> GenomeSpec {
    let mut genes = vec![GeneSpec::binary(); skip_gene_count(k)];
    genes.extend(std::iter::repeat_n(GeneSpec::categorical(Fusion::ALL.len() as i64), fusion_gene_count(k)));
    genes.push(GeneSpec::index(1, rm as i64));
    GenomeSpec::new(genes)
}

/// Architecture counts with independent genes (product) and as the sum of
/// the skip and fusion sub-spaces.
pub fn architecture_space(k: usize) -> (u128, u128) {
    let skip = 1u128 << skip_gene_count(k);
    let fusion = 6u128.pow(fusion_gene_count(k) as u32);
    (skip * fusion, skip + fusion)
}

/// Decoded connectivity for one block: which earlier representations it
/// reads and how they are fused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub inputs: Vec<usize>,
    pub fusion: Fusion,
}

/// Decoded architecture. `blocks[0..K]` are the backbone blocks 1..K, the
/// last entry is the output block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub depth: usize,
    pub blocks: Vec<BlockSpec>,
    pub preference: i64,
    /// Whether any block had all gates off and was repaired.
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenomeError {
    #[error("genome has {found} genes, depth {depth} needs {expected}")]
    Length { depth: usize, expected: usize, found: usize },
    #[error("gene {index} has value {value}, outside its range")]
    Range { index: usize, value: i64 },
}

impl Topology {
    /// Decodes a genome. Blocks without any open gate read their immediate
    /// predecessor.
    pub fn decode(depth: usize, genotype: &Genotype) -> Result<Self, GenomeError> {
        let g = genotype.genes();
        let expected = encoding_length(depth);
        if g.len() != expected {
            return Err(GenomeError::Length { depth, expected, found: g.len() });
        }
        let skips = skip_gene_count(depth);
        let mut cursor = 0;
        let mut blocks = Vec::with_capacity(depth + 1);
        let mut repaired = false;
        for block in 1..=depth + 1 {
            let mut inputs = Vec::new();
            for source in 0..block {
                let v = g[cursor];
                if !(0..=1).contains(&v) {
                    return Err(GenomeError::Range { index: cursor, value: v });
                }
                if v == 1 {
                    inputs.push(source);
                }
                cursor += 1;
            }
            if inputs.is_empty() {
                inputs.push(block - 1);
                repaired = true;
            }
            let fusion_index = skips + block - 1;
            let fusion = Fusion::from_code(g[fusion_index]).ok_or(GenomeError::Range { index: fusion_index, value: g[fusion_index] })?;
            blocks.push(BlockSpec { inputs, fusion });
        }
        let preference = g[expected - 1];
        if preference < 1 {
            return Err(GenomeError::Range { index: expected - 1, value: preference });
        }
        Ok(Self { depth, blocks, preference, repaired })
    }

    pub fn encode(&self) -> Genotype {
        let mut genes = Vec::with_capacity(encoding_length(self.depth));
        for (b, block) in self.blocks.iter().enumerate() {
            genes.extend((0..=b).map(|source| i64::from(block.inputs.contains(&source))));
        }
        genes.extend(self.blocks.iter().map(|b| b.fusion.code()));
        genes.push(self.preference);
        Genotype(genes)
    }

    pub fn output_block(&self) -> &BlockSpec {
        self.blocks.last().expect("output block")
    }
}

/// Gates of the chain topology where every block reads only its predecessor.
pub fn chain_skip_genes(k: usize) -> Vec<i64> {
    let mut genes = Vec::with_capacity(skip_gene_count(k));
    for block in 1..=k + 1 {
        genes.extend((0..block).map(|s| i64::from(s + 1 == block)));
    }
    genes
}
