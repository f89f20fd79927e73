use nalgebra::DMatrix;

/// Kind and size of a variable block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Real symmetric `n x n` matrix constrained to be positive semidefinite.
    Psd(usize),
    /// Vector of `n` entrywise nonnegative reals.
    Nonneg(usize),
}

impl BlockKind {
    pub fn size(self) -> usize {
        match self {
            BlockKind::Psd(n) | BlockKind::Nonneg(n) => n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// One coefficient of a linear functional.
///
/// A PSD term multiplies the scalar entry `X[i][j]` of a symmetric block;
/// `(i, j)` and `(j, i)` name the same scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Term {
    Psd { block: BlockId, i: usize, j: usize, coef: f64 },
    Nonneg { block: BlockId, k: usize, coef: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearFunctional {
    pub terms: Vec<Term>,
}

impl LinearFunctional {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn psd(mut self, block: BlockId, i: usize, j: usize, coef: f64) -> Self {
        self.terms.push(Term::Psd { block, i, j, coef });
        self
    }

    pub fn nonneg(mut self, block: BlockId, k: usize, coef: f64) -> Self {
        self.terms.push(Term::Nonneg { block, k, coef });
        self
    }

    pub fn push(&mut self, term: Term) {
        self.terms.push(term);
    }

    pub fn extend(mut self, other: LinearFunctional) -> Self {
        self.terms.extend(other.terms);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equality {
    pub lhs: LinearFunctional,
    pub rhs: f64,
}

/// A linear program over a product of PSD and nonnegative-orthant blocks
/// with linear equality constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeProgram {
    pub sense: Sense,
    pub blocks: Vec<BlockKind>,
    pub objective: LinearFunctional,
    pub equalities: Vec<Equality>,
}

impl ConeProgram {
    pub fn new(sense: Sense) -> Self {
        Self { sense, blocks: Vec::new(), objective: LinearFunctional::new(), equalities: Vec::new() }
    }

    pub fn add_psd_block(&mut self, n: usize) -> BlockId {
        self.blocks.push(BlockKind::Psd(n));
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_nonneg_block(&mut self, n: usize) -> BlockId {
        self.blocks.push(BlockKind::Nonneg(n));
        BlockId(self.blocks.len() - 1)
    }

    pub fn set_objective(&mut self, objective: LinearFunctional) {
        self.objective = objective;
    }

    pub fn add_equality(&mut self, lhs: LinearFunctional, rhs: f64) {
        self.equalities.push(Equality { lhs, rhs });
    }

    /// Evaluates a functional at a point given block by block.
    pub fn evaluate(&self, f: &LinearFunctional, point: &[BlockValue]) -> f64 {
        f.terms
            .iter()
            .map(|t| match *t {
                Term::Psd { block, i, j, coef } => coef * point[block.0].as_psd()[(i, j)],
                Term::Nonneg { block, k, coef } => coef * point[block.0].as_nonneg()[k],
            })
            .sum()
    }
}

/// Value of one variable block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockValue {
    Psd(DMatrix<f64>),
    Nonneg(Vec<f64>),
}

impl BlockValue {
    pub fn as_psd(&self) -> &DMatrix<f64> {
        match self {
            BlockValue::Psd(m) => m,
            BlockValue::Nonneg(_) => panic!("block is not PSD"),
        }
    }

    pub fn as_nonneg(&self) -> &[f64] {
        match self {
            BlockValue::Nonneg(v) => v,
            BlockValue::Psd(_) => panic!("block is not nonnegative"),
        }
    }

    /// Smallest eigenvalue or entry.
    pub fn cone_margin(&self) -> f64 {
        match self {
            BlockValue::Psd(m) => nalgebra::SymmetricEigen::new(m.clone())
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
            BlockValue::Nonneg(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}
