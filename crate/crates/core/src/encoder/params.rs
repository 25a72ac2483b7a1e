use rand::Rng;

use crate::error::{Error, Result};
use crate::vector::{axpy, Vector};

use super::vocab::{TokenId, Vocabulary};

/// Token-embedding table (`vocab_size x dim`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    table: Vec<f64>,
    vocab_size: usize,
    dim: usize,
}

impl EncoderParams {
    /// Uniform init in `[-0.5/dim, 0.5/dim]`.
    pub fn init(vocab_size: usize, dim: usize, rng: &mut impl Rng) -> Self {
        assert!(dim > 0, "dim must be positive");
        let half = 0.5 / dim as f64;
        let table = (0..vocab_size * dim)
            .map(|_| rng.random_range(-half..=half))
            .collect();
        EncoderParams {
            table,
            vocab_size,
            dim,
        }
    }

    pub fn from_table(vocab_size: usize, dim: usize, table: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Data("encoder dim must be positive".into()));
        }
        if table.len() != vocab_size * dim {
            return Err(Error::ShapeMismatch(format!(
                "table has {} entries, expected {vocab_size} x {dim}",
                table.len()
            )));
        }
        if table.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite embedding entry".into()));
        }
        Ok(EncoderParams {
            table,
            vocab_size,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    pub fn row(&self, id: TokenId) -> &[f64] {
        let start = id as usize * self.dim;
        &self.table[start..start + self.dim]
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::Data("cannot encode an empty token list".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.vocab_size) {
            return Err(Error::Data(format!(
                "token id {bad} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        Ok(())
    }

    /// Mean of the embedding rows of `ids`.
    pub fn encode_text(&self, ids: &[TokenId]) -> Result<Vector> {
        self.check_ids(ids)?;
        let mut acc = vec![0.0; self.dim];
        let w = 1.0 / ids.len() as f64;
        for &id in ids {
            axpy(&mut acc, w, self.row(id));
        }
        Vector::new(acc)
    }

    pub fn encode_label(&self, vocab: &Vocabulary, label_name: &str) -> Result<Vector> {
        let ids = vocab.tokenize(label_name);
        if ids.is_empty() {
            return Err(Error::Data(format!(
                "label {label_name:?} has no tokens"
            )));
        }
        self.encode_text(&ids)
    }

    /// Backward pass of [`encode_text`](Self::encode_text) over a batch of
    /// token lists: each vector's gradient is split evenly across its rows and
    /// accumulated into a table-shaped gradient.
    pub fn backward(&self, inputs: &[&[TokenId]], grads: &[Vector]) -> Result<TableGrad> {
        let mut out = TableGrad::zeros(self.vocab_size, self.dim);
        self.backward_into(inputs, grads, &mut out)?;
        Ok(out)
    }

    pub fn backward_into(
        &self,
        inputs: &[&[TokenId]],
        grads: &[Vector],
        out: &mut TableGrad,
    ) -> Result<()> {
        if inputs.len() != grads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} token lists but {} gradients",
                inputs.len(),
                grads.len()
            )));
        }
        if out.rows != self.vocab_size || out.dim != self.dim {
            return Err(Error::ShapeMismatch("gradient table shape".into()));
        }
        for (ids, g) in inputs.iter().zip(grads) {
            self.check_ids(ids)?;
            g.check_dim(self.dim)?;
            let w = 1.0 / ids.len() as f64;
            for &id in ids.iter() {
                let start = id as usize * self.dim;
                axpy(&mut out.data[start..start + self.dim], w, g);
            }
        }
        Ok(())
    }
}

/// Gradient with the same shape as the embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGrad {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl TableGrad {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        TableGrad {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn row(&self, id: TokenId) -> &[f64] {
        let start = id as usize * self.dim;
        &self.data[start..start + self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(rows: &[[f64; 2]]) -> EncoderParams {
        EncoderParams::from_table(rows.len(), 2, rows.iter().flatten().copied().collect()).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn encode_is_mean_of_rows() {
        let p = params(&[[9.0, 9.0], [9.0, 9.0], [0.0, 0.0], [2.0, 2.0]]);
        assert_eq!(p.encode_text(&[2, 3]).unwrap(), v(&[1.0, 1.0]));
        assert_eq!(p.encode_text(&[3]).unwrap(), v(&[2.0, 2.0]));
        assert_eq!(p.encode_text(&[3, 3]).unwrap(), v(&[2.0, 2.0]));
        assert!(p.encode_text(&[]).is_err());
        assert!(p.encode_text(&[4]).is_err());
    }

    #[test]
    fn encode_label_means_subtokens() {
        let vocab = Vocabulary::build(["sports world"]);
        let p = params(&[[0.0, 0.0], [0.0, 0.0], [0.0, 2.0], [2.0, 0.0]]);
        assert_eq!(p.encode_label(&vocab, "sports").unwrap(), v(&[0.0, 2.0]));
        assert_eq!(
            p.encode_label(&vocab, "Sports World").unwrap(),
            v(&[1.0, 1.0])
        );
        assert!(p.encode_label(&vocab, "...").is_err());
    }

    #[test]
    fn backward_splits_and_accumulates() {
        let p = params(&[[0.0; 2]; 4]);
        let g = p.backward(&[&[2, 3]], &[v(&[2.0, 2.0])]).unwrap();
        assert_eq!(g.row(2), &[1.0, 1.0]);
        assert_eq!(g.row(3), &[1.0, 1.0]);
        assert_eq!(g.row(0), &[0.0, 0.0]);

        let g = p
            .backward(&[&[2, 3], &[2]], &[v(&[2.0, 2.0]), v(&[0.5, -1.0])])
            .unwrap();
        assert_eq!(g.row(2), &[1.5, 0.0]);

        assert!(p.backward(&[&[2]], &[]).is_err());
        assert!(p.backward(&[&[2]], &[v(&[1.0, 2.0, 3.0])]).is_err());
    }

    #[test]
    fn init_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = EncoderParams::init(50, 8, &mut rng);
        assert!(p.table().iter().all(|x| x.abs() <= 0.5 / 8.0));
        assert_eq!(p.table().len(), 400);
    }
}
