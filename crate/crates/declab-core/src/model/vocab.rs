//! Symbolic vocabulary: object words plus control tokens, with a
//! row-stochastic object co-occurrence matrix.

use crate::numerics::Matrix;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Index of an object word in the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub usize);

/// Dense token id over the whole vocabulary (objects first, then controls).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenId(pub usize);

/// Control tokens, in token-id order after the object words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Control {
    Bos,
    Eos,
    Yes,
    No,
    Query,
    Describe,
    Confuse,
}

pub const CONTROL_COUNT: usize = 7;

const CONTROLS: [Control; CONTROL_COUNT] = [
    Control::Bos,
    Control::Eos,
    Control::Yes,
    Control::No,
    Control::Query,
    Control::Describe,
    Control::Confuse,
];

impl Control {
    pub fn name(self) -> &'static str {
        match self {
            Control::Bos => "<bos>",
            Control::Eos => "<eos>",
            Control::Yes => "<yes>",
            Control::No => "<no>",
            Control::Query => "<query>",
            Control::Describe => "<describe>",
            Control::Confuse => "<confuse>",
        }
    }
}

/// Object words, control tokens, and the co-occurrence matrix `P` over
/// objects. Token ids are dense and stable for a given vocabulary: object `i`
/// has id `i`, controls follow in declaration order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    objects: Vec<String>,
    cooccurrence: Matrix,
}

impl Vocabulary {
    /// Build and validate: distinct object words, square zero-diagonal
    /// row-stochastic co-occurrence.
    pub fn new(objects: Vec<String>, cooccurrence: Matrix) -> Result<Self> {
        let k = objects.len();
        if k == 0 {
            return Err(Error::vocab("vocabulary needs at least one object"));
        }
        for i in 0..k {
            for j in (i + 1)..k {
                if objects[i] == objects[j] {
                    return Err(Error::vocab(format!("duplicate object word '{}'", objects[i])));
                }
            }
        }
        if cooccurrence.rows() != k || cooccurrence.cols() != k {
            return Err(Error::vocab(format!(
                "co-occurrence must be {k}x{k}, got {}x{}",
                cooccurrence.rows(),
                cooccurrence.cols()
            )));
        }
        for r in 0..k {
            if cooccurrence.get(r, r) != 0.0 {
                return Err(Error::vocab(format!("co-occurrence diagonal not zero at {r}")));
            }
            let sum: f64 = cooccurrence.row(r).iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::vocab(format!(
                    "co-occurrence row {r} sums to {sum}, expected 1"
                )));
            }
            if cooccurrence.row(r).iter().any(|v| *v < 0.0) {
                return Err(Error::vocab(format!("negative co-occurrence in row {r}")));
            }
        }
        Ok(Vocabulary {
            objects,
            cooccurrence,
        })
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    /// Total token count including controls.
    pub fn len(&self) -> usize {
        self.objects.len() + CONTROL_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn object_token(&self, o: ObjectId) -> TokenId {
        debug_assert!(o.0 < self.objects.len());
        TokenId(o.0)
    }

    pub fn control_token(&self, c: Control) -> TokenId {
        let idx = CONTROLS.iter().position(|x| *x == c).unwrap();
        TokenId(self.objects.len() + idx)
    }

    /// Object id of a token, when it is an object token.
    pub fn as_object(&self, t: TokenId) -> Option<ObjectId> {
        (t.0 < self.objects.len()).then_some(ObjectId(t.0))
    }

    /// Control of a token, when it is a control token.
    pub fn as_control(&self, t: TokenId) -> Option<Control> {
        t.0.checked_sub(self.objects.len())
            .and_then(|i| CONTROLS.get(i).copied())
    }

    pub fn object_name(&self, o: ObjectId) -> &str {
        &self.objects[o.0]
    }

    pub fn object_by_name(&self, name: &str) -> Option<ObjectId> {
        self.objects.iter().position(|w| w == name).map(ObjectId)
    }

    pub fn token_name(&self, t: TokenId) -> String {
        match self.as_object(t) {
            Some(o) => self.objects[o.0].clone(),
            None => self.as_control(t).map(|c| c.name().to_string()).unwrap_or_else(|| format!("<invalid:{}>", t.0)),
        }
    }

    pub fn cooccurrence(&self) -> &Matrix {
        &self.cooccurrence
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> Matrix {
        Matrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn ids_dense_and_stable() {
        let v = Vocabulary::new(vec!["cat".into(), "dog".into()], p2()).unwrap();
        assert_eq!(v.object_token(ObjectId(0)), TokenId(0));
        assert_eq!(v.object_token(ObjectId(1)), TokenId(1));
        assert_eq!(v.control_token(Control::Bos), TokenId(2));
        assert_eq!(v.control_token(Control::Confuse), TokenId(8));
        assert_eq!(v.len(), 9);
        assert_eq!(v.as_object(TokenId(1)), Some(ObjectId(1)));
        assert_eq!(v.as_control(TokenId(3)), Some(Control::Eos));
        assert_eq!(v.as_control(TokenId(1)), None);
    }

    #[test]
    fn rejects_bad_cooccurrence() {
        let bad_diag = Matrix::from_rows(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!(Vocabulary::new(vec!["a".into(), "b".into()], bad_diag).is_err());
        let bad_sum = Matrix::from_rows(vec![vec![0.0, 0.8], vec![1.0, 0.0]]).unwrap();
        assert!(Vocabulary::new(vec!["a".into(), "b".into()], bad_sum).is_err());
        assert!(Vocabulary::new(vec!["a".into(), "a".into()], p2()).is_err());
    }
}
