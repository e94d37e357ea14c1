use super::float::Float;

/// Shaped value buffer with an optional gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub values: Vec<T>,
    pub grad: Option<Vec<T>>,
}

impl<T: Float> Tensor<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "shape/value length mismatch"
        );
        Self {
            shape,
            values,
            grad: None,
        }
    }

    pub fn with_grad(shape: Vec<usize>, values: Vec<T>, grad: Vec<T>) -> Self {
        assert_eq!(values.len(), grad.len(), "value/gradient length mismatch");
        Self {
            grad: Some(grad),
            ..Self::new(shape, values)
        }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .chain(self.grad.iter().flatten())
            .all(|v| v.is_finite())
    }
}
