/// A learnable array and its accumulated gradient.
///
/// Gradients only ever grow by accumulation; they are cleared by an
/// explicit [`Param::zero_grad`] (the optimizer does this after each step).
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Param {
            shape: shape.to_vec(),
            value: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn from_values(shape: &[usize], value: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), value.len());
        let grad = vec![0.0; value.len()];
        Param {
            shape: shape.to_vec(),
            value,
            grad,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}
