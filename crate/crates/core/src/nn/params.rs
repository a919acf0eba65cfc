use std::collections::HashMap;

use rand::Rng;

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// A learnable tensor with its gradient slot and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub first_moment: Tensor,
    pub second_moment: Tensor,
}

impl Param {
    fn new(name: String, value: Tensor) -> Self {
        let (r, c) = value.shape();
        Self {
            name,
            value,
            grad: Tensor::zeros(r, c),
            first_moment: Tensor::zeros(r, c),
            second_moment: Tensor::zeros(r, c),
        }
    }
}

/// Named parameter collection. Names are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
    index: HashMap<String, ParamId>,
    step: u64,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Panics on a duplicate name.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.params.push(Param::new(name, value));
        id
    }

    /// Registers a `fan_in x fan_out` matrix drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        self.add(name, Tensor::from_vec(rows, cols, data))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.id(name).map(|id| &mut self.params[id.0])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Adds `grads[i]` into the gradient slot of parameter `i`.
    pub fn accumulate(&mut self, grads: &[Tensor]) {
        assert_eq!(grads.len(), self.params.len(), "gradient count mismatch");
        for (p, g) in self.params.iter_mut().zip(grads) {
            p.grad.add_assign(g);
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill_zero();
        }
    }

    /// Copies values only (moments and gradients untouched).
    pub fn load_values(&mut self, other: &ParamSet) {
        for (p, q) in self.params.iter_mut().zip(&other.params) {
            debug_assert_eq!(p.name, q.name);
            p.value = q.value.clone();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update from the accumulated gradients, which
    /// are cleared afterwards.
    pub fn step(&self, params: &mut ParamSet) {
        params.step += 1;
        let t = params.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for p in &mut params.params {
            for i in 0..p.value.data.len() {
                let g = p.grad.data[i];
                let m = self.beta1 * p.first_moment.data[i] + (1.0 - self.beta1) * g;
                let v = self.beta2 * p.second_moment.data[i] + (1.0 - self.beta2) * g * g;
                p.first_moment.data[i] = m;
                p.second_moment.data[i] = v;
                p.value.data[i] -= self.lr * (m / c1) / ((v / c2).sqrt() + self.eps);
                p.grad.data[i] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64, grad: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        let id = ps.add("w", Tensor::row(&[value]));
        ps.get_mut(id).grad = Tensor::row(&[grad]);
        ps
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut ps = single(1.0, 3.7);
        Adam::new(0.01).step(&mut ps);
        let w = ps.by_name("w").unwrap();
        // m_hat / sqrt(v_hat) = g / |g| = 1 up to eps.
        assert!((w.value.data[0] - (1.0 - 0.01)).abs() < 1e-9);
        assert_eq!(w.grad.data[0], 0.0);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut ps = single(2.5, 0.0);
        Adam::new(0.1).step(&mut ps);
        assert_eq!(ps.by_name("w").unwrap().value.data[0], 2.5);
    }

    #[test]
    fn zero_lr_updates_moments_only() {
        let mut ps = single(2.5, 1.0);
        Adam::new(0.0).step(&mut ps);
        let w = ps.by_name("w").unwrap();
        assert_eq!(w.value.data[0], 2.5);
        assert!((w.first_moment.data[0] - 0.1).abs() < 1e-15);
        assert!((w.second_moment.data[0] - 0.001).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter")]
    fn names_are_unique() {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::row(&[1.0]));
        ps.add("w", Tensor::row(&[1.0]));
    }
}
