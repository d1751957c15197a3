//! Parameter creation with seeded gaussian init.

use brickforge_autodiff::{Graph, Parameter, Real, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct ParamBuilder<'g, T: Real> {
    graph: &'g Graph<T>,
    rng: ChaCha8Rng,
    std: f64,
    pub params: Vec<Parameter<T>>,
}

impl<'g, T: Real> ParamBuilder<'g, T> {
    pub fn new(graph: &'g Graph<T>, rng: ChaCha8Rng) -> Self {
        ParamBuilder { graph, rng, std: 0.02, params: Vec::new() }
    }

    fn register(&mut self, name: &str, t: Tensor<T>) -> Tensor<T> {
        self.params.push(Parameter { name: name.to_string(), tensor: t.clone() });
        t
    }

    /// Gaussian(0, 0.02) weight.
    pub fn normal(&mut self, name: &str, shape: Vec<usize>) -> Tensor<T> {
        let n: usize = shape.iter().product();
        let data: Vec<T> = (0..n).map(|_| T::from_f64(self.std * self.gaussian())).collect();
        let t = self.graph.leaf(shape, data);
        self.register(name, t)
    }

    pub fn zeros(&mut self, name: &str, shape: Vec<usize>) -> Tensor<T> {
        let n: usize = shape.iter().product();
        let t = self.graph.leaf(shape, vec![T::ZERO; n]);
        self.register(name, t)
    }

    pub fn ones(&mut self, name: &str, shape: Vec<usize>) -> Tensor<T> {
        let n: usize = shape.iter().product();
        let t = self.graph.leaf(shape, vec![T::ONE; n]);
        self.register(name, t)
    }

    // Box-Muller; two uniforms per draw keeps the stream simple and seeded.
    fn gaussian(&mut self) -> f64 {
        let u1: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = self.rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
