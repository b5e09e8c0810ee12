use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::Rng;

/// Scalar type usable by the network: `f32` for training, `f64` for gradient checks.
pub trait Scalar:
    Float + FromPrimitive + LinalgScalar + ScalarOperand + std::fmt::Debug + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + LinalgScalar
        + ScalarOperand
        + std::fmt::Debug
        + Send
        + Sync
        + 'static
{
}

/// Hidden widths of the Q-network.
pub const HIDDEN: [usize; 2] = [128, 128];

/// Fully connected layer computing `x W + b`; `w` has shape `(inputs, outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.ncols()
    }

    fn forward(&self, x: &ArrayView2<F>) -> Array2<F> {
        x.dot(&self.w) + &self.b
    }
}

/// Multi-layer perceptron with ReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<F> {
    pub layers: Vec<Dense<F>>,
}

/// Gradients with the same layout as the network.
pub type Gradients<F> = QNetwork<F>;

impl<F: Scalar> QNetwork<F> {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialisation for weights and biases.
    pub fn random(sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            let mut draw = || F::from_f64(rng.random_range(-bound..bound)).expect("representable");
            layer.w.mapv_inplace(|_| draw());
            layer.b.mapv_inplace(|_| draw());
        }
        net
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters in layer order: weights row-major, then biases.
    pub fn params(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter().copied());
            out.extend(l.b.iter().copied());
        }
        out
    }

    pub fn set_params(&mut self, params: &[F]) {
        assert_eq!(params.len(), self.param_count(), "parameter count mismatch");
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut()
                .for_each(|v| *v = it.next().expect("counted"));
            l.b.iter_mut()
                .for_each(|v| *v = it.next().expect("counted"));
        }
    }

    pub fn cast<G: Scalar>(&self) -> QNetwork<G> {
        let conv = |v: &F| G::from_f64(v.to_f64().expect("finite")).expect("representable");
        QNetwork {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    w: l.w.map(conv),
                    b: l.b.map(conv),
                })
                .collect(),
        }
    }

    /// Batch forward pass: `(batch, inputs)` to `(batch, outputs)`.
    pub fn forward(&self, x: ArrayView2<F>) -> Array2<F> {
        let mut h = self.layers[0].forward(&x);
        for l in &self.layers[1..] {
            h.mapv_inplace(relu);
            h = l.forward(&h.view());
        }
        h
    }

    pub fn forward_one(&self, x: ArrayView1<F>) -> Array1<F> {
        let x2 = x.insert_axis(Axis(0));
        self.forward(x2).row(0).to_owned()
    }

    /// Weighted squared TD loss `mean_i w_i (Q(x_i, a_i) - y_i)^2` and its gradient.
    ///
    /// Also returns the predicted `Q(x_i, a_i)`.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<F>,
        actions: &[usize],
        targets: &[F],
        weights: &[F],
    ) -> (F, Gradients<F>, Vec<F>) {
        let n = x.nrows();
        // forward, keeping pre-activations
        let mut acts: Vec<Array2<F>> = vec![x.to_owned()];
        let mut pre: Vec<Array2<F>> = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.iter().enumerate() {
            let z = l.forward(&acts[k].view());
            pre.push(z.clone());
            if k + 1 < self.layers.len() {
                acts.push(z.mapv(relu));
            }
        }
        let out = pre.last().expect("non-empty network");
        let nf = F::from_usize(n).expect("batch size");
        let two = F::from_f64(2.0).expect("two");
        let mut loss = F::zero();
        let mut delta = Array2::<F>::zeros(out.raw_dim());
        let mut q_taken = Vec::with_capacity(n);
        for i in 0..n {
            let q = out[[i, actions[i]]];
            let e = q - targets[i];
            q_taken.push(q);
            loss = loss + weights[i] * e * e;
            delta[[i, actions[i]]] = two * weights[i] * e / nf;
        }
        loss = loss / nf;

        let mut grads = Self::zeros(&self.sizes());
        for k in (0..self.layers.len()).rev() {
            grads.layers[k].w = acts[k].t().dot(&delta);
            grads.layers[k].b = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].w.t());
                back.zip_mut_with(&pre[k - 1], |d, &z| {
                    if z <= F::zero() {
                        *d = F::zero();
                    }
                });
                delta = back;
            }
        }
        (loss, grads, q_taken)
    }
}

fn relu<F: Float>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        F::zero()
    }
}

/// Adam optimiser over a network's parameters.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    m: QNetwork<F>,
    v: QNetwork<F>,
    t: i32,
}

impl<F: Scalar> Adam<F> {
    pub fn new(net: &QNetwork<F>, lr: F) -> Self {
        let sizes = net.sizes();
        Self {
            lr,
            beta1: F::from_f64(0.9).expect("const"),
            beta2: F::from_f64(0.999).expect("const"),
            eps: F::from_f64(1e-8).expect("const"),
            m: QNetwork::zeros(&sizes),
            v: QNetwork::zeros(&sizes),
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn update(&mut self, net: &mut QNetwork<F>, grads: &Gradients<F>) {
        self.t += 1;
        let one = F::one();
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let step = |p: &mut F, g: F, m: &mut F, v: &mut F| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        };
        for k in 0..net.layers.len() {
            let (layer, g) = (&mut net.layers[k], &grads.layers[k]);
            let (m, v) = (&mut self.m.layers[k], &mut self.v.layers[k]);
            ndarray::Zip::from(&mut layer.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| step(p, g, m, v));
            ndarray::Zip::from(&mut layer.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| step(p, g, m, v));
        }
    }
}
