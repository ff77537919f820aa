use ndarray::{Array1, Array2};

/// Visitor over the named parameter arrays of a model.
///
/// Visiting order is the manifest order used by checkpoints, the
/// optimizer and the finite-difference checker. A model's gradient
/// container is a zeroed clone of the model itself.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64]));
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub(crate) fn visit2(
    prefix: &str,
    name: &str,
    a: &Array2<f64>,
    f: &mut dyn FnMut(&str, &[usize], &[f64]),
) {
    let data = a.as_slice().expect("parameters are kept in standard layout");
    f(&join(prefix, name), a.shape(), data);
}

pub(crate) fn visit2_mut(
    prefix: &str,
    name: &str,
    a: &mut Array2<f64>,
    f: &mut dyn FnMut(&str, &[usize], &mut [f64]),
) {
    let shape = a.shape().to_vec();
    let data = a
        .as_slice_mut()
        .expect("parameters are kept in standard layout");
    f(&join(prefix, name), &shape, data);
}

pub(crate) fn visit1(
    prefix: &str,
    name: &str,
    a: &Array1<f64>,
    f: &mut dyn FnMut(&str, &[usize], &[f64]),
) {
    let data = a.as_slice().expect("parameters are kept in standard layout");
    f(&join(prefix, name), a.shape(), data);
}

pub(crate) fn visit1_mut(
    prefix: &str,
    name: &str,
    a: &mut Array1<f64>,
    f: &mut dyn FnMut(&str, &[usize], &mut [f64]),
) {
    let shape = a.shape().to_vec();
    let data = a
        .as_slice_mut()
        .expect("parameters are kept in standard layout");
    f(&join(prefix, name), &shape, data);
}

/// Name and shape of every parameter array, in visiting order.
pub type Manifest = Vec<(String, Vec<usize>)>;

/// Flat views over any [`Parameters`] implementor.
pub trait ParametersExt: Parameters {
    fn manifest(&self) -> Manifest {
        let mut out = Vec::new();
        self.visit("", &mut |name, shape, _| out.push((name.to_string(), shape.to_vec())));
        out
    }

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, d| n += d.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit("", &mut |_, _, d| out.extend_from_slice(d));
        out
    }

    /// Overwrites all parameters from a flat vector in manifest order.
    fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "flat parameter length");
        let mut offset = 0;
        self.visit_mut("", &mut |_, _, d| {
            d.copy_from_slice(&values[offset..offset + d.len()]);
            offset += d.len();
        });
    }

    fn fill(&mut self, value: f64) {
        self.visit_mut("", &mut |_, _, d| d.iter_mut().for_each(|x| *x = value));
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    /// Adds `scale * other` elementwise; both sides must share a manifest.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let src = other.to_flat();
        let mut offset = 0;
        self.visit_mut("", &mut |_, _, d| {
            let n = d.len();
            for (x, &s) in d.iter_mut().zip(&src[offset..offset + n]) {
                *x += scale * s;
            }
            offset += n;
        });
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, _, d| ok &= d.iter().all(|x| x.is_finite()));
        ok
    }
}

impl<T: Parameters + ?Sized> ParametersExt for T {}
