use crate::space::Activation;
use crate::tensor::Real;

#[inline]
pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn apply<T: Real>(a: Activation, z: T) -> T {
    match a {
        Activation::Relu => z.max(T::zero()),
        Activation::Tanh => z.tanh(),
        Activation::Sigmoid => sigmoid(z),
        Activation::Linear => z,
    }
}

/// Derivative expressed through the activation's output `y`.
#[inline]
pub fn grad_from_output<T: Real>(a: Activation, y: T) -> T {
    match a {
        Activation::Relu => {
            if y > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        Activation::Tanh => T::one() - y * y,
        Activation::Sigmoid => y * (T::one() - y),
        Activation::Linear => T::one(),
    }
}
